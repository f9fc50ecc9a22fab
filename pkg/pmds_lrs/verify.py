from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import partial
from itertools import combinations, product
from logging import Logger, getLogger
from math import ceil, comb
from typing import Any, Iterable, Iterator, Sequence

import anyio
import numpy as np

from .codec import generator
from .linalg import (
    Matrix,
    batch_rank,
    hstack,
    null_space,
    project_cols,
    rank,
    solve,
)
from .mrcons import MrCode, MrParams, predicted_distance
from .pool import VerificationPool
from .sumrank import DEFAULT_MAX_CODEWORDS, InstanceTooLarge, build_D, iter_codewords

DEFAULT_MAX_PATTERNS = 10**7
DEFAULT_MAX_SUBSET_CHECKS = 10**6


class ReductionPreconditionError(ValueError):
    pass


class BoundError(ValueError):
    pass


class Method(str, Enum):
    DIRECT = "direct"
    REDUCTION = "reduction"
    DEFINITION = "definition"


@dataclass(frozen=True)
class ErasurePattern:
    """A set of erased coordinates, with the number erased in each repair set."""

    erased: tuple[int, ...]
    per_set: tuple[int, ...]

    def __post_init__(self) -> None:
        erased = tuple(sorted({int(i) for i in self.erased}))
        object.__setattr__(self, "erased", erased)
        if sum(self.per_set) != len(erased):
            raise ValueError(f"per_set counts {list(self.per_set)} do not sum to {len(erased)}")

    @classmethod
    def of(cls, erased: Iterable[int], params: MrParams) -> ErasurePattern:
        erased = tuple(sorted({int(i) for i in erased}))
        if erased and (erased[0] < 0 or erased[-1] >= params.n):
            raise ValueError(f"Erasures {list(erased)} are outside [0, {params.n})")
        per_set = [0] * params.m
        for i in erased:
            per_set[i // params.a] += 1
        return cls(erased, tuple(per_set))

    def __len__(self) -> int:
        return len(self.erased)

    def to_json(self) -> dict[str, Any]:
        return {"erased": list(self.erased)}


@dataclass(frozen=True)
class VerificationReport:
    params: MrParams
    method: Method
    total_patterns: int
    failures: tuple[ErasurePattern, ...] = ()
    min_distance: int | None = None
    elapsed: float = 0.0

    @property
    def is_mr(self) -> bool:
        return not self.failures

    @property
    def first_failure(self) -> ErasurePattern | None:
        return self.failures[0] if self.failures else None

    def to_json(self, timing: bool = False) -> dict[str, Any]:
        """
        Arguments:
            timing: Whether to include `elapsed_ms`, which varies between runs.
        """
        data: dict[str, Any] = {
            "params": self.params.to_json(),
            "method": self.method.value,
            "total_patterns": self.total_patterns,
            "failures": [f.to_json() for f in self.failures],
            "min_distance": self.min_distance,
        }
        if timing:
            data["elapsed_ms"] = round(self.elapsed * 1000, 3)
        return data


def count_maximal_patterns(params: MrParams) -> int:
    """The number of maximal erasure patterns, without enumerating them."""
    w, a = params.delta - 1, params.a
    size = params.m * w + params.h
    ways = [1] + [0] * size
    for _ in range(params.m):
        nxt = [0] * (size + 1)
        for total, count in enumerate(ways):
            if count:
                for c in range(w, min(a, size - total) + 1):
                    nxt[total + c] += count * comb(a, c)
        ways = nxt
    return ways[size]


def iter_maximal_erasures(params: MrParams) -> Iterator[tuple[int, ...]]:
    """Lexicographic stream of the sets E with |E| = m(δ−1)+h meeting every S_i in ≥ δ−1 places."""
    n, a, m, w = params.n, params.a, params.m, params.delta - 1
    counts = [0] * m
    prefix: list[int] = []

    def extend(start: int, remaining: int) -> Iterator[tuple[int, ...]]:
        if remaining == 0:
            if all(c >= w for c in counts):
                yield tuple(prefix)
            return
        for j in range(start, n - remaining + 1):
            s = j // a
            # sets before s can no longer grow
            if any(counts[t] < w for t in range(s)):
                break
            counts[s] += 1
            need = sum(max(0, w - counts[t]) for t in range(s, m))
            if need <= remaining - 1:
                prefix.append(j)
                yield from extend(j + 1, remaining - 1)
                prefix.pop()
            counts[s] -= 1

    yield from extend(0, params.parity_rows)


def enumerate_maximal_patterns(params: MrParams) -> Iterator[ErasurePattern]:
    for erased in iter_maximal_erasures(params):
        yield ErasurePattern.of(erased, params)


def _erased(E: ErasurePattern | Iterable[int]) -> tuple[int, ...]:
    if isinstance(E, ErasurePattern):
        return E.erased
    return tuple(sorted({int(i) for i in E}))


def is_recoverable_direct(code: MrCode, E: ErasurePattern | Iterable[int]) -> bool:
    """Whether H restricted to the erased columns has full column rank."""
    erased = _erased(E)
    if not erased:
        return True
    if len(erased) > code.H.rows:
        return False
    return rank(project_cols(code.H, erased)) == len(erased)


def direct_failures(code: MrCode, patterns: Sequence[tuple[int, ...]]) -> list[tuple[int, ...]]:
    """The patterns, all of one size, for which H|_E is rank deficient (batched)."""
    if not patterns:
        return []
    columns = np.asarray(patterns, dtype=np.int64)
    stack = code.tower.GF(np.ascontiguousarray(code.H.codes[:, columns].transpose(1, 0, 2)))
    ranks = batch_rank(stack)
    return [patterns[i] for i in np.flatnonzero(ranks < columns.shape[1])]


def _split_local(local: Matrix, positions: Sequence[int], rng: np.random.Generator | None) -> tuple[list[int], list[int]]:
    # E*: a maximal independent set of local columns, lowest positions first
    order = list(positions) if rng is None else [int(x) for x in rng.permutation(positions)]
    star: list[int] = []
    for j in order:
        if rank(project_cols(local, star + [j])) > len(star):
            star.append(j)
        if len(star) == local.rows:
            break
    bar = [j for j in positions if j not in star]
    return sorted(star), bar


def is_recoverable_reduction(
    code: MrCode, E: ErasurePattern | Iterable[int], rng: np.random.Generator | None = None
) -> bool:
    """Decide recoverability by eliminating the local parities first.

    For each affected repair set i, the erasures split into E*_i, on which the local
    rows are invertible, and the rest Ē_i. Solving P1|_{E*}·A = P1|_{Ē} and subtracting
    leaves W_i = P2|_{Ē} − P2|_{E*}·A over GF(q), whose image β* = Γ·W_i feeds the
    block D(γ^i, β*, h, |Ē_i|). The pattern is recoverable iff every W_i has full column
    rank and the blocks together have full column rank.

    Codes whose H is not the construction's matrix for their `alphas` use their global rows
    directly in place of D(γ^i, β*, h, |Ē_i|).

    Arguments:
        code: The code.
        E: The erased coordinates; each affected repair set must hold at least δ−1.
        rng: Pick E* in random order instead of lowest positions first.

    Raises:
        ReductionPreconditionError: If an affected repair set has fewer than δ−1 erasures.
    """
    erased = _erased(E)
    params, tower = code.params, code.tower
    a, w = params.a, params.delta - 1
    if erased and (erased[0] < 0 or erased[-1] >= params.n):
        raise ValueError(f"Erasures {list(erased)} are outside [0, {params.n})")
    structured = code.is_constructed
    P1, P2 = (code.P1, code.P2) if structured else (None, None)
    blocks = []
    total_bar = 0
    for i in range(params.m):
        positions = [j - i * a for j in erased if j // a == i]
        if not positions:
            continue
        if len(positions) < w:
            raise ReductionPreconditionError(
                f"Repair set {i} has {len(positions)} erasures, fewer than delta-1={w}"
            )
        local = P1 if structured else code.local_rows(i)
        star, bar = _split_local(local, positions, rng)
        if not bar:
            continue
        total_bar += len(bar)
        A = solve(project_cols(local, star), project_cols(local, bar))
        if structured:
            W = project_cols(P2, bar) - project_cols(P2, star) @ A
            if rank(W) < len(bar):
                return False
            beta_star = [int(x) for x in np.atleast_1d(tower.combine(W.codes.T))]
            blocks.append(build_D(tower, tower.power(tower.gamma, i), beta_star, params.h, len(bar)))
        else:
            G = code.global_rows(i)
            blocks.append(project_cols(G, bar) - project_cols(G, star) @ A)
    if not blocks:
        return True
    if total_bar > params.h:
        return False
    return rank(hstack(blocks)) == total_bar


def reduction_failures(
    code: MrCode, patterns: Sequence[tuple[int, ...]], rng: np.random.Generator | None = None
) -> list[tuple[int, ...]]:
    return [E for E in patterns if not is_recoverable_reduction(code, E, rng)]


async def averify_mr(
    code: MrCode,
    method: Method | str = Method.DIRECT,
    jobs: int = 1,
    max_patterns: int = DEFAULT_MAX_PATTERNS,
    with_distance: bool = False,
    max_codewords: int = DEFAULT_MAX_CODEWORDS,
    log: Logger | None = None,
) -> VerificationReport:
    """Check every maximal erasure pattern of a code.

    Full column rank on the maximal patterns implies it on all their subsets, so these
    patterns decide the MR property.

    Arguments:
        code: The code.
        method: `direct`, `reduction` or `definition`.
        jobs: The number of worker threads.
        max_patterns: Refuse codes with more maximal patterns than this.
        with_distance: Also compute the minimum distance by brute force.
        max_codewords: The enumeration cap for the distance.
        log: An optional logger.

    Returns:
        The report; the failures are sorted lexicographically.
    """
    log = log or getLogger(__name__)
    method = Method(method)
    if method is Method.DEFINITION:
        report = verify_mr_definition(code, log=log)
    else:
        total = count_maximal_patterns(code.params)
        if total > max_patterns:
            raise InstanceTooLarge("Maximal erasure patterns", total, max_patterns)
        check = partial(direct_failures if method is Method.DIRECT else reduction_failures, code)
        start = time.perf_counter()
        async with VerificationPool(check, jobs=jobs, log=log) as pool:
            count, failures = await pool.run(iter_maximal_erasures(code.params))
        report = VerificationReport(
            code.params,
            method,
            count,
            tuple(ErasurePattern.of(E, code.params) for E in failures),
            elapsed=time.perf_counter() - start,
        )
    if with_distance:
        d = min_distance_bruteforce(code, max_codewords)
        report = VerificationReport(
            report.params, report.method, report.total_patterns, report.failures, d, report.elapsed
        )
    log.info(
        "%s verification: %d patterns, %d failures",
        method.value,
        report.total_patterns,
        len(report.failures),
    )
    return report


def verify_mr(code: MrCode, method: Method | str = Method.DIRECT, **kwargs: Any) -> VerificationReport:
    """Blocking wrapper around `averify_mr`."""
    return anyio.run(partial(averify_mr, code, method, **kwargs))


def verify_mr_definition(
    code: MrCode, max_subset_checks: int = DEFAULT_MAX_SUBSET_CHECKS, log: Logger | None = None
) -> VerificationReport:
    """Check the MR definition literally.

    For every choice of R_i ⊆ S_i leaving out δ−1 positions per set, every k-subset T of
    ∪R_i must carry a rank-k restriction of the generator. A failing T is reported as the
    pattern [n]∖T.
    """
    log = log or getLogger(__name__)
    params = code.params
    start = time.perf_counter()
    G = generator(code)
    selections = comb(params.a, params.delta - 1) ** params.m * comb(params.m * params.r, params.k)
    if selections > max_subset_checks:
        raise InstanceTooLarge("Definition subset checks", selections, max_subset_checks)
    subsets: set[tuple[int, ...]] = set()
    kept = [combinations(s, params.r) for s in code.repair_sets]
    for choice in product(*(list(c) for c in kept)):
        union = sorted(j for part in choice for j in part)
        subsets.update(combinations(union, params.k))
    ordered = sorted(subsets)
    if G.rows == 0:
        failing = ordered
    else:
        stack = code.tower.GF(np.ascontiguousarray(G.codes[:, np.asarray(ordered, dtype=np.int64)].transpose(1, 0, 2)))
        ranks = batch_rank(stack)
        failing = [ordered[i] for i in np.flatnonzero(ranks < G.rows)]
    everything = set(range(params.n))
    failures = sorted((ErasurePattern.of(everything - set(T), params) for T in failing), key=lambda f: f.erased)
    log.debug("Definition check: %d subsets, %d failures", len(ordered), len(failures))
    return VerificationReport(
        params,
        Method.DEFINITION,
        len(ordered),
        tuple(failures),
        elapsed=time.perf_counter() - start,
    )


def min_distance_witness(
    code: MrCode, max_codewords: int = DEFAULT_MAX_CODEWORDS
) -> tuple[int, tuple[int, ...]]:
    """Brute-force minimum Hamming weight and the first codeword attaining it."""
    G = generator(code)
    best: tuple[int, tuple[int, ...]] | None = None
    for _, codewords in iter_codewords(code.tower, G, max_codewords):
        weights = np.count_nonzero(codewords, axis=1)
        i = int(np.argmin(weights))
        if best is None or weights[i] < best[0]:
            best = (int(weights[i]), tuple(int(x) for x in codewords[i]))
    if best is None:
        raise ValueError("The code has no nonzero codewords")
    return best


def min_distance_bruteforce(code: MrCode, max_codewords: int = DEFAULT_MAX_CODEWORDS) -> int:
    return min_distance_witness(code, max_codewords)[0]


def local_min_distance(code: MrCode, i: int) -> int:
    """The minimum distance of the code punctured to repair set i.

    It is the least number of dependent columns in a parity-check matrix of the
    punctured code.
    """
    punctured = project_cols(generator(code), code.repair_sets[i])
    _, pivots = punctured.rref_with_pivots()
    if not pivots:
        raise ValueError(f"The code vanishes on repair set {i}")
    parity = null_space(punctured).transpose()
    for size in range(1, punctured.cols + 1):
        for columns in combinations(range(punctured.cols), size):
            if rank(project_cols(parity, columns)) < size:
                return size
    return punctured.cols + 1


def singleton_lrc_bound(n: int, k: int, r: int, delta: int) -> int:
    """The bound d ≤ n − k + 1 − (⌈k/r⌉ − 1)(δ − 1) for codes with (r, δ)-locality."""
    if k < 1 or r < 1:
        raise BoundError(f"Bound needs k >= 1 and r >= 1, got k={k}, r={r}")
    return n - k + 1 - (ceil(k / r) - 1) * (delta - 1)


@dataclass(frozen=True)
class FieldSizeBound:
    """An order-level lower bound on the field size of an MR code; constants are unknown."""

    epsilon: Fraction
    case_id: int
    bound_expression: str
    value: float
    general_value: float = field(default=0.0)

    def to_json(self) -> dict[str, Any]:
        return {
            "epsilon": str(self.epsilon),
            "case_id": self.case_id,
            "bound_expression": self.bound_expression,
            "value": self.value,
            "general_value": self.general_value,
        }


def field_size_lower_bound(n: int, r: int, delta: int, h: int, m: int) -> FieldSizeBound:
    """Evaluate q = Ω(n·r^ε), ε = min{δ−1, h − 2⌈h/m⌉}/⌈h/m⌉, and its simplified case.

    Case 1 is m ≥ h; cases 2 and 3 need m ≤ h with m | h and split on whether
    δ − 1 ≤ h − 2h/m. Case 0 means only the general form applies.

    Raises:
        BoundError: If h < 2 or m < 2.
    """
    if h < 2:
        raise BoundError(f"Lower bound needs h >= 2, got h={h}; for h=1 the order-optimal field size is r+delta-1")
    if m < 2:
        raise BoundError(f"Lower bound needs m >= 2, got m={m}")
    c = -(-h // m)
    epsilon = Fraction(min(delta - 1, h - 2 * c), c)
    general = float(n) * float(r) ** float(epsilon)
    if m >= h:
        exponent = min(delta - 1, h - 2)
        return FieldSizeBound(epsilon, 1, f"n*r^{exponent}", float(n) * float(r) ** exponent, general)
    if h % m == 0:
        if delta - 1 <= h - 2 * h // m:
            power = 1 + Fraction(m * (delta - 1), h)
            return FieldSizeBound(epsilon, 2, f"n^({power})", float(n) ** float(power), general)
        return FieldSizeBound(epsilon, 3, f"n^{m - 1}", float(n) ** (m - 1), general)
    return FieldSizeBound(epsilon, 0, f"n*r^({epsilon})", general, general)


def mutate_global_entry(code: MrCode, rng: np.random.Generator) -> MrCode:
    """Replace one random global-row entry of H by a different random element."""
    row = int(rng.choice(list(code.global_row_indices())))
    col = int(rng.integers(0, code.n))
    current = code.H.entry(row, col)
    value = current
    while value == current:
        value = int(code.tower.random_elements(rng, ()))
    return code.with_entry(row, col, value)


async def amutation_trial(
    code: MrCode, rng: np.random.Generator, method: Method | str = Method.DIRECT, **kwargs: Any
) -> tuple[MrCode, VerificationReport]:
    mutated = mutate_global_entry(code, rng)
    return mutated, await averify_mr(mutated, method, **kwargs)


def mutation_trial(
    code: MrCode, rng: np.random.Generator, method: Method | str = Method.DIRECT, **kwargs: Any
) -> tuple[MrCode, VerificationReport]:
    """Mutate one global-row entry of H and re-verify."""
    mutated = mutate_global_entry(code, rng)
    return mutated, verify_mr(mutated, method, **kwargs)


def sweep_instances(
    qs: Sequence[int] = (4, 5, 7, 8, 9),
    deltas: Sequence[int] = (2, 3),
    hs: Sequence[int] = (1, 2, 3),
    r_max: int = 4,
    m_max: int = 4,
    max_patterns: int = 10**6,
) -> Iterator[MrParams]:
    """Every valid parameter tuple within the caps, in (q, δ, h, r, m) order."""
    for q in qs:
        for delta in deltas:
            for h in hs:
                for r in range(1, r_max + 1):
                    for m in range(1, m_max + 1):
                        if q < max(r + delta, m + 1) or m * r - h < 1:
                            continue
                        params = MrParams.from_q(q, r, delta, h, m)
                        if count_maximal_patterns(params) <= max_patterns:
                            yield params


def distance_summary(code: MrCode, report: VerificationReport) -> dict[str, Any]:
    """Side-by-side verdict for a constructed code and its predicted parameters."""
    params = code.params
    return {
        "params": params.to_json(),
        "n": params.n,
        "k": params.k,
        "mr": report.is_mr,
        "total_patterns": report.total_patterns,
        "min_distance": report.min_distance,
        "predicted_distance": predicted_distance(params),
        "singleton_lrc_bound": singleton_lrc_bound(params.n, params.k, params.r, params.delta),
    }
