from __future__ import annotations

from dataclasses import dataclass
from logging import Logger, getLogger
from typing import Any, Iterator, Sequence

import numpy as np

from .gf import FieldTower
from .linalg import FieldTag, Matrix, MatrixError, batch_rank, block_diag, hstack, rank, rank_q

DEFAULT_MAX_CODEWORDS = 10**6
CHUNK_SIZE = 2**16


class LrsParameterError(ValueError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InstanceTooLarge(Exception):
    def __init__(self, what: str, count: int, limit: int):
        self.count = count
        self.limit = limit
        super().__init__(f"{what}: {count} exceeds the limit of {limit}")


@dataclass(frozen=True)
class LengthPartition:
    """A partition (L_1, …, L_g) of N = Σ L_i coordinates into consecutive blocks."""

    parts: tuple[int, ...]

    def __post_init__(self) -> None:
        parts = tuple(int(x) for x in self.parts)
        object.__setattr__(self, "parts", parts)
        if not parts:
            raise LrsParameterError(["partition must have at least one part"])
        if any(x < 1 for x in parts):
            raise LrsParameterError([f"partition parts must be positive, got {list(parts)}"])

    @classmethod
    def ones(cls, g: int) -> LengthPartition:
        return cls((1,) * g)

    @property
    def N(self) -> int:
        return sum(self.parts)

    @property
    def g(self) -> int:
        return len(self.parts)

    def segments(self) -> list[slice]:
        bounds = np.cumsum((0,) + self.parts)
        return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


@dataclass(frozen=True)
class LrsCode:
    """A narrow-sense linearized Reed-Solomon code and its generator matrix."""

    tower: FieldTower
    k: int
    partition: LengthPartition
    B: tuple[int, ...]
    G: Matrix

    @property
    def N(self) -> int:
        return self.partition.N

    @property
    def L(self) -> int:
        return len(self.B)


def build_D(tower: FieldTower, alpha: int, B: Sequence[int], k: int, ell: int) -> Matrix:
    """The k×ell matrix with entry (i, j) = D^i_α(β_j), for 0 ≤ i < k.

    Arguments:
        tower: The field tower.
        alpha: The block multiplier α.
        B: The elements (β_1, …, β_{|B|}).
        k: The number of rows.
        ell: The number of leading elements of B to use.

    Returns:
        The matrix over GF(Q); its first row is B restricted to [ell].
    """
    if ell > len(B):
        raise LrsParameterError([f"ell={ell} exceeds |B|={len(B)}"])
    beta = np.asarray(B[:ell], dtype=np.int64)
    if k == 0 or ell == 0:
        return Matrix.zeros(tower, k, ell)
    rows = [np.atleast_1d(tower.d_op(np.full_like(beta, alpha), i, beta)) for i in range(k)]
    return Matrix(tower, np.vstack(rows))


def column_linearity_check(
    tower: FieldTower, alpha: int, B: Sequence[int], k: int, ell: int, A: Matrix
) -> bool:
    """Check D(α, B, k, ell)·A = D(α, B|_[ell]·A, k, A.cols) for A over GF(q)."""
    if A.rows != ell:
        raise MatrixError(f"A must have {ell} rows, got {A.rows}")
    if A.tag is not FieldTag.BASE_Q:
        raise MatrixError("A must be tagged base_q")
    lhs = build_D(tower, alpha, B, k, ell) @ A
    combined = Matrix(tower, [list(B[:ell])]) @ A
    rhs = build_D(tower, alpha, [int(x) for x in combined.codes[0]], k, A.cols)
    return lhs == rhs


def build_lrs_generator(
    tower: FieldTower, k: int, partition: LengthPartition, B: Sequence[int] | None = None
) -> LrsCode:
    """Build the generator (D(γ⁰, B, k, L_1), …, D(γ^{g-1}, B, k, L_g)).

    Arguments:
        tower: The field tower; M = h.
        k: The code dimension.
        partition: The length partition.
        B: Elements whose GF(q)-span has dimension |B| = L; defaults to the tower's Γ.

    Returns:
        The LRS code.

    Raises:
        LrsParameterError: Listing every violated constraint.
    """
    B = tuple(int(b) for b in (tower.gamma_basis if B is None else B))
    violations = []
    if partition.g > tower.q - 1:
        violations.append(f"g={partition.g} exceeds q-1={tower.q - 1}")
    if max(partition.parts) > len(B):
        violations.append(f"block length {max(partition.parts)} exceeds L=|B|={len(B)}")
    if len(B) > tower.h:
        violations.append(f"L={len(B)} exceeds M=h={tower.h}")
    elif rank_q(tower, B) != len(B):
        violations.append("B is not GF(q)-linearly independent")
    if not 1 <= k <= partition.N:
        violations.append(f"k={k} must lie in [1, N={partition.N}]")
    if violations:
        raise LrsParameterError(violations)
    blocks = [
        build_D(tower, tower.power(tower.gamma, i), B, k, ell) for i, ell in enumerate(partition.parts)
    ]
    G = hstack(blocks)
    if rank(G) != k:
        raise LrsParameterError(["generator is rank deficient"])  # pragma: no cover
    return LrsCode(tower, k, partition, B, G)


def hamming_special_case(tower: FieldTower, k: int, g: int) -> LrsCode:
    """The LRS code on the all-ones partition, a generalized Reed-Solomon code."""
    return build_lrs_generator(tower, k, LengthPartition.ones(g), B=(1,))


def rank_metric_special_case(tower: FieldTower, k: int, N: int, B: Sequence[int] | None = None) -> LrsCode:
    """The LRS code with a single block, a Gabidulin code."""
    return build_lrs_generator(tower, k, LengthPartition((N,)), B)


def sum_rank_weight(tower: FieldTower, c: Any, partition: LengthPartition) -> int:
    codes = np.asarray(c, dtype=np.int64).reshape(-1)
    if codes.size != partition.N:
        raise MatrixError(f"Vector length {codes.size} does not match N={partition.N}")
    return sum(rank_q(tower, codes[segment]) for segment in partition.segments())


def sum_rank_distance(tower: FieldTower, c1: Any, c2: Any, partition: LengthPartition) -> int:
    return sum_rank_weight(tower, tower.sub(np.asarray(c1), np.asarray(c2)), partition)


def batch_sum_rank_weights(tower: FieldTower, words: np.ndarray, partition: LengthPartition) -> np.ndarray:
    """Sum-rank weights of the rows of a `(batch, N)` array of codes."""
    coords = tower.coords(np.asarray(words, dtype=np.int64))
    weights = np.zeros(words.shape[0], dtype=np.int64)
    for segment in partition.segments():
        weights += batch_rank(tower.GF(np.ascontiguousarray(coords[:, segment, :].transpose(0, 2, 1))))
    return weights


def sum_rank_singleton_bound(tower: FieldTower, N: int, d: int) -> int:
    """The largest log_q |C| allowed for a code of sum-rank distance d: h·(N − d + 1)."""
    return tower.h * (N - d + 1)


def iter_codewords(
    tower: FieldTower,
    G: Matrix,
    max_codewords: int = DEFAULT_MAX_CODEWORDS,
    chunk_size: int = CHUNK_SIZE,
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Enumerate (messages, codewords) chunks over all nonzero messages.

    Messages run through the canonical order: the message (m_1, …, m_k) has index
    Σ m_j·Q^{k-j}, and index 0 is skipped.
    """
    k = G.rows
    total = tower.order**k
    if total > max_codewords:
        raise InstanceTooLarge(f"Codeword enumeration Q^k = {tower.order}^{k}", total, max_codewords)
    place = tower.order ** np.arange(k - 1, -1, -1, dtype=np.int64)
    generator = G.field_array
    for start in range(1, total, chunk_size):
        index = np.arange(start, min(start + chunk_size, total), dtype=np.int64)
        messages = (index[:, None] // place) % tower.order
        codewords = np.asarray(tower.GF(messages) @ generator, dtype=np.int64)
        yield messages, codewords


def msrd_min_distance_witness(
    code: LrsCode, max_codewords: int = DEFAULT_MAX_CODEWORDS, log: Logger | None = None
) -> tuple[int, tuple[int, ...]]:
    """Brute-force minimum sum-rank weight and the first codeword attaining it.

    Returns:
        The distance and the codeword of least message index with that weight.
    """
    log = log or getLogger(__name__)
    best: tuple[int, tuple[int, ...]] | None = None
    for _, codewords in iter_codewords(code.tower, code.G, max_codewords):
        weights = batch_sum_rank_weights(code.tower, codewords, code.partition)
        i = int(np.argmin(weights))
        if best is None or weights[i] < best[0]:
            best = (int(weights[i]), tuple(int(x) for x in codewords[i]))
            log.debug("Sum-rank weight %d found", best[0])
    assert best is not None
    return best


def msrd_min_distance(code: LrsCode, max_codewords: int = DEFAULT_MAX_CODEWORDS) -> int:
    return msrd_min_distance_witness(code, max_codewords)[0]


def is_msrd(code: LrsCode, max_codewords: int = DEFAULT_MAX_CODEWORDS) -> bool:
    return msrd_min_distance(code, max_codewords) == code.N - code.k + 1


def weighted_generator_ranks(code: LrsCode, Ws: Sequence[Matrix]) -> tuple[int, int]:
    """
    Returns:
        (rank(G·diag(W_1, …, W_g)), min(k, Σ rank W_i)).
    """
    if len(Ws) != code.partition.g:
        raise MatrixError(f"Expected {code.partition.g} W blocks, got {len(Ws)}")
    for ell, W in zip(code.partition.parts, Ws):
        if W.rows != ell:
            raise MatrixError(f"W block must have {ell} rows, got {W.rows}")
        if W.tag is not FieldTag.BASE_Q:
            raise MatrixError("W blocks must be tagged base_q")
    if sum(W.cols for W in Ws) == 0:
        return 0, 0
    product = code.G @ block_diag(list(Ws))
    return rank(product), min(code.k, sum(rank(W) for W in Ws))


def theorem1_rank_check(code: LrsCode, Ws: Sequence[Matrix]) -> bool:
    """Check rank(G·diag(W_1, …, W_g)) = min(k, Σ rank W_i) for W_i over GF(q)."""
    observed, expected = weighted_generator_ranks(code, Ws)
    return observed == expected
