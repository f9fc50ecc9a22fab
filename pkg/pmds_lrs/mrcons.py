from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from logging import Logger, getLogger
from pathlib import Path
from typing import Any, Sequence

import galois
import numpy as np

from .gf import FieldError, FieldTower
from .linalg import FieldTag, Matrix, MatrixError, block_diag, hstack, project_cols, project_rows, rank, vstack
from .sumrank import build_D


class ParameterError(ValueError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class CodeFormatError(ValueError):
    pass


@dataclass(frozen=True)
class MrParams:
    """Parameters (p, e, r, δ, h, m) of an MR code with m repair sets of size r + δ − 1.

    Construction requires q = p^e ≥ max{r + δ, m + 1} and k = m·r − h ≥ 1; each violated
    condition is reported by name in `ParameterError.violations`.
    """

    p: int
    e: int
    r: int
    delta: int
    h: int
    m: int

    def __post_init__(self) -> None:
        for name in ("p", "e", "r", "delta", "h", "m"):
            object.__setattr__(self, name, int(getattr(self, name)))
        violations = self.violations()
        if violations:
            raise ParameterError(violations)

    def violations(self) -> list[str]:
        found = []
        if self.p < 2 or not galois.is_prime(self.p):
            found.append(f"p={self.p} is not prime")
        if self.e < 1:
            found.append(f"e={self.e} must be at least 1")
        if self.r < 1:
            found.append(f"r={self.r} must be at least 1")
        if self.delta < 2:
            found.append(f"delta={self.delta} must be at least 2")
        if self.h < 1:
            found.append(f"h={self.h} must be at least 1")
        if self.m < 1:
            found.append(f"m={self.m} must be at least 1")
        if found:
            return found
        if self.k < 1:
            found.append(f"k=m*r-h={self.k} must be at least 1")
        if self.q < self.r + self.delta:
            found.append(f"field too small: q={self.q} < r+delta={self.r + self.delta}")
        if self.q < self.m + 1:
            found.append(f"m={self.m} exceeds q-1={self.q - 1}")
        return found

    @classmethod
    def from_q(cls, q: int, r: int, delta: int, h: int, m: int) -> MrParams:
        """Parameters over GF(q), for a prime power q."""
        if q < 2 or not galois.is_prime_power(q):
            raise ParameterError([f"q={q} is not a prime power"])
        primes, exponents = galois.factors(q)
        return cls(int(primes[0]), int(exponents[0]), r, delta, h, m)

    @property
    def q(self) -> int:
        return self.p**self.e

    @property
    def a(self) -> int:
        return self.r + self.delta - 1

    @property
    def n(self) -> int:
        return self.m * self.a

    @property
    def k(self) -> int:
        return self.m * self.r - self.h

    @property
    def d(self) -> int:
        return predicted_distance(self)

    @property
    def parity_rows(self) -> int:
        return self.m * (self.delta - 1) + self.h

    def repair_sets(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(range(i * self.a, (i + 1) * self.a)) for i in range(self.m))

    def to_json(self) -> dict[str, int]:
        return {"p": self.p, "e": self.e, "r": self.r, "delta": self.delta, "h": self.h, "m": self.m}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> MrParams:
        try:
            return cls(*(data[key] for key in ("p", "e", "r", "delta", "h", "m")))
        except (KeyError, TypeError) as exc:
            raise CodeFormatError(f"Malformed params: {data!r}") from exc


def predicted_distance(params: MrParams) -> int:
    """The minimum distance (⌊h/r⌋ + 1)(δ − 1) + h + 1 of the constructed code."""
    return (params.h // params.r + 1) * (params.delta - 1) + params.h + 1


def construction_field_size(params: MrParams) -> int:
    """The order q^h of the field the construction works over."""
    return params.q**params.h


def small_field_regime(params: MrParams) -> bool:
    """Whether h ≤ min{m, δ + 1}, the regime where q^h is order-optimal when m, r grow like q."""
    return params.h <= min(params.m, params.delta + 1)


def _check_alphas(tower: FieldTower, alphas: Sequence[int]) -> tuple[int, ...]:
    alphas = tuple(int(x) for x in alphas)
    violations = []
    if len(set(alphas)) != len(alphas):
        violations.append("alphas must be distinct")
    if any(x == 0 for x in alphas):
        violations.append("alphas must be nonzero")
    try:
        inside = all(tower.in_subfield(x) for x in alphas)
    except FieldError:
        inside = False
    if not inside:
        violations.append(f"alphas must lie in GF({tower.q})")
    if violations:
        raise ParameterError(violations)
    return alphas


def _vandermonde(tower: FieldTower, alphas: Sequence[int], first: int, count: int) -> Matrix:
    nodes = np.asarray(alphas, dtype=np.int64)
    exponents = np.arange(first, first + count, dtype=np.int64)
    codes = tower.power(nodes[None, :], exponents[:, None])
    return Matrix(tower, np.asarray(codes).reshape(count, len(alphas)), FieldTag.BASE_Q)


def build_P1(tower: FieldTower, alphas: Sequence[int], delta: int) -> Matrix:
    """The (δ−1)×a Vandermonde matrix with rows α_j^0, …, α_j^{δ−2}."""
    if delta < 2:
        raise ParameterError([f"delta={delta} must be at least 2"])
    return _vandermonde(tower, _check_alphas(tower, alphas), 0, delta - 1)


def build_P2(tower: FieldTower, alphas: Sequence[int], delta: int, h: int) -> Matrix:
    """The h×a matrix with rows α_j^{δ−1}, …, α_j^{δ+h−2}, continuing P1's Vandermonde."""
    violations = []
    if delta < 2:
        violations.append(f"delta={delta} must be at least 2")
    if h < 1:
        violations.append(f"h={h} must be at least 1")
    if violations:
        raise ParameterError(violations)
    return _vandermonde(tower, _check_alphas(tower, alphas), delta - 1, h)


def build_beta(tower: FieldTower, P2: Matrix) -> tuple[int, ...]:
    """Map each column of P2 into GF(Q) through Γ: β_j = Σ_t γ_t·(P2)_{t,j}."""
    if P2.rows != tower.h:
        raise MatrixError(f"P2 must have h={tower.h} rows, got {P2.rows}")
    if P2.cols == 0:
        return ()
    return tuple(int(x) for x in np.atleast_1d(tower.combine(P2.codes.T)))


def _assemble_H(tower: FieldTower, params: MrParams, alphas: Sequence[int]) -> tuple[Matrix, tuple[int, ...]]:
    P1 = build_P1(tower, alphas, params.delta)
    P2 = build_P2(tower, alphas, params.delta, params.h)
    beta = build_beta(tower, P2)
    local = block_diag([P1] * params.m)
    globals_ = hstack([build_D(tower, tower.power(tower.gamma, i), beta, params.h, params.a) for i in range(params.m)])
    return vstack([local, globals_]), beta


@dataclass(frozen=True)
class MrCode:
    """A code given by its parity-check matrix H, with m repair sets of size a.

    Rows of H are ordered as m local blocks of δ − 1 rows, then h global rows.
    Codes built by `build_code` also keep their construction data (`alphas`, `beta`);
    codes loaded from external matrices or mutated have `alphas = None`.
    """

    params: MrParams
    tower: FieldTower
    H: Matrix
    alphas: tuple[int, ...] | None = None
    beta: tuple[int, ...] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.H.shape != (self.params.parity_rows, self.params.n):
            raise CodeFormatError(
                f"H must be {self.params.parity_rows}x{self.params.n}, got {self.H.rows}x{self.H.cols}"
            )

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def repair_sets(self) -> tuple[tuple[int, ...], ...]:
        return self.params.repair_sets()

    @property
    def P1(self) -> Matrix | None:
        if self.alphas is None:
            return None
        return build_P1(self.tower, self.alphas, self.params.delta)

    @property
    def P2(self) -> Matrix | None:
        if self.alphas is None:
            return None
        return build_P2(self.tower, self.alphas, self.params.delta, self.params.h)

    @cached_property
    def is_constructed(self) -> bool:
        """Whether H is exactly the matrix the construction gives for `alphas` over this tower."""
        if self.alphas is None or self.tower.h != self.params.h or len(self.alphas) != self.params.a:
            return False
        try:
            H, _ = _assemble_H(self.tower, self.params, _check_alphas(self.tower, self.alphas))
        except ParameterError:
            return False
        return H == self.H

    def local_row_indices(self, i: int) -> range:
        w = self.params.delta - 1
        return range(i * w, (i + 1) * w)

    def global_row_indices(self) -> range:
        start = self.params.m * (self.params.delta - 1)
        return range(start, start + self.params.h)

    def local_rows(self, i: int) -> Matrix:
        """The local parity block of repair set i, restricted to its columns."""
        return project_cols(project_rows(self.H, self.local_row_indices(i)), self.repair_sets[i])

    def global_rows(self, i: int) -> Matrix:
        """The global parity rows restricted to the columns of repair set i."""
        return project_cols(project_rows(self.H, self.global_row_indices()), self.repair_sets[i])

    def with_entry(self, row: int, col: int, value: int) -> MrCode:
        """
        Returns:
            The code with one entry of H replaced; construction data is dropped.
        """
        return MrCode(self.params, self.tower, self.H.with_entry(row, col, value))

    def without_global_row(self, row: int = -1) -> MrCode:
        """
        Returns:
            The code with one global row of H deleted and h lowered by one.
        """
        rows = list(self.global_row_indices())
        try:
            dropped = rows[row]
        except IndexError:
            raise CodeFormatError(f"No global row {row}") from None
        params = replace(self.params, h=self.params.h - 1)
        keep = [i for i in range(self.H.rows) if i != dropped]
        return MrCode(params, self.tower, project_rows(self.H, keep))

    def to_json(self, power: bool = False) -> dict[str, Any]:
        fmt = self.tower.format_element
        description = self.tower.describe()
        description["gamma_basis"] = [fmt(g, power=power) for g in self.tower.gamma_basis]
        return {
            "params": self.params.to_json(),
            "field": description,
            "alphas": None if self.alphas is None else [fmt(x, power=power) for x in self.alphas],
            "H": self.H.to_json(power=power),
            "repair_sets": [list(s) for s in self.repair_sets],
        }

    @classmethod
    def from_json(cls, data: dict[str, Any], log: Logger | None = None) -> MrCode:
        """Load a code from its JSON form.

        The field defaults to the canonical tower for the parameters. H must be in
        block form: every local row vanishes outside its repair set.

        Raises:
            CodeFormatError: If the document is malformed.
        """
        log = log or getLogger(__name__)
        if not isinstance(data, dict) or "params" not in data or "H" not in data:
            raise CodeFormatError("Code JSON needs params and H")
        params = MrParams.from_json(data["params"])
        description = dict(data.get("field") or {})
        description.setdefault("p", params.p)
        description.setdefault("e", params.e)
        description.setdefault("h", params.h)
        if (int(description["p"]), int(description["e"])) != (params.p, params.e):
            raise CodeFormatError("Field description does not match params p, e")
        tower = FieldTower.from_description(description, log=log)
        try:
            H = Matrix.from_json(data["H"], tower)
        except MatrixError as exc:
            raise CodeFormatError(f"Malformed H: {exc}") from exc
        alphas = data.get("alphas")
        try:
            alphas = None if alphas is None else tuple(tower.parse_element(x) for x in alphas)
        except (FieldError, TypeError) as exc:
            raise CodeFormatError(f"Malformed alphas: {exc}") from exc
        code = cls(params, tower, H, alphas)
        if "repair_sets" in data and [list(s) for s in data["repair_sets"]] != [list(s) for s in code.repair_sets]:
            raise CodeFormatError("repair_sets do not partition [n] into consecutive blocks of size a")
        _check_block_form(code)
        if alphas is not None and not code.is_constructed:
            # construction data only describes H when it reproduces H
            log.warning("H does not match the construction for the given alphas, dropping them")
            code = cls(params, tower, H)
        if rank(H) < H.rows:
            log.warning("Parity-check matrix has rank %d < %d rows", rank(H), H.rows)
        return code


def _check_block_form(code: MrCode) -> None:
    for i, columns in enumerate(code.repair_sets):
        outside = [j for j in range(code.n) if j not in set(columns)]
        block = project_cols(project_rows(code.H, code.local_row_indices(i)), outside)
        if not block.is_zero():
            raise CodeFormatError(f"Local rows of repair set {i} are nonzero outside it")


def build_code(
    params: MrParams,
    alphas: Sequence[int] | None = None,
    gamma_basis: Sequence[int] | None = None,
    log: Logger | None = None,
) -> MrCode:
    """Build the MR code of the given parameters.

    H stacks m diagonal copies of P1 over the row of blocks D(γ^i, β, h, a),
    for i = 0, …, m − 1, with β = Γ·P2.

    Arguments:
        params: The code parameters.
        alphas: Optional distinct nonzero GF(q) elements α_1, …, α_a;
            defaults to ω^0, …, ω^{a−1}.
        gamma_basis: An optional GF(q)-basis Γ of GF(Q); defaults to (1, γ, …, γ^{h−1}).
        log: An optional logger.

    Returns:
        The code; H has full row rank m(δ − 1) + h.
    """
    log = log or getLogger(__name__)
    tower = FieldTower(params.p, params.e, params.h, gamma_basis=gamma_basis, log=log)
    if alphas is None:
        alphas = tower.subfield_elements()[1 : params.a + 1]
    alphas = _check_alphas(tower, alphas)
    if len(alphas) != params.a:
        raise ParameterError([f"expected a={params.a} alphas, got {len(alphas)}"])
    H, beta = _assemble_H(tower, params, alphas)
    if rank(H) != params.parity_rows:
        raise ParameterError([f"H has rank {rank(H)} < {params.parity_rows}"])  # pragma: no cover
    log.info(
        "Built (n=%d, k=%d, r=%d, h=%d, delta=%d) code over GF(%d)",
        params.n,
        params.k,
        params.r,
        params.h,
        params.delta,
        tower.order,
    )
    return MrCode(params, tower, H, alphas, beta)


EXAMPLE1_PATH = Path(__file__).parent / "data" / "example1.json"


def example1_code(log: Logger | None = None) -> MrCode:
    """The bundled (n=9, r=2, h=2, δ=2) code over GF(16), entries as powers of γ."""
    return MrCode.from_json(json.loads(EXAMPLE1_PATH.read_text()), log=log)
