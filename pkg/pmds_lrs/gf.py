from __future__ import annotations

import re
from logging import Logger, getLogger
from typing import Any, Sequence

import galois
import numpy as np

# element codes are packed into int64
MAX_ORDER = 2**62

_POWER_FORM = re.compile(r"^(?:a|gamma|γ)(?:\s*\^\s*(-?\d+))?$")


class FieldError(ValueError):
    pass


class ZeroInverse(FieldError, ZeroDivisionError):
    pass


def _is_primitive_root(prime_field: type[galois.FieldArray], p: int, g: int) -> bool:
    return g != 0 and int(prime_field(g).multiplicative_order()) == p - 1


class FieldTower:
    """The tower GF(p) ⊂ GF(q = p^e) ⊂ GF(Q = q^h).

    Elements of every level are integer codes of GF(Q): the little-endian base-p digits
    of a code are the coefficients of the residue polynomial modulo `modulus`. The
    subfield GF(q) is not a separate engine, its elements are the codes `x` with
    `x^q = x`.

    The tower is immutable after creation. Arithmetic is delegated to a `galois`
    field class built on the tower's modulus; the Frobenius map is applied as a
    precomputed GF(p)-linear map (and, for small fields, a lookup table).
    """

    table_limit: int = 2**20

    p: int
    e: int
    h: int
    q: int
    order: int
    degree: int
    modulus: tuple[int, ...]
    gamma: int
    omega: int
    gamma_basis: tuple[int, ...]
    GF: type[galois.FieldArray]

    def __init__(
        self,
        p: int,
        e: int,
        h: int,
        modulus: Sequence[int] | None = None,
        gamma_basis: Sequence[int] | None = None,
        log: Logger | None = None,
    ) -> None:
        """Initialize the tower.

        Arguments:
            p: The prime characteristic.
            e: The degree of GF(q) over GF(p).
            h: The degree of GF(Q) over GF(q).
            modulus: An optional primitive modulus of degree e·h, coefficients low-to-high.
                Defaults to the least primitive monic polynomial.
            gamma_basis: An optional GF(q)-basis (γ_1, …, γ_h) of GF(Q), as element codes.
                Defaults to (1, γ, …, γ^{h-1}).
            log: An optional logger.
        """
        self.log = log or getLogger(__name__)
        p, e, h = int(p), int(e), int(h)
        if p < 2 or not galois.is_prime(p):
            raise FieldError(f"Characteristic p={p} is not prime")
        if e < 1 or h < 1:
            raise FieldError(f"Extension degrees must be positive, got e={e}, h={h}")
        degree = e * h
        if p**degree > MAX_ORDER:
            raise FieldError(f"Field order {p}^{degree} exceeds the integer code space")

        self.p, self.e, self.h = p, e, h
        self.degree = degree
        self.q = p**e
        self.order = p**degree
        self.prime_field = galois.GF(p)
        self.modulus = self._select_modulus(modulus)
        if degree == 1:
            self.gamma = (-self.modulus[0]) % p
            self.GF = self.prime_field
        else:
            poly = galois.Poly(list(self.modulus), field=self.prime_field, order="asc")
            self.gamma = p
            self.GF = galois.GF(self.order, irreducible_poly=poly)
        self.omega = self.power(self.gamma, (self.order - 1) // (self.q - 1))

        self._powers = p ** np.arange(degree, dtype=np.int64)
        self._omega_powers = self.GF(self.power(self.omega, np.arange(e)))
        self._frobenius_matrix = self._build_frobenius_matrix()
        self._frobenius_table: np.ndarray | None = None
        self._exp_table: np.ndarray | None = None
        self._log_table: np.ndarray | None = None
        if self.order <= self.table_limit:
            self._build_tables()
        self._check_frobenius()

        if gamma_basis is None:
            gamma_basis = [self.power(self.gamma, t) for t in range(h)]
        self.gamma_basis = tuple(int(g) for g in self._codes(list(gamma_basis)))
        if len(self.gamma_basis) != h:
            raise FieldError(f"Gamma basis must have h={h} elements, got {len(self.gamma_basis)}")
        self._coords_inverse = self._build_coords_inverse()
        self.log.debug(
            "Created GF(%d) over GF(%d), modulus %s", self.order, self.q, list(self.modulus)
        )

    @classmethod
    def from_description(cls, description: dict[str, Any], log: Logger | None = None) -> FieldTower:
        """Create a tower from its serialized description.

        Arguments:
            description: A mapping with keys `p`, `e`, `h` and optionally `modulus`
                (low-to-high) and `gamma_basis`.
            log: An optional logger.

        Returns:
            The field tower.
        """
        try:
            p, e, h = description["p"], description["e"], description["h"]
        except (KeyError, TypeError) as exc:
            raise FieldError(f"Field description needs p, e and h: {description!r}") from exc
        tower = cls(p, e, h, modulus=description.get("modulus"), log=log)
        basis = description.get("gamma_basis")
        if basis is not None:
            tower = tower.with_gamma_basis([tower.parse_element(x) for x in basis])
        return tower

    def with_gamma_basis(self, gamma_basis: Sequence[int]) -> FieldTower:
        """
        Returns:
            The same tower with another GF(q)-basis Γ of GF(Q).
        """
        return type(self)(
            self.p, self.e, self.h, modulus=self.modulus, gamma_basis=gamma_basis, log=self.log
        )

    def describe(self) -> dict[str, Any]:
        """
        Returns:
            The serialized field description {p, e, h, modulus}.
        """
        return {"p": self.p, "e": self.e, "h": self.h, "modulus": list(self.modulus)}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FieldTower):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __repr__(self) -> str:
        return f"FieldTower(p={self.p}, e={self.e}, h={self.h}, modulus={list(self.modulus)})"

    def _key(self) -> tuple:
        return (self.p, self.e, self.h, self.modulus, self.gamma_basis)

    def _select_modulus(self, modulus: Sequence[int] | None) -> tuple[int, ...]:
        p, degree = self.p, self.degree
        if modulus is None:
            if degree == 1:
                # least x + c whose root -c is a primitive root
                c = next(c for c in range(p) if _is_primitive_root(self.prime_field, p, (-c) % p))
                return (c, 1)
            poly = galois.primitive_poly(p, degree, method="min")
            return tuple(int(c) for c in poly.coeffs[::-1])

        coeffs = tuple(int(c) for c in modulus)
        if len(coeffs) != degree + 1 or coeffs[-1] != 1:
            raise FieldError(f"Modulus must be monic of degree {degree} (low-to-high), got {list(coeffs)}")
        if any(not 0 <= c < p for c in coeffs):
            raise FieldError(f"Modulus coefficients must lie in [0, {p}), got {list(coeffs)}")
        if degree == 1:
            primitive = _is_primitive_root(self.prime_field, p, (-coeffs[0]) % p)
        else:
            poly = galois.Poly(list(coeffs), field=self.prime_field, order="asc")
            primitive = bool(poly.is_primitive())
        if not primitive:
            raise FieldError(f"Modulus {list(coeffs)} is not primitive over GF({p})")
        return coeffs

    def _build_frobenius_matrix(self) -> np.ndarray:
        # column j holds the digits of σ(x^j)
        images = np.asarray(self.GF(self._powers) ** self.q, dtype=np.int64)
        return self.digits(images).T.copy()

    def _apply_frobenius_matrix(self, codes: np.ndarray) -> np.ndarray:
        digits = (self.digits(codes) @ self._frobenius_matrix.T) % self.p
        return digits @ self._powers

    def _build_tables(self) -> None:
        self._frobenius_table = self._apply_frobenius_matrix(np.arange(self.order, dtype=np.int64))
        exp = np.asarray(self.GF(self.gamma) ** np.arange(self.order - 1), dtype=np.int64)
        log = np.full(self.order, -1, dtype=np.int64)
        log[exp] = np.arange(self.order - 1, dtype=np.int64)
        self._exp_table, self._log_table = exp, log

    def _check_frobenius(self) -> None:
        if self.order <= 2**16:
            sample = np.arange(self.order, dtype=np.int64)
        else:
            rng = np.random.default_rng(self.order)
            sample = rng.integers(0, self.order, size=4096, dtype=np.int64)
        expected = np.asarray(self.GF(sample) ** self.q, dtype=np.int64)
        if not np.array_equal(self._sigma_once(sample), expected):
            raise FieldError("Precomputed Frobenius map disagrees with exponentiation")  # pragma: no cover

    def _build_coords_inverse(self) -> np.ndarray:
        # GF(p)-basis {ω^s γ_t} of GF(Q); column t·e + s
        basis = self.GF(np.asarray(self.gamma_basis, dtype=np.int64))[:, None] * self._omega_powers[None, :]
        columns = self.digits(np.asarray(basis, dtype=np.int64).reshape(-1)).T
        matrix = self.prime_field(columns)
        if int(np.linalg.matrix_rank(matrix)) < self.degree:
            raise FieldError(
                f"Gamma basis {list(self.gamma_basis)} is not GF({self.q})-linearly independent"
            )
        return np.asarray(np.linalg.inv(matrix), dtype=np.int64)

    def _codes(self, x: Any) -> np.ndarray:
        codes = np.asarray(x, dtype=np.int64)
        if codes.size and (codes.min() < 0 or codes.max() >= self.order):
            raise FieldError(f"Element codes must lie in [0, {self.order})")
        return codes

    def _out(self, value: Any, scalar: bool) -> Any:
        codes = np.asarray(value, dtype=np.int64)
        return int(codes) if scalar else codes

    def element(self, x: Any) -> galois.FieldArray:
        """
        Returns:
            The element code(s) as a `galois` array over GF(Q).
        """
        return self.GF(self._codes(x))

    def digits(self, x: Any) -> np.ndarray:
        """
        Returns:
            The little-endian base-p digits of the code(s), shape `(..., e·h)`.
        """
        codes = np.asarray(x, dtype=np.int64)
        return (codes[..., None] // self._powers) % self.p

    def add(self, x: Any, y: Any) -> Any:
        return self._out(self.element(x) + self.element(y), np.ndim(x) == np.ndim(y) == 0)

    def sub(self, x: Any, y: Any) -> Any:
        return self._out(self.element(x) - self.element(y), np.ndim(x) == np.ndim(y) == 0)

    def neg(self, x: Any) -> Any:
        return self._out(-self.element(x), np.ndim(x) == 0)

    def mul(self, x: Any, y: Any) -> Any:
        return self._out(self.element(x) * self.element(y), np.ndim(x) == np.ndim(y) == 0)

    def inv(self, x: Any) -> Any:
        codes = self._codes(x)
        if np.any(codes == 0):
            raise ZeroInverse("Inversion of zero")
        return self._out(self.GF(codes) ** -1, np.ndim(x) == 0)

    def div(self, x: Any, y: Any) -> Any:
        return self.mul(x, self.inv(y))

    def power(self, x: Any, k: Any) -> Any:
        """Square-and-multiply exponentiation; negative exponents invert first."""
        codes = self._codes(x)
        exponent = np.asarray(k, dtype=np.int64)
        if np.any(exponent < 0) and np.any(codes == 0):
            raise ZeroInverse("Inversion of zero")
        return self._out(self.GF(codes) ** exponent, codes.ndim == 0 and exponent.ndim == 0)

    def discrete_log(self, x: Any) -> Any:
        """
        Returns:
            The discrete logarithm(s) of nonzero element(s) to the base γ.
        """
        codes = self._codes(x)
        if self._log_table is None:
            raise FieldError(f"Discrete logarithms need a field of order ≤ {self.table_limit}")
        if np.any(codes == 0):
            raise FieldError("Zero has no discrete logarithm")
        return self._out(self._log_table[codes], codes.ndim == 0)

    def _sigma_once(self, codes: np.ndarray) -> np.ndarray:
        if self._frobenius_table is not None:
            return self._frobenius_table[codes]
        return self._apply_frobenius_matrix(codes)

    def frobenius(self, x: Any, i: int = 1) -> Any:
        """Apply σ^i, where σ(x) = x^q.

        Arguments:
            x: Element code(s).
            i: The number of compositions.

        Returns:
            x^(q^i), with the shape of `x`.
        """
        codes = self._codes(x)
        result = codes
        for _ in range(int(i) % self.h):
            result = self._sigma_once(result)
        return self._out(result, codes.ndim == 0)

    def norm(self, alpha: Any, i: int) -> Any:
        """The twisted norm σ^{i-1}(α)⋯σ(α)α; the empty product for i = 0 is 1."""
        codes = self._codes(alpha)
        result = self.GF(np.ones_like(codes))
        term = codes
        for _ in range(int(i)):
            result = result * self.GF(term)
            term = self._sigma_once(term)
        return self._out(result, codes.ndim == 0)

    norm_i = norm

    def d_op(self, alpha: Any, i: int, beta: Any) -> Any:
        """The GF(q)-linear operator D^i_α(β) = σ^i(β)·norm_i(α)."""
        twisted = self.element(self.frobenius(beta, i))
        return self._out(twisted * self.element(self.norm(alpha, i)), np.ndim(alpha) == np.ndim(beta) == 0)

    def coords(self, x: Any) -> Any:
        """Coordinates over GF(q) with respect to the basis Γ.

        Arguments:
            x: Element code(s) of GF(Q).

        Returns:
            The GF(q) codes (c_1, …, c_h) with x = Σ c_t γ_t, shape `(..., h)`.
        """
        codes = self._codes(x)
        weights = (self.digits(codes) @ self._coords_inverse.T) % self.p
        weights = weights.reshape(codes.shape + (self.h, self.e))
        coefficients = np.add.reduce(self.GF(weights) * self._omega_powers, axis=-1)
        result = np.asarray(coefficients, dtype=np.int64)
        return tuple(int(c) for c in result) if codes.ndim == 0 else result

    def combine(self, coefficients: Any) -> Any:
        """Inverse of `coords`: Σ c_t γ_t over the last axis."""
        coefficients = self._codes(coefficients)
        if coefficients.shape[-1:] != (self.h,):
            raise FieldError(f"Expected {self.h} coordinates, got shape {coefficients.shape}")
        basis = self.GF(np.asarray(self.gamma_basis, dtype=np.int64))
        total = np.add.reduce(self.GF(coefficients) * basis, axis=-1)
        return self._out(total, coefficients.ndim == 1)

    def subfield_elements(self) -> tuple[int, ...]:
        """
        Returns:
            The q elements of GF(q) inside GF(Q), in the order 0, ω^0, …, ω^{q-2}.
        """
        powers = np.atleast_1d(self.power(self.omega, np.arange(self.q - 1)))
        return (0,) + tuple(int(x) for x in powers)

    def in_subfield(self, x: Any) -> Any:
        """
        Returns:
            Whether x^q = x, elementwise.
        """
        codes = self._codes(x)
        fixed = self._sigma_once(codes) == codes
        return bool(fixed) if codes.ndim == 0 else fixed

    def random_elements(
        self, rng: np.random.Generator, shape: int | tuple[int, ...], subfield: bool = False
    ) -> np.ndarray:
        """
        Returns:
            Uniformly random element codes of GF(Q), or of GF(q) if `subfield` is set.
        """
        if subfield:
            pool = np.asarray(self.subfield_elements(), dtype=np.int64)
            return pool[rng.integers(0, self.q, size=shape)]
        return rng.integers(0, self.order, size=shape, dtype=np.int64)

    def parse_element(self, text: Any) -> int:
        """Parse an element text form: a decimal code, `a^k` (power of γ), or `0`.

        Arguments:
            text: The text form, or an integer code.

        Returns:
            The element code.
        """
        if isinstance(text, (int, np.integer)) and not isinstance(text, bool):
            return int(self._codes(int(text)))
        if not isinstance(text, str):
            raise FieldError(f"Cannot parse element {text!r}")
        token = text.strip()
        if re.fullmatch(r"\d+", token):
            return int(self._codes(int(token)))
        match = _POWER_FORM.match(token)
        if match is None:
            raise FieldError(f"Cannot parse element {text!r}")
        exponent = int(match.group(1)) if match.group(1) is not None else 1
        return self.power(self.gamma, exponent % (self.order - 1))

    def format_element(self, x: int, power: bool = False) -> int | str:
        """
        Returns:
            The canonical integer code, or the `a^k` power form if `power` is set.
        """
        code = int(self._codes(x))
        if not power:
            return code
        if code == 0:
            return "0"
        return f"a^{self.discrete_log(code)}"


def field_create(p: int, e: int, h: int, log: Logger | None = None) -> FieldTower:
    """Create the canonical tower GF(p) ⊂ GF(p^e) ⊂ GF(p^{e·h}).

    Arguments:
        p: The prime characteristic.
        e: The degree of GF(q) over GF(p).
        h: The degree of GF(Q) over GF(q).
        log: An optional logger.

    Returns:
        The tower over the least primitive modulus, with Γ = (1, γ, …, γ^{h-1}).
    """
    return FieldTower(p, e, h, log=log)


_ARITH = {
    "add": FieldTower.add,
    "sub": FieldTower.sub,
    "neg": FieldTower.neg,
    "mul": FieldTower.mul,
    "div": FieldTower.div,
    "inv": FieldTower.inv,
    "pow": FieldTower.power,
}


def arith(tower: FieldTower, op: str, *operands: Any) -> Any:
    """Apply a named field operation (`add`, `sub`, `neg`, `mul`, `div`, `inv`, `pow`)."""
    try:
        func = _ARITH[op]
    except KeyError:
        raise FieldError(f"Unknown field operation {op!r}") from None
    return func(tower, *operands)
