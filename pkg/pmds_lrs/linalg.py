from __future__ import annotations

from enum import Enum
from typing import Any, Iterable, Sequence

import galois
import numpy as np

from .gf import FieldError, FieldTower


class MatrixError(ValueError):
    pass


class Inconsistent(Exception):
    pass


class FieldTag(str, Enum):
    """The field whose arithmetic governs elimination."""

    BASE_Q = "base_q"
    TOP_Q = "top_Q"


class Matrix:
    """A dense, immutable matrix of element codes over a field tower.

    Entries are stored as a read-only `int64` array of GF(Q) codes. A matrix tagged
    `FieldTag.BASE_Q` only holds elements of the subfield GF(q); elimination always uses
    the top-field arithmetic, under which GF(q) is closed.
    """

    tower: FieldTower
    tag: FieldTag

    def __init__(
        self,
        tower: FieldTower,
        entries: Any,
        tag: FieldTag | str = FieldTag.TOP_Q,
        shape: tuple[int, int] | None = None,
    ) -> None:
        """
        Arguments:
            tower: The field tower the entries live in.
            entries: A 2-D array-like of element codes (or a flat one with `shape`).
            tag: The field tag.
            shape: An optional `(rows, cols)` to reshape flat entries to.
        """
        self.tower = tower
        self.tag = FieldTag(tag)
        codes = np.array(entries, dtype=np.int64)
        if shape is not None:
            if codes.size != shape[0] * shape[1]:
                raise MatrixError(f"{codes.size} entries do not fill a {shape[0]}x{shape[1]} matrix")
            codes = codes.reshape(shape)
        if codes.ndim != 2:
            raise MatrixError(f"Matrix entries must be 2-dimensional, got shape {codes.shape}")
        try:
            tower._codes(codes)
        except FieldError as exc:
            raise MatrixError(str(exc)) from exc
        if self.tag is FieldTag.BASE_Q and codes.size and not np.all(tower.in_subfield(codes)):
            raise MatrixError(f"Matrix tagged {self.tag.value} has entries outside GF({tower.q})")
        codes.setflags(write=False)
        self._codes = codes

    @classmethod
    def zeros(cls, tower: FieldTower, rows: int, cols: int, tag: FieldTag | str = FieldTag.TOP_Q) -> Matrix:
        return cls(tower, np.zeros((rows, cols), dtype=np.int64), tag)

    @classmethod
    def identity(cls, tower: FieldTower, n: int, tag: FieldTag | str = FieldTag.BASE_Q) -> Matrix:
        return cls(tower, np.eye(n, dtype=np.int64), tag)

    @classmethod
    def from_field_array(
        cls, tower: FieldTower, array: galois.FieldArray, tag: FieldTag | str = FieldTag.TOP_Q
    ) -> Matrix:
        return cls(tower, np.asarray(array, dtype=np.int64), tag)

    @property
    def rows(self) -> int:
        return int(self._codes.shape[0])

    @property
    def cols(self) -> int:
        return int(self._codes.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def codes(self) -> np.ndarray:
        """The read-only array of entry codes."""
        return self._codes

    @property
    def field_array(self) -> galois.FieldArray:
        return self.tower.GF(self._codes)

    def entry(self, row: int, col: int) -> int:
        return int(self._codes[row, col])

    def is_zero(self) -> bool:
        return not np.any(self._codes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Matrix):
            return NotImplemented
        return (
            self.tower == other.tower
            and self.shape == other.shape
            and bool(np.array_equal(self._codes, other._codes))
        )

    def __hash__(self) -> int:
        return hash((self.tower, self.shape, self._codes.tobytes()))

    def __repr__(self) -> str:
        return f"Matrix({self.rows}x{self.cols}, tag={self.tag.value}, {self._codes.tolist()})"

    def _check_compatible(self, other: Matrix) -> None:
        if self.tower != other.tower:
            raise MatrixError("Matrices live over different field towers")

    def _joint_tag(self, *others: Matrix) -> FieldTag:
        if all(m.tag is FieldTag.BASE_Q for m in (self,) + others):
            return FieldTag.BASE_Q
        return FieldTag.TOP_Q

    def transpose(self) -> Matrix:
        return Matrix(self.tower, self._codes.T, self.tag)

    @property
    def T(self) -> Matrix:
        return self.transpose()

    def __matmul__(self, other: Matrix) -> Matrix:
        self._check_compatible(other)
        if self.cols != other.rows:
            raise MatrixError(f"Cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}")
        if self.cols == 0:
            return Matrix.zeros(self.tower, self.rows, other.cols, self._joint_tag(other))
        product = self.field_array @ other.field_array
        return Matrix.from_field_array(self.tower, product, self._joint_tag(other))

    def __add__(self, other: Matrix) -> Matrix:
        self._check_compatible(other)
        if self.shape != other.shape:
            raise MatrixError(f"Cannot add {self.shape} and {other.shape}")
        return Matrix.from_field_array(self.tower, self.field_array + other.field_array, self._joint_tag(other))

    def __sub__(self, other: Matrix) -> Matrix:
        self._check_compatible(other)
        if self.shape != other.shape:
            raise MatrixError(f"Cannot subtract {self.shape} and {other.shape}")
        return Matrix.from_field_array(self.tower, self.field_array - other.field_array, self._joint_tag(other))

    def __neg__(self) -> Matrix:
        return Matrix.from_field_array(self.tower, -self.field_array, self.tag)

    def with_entry(self, row: int, col: int, value: int) -> Matrix:
        """
        Returns:
            A copy with one entry replaced, tagged over GF(Q).
        """
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise MatrixError(f"Entry ({row}, {col}) is outside a {self.rows}x{self.cols} matrix")
        codes = self._codes.copy()
        codes[row, col] = value
        return Matrix(self.tower, codes, FieldTag.TOP_Q)

    def rref_with_pivots(self) -> tuple[Matrix, tuple[int, ...]]:
        """Reduced row echelon form and its pivot columns.

        Pivoting takes the lowest row index, then the lowest column index, so the
        result is canonical.
        """
        if self.rows == 0 or self.cols == 0:
            return Matrix(self.tower, self._codes, self.tag), ()
        reduced = np.asarray(self.field_array.row_reduce(), dtype=np.int64)
        return Matrix(self.tower, reduced, self.tag), _pivots(reduced)

    def rank(self) -> int:
        return rank(self)

    def to_json(self, power: bool = False) -> dict[str, Any]:
        fmt = self.tower.format_element
        return {
            "rows": self.rows,
            "cols": self.cols,
            "field": self.tower.describe(),
            "tag": self.tag.value,
            "entries": [fmt(int(x), power=power) for x in self._codes.reshape(-1)],
        }

    @classmethod
    def from_json(cls, data: dict[str, Any], tower: FieldTower | None = None) -> Matrix:
        """Load a matrix from its JSON form.

        Arguments:
            data: The mapping `{rows, cols, field, tag, entries}`.
            tower: An optional tower to reuse; it must match `field` when both are given.

        Returns:
            The matrix.
        """
        try:
            rows, cols, entries = int(data["rows"]), int(data["cols"]), data["entries"]
        except (KeyError, TypeError, ValueError) as exc:
            raise MatrixError(f"Malformed matrix JSON: {exc}") from exc
        if tower is None:
            if "field" not in data:
                raise MatrixError("Matrix JSON has no field description")
            tower = FieldTower.from_description(data["field"])
        elif "field" in data and not _describes(data["field"], tower):
            raise MatrixError("Matrix JSON field does not match the given tower")
        try:
            codes = [tower.parse_element(x) for x in entries]
        except FieldError as exc:
            raise MatrixError(str(exc)) from exc
        return cls(tower, np.asarray(codes, dtype=np.int64), data.get("tag", FieldTag.TOP_Q), shape=(rows, cols))


def _describes(field: Any, tower: FieldTower) -> bool:
    try:
        same = (int(field["p"]), int(field["e"]), int(field["h"])) == (tower.p, tower.e, tower.h)
        modulus = field.get("modulus")
    except (KeyError, TypeError, ValueError, AttributeError):
        return False
    return same and (modulus is None or tuple(int(c) for c in modulus) == tower.modulus)


def _pivots(reduced: np.ndarray) -> tuple[int, ...]:
    pivots = []
    for row in reduced:
        nonzero = np.flatnonzero(row)
        if nonzero.size == 0:
            break
        pivots.append(int(nonzero[0]))
    return tuple(pivots)


def rank(M: Matrix) -> int:
    """Rank by Gaussian elimination over the tagged field."""
    if M.rows == 0 or M.cols == 0 or M.is_zero():
        return 0
    return len(M.rref_with_pivots()[1])


def solve(A: Matrix, B: Matrix) -> Matrix:
    """Solve A·X = B.

    Free variables are set to zero, so underdetermined systems get a deterministic
    solution.

    Arguments:
        A: The coefficient matrix.
        B: The right-hand sides, with as many rows as `A`.

    Returns:
        X with A·X = B.

    Raises:
        Inconsistent: If the system has no solution.
    """
    A._check_compatible(B)
    if A.rows != B.rows:
        raise MatrixError(f"Row counts differ: {A.rows} and {B.rows}")
    tag = A._joint_tag(B)
    X = np.zeros((A.cols, B.cols), dtype=np.int64)
    if A.rows == 0:
        return Matrix(A.tower, X, tag)
    if A.cols == 0:
        if not B.is_zero():
            raise Inconsistent("System has no solution")
        return Matrix(A.tower, X, tag)
    augmented = np.hstack([A.codes, B.codes])
    reduced = np.asarray(A.tower.GF(augmented).row_reduce(ncols=A.cols), dtype=np.int64)
    for row in reduced:
        nonzero = np.flatnonzero(row[: A.cols])
        if nonzero.size == 0:
            if np.any(row[A.cols :]):
                raise Inconsistent("System has no solution")
            continue
        X[nonzero[0]] = row[A.cols :]
    return Matrix(A.tower, X, tag)


def null_space(M: Matrix) -> Matrix:
    """A basis of the right kernel, as the columns of a matrix.

    Returns:
        N with M·N = 0 and `M.cols - rank(M)` columns; Nᵀ is in reduced row echelon form.
    """
    reduced, pivots = M.rref_with_pivots()
    free = [j for j in range(M.cols) if j not in set(pivots)]
    GF = M.tower.GF
    basis = GF.Zeros((len(free), M.cols))
    R = reduced.field_array
    for idx, f in enumerate(free):
        basis[idx, f] = 1
        for i, pivot in enumerate(pivots):
            basis[idx, pivot] = -R[i, f]
    if len(free):
        basis = basis.row_reduce()
    N = Matrix.from_field_array(M.tower, basis, M.tag).transpose() if len(free) else Matrix.zeros(
        M.tower, M.cols, 0, M.tag
    )
    if N.cols + len(pivots) != M.cols:
        raise MatrixError("Kernel dimension does not match the rank")  # pragma: no cover
    return N


def project_cols(M: Matrix, indices: Iterable[int]) -> Matrix:
    """The columns of M at the given indices, in increasing index order."""
    idx = sorted({int(i) for i in indices})
    if idx and (idx[0] < 0 or idx[-1] >= M.cols):
        raise MatrixError(f"Column indices {idx} out of range for {M.cols} columns")
    return Matrix(M.tower, M.codes[:, idx].reshape(M.rows, len(idx)), M.tag)


def project_rows(M: Matrix, indices: Iterable[int]) -> Matrix:
    return project_cols(M.transpose(), indices).transpose()


def hstack(blocks: Sequence[Matrix]) -> Matrix:
    if not blocks:
        raise MatrixError("Nothing to stack")
    first = blocks[0]
    for block in blocks[1:]:
        first._check_compatible(block)
        if block.rows != first.rows:
            raise MatrixError(f"Row counts differ: {first.rows} and {block.rows}")
    return Matrix(first.tower, np.hstack([b.codes for b in blocks]), first._joint_tag(*blocks[1:]))


def vstack(blocks: Sequence[Matrix]) -> Matrix:
    if not blocks:
        raise MatrixError("Nothing to stack")
    first = blocks[0]
    for block in blocks[1:]:
        first._check_compatible(block)
        if block.cols != first.cols:
            raise MatrixError(f"Column counts differ: {first.cols} and {block.cols}")
    return Matrix(first.tower, np.vstack([b.codes for b in blocks]), first._joint_tag(*blocks[1:]))


def block_diag(blocks: Sequence[Matrix]) -> Matrix:
    """The block-diagonal matrix with the given main-diagonal blocks.

    Raises:
        MatrixError: If the blocks have mixed field tags or towers.
    """
    if not blocks:
        raise MatrixError("block_diag needs at least one block")
    first = blocks[0]
    for block in blocks[1:]:
        first._check_compatible(block)
        if block.tag is not first.tag:
            raise MatrixError("block_diag blocks have mixed field tags")
    rows = sum(b.rows for b in blocks)
    cols = sum(b.cols for b in blocks)
    codes = np.zeros((rows, cols), dtype=np.int64)
    r = c = 0
    for block in blocks:
        codes[r : r + block.rows, c : c + block.cols] = block.codes  # noqa
        r += block.rows
        c += block.cols
    return Matrix(first.tower, codes, first.tag)


def coordinate_matrix(tower: FieldTower, v: Any) -> Matrix:
    """The h×|v| matrix over GF(q) whose column j is coords(v_j)."""
    codes = np.asarray(v, dtype=np.int64).reshape(-1)
    if codes.size == 0:
        return Matrix.zeros(tower, tower.h, 0, FieldTag.BASE_Q)
    return Matrix(tower, tower.coords(codes).T, FieldTag.BASE_Q)


def rank_q(tower: FieldTower, v: Any) -> int:
    """The GF(q)-rank of a vector over GF(Q)."""
    return rank(coordinate_matrix(tower, v))


def batch_rank(stack: galois.FieldArray) -> np.ndarray:
    """Ranks of a batch of matrices, shape `(batch, rows, cols)`, by vectorized elimination."""
    A = stack.copy()
    count, n_rows, n_cols = A.shape
    ranks = np.zeros(count, dtype=np.int64)
    if count == 0 or n_rows == 0 or n_cols == 0:
        return ranks
    GF = type(A)
    row_ids = np.arange(n_rows)
    for col in range(n_cols):
        candidates = (np.asarray(A[:, :, col]) != 0) & (row_ids[None, :] >= ranks[:, None])
        active = candidates.any(axis=1)
        if not active.any():
            continue
        batch = np.flatnonzero(active)
        source = np.argmax(candidates[batch], axis=1)
        target = ranks[batch]
        source_rows = A[batch, source].copy()
        A[batch, source] = A[batch, target]
        pivot_rows = source_rows / source_rows[:, col][:, None]
        A[batch, target] = pivot_rows
        below = GF((row_ids[None, :] > target[:, None]).astype(np.int64))
        factors = A[batch, :, col] * below
        A[batch] = A[batch] - factors[:, :, None] * pivot_rows[:, None, :]
        ranks[batch] += 1
    return ranks


def random_matrix(
    tower: FieldTower,
    rng: np.random.Generator,
    rows: int,
    cols: int,
    target_rank: int | None = None,
    subfield: bool = True,
) -> Matrix:
    """A random matrix, over GF(q) by default, optionally of an exact rank.

    A matrix of rank ρ is drawn as a product X·Y of random rows×ρ and ρ×cols factors,
    redrawn until the product has rank exactly ρ.
    """
    tag = FieldTag.BASE_Q if subfield else FieldTag.TOP_Q
    if target_rank is None:
        return Matrix(tower, tower.random_elements(rng, (rows, cols), subfield=subfield), tag)
    if not 0 <= target_rank <= min(rows, cols):
        raise MatrixError(f"No {rows}x{cols} matrix has rank {target_rank}")
    while True:
        X = Matrix(tower, tower.random_elements(rng, (rows, target_rank), subfield=subfield), tag)
        Y = Matrix(tower, tower.random_elements(rng, (target_rank, cols), subfield=subfield), tag)
        W = X @ Y
        if rank(W) == target_rank:
            return W
