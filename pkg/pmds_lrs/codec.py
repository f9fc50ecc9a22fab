from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Iterable, Sequence

import numpy as np

from .gf import FieldTower
from .linalg import Matrix, MatrixError, null_space, project_cols, rank, solve
from .mrcons import MrCode


class UnrecoverablePattern(Exception):
    def __init__(self, erased: Sequence[int], rank: int):
        self.erased = tuple(erased)
        self.rank = rank
        self.size = len(self.erased)
        self.deficiency = self.size - rank
        super().__init__(
            f"Erasures {list(self.erased)} are not recoverable: rank {rank} < {self.size} (deficiency {self.deficiency})"
        )


@dataclass(frozen=True)
class Codeword:
    """A word of length n; erased positions hold `None`."""

    symbols: tuple[int | None, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "symbols", tuple(None if s is None else int(s) for s in self.symbols))

    @classmethod
    def erased(cls, symbols: Iterable[int | None], positions: Iterable[int]) -> Codeword:
        """
        Returns:
            A copy of `symbols` with the given positions erased.
        """
        values = list(symbols)
        for i in positions:
            if not 0 <= i < len(values):
                raise MatrixError(f"Erasure position {i} is outside a word of length {len(values)}")
            values[i] = None
        return cls(tuple(values))

    @property
    def n(self) -> int:
        return len(self.symbols)

    @property
    def erasure_mask(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.symbols) if s is None)

    @property
    def is_complete(self) -> bool:
        return not self.erasure_mask

    def to_json(self, tower: FieldTower | None = None, power: bool = False) -> dict[str, Any]:
        def fmt(s: int | None) -> Any:
            if s is None:
                return None
            return tower.format_element(s, power=power) if tower is not None else s

        return {"symbols": [fmt(s) for s in self.symbols]}

    @classmethod
    def from_json(cls, data: dict[str, Any], tower: FieldTower) -> Codeword:
        try:
            symbols = data["symbols"]
        except (KeyError, TypeError) as exc:
            raise MatrixError(f"Malformed codeword JSON: {data!r}") from exc
        return cls(tuple(None if s is None else tower.parse_element(s) for s in symbols))


@lru_cache(maxsize=32)
def generator(code: MrCode) -> Matrix:
    """A generator matrix G with G·Hᵀ = 0.

    G is in reduced row echelon form, so it is systematic on the lowest-index
    information set.
    """
    return null_space(code.H).transpose()


def encode(code: MrCode, message: Sequence[int]) -> Codeword:
    G = generator(code)
    msg = np.asarray(message, dtype=np.int64).reshape(-1)
    if msg.size != G.rows:
        raise MatrixError(f"Message length {msg.size} does not match k={G.rows}")
    word = Matrix(code.tower, msg[None, :]) @ G
    return Codeword(tuple(word.codes[0]))


def _full_word(code: MrCode, word: Codeword | Sequence[int]) -> np.ndarray:
    symbols = word.symbols if isinstance(word, Codeword) else tuple(word)
    if len(symbols) != code.n:
        raise MatrixError(f"Word length {len(symbols)} does not match n={code.n}")
    if any(s is None for s in symbols):
        raise MatrixError("Syndrome needs a word without erasures")
    return np.asarray(symbols, dtype=np.int64)


def syndrome(code: MrCode, word: Codeword | Sequence[int]) -> tuple[int, ...]:
    """
    Returns:
        H·wordᵀ; all zero exactly when the word is a codeword.
    """
    column = Matrix(code.tower, _full_word(code, word)[:, None])
    return tuple(int(x) for x in (code.H @ column).codes[:, 0])


def decode_erasures(code: MrCode, word: Codeword) -> Codeword:
    """Fill in the erased symbols of a codeword.

    Arguments:
        code: The code.
        word: The received word; erased positions hold `None`.

    Returns:
        The completed codeword, the unique solution of H|_E·x = −H|_{[n]∖E}·c.

    Raises:
        UnrecoverablePattern: If H|_E does not have full column rank.
    """
    if word.n != code.n:
        raise MatrixError(f"Word length {word.n} does not match n={code.n}")
    erased = word.erasure_mask
    if not erased:
        return word
    HE = project_cols(code.H, erased)
    r = rank(HE)
    if r < len(erased):
        raise UnrecoverablePattern(erased, r)
    known = [i for i in range(code.n) if word.symbols[i] is not None]
    values = Matrix(code.tower, np.asarray([word.symbols[i] for i in known], dtype=np.int64).reshape(-1, 1))
    rhs = -(project_cols(code.H, known) @ values)
    x = solve(HE, rhs)
    symbols = list(word.symbols)
    for i, value in zip(erased, x.codes[:, 0]):
        symbols[i] = int(value)
    return Codeword(tuple(symbols))
