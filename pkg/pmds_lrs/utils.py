from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterator

import anyio
import numpy as np


def write_var_uint(num: int) -> bytes:
    """LEB128 encoding of a non-negative integer."""
    out = bytearray()
    while True:
        byte, num = num & 0x7F, num >> 7
        out.append(byte | (0x80 if num else 0))
        if not num:
            return bytes(out)


def frame(data: bytes) -> bytes:
    return write_var_uint(len(data)) + data


class Decoder:
    """Reads back a concatenation of `frame`d messages."""

    def __init__(self, stream: bytes):
        self.stream = stream
        self.pos = 0

    def read_var_uint(self) -> int:
        value = shift = 0
        while True:
            if self.pos >= len(self.stream):
                raise RuntimeError("Truncated record stream")
            byte = self.stream[self.pos]
            self.pos += 1
            value |= (byte & 0x7F) << shift
            shift += 7
            if byte < 0x80:
                return value

    def read_message(self) -> bytes | None:
        if self.pos >= len(self.stream):
            return None
        end = self.pos + self.read_var_uint()
        if end > len(self.stream):
            raise RuntimeError("Truncated record stream")
        message, self.pos = self.stream[self.pos : end], end  # noqa
        return message

    def read_messages(self) -> Iterator[bytes]:
        while (message := self.read_message()) is not None:
            yield message


def _default(obj: Any) -> Any:
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    if hasattr(obj, "to_json"):
        return obj.to_json()
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def dumps(obj: Any, indent: int | None = None) -> str:
    """Canonical JSON: sorted keys, compact separators, numpy scalars as ints."""
    separators = (",", ": ") if indent is not None else (",", ":")
    return json.dumps(
        obj, sort_keys=True, indent=indent, separators=separators, default=_default, ensure_ascii=False
    )


async def get_new_path(path: str) -> str:
    """The first free sibling `name(i).ext` of path, for moving an old file aside."""
    p = Path(path)
    taken = {str(entry) async for entry in anyio.Path(p.parent).iterdir()}
    i = 1
    while (candidate := str(p.with_name(f"{p.stem}({i}){p.suffix}"))) in taken:
        i += 1
    return candidate
