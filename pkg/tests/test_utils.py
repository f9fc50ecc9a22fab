import numpy as np
import pytest

from pmds_lrs.utils import Decoder, dumps, frame, write_var_uint


def test_var_uint():
    assert write_var_uint(0) == b"\x00"
    assert write_var_uint(127) == b"\x7f"
    assert write_var_uint(300) == b"\xac\x02"
    assert Decoder(b"\xac\x02").read_var_uint() == 300


def test_decoder_reads_frames_back():
    messages = [b"record", b"", b"x" * 200]
    stream = b"".join(frame(m) for m in messages)
    assert list(Decoder(stream).read_messages()) == messages
    with pytest.raises(RuntimeError):
        list(Decoder(stream[:-1]).read_messages())


def test_dumps_is_canonical():
    data = {"b": np.int64(3), "a": [np.bool_(True), {2, 1}]}
    assert dumps(data) == '{"a":[true,[1,2]],"b":3}'
    with pytest.raises(TypeError):
        dumps(object())
