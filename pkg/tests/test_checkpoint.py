import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from lirec import checkpoint
from lirec.checkpoint import CheckpointError

names = st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=12)
arrays = hnp.arrays(np.float64, hnp.array_shapes(min_dims=0, max_dims=3, max_side=4),
                    elements=st.floats(allow_nan=False, allow_infinity=False, width=64))


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(names, arrays, max_size=4), st.dictionaries(names, arrays, max_size=3),
       st.integers(0, 2**63), st.dictionaries(st.text(max_size=5), st.integers(), max_size=3))
def test_round_trip(params, opt, step, meta):
    p2, o2, s2, m2 = checkpoint.loads(checkpoint.dumps(params, opt, step, meta))
    assert s2 == step and m2 == meta
    for src, dst in ((params, p2), (opt, o2)):
        assert list(src) == list(dst)
        for k in src:
            assert dst[k].shape == src[k].shape
            assert dst[k].tobytes() == np.array(src[k], order="C").tobytes()


def test_layout():
    data = checkpoint.dumps({"w": np.array([1.5, -2.0])}, step=3)
    assert data[:4] == b"LIRC"
    assert struct.unpack("<H", data[4:6]) == (1,)
    assert struct.unpack("<I", data[6:10]) == (1,)       # one parameter tensor
    assert struct.unpack("<I", data[10:14]) == (1,)      # name length
    assert data[14:15] == b"w"
    assert struct.unpack("<I", data[15:19]) == (1,)      # ndim
    assert struct.unpack("<Q", data[19:27]) == (2,)
    assert struct.unpack("<2d", data[27:43]) == (1.5, -2.0)


def test_bad_magic():
    with pytest.raises(CheckpointError, match="magic"):
        checkpoint.loads(b"NOPE" + b"\0" * 20)


def test_bad_version():
    data = bytearray(checkpoint.dumps({}))
    data[4:6] = struct.pack("<H", 9)
    with pytest.raises(CheckpointError, match="version 9"):
        checkpoint.loads(bytes(data))


def test_truncated():
    data = checkpoint.dumps({"w": np.ones(4)})
    with pytest.raises(CheckpointError, match="truncated"):
        checkpoint.loads(data[:-20])


def test_atomic_save_leaves_no_temp(tmp_path):
    path = tmp_path / "a.lirc"
    checkpoint.save(path, {"w": np.ones(2)}, {"m/w": np.zeros(2)}, 5, {"epoch": 1})
    assert [p.name for p in tmp_path.iterdir()] == ["a.lirc"]
    params, opt, step, meta = checkpoint.load(path)
    assert step == 5 and meta == {"epoch": 1} and list(opt) == ["m/w"]


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError, match="no such file"):
        checkpoint.load(tmp_path / "absent.lirc")
