"""LIRC binary tensor container, used for checkpoints and feature files.

Layout (all integers little-endian)::

    b"LIRC"                     magic
    u16                         format version (1)
    table                       parameter tensors
    table                       optimizer state tensors
    u64                         step counter
    u32 + UTF-8 JSON            metadata block (may be "{}")

    table := u32 count, then per tensor:
        u32 name length, UTF-8 name, u32 ndim, ndim x u64 dims,
        prod(dims) x f64 payload
"""

import io
import json
import os
import struct
import tempfile

import numpy as np

MAGIC = b"LIRC"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _write_table(f, tensors):
    f.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        arr = np.array(arr, dtype="<f8", order="C", copy=True)
        raw = name.encode("utf-8")
        f.write(struct.pack("<I", len(raw)))
        f.write(raw)
        f.write(struct.pack("<I", arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        f.write(arr.tobytes())


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise CheckpointError(f"truncated file while reading {what}")
    return buf


def _read_table(f):
    (count,) = struct.unpack("<I", _read_exact(f, 4, "table size"))
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", _read_exact(f, 4, "name length"))
        name = _read_exact(f, nlen, "tensor name").decode("utf-8")
        (ndim,) = struct.unpack("<I", _read_exact(f, 4, f"ndim of {name}"))
        dims = struct.unpack(f"<{ndim}Q", _read_exact(f, 8 * ndim, f"dims of {name}"))
        size = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        payload = _read_exact(f, 8 * size, f"payload of {name}")
        out[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
    return out


def dumps(params, optimizer=None, step=0, meta=None):
    f = io.BytesIO()
    f.write(MAGIC)
    f.write(struct.pack("<H", VERSION))
    _write_table(f, params)
    _write_table(f, optimizer or {})
    f.write(struct.pack("<Q", step))
    raw = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    f.write(struct.pack("<I", len(raw)))
    f.write(raw)
    return f.getvalue()


def loads(data):
    f = io.BytesIO(data)
    if f.read(4) != MAGIC:
        raise CheckpointError("bad magic, not a LIRC file")
    (version,) = struct.unpack("<H", _read_exact(f, 2, "version"))
    if version != VERSION:
        raise CheckpointError(f"unsupported format version {version}")
    params = _read_table(f)
    optimizer = _read_table(f)
    (step,) = struct.unpack("<Q", _read_exact(f, 8, "step counter"))
    (mlen,) = struct.unpack("<I", _read_exact(f, 4, "metadata length"))
    meta = json.loads(_read_exact(f, mlen, "metadata").decode("utf-8"))
    return params, optimizer, step, meta


def save(path, params, optimizer=None, step=0, meta=None):
    """Atomic write: temp file in the target directory, then rename."""
    data = dumps(params, optimizer, step, meta)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".lirc")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load(path):
    try:
        with open(path, "rb") as f:
            data = f.read()
    except FileNotFoundError:
        raise CheckpointError(f"no such file: {path}") from None
    try:
        return loads(data)
    except CheckpointError as e:
        raise CheckpointError(f"{path}: {e}") from None


def save_tensors(path, tensors):
    save(path, tensors)


def load_tensors(path):
    return load(path)[0]
