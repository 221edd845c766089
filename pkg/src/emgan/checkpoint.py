"""VXCK checkpoint files.

Layout (all little-endian)::

    b"VXCK"  u32 version=1  u32 n_tensors
    n_tensors x { u16 name_len, name (UTF-8), u8 rank, rank x u32 dims, f64 data }
    optional:
    b"ADAM"  u32 n  n x <tensor> (first moments)  n x <tensor> (second moments)  u64 t
"""

import io
import struct

import numpy as np

from .errors import FormatError
from .optim import AdamState
from .tensor import ParamSet
from .volume import _atomic_write

MAGIC = b"VXCK"
ADAM_MAGIC = b"ADAM"
VERSION = 1


def _write_tensor(fh, name, arr):
    raw = name.encode("utf-8")
    arr = np.asarray(arr, dtype="<f8", order="C")  # ascontiguousarray would promote 0-d to 1-d
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)
    fh.write(struct.pack("<B", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(arr.tobytes())


def _read_exact(fh, n):
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError("truncated checkpoint")
    return buf


def _read_tensor(fh):
    (n,) = struct.unpack("<H", _read_exact(fh, 2))
    name = _read_exact(fh, n).decode("utf-8")
    (rank,) = struct.unpack("<B", _read_exact(fh, 1))
    dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank)) if rank else ()
    count = int(np.prod(dims)) if rank else 1
    data = np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8").astype(np.float64)
    return name, data.reshape(dims)


def encode(params, adam=None):
    fh = io.BytesIO()
    fh.write(MAGIC)
    fh.write(struct.pack("<II", VERSION, len(params)))
    for name, t in params.items():
        _write_tensor(fh, name, t.data)
    if adam is not None:
        names = params.names()
        fh.write(ADAM_MAGIC)
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            _write_tensor(fh, name, adam.m.get(name, np.zeros_like(params[name].data)))
        for name in names:
            _write_tensor(fh, name, adam.v.get(name, np.zeros_like(params[name].data)))
        fh.write(struct.pack("<Q", adam.t))
    return fh.getvalue()


def decode(blob, adam_hyper=None):
    fh = io.BytesIO(blob)
    if _read_exact(fh, 4) != MAGIC:
        raise FormatError("not a VXCK checkpoint")
    version, count = struct.unpack("<II", _read_exact(fh, 8))
    if version != VERSION:
        raise FormatError(f"unsupported VXCK version {version}")
    params = ParamSet()
    for _ in range(count):
        name, data = _read_tensor(fh)
        params.add(name, data)
    adam = None
    tag = fh.read(4)
    if tag:
        if tag != ADAM_MAGIC:
            raise FormatError(f"unexpected trailing block {tag!r}")
        (n,) = struct.unpack("<I", _read_exact(fh, 4))
        adam = AdamState(**(adam_hyper or {}))
        for _ in range(n):
            name, data = _read_tensor(fh)
            adam.m[name] = data
        for _ in range(n):
            name, data = _read_tensor(fh)
            adam.v[name] = data
        (adam.t,) = struct.unpack("<Q", _read_exact(fh, 8))
        if fh.read(1):
            raise FormatError("trailing bytes after ADAM block")
    return params, adam


def save(path, params, adam=None):
    blob = encode(params, adam)
    _atomic_write(path, lambda fh: fh.write(blob))


def load(path, adam_hyper=None):
    with open(path, "rb") as fh:
        return decode(fh.read(), adam_hyper)
