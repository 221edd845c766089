"""Volumes, normalization, patch sampling, reslicing and the VXV1 file format.

Arrays are indexed ``[z, y, x]`` with z the slowest axis, both in memory
and on disk.  Dimension triples quoted as ``x * y * z`` (as is common for
EM data) are converted only at the I/O boundary.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import (
    CropTooLarge,
    DegenerateVolume,
    FormatError,
    IndexOutOfRange,
    VolumeTooSmall,
)
from .tensor import Tensor, getitem

VXV_MAGIC = b"VXV1"
_VXV_HEADER = struct.Struct("<4sIII3f")

# generator margin before the z-upsampler of the super-resolution net
SR_Z_MARGIN = 7


@dataclass(frozen=True)
class Volume:
    data: np.ndarray
    voxel_size_nm: tuple | None = None

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"volume data must be a non-empty 3-d array, got shape {arr.shape}")
        object.__setattr__(self, "data", arr)
        if self.voxel_size_nm is not None:
            vs = tuple(float(s) for s in self.voxel_size_nm)
            if len(vs) != 3 or min(vs) <= 0:
                raise ValueError(f"voxel sizes must be three positive numbers, got {self.voxel_size_nm}")
            object.__setattr__(self, "voxel_size_nm", vs)

    @property
    def dims(self):
        return self.data.shape

    def __eq__(self, other):
        return (isinstance(other, Volume) and self.voxel_size_nm == other.voxel_size_nm
                and np.array_equal(self.data, other.data))

    __hash__ = None


@dataclass(frozen=True)
class SliceTriple:
    below: np.ndarray
    target: np.ndarray
    above: np.ndarray
    k: int
    y0: int = 0
    x0: int = 0


@dataclass(frozen=True)
class SlicePair:
    below: np.ndarray
    target: np.ndarray
    k: int
    y0: int = 0
    x0: int = 0


def _arr(v):
    return v.data if isinstance(v, Volume) else np.asarray(v, dtype=np.float64)


def normalize(v):
    """Zero mean, unit population standard deviation."""
    data = _arr(v)
    mu = data.mean()
    sd = data.std()
    if not sd > 0:
        raise DegenerateVolume("cannot normalize a constant volume (std == 0)")
    out = (data - mu) / sd
    # one correction pass removes the rounding residue of the first
    out = (out - out.mean()) / out.std()
    return Volume(out, v.voxel_size_nm if isinstance(v, Volume) else None)


def _check_inplane(data, patch_hw):
    h, w = patch_hw
    _, ny, nx = data.shape
    if h < 1 or w < 1 or ny < h or nx < w:
        raise VolumeTooSmall(f"patch {patch_hw} does not fit in-plane extent {(ny, nx)}")
    return h, w


def sample_triple(v, rng, patch_hw):
    """Slices k-1, k, k+1 at a uniform k in [1, Z-2] and a uniform in-plane offset."""
    data = _arr(v)
    h, w = _check_inplane(data, patch_hw)
    if data.shape[0] < 3:
        raise VolumeTooSmall(f"need at least 3 slices, volume has {data.shape[0]}")
    k = int(rng.integers(1, data.shape[0] - 1))
    y0 = int(rng.integers(0, data.shape[1] - h + 1))
    x0 = int(rng.integers(0, data.shape[2] - w + 1))
    win = data[k - 1:k + 2, y0:y0 + h, x0:x0 + w]
    return SliceTriple(win[0].copy(), win[1].copy(), win[2].copy(), k, y0, x0)


def sample_pair(v, rng, patch_hw):
    """Adjacent slices (k-1, k) at a uniform k in [1, Z-1]."""
    data = _arr(v)
    h, w = _check_inplane(data, patch_hw)
    if data.shape[0] < 2:
        raise VolumeTooSmall(f"need at least 2 slices, volume has {data.shape[0]}")
    k = int(rng.integers(1, data.shape[0]))
    y0 = int(rng.integers(0, data.shape[1] - h + 1))
    x0 = int(rng.integers(0, data.shape[2] - w + 1))
    win = data[k - 1:k + 1, y0:y0 + h, x0:x0 + w]
    return SlicePair(win[0].copy(), win[1].copy(), k, y0, x0)


def sample_block(v, rng, dims):
    """Uniformly placed sub-volume of shape ``dims`` (z, y, x)."""
    data = _arr(v)
    dims = tuple(int(d) for d in dims)
    if any(d < 1 or d > n for d, n in zip(dims, data.shape)):
        raise VolumeTooSmall(f"block {dims} does not fit in volume {data.shape}")
    o = [int(rng.integers(0, n - d + 1)) for d, n in zip(dims, data.shape)]
    return data[o[0]:o[0] + dims[0], o[1]:o[1] + dims[1], o[2]:o[2] + dims[2]].copy()


def reslice(v, plane, index):
    """Orthogonal reslice: 'yz' at x=index gives a Z x Y image, 'xz' at y=index gives Z x X."""
    data = _arr(v)
    if plane == "yz":
        axis = 2
    elif plane == "xz":
        axis = 1
    else:
        raise ValueError(f"plane must be 'xz' or 'yz', got {plane!r}")
    n = data.shape[axis]
    if not 0 <= index < n:
        raise IndexOutOfRange(f"{plane} reslice index {index} outside [0, {n})")
    return data[:, :, index].copy() if axis == 2 else data[:, index, :].copy()


def crop_slices(src_dims, target_dims):
    """Index slices of a centred crop; an odd surplus loses its extra sample on the high side."""
    if len(src_dims) != len(target_dims):
        raise CropTooLarge(f"rank mismatch: {src_dims} vs {target_dims}")
    out = []
    for s, t in zip(src_dims, target_dims):
        if t > s or t < 1:
            raise CropTooLarge(f"cannot crop extent {s} to {t}")
        lo = (s - t) // 2
        out.append(slice(lo, lo + t))
    return tuple(out)


def center_crop(img, target_dims):
    """Centred crop of an array, Volume or Tensor over its trailing axes."""
    target_dims = tuple(int(t) for t in target_dims)
    if isinstance(img, Volume):
        return Volume(img.data[crop_slices(img.data.shape, target_dims)], img.voxel_size_nm)
    shape = img.shape
    lead = len(shape) - len(target_dims)
    if lead < 0:
        raise CropTooLarge(f"target {target_dims} has more axes than {shape}")
    idx = (slice(None),) * lead + crop_slices(shape[lead:], target_dims)
    if isinstance(img, Tensor):
        return img if tuple(shape[lead:]) == target_dims else getitem(img, idx)
    return np.asarray(img)[idx]


def sr_slice_correspondence(in_z):
    """(output z, input z) pairs linking even super-resolved slices to original slices."""
    if in_z < 2 * SR_Z_MARGIN + 1:
        raise VolumeTooSmall(f"super-resolution needs at least {2 * SR_Z_MARGIN + 1} slices, got {in_z}")
    return [(2 * i, i + SR_Z_MARGIN) for i in range(in_z - 2 * SR_Z_MARGIN)]


# -- file formats -----------------------------------------------------------

def _atomic_write(path, payload_writer):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "wb") as fh:
            payload_writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_vxv(path, v):
    data = _arr(v)
    sizes = v.voxel_size_nm if isinstance(v, Volume) and v.voxel_size_nm else (0.0, 0.0, 0.0)
    z, y, x = data.shape

    def write(fh):
        fh.write(_VXV_HEADER.pack(VXV_MAGIC, z, y, x, *sizes))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())

    _atomic_write(path, write)


def read_vxv(path):
    with open(path, "rb") as fh:
        head = fh.read(_VXV_HEADER.size)
        if len(head) < _VXV_HEADER.size:
            raise FormatError(f"{path}: truncated VXV1 header")
        magic, z, y, x, sz, sy, sx = _VXV_HEADER.unpack(head)
        if magic != VXV_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        n = z * y * x
        body = fh.read(4 * n)
        if len(body) != 4 * n or fh.read(1):
            raise FormatError(f"{path}: expected {n} voxels")
    data = np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(z, y, x)
    sizes = (sz, sy, sx)
    return Volume(data, sizes if min(sizes) > 0 else None)


def import_raw(path, dims_xyz, voxel_size_nm=None):
    """Headerless u8 volume, x fastest, mapped to [0, 1]."""
    nx, ny, nz = (int(d) for d in dims_xyz)
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size != nx * ny * nz:
        raise FormatError(f"{path}: {raw.size} bytes, expected {nx}*{ny}*{nz}={nx * ny * nz}")
    return Volume(raw.reshape(nz, ny, nx) / 255.0, voxel_size_nm)


def export_raw(path, v):
    """Inverse of :func:`import_raw` for data in [0, 1]."""
    data = np.clip(np.rint(_arr(v) * 255.0), 0, 255).astype(np.uint8)
    _atomic_write(path, lambda fh: fh.write(data.tobytes()))
