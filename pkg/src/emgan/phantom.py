"""Synthetic membrane-like volumes with known jitter, noise and missing slices.

Real serial-section data has no ground truth for alignment or for a missing
slice.  These phantoms do: the clean volume is kept, and every degradation
applied to it is recorded so restorations can be scored exactly.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import DegenerateVolume, IndexOutOfRange
from .volume import Volume, _atomic_write, normalize, write_vxv

N_HARMONICS = 12
MEMBRANE_BAND = 0.25  # |field| / std below this is membrane
SMOOTH_SIGMA = 1.0


@dataclass(frozen=True)
class PhantomConfig:
    dims: tuple = (64, 64, 64)
    structure_scale: float = 12.0
    jitter_amplitude: int = 2
    noise_sigma: float = 0.1
    n_dropped: int = 0
    seed: int = 0

    def __post_init__(self):
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError(f"dims must be three positive extents, got {self.dims}")
        if self.jitter_amplitude < 0 or int(self.jitter_amplitude) != self.jitter_amplitude:
            raise ValueError("jitter_amplitude must be a non-negative integer")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.structure_scale < 2:
            raise ValueError("structure_scale must be >= 2")
        if not 0 <= self.n_dropped <= max(self.dims[0] - 2, 0):
            raise ValueError(f"cannot drop {self.n_dropped} interior slices from {self.dims[0]}")


@dataclass(frozen=True)
class PhantomTruth:
    clean: Volume
    degraded: Volume
    offsets: np.ndarray  # (Z, 2) integer (dy, dx) per slice
    dropped_slices: list = field(default_factory=list)


def harmonic_field(dims, scale, rng, n_harmonics=N_HARMONICS):
    """Sum of plane waves with isotropic random directions and wavelengths near ``scale``."""
    grids = np.meshgrid(*(np.arange(n, dtype=np.float64) for n in dims), indexing="ij")
    out = np.zeros(dims)
    for _ in range(n_harmonics):
        direction = rng.standard_normal(len(dims))
        direction /= np.linalg.norm(direction)
        wavelength = scale * rng.uniform(0.75, 1.5)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        arg = sum(d * g for d, g in zip(direction, grids))
        out += np.cos(2.0 * math.pi * arg / wavelength + phase)
    return out


def membrane_volume(dims, scale, rng):
    """Thin sheets along the zero set of a harmonic field, smoothed, normalized."""
    f = harmonic_field(dims, scale, rng)
    sheets = (np.abs(f) < MEMBRANE_BAND * f.std()).astype(np.float64)
    smooth = gaussian_filter(sheets, SMOOTH_SIGMA, mode="nearest")
    return normalize(Volume(smooth)).data


def apply_jitter(v, offsets):
    """Translate slice z by ``offsets[z] = (dy, dx)``; vacated pixels copy the edge."""
    data = v.data if isinstance(v, Volume) else np.asarray(v, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.int64).reshape(-1, 2)
    z, ny, nx = data.shape
    if len(offsets) != z:
        raise ValueError(f"need one offset per slice ({z}), got {len(offsets)}")
    out = np.empty_like(data)
    ys, xs = np.arange(ny), np.arange(nx)
    for k, (dy, dx) in enumerate(offsets):
        rows = np.clip(ys - dy, 0, ny - 1)
        cols = np.clip(xs - dx, 0, nx - 1)
        out[k] = data[k][np.ix_(rows, cols)]
    return Volume(out, v.voxel_size_nm) if isinstance(v, Volume) else out


def drop_slice(v, k):
    """Zero slice ``k`` (1 <= k <= Z-2); returns (damaged volume, the removed slice)."""
    data = v.data if isinstance(v, Volume) else np.asarray(v, dtype=np.float64)
    if not 1 <= k <= data.shape[0] - 2:
        raise IndexOutOfRange(f"slice {k} is not interior to a {data.shape[0]}-slice volume")
    held = data[k].copy()
    out = data.copy()
    out[k] = 0.0
    return (Volume(out, v.voxel_size_nm) if isinstance(v, Volume) else out), held


def generate_phantom(cfg):
    z, y, x = cfg.dims
    if min(cfg.dims) < cfg.structure_scale:
        raise DegenerateVolume(f"dims {cfg.dims} too small for structure scale {cfg.structure_scale}")
    rng = np.random.default_rng(cfg.seed)
    clean = membrane_volume(cfg.dims, cfg.structure_scale, rng)
    j = int(cfg.jitter_amplitude)
    offsets = rng.integers(-j, j + 1, size=(z, 2)) if j else np.zeros((z, 2), dtype=np.int64)
    degraded = apply_jitter(clean, offsets)
    if cfg.noise_sigma > 0:
        degraded = degraded + cfg.noise_sigma * rng.standard_normal(degraded.shape)
    dropped = []
    if cfg.n_dropped:
        dropped = sorted(int(k) for k in rng.choice(np.arange(1, z - 1), cfg.n_dropped, replace=False))
        for k in dropped:
            degraded[k] = 0.0
    return PhantomTruth(Volume(clean), Volume(degraded), offsets.astype(np.int64), dropped)


def make_averaging_volume(dims, noise, seed, scale=12.0):
    """Volume that is linear in z plus i.i.d. Gaussian noise of std ``noise``.

    Without noise every interior slice is exactly the mean of its two
    neighbours, so the interpolation task has a known perfect answer.
    """
    z, y, x = dims
    if z < 3:
        raise DegenerateVolume("averaging volume needs at least 3 slices")
    rng = np.random.default_rng(seed)
    a = harmonic_field((y, x), scale, rng)
    b = harmonic_field((y, x), scale, rng)
    t = np.linspace(-1.0, 1.0, z)[:, None, None]
    base = normalize(Volume(a[None] + t * b[None])).data
    if noise > 0:
        base = base + noise * rng.standard_normal(base.shape)
    return Volume(base)


def expected_abs_noise(noise):
    """E|e| for e ~ N(0, noise^2)."""
    return noise * math.sqrt(2.0 / math.pi)


def write_truth(prefix, truth):
    """Write ``<prefix>.clean.vxv``, ``<prefix>.degraded.vxv`` and the ``<prefix>.txt`` sidecar."""
    write_vxv(f"{prefix}.clean.vxv", truth.clean)
    write_vxv(f"{prefix}.degraded.vxv", truth.degraded)
    lines = [f"{k} {int(dy)} {int(dx)}" for k, (dy, dx) in enumerate(truth.offsets)]
    lines.append("dropped: " + ",".join(str(k) for k in truth.dropped_slices))
    text = "\n".join(lines) + "\n"
    _atomic_write(f"{prefix}.txt", lambda fh: fh.write(text.encode()))


def read_sidecar(path):
    offsets, dropped = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("dropped:"):
                rest = line.split(":", 1)[1].strip()
                dropped = [int(t) for t in rest.split(",") if t.strip()]
            else:
                _, dy, dx = line.split()
                offsets.append((int(dy), int(dx)))
    return np.asarray(offsets, dtype=np.int64).reshape(-1, 2), dropped


def read_truth(prefix):
    from .volume import read_vxv

    offsets, dropped = read_sidecar(f"{prefix}.txt")
    return PhantomTruth(read_vxv(f"{prefix}.clean.vxv"), read_vxv(f"{prefix}.degraded.vxv"),
                        offsets, dropped)


def truth_paths(prefix):
    return tuple(os.fspath(p) for p in (f"{prefix}.clean.vxv", f"{prefix}.degraded.vxv", f"{prefix}.txt"))
