"""Metrics against ground truth, tiled inference and PNG export."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import checkpoint, nets
from .errors import IndexOutOfRange, ShapeMismatch
from .tensor import ParamSet
from .volume import Volume, center_crop, normalize

# reported in place of an infinite PSNR when prediction and reference agree exactly
PSNR_CAP = 999.0
PNG_CLAMP = 3.0
DEFAULT_TILE = 16


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    mse: float
    psnr: float
    per_slice_mae: tuple
    region: tuple

    def lines(self):
        out = [
            f"region\t{'x'.join(str(d) for d in self.region)}",
            f"mae\t{self.mae:.6g}",
            f"mse\t{self.mse:.6g}",
            f"psnr\t{self.psnr:.6g}",
        ]
        out += [f"slice_mae\t{i}\t{v:.6g}" for i, v in enumerate(self.per_slice_mae)]
        return out

    def __str__(self):
        return "\n".join(self.lines())


def _arr(x):
    if isinstance(x, Volume):
        return x.data
    if hasattr(x, "data") and not isinstance(x, np.ndarray):
        return np.asarray(x.data, dtype=np.float64)
    return np.asarray(x, dtype=np.float64)


def compare(pred, reference):
    """Metrics of ``pred`` against ``reference``.

    MAE and MSE are symmetric in the two arguments.  PSNR uses the
    reference's dynamic range (max - min) as peak; a flat reference falls
    back to a peak of 1.  A 2D input counts as a single slice.
    """
    p, r = _arr(pred), _arr(reference)
    if p.shape != r.shape:
        raise ShapeMismatch(f"prediction {p.shape} and reference {r.shape} differ")
    if p.ndim == 2:
        p, r = p[None], r[None]
    diff = p - r
    mae = float(np.abs(diff).mean())
    mse = float(np.square(diff).mean())
    peak = float(r.max() - r.min()) or 1.0
    # separate logs: peak * peak underflows to 0 for ranges below ~1e-154
    psnr = PSNR_CAP if mse == 0 else min(PSNR_CAP, 20.0 * math.log10(peak) - 10.0 * math.log10(mse))
    per_slice = tuple(float(v) for v in np.abs(diff).mean(axis=(1, 2)))
    region = tuple(_arr(reference).shape)
    return MetricsReport(mae, mse, psnr, per_slice, region)


def _params(gen):
    if isinstance(gen, ParamSet):
        return gen.detached()
    params, _ = checkpoint.load(gen)
    return params.detached()


def infer_volume(task, gen, data, tile=DEFAULT_TILE):
    """Full generator output for a 3D task, computed in x tiles of ``tile`` output columns."""
    params = _params(gen)
    data = _arr(data)
    if task == "align":
        dims, fwd = nets.align_output_dims(data.shape), nets.forward_align
    elif task == "sr":
        dims, fwd = nets.sr_output_dims(data.shape), nets.forward_sr
    else:
        raise ValueError(f"infer_volume handles 'align' and 'sr', got {task!r}")
    if min(dims) < 1:
        fwd(params, data)  # raises InputTooSmall with the right message
    out = np.empty(dims)
    for x0 in range(0, dims[2], tile):
        x1 = min(dims[2], x0 + tile)
        window = ((0, dims[0]), (0, dims[1]), (x0, x1))
        out[:, :, x0:x1] = fwd(params, data, window).data
    return out


def predict_slice(gen, data, k):
    """Interpolated slice k from slices k-1 and k+1 (cropped by the generator margin)."""
    data = _arr(data)
    if not 1 <= k <= data.shape[0] - 2:
        raise IndexOutOfRange(f"slice {k} needs both neighbours in a {data.shape[0]}-slice volume")
    return nets.forward_interp(_params(gen), data[k - 1], data[k + 1]).data


def fill_slices(gen, volume, ks):
    """Copy of the volume with slices ``ks`` replaced (inside the generator margin) by predictions."""
    data = _arr(volume).copy()
    m = nets.INTERP_SHRINK // 2
    for k in ks:
        pred = predict_slice(gen, data, k)
        data[k, m:m + pred.shape[0], m:m + pred.shape[1]] = pred
    return data


def evaluate_interpolation(gen, volume, k, normalize_input=True):
    """Predict slice k of ``volume`` from its neighbours and score it on the cropped region."""
    data = normalize(volume).data if normalize_input else _arr(volume)
    pred = predict_slice(gen, data, k)
    return compare(pred, center_crop(data[k], pred.shape))


def evaluate_alignment(gen, truth, normalize_input=True, tile=DEFAULT_TILE):
    """(input vs clean, output vs clean) on the region left after the generator margin.

    The degraded volume is normalized as in training; the output is compared
    in those normalized units, as is the clean volume (normalized by
    construction).
    """
    inp = normalize(truth.degraded).data if normalize_input else _arr(truth.degraded)
    out = infer_volume("align", gen, inp, tile)
    clean = center_crop(_arr(truth.clean), out.shape)
    return compare(center_crop(inp, out.shape), clean), compare(out, clean)


def quantize(img):
    """Normalized values clamped to [-3, 3], mapped affinely onto 0..255 (0 -> 128)."""
    v = np.clip(_arr(img), -PNG_CLAMP, PNG_CLAMP)
    return np.rint((v + PNG_CLAMP) * (255.0 / (2 * PNG_CLAMP))).astype(np.uint8)


def export_png(img, path):
    """Write a 2D image as 8-bit grayscale PNG."""
    from PIL import Image

    a = _arr(img)
    if a.ndim != 2:
        raise ShapeMismatch(f"export_png needs a 2D image, got shape {a.shape}")
    Image.fromarray(quantize(a)).save(path, format="PNG")
    return path
