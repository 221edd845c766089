"""Adversarial and pixel-only training loops for the three tasks.

One adversarial step is: generator forward (no graph) to make fakes, one
discriminator update on fake/real, then two generator updates, each with a
fresh forward and backward through the just-updated discriminator.  Losses
are summed over the minibatch; backward runs per sample so memory stays
bounded by one sample's graph.

For alignment and super-resolution the discriminator only ever sees one
reslice plane of the generator output per sample, so the generator is
evaluated on just the output window that plane needs.  This is exact for
the adversarial term.  The optional pixel term is then measured on that
same window (see :func:`train_step_align`).
"""

from __future__ import annotations

import json
import math
import os
import shutil
import tempfile
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import checkpoint, nets
from .errors import NonFiniteLoss, ShapeMismatch, VolumeTooSmall
from .losses import bce_loss, pixel_loss
from .optim import AdamState, adam_step
from .tensor import ParamSet, Tensor, _sigmoid, getitem, mul, reshape
from .volume import (
    SR_Z_MARGIN,
    Volume,
    center_crop,
    crop_slices,
    normalize,
    sample_block,
    sample_pair,
    sample_triple,
)

TASKS = ("interp", "align", "sr")
BASELINE_LR = 0.001
DEFAULT_PATCH = {"interp": 100, "align": 64, "sr": 64}
SHRINK = {"interp": nets.INTERP_SHRINK, "align": nets.ALIGN_SHRINK, "sr": nets.SR_SHRINK}
MIN_PATCH = {task: nets.DISC_MIN_INPUT + m for task, m in SHRINK.items()}


@dataclass
class TrainingConfig:
    task: str = "interp"
    adversarial: bool = True
    use_pixelwise_loss: bool = False
    pixel_loss: str = "l1"
    lr: float = 0.002
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 6
    max_step: int = 1000
    lambda_pix: float | None = None  # None: 1 / (pixels compared per sample) for L1, 1 for MSE
    patch: int | None = None  # in-plane side (interp) or cube side (align, sr)
    seed: int = 0
    checkpoint_every: int = 0  # 0: initial and final checkpoints only
    full_volume: bool = False  # evaluate the whole generator output, not just the reslice window
    normalize: bool = True

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.pixel_loss not in ("l1", "mse"):
            raise ValueError(f"pixel_loss must be 'l1' or 'mse', got {self.pixel_loss!r}")
        if self.batch_size < 1:
            raise ValueError("batch size m must be >= 1")
        if not self.lr > 0:
            raise ValueError("learning rate must be > 0")
        if not 0 <= self.beta1 < 1:
            raise ValueError("beta1 must lie in [0, 1)")
        if self.max_step < 0:
            raise ValueError("max_step must be >= 0")
        if not self.adversarial and not self.use_pixelwise_loss:
            raise ValueError("with adversarial=False the pixel loss is the only objective; enable it")
        if self.patch is None:
            self.patch = DEFAULT_PATCH[self.task]
        if self.adversarial and self.patch < MIN_PATCH[self.task]:
            raise ValueError(
                f"{self.task} patches must be >= {MIN_PATCH[self.task]} so the discriminator "
                f"sees at least {nets.DISC_MIN_INPUT} pixels per side, got {self.patch}"
            )
        if self.patch <= SHRINK[self.task]:
            raise ValueError(f"{self.task} patches must exceed the generator margin {SHRINK[self.task]}")

    @classmethod
    def baseline(cls, **kw):
        """Pixel-only interpolation settings: lr 0.001, batch 6, L1."""
        kw.setdefault("lr", BASELINE_LR)
        return cls(task="interp", adversarial=False, use_pixelwise_loss=True, **kw)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def adam_hyper(self):
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2}


@dataclass
class StepReport:
    step: int
    d_loss: float
    g_loss: float
    pixel_loss: float
    p_real: float
    p_fake: float

    def values(self):
        return (self.d_loss, self.g_loss, self.pixel_loss, self.p_real, self.p_fake)

    def is_finite(self):
        return all(math.isfinite(v) for v in self.values())

    def tsv(self):
        return "\t".join([str(self.step)] + [repr(float(v)) for v in self.values()])

    @classmethod
    def from_tsv(cls, line):
        parts = line.rstrip("\n").split("\t")
        return cls(int(parts[0]), *(float(p) for p in parts[1:]))


@dataclass
class InterpBatch:
    triples: list
    pairs: list


@dataclass
class VolumeBatch:
    patches: list
    planes: list  # per sample: ('xz' | 'yz', index into the output)
    real_z: list  # per sample: z of the real xy slice


# -- geometry helpers -----------------------------------------------------------------------

def generator_output_hw(cfg):
    p = cfg.patch
    if cfg.task == "interp":
        return (p - nets.INTERP_SHRINK, p - nets.INTERP_SHRINK)
    if cfg.task == "align":
        return (p - nets.ALIGN_SHRINK,) * 2
    return (p - nets.SR_SHRINK,) * 2


def disc_slices(cfg):
    return 2 if cfg.task == "interp" else 1


def output_dims(cfg):
    p = cfg.patch
    if cfg.task == "align":
        return nets.align_output_dims((p, p, p))
    if cfg.task == "sr":
        return nets.sr_output_dims((p, p, p))
    raise ValueError("output_dims is defined for volume tasks")


def build_models(cfg):
    """Generator and discriminator for ``cfg`` (seeds cfg.seed and cfg.seed + 1).

    Pixel-only runs get an empty discriminator.
    """
    gen, _ = nets.build(cfg.task, cfg.seed)
    if not cfg.adversarial:
        return gen, ParamSet()
    disc, _ = nets.build_discriminator(disc_slices(cfg), generator_output_hw(cfg), cfg.seed + 1)
    return gen, disc


# -- sampling --------------------------------------------------------------------------------

def sample_interp_batch(volume, rng, cfg):
    hw = (cfg.patch, cfg.patch)
    triples = [sample_triple(volume, rng, hw) for _ in range(cfg.batch_size)]
    pairs = [sample_pair(volume, rng, hw) for _ in range(cfg.batch_size)] if cfg.adversarial else []
    return InterpBatch(triples, pairs)


def sample_volume_batch(volume, rng, cfg):
    p = cfg.patch
    zo, yo, xo = output_dims(cfg)
    patches, planes, real_z = [], [], []
    for _ in range(cfg.batch_size):
        patches.append(sample_block(volume, rng, (p, p, p)))
        if int(rng.integers(2)):
            planes.append(("xz", int(rng.integers(yo))))
        else:
            planes.append(("yz", int(rng.integers(xo))))
        real_z.append(int(rng.integers(p)))
    return VolumeBatch(patches, planes, real_z)


def sample_batch(volume, rng, cfg):
    if cfg.task == "interp":
        return sample_interp_batch(volume, rng, cfg)
    return sample_volume_batch(volume, rng, cfg)


# -- per-sample pieces -----------------------------------------------------------------------

def _check_finite(report, where):
    if not report.is_finite():
        raise NonFiniteLoss(f"non-finite values at {where}: {report}")


def _lam(cfg, n_pixels):
    """Pixel-loss weight; by default the summed L1 term becomes a per-pixel mean (MSE already is one)."""
    if cfg.lambda_pix is not None:
        return cfg.lambda_pix
    return 1.0 / n_pixels if cfg.pixel_loss == "l1" else 1.0


def _interp_fake(gen, triple):
    return nets.forward_interp(gen, triple.below, triple.above)


def fake_window(cfg, plane):
    """Output window of the generator that holds the discriminator's fake reslice."""
    zo, yo, xo = output_dims(cfg)
    name, idx = plane
    if cfg.task == "sr":
        zs = crop_slices((zo,), (generator_output_hw(cfg)[0],))[0]
        zr = (zs.start, zs.stop)
    else:
        zr = (0, zo)
    if name == "yz":
        return (zr, (0, yo), (idx, idx + 1))
    return (zr, (idx, idx + 1), (0, xo))


def _volume_forward(cfg, gen, patch, window):
    fwd = nets.forward_align if cfg.task == "align" else nets.forward_sr
    if cfg.full_volume:
        full = fwd(gen, patch)
        return getitem(full, tuple(slice(a, b) for a, b in window))
    return fwd(gen, patch, window)


def _reslice_image(block, plane):
    """2D reslice image from a 3D window tensor that is one voxel thick."""
    zz = block.shape[0]
    return reshape(block, (zz, block.size // zz))


def volume_pixel_terms(cfg, block, patch, window):
    """(prediction, reference) tensors for the pixel loss on one output window.

    Alignment compares the window with the input voxels it sits over.
    Super-resolution compares only even output slices, each against the input
    slice it corresponds to; odd (synthesised) slices get no pixel term.
    """
    (z0, z1), (y0, y1), (x0, x1) = window
    if cfg.task == "align":
        m = nets.ALIGN_SHRINK // 2
        ref = patch[z0 + m:z1 + m, y0 + m:y1 + m, x0 + m:x1 + m]
        return block, Tensor(ref)
    m = SR_Z_MARGIN
    even = [z for z in range(z0, z1) if z % 2 == 0]
    pred = getitem(block, (np.asarray([z - z0 for z in even]),))
    ref = patch[[z // 2 + m for z in even], y0 + m:y1 + m, x0 + m:x1 + m]
    return pred, Tensor(ref)


def sr_pixel_loss(cfg, output, patch, z_offset=0, yx_offset=(0, 0)):
    """Pixel loss of a super-resolved block against its input patch (even slices only)."""
    zz, yy, xx = output.shape
    window = ((z_offset, z_offset + zz), (yx_offset[0], yx_offset[0] + yy), (yx_offset[1], yx_offset[1] + xx))
    pred, ref = volume_pixel_terms(cfg, output, patch, window)
    lam = _lam(cfg, ref.size)
    return mul(pixel_loss(cfg.pixel_loss, pred, ref), lam)


# -- steps ---------------------------------------------------------------------------------------

def _d_update(disc, adam_d, fakes, reals, rng):
    """One discriminator update; returns (D_LOSS, mean p_real, mean p_fake)."""
    disc.zero_grad()
    d_total, pr, pf = 0.0, [], []
    for fake, real in zip(fakes, reals):
        lf = nets.forward_discriminator(disc, fake, rng, training=True)
        lr = nets.forward_discriminator(disc, real, rng, training=True)
        loss = bce_loss(lf, 0) + bce_loss(lr, 1)
        loss.backward()
        d_total += loss.item()
        pf.append(float(_sigmoid(lf.data)))
        pr.append(float(_sigmoid(lr.data)))
    check = StepReport(0, d_total, 0.0, 0.0, float(np.mean(pr)), float(np.mean(pf)))
    _check_finite(check, "discriminator update")
    adam_step(adam_d, disc)
    disc.zero_grad()
    return d_total, float(np.mean(pr)), float(np.mean(pf))


def _g_update(gen, adam_g, sample_losses):
    """One generator update from per-sample closures returning (total, adv, pix) tensors."""
    gen.zero_grad()
    g_total = pix_total = 0.0
    for fn in sample_losses:
        total, pix = fn()
        total.backward()
        g_total += total.item()
        pix_total += pix
    if not (math.isfinite(g_total) and math.isfinite(pix_total)):
        raise NonFiniteLoss(f"non-finite generator loss {g_total} (pixel {pix_total})")
    adam_step(adam_g, gen)
    gen.zero_grad()
    return g_total, pix_total


def train_step_interp(gen, disc, adam_g, adam_d, batch, cfg, rng, step=0):
    """One step on a batch of triples (generator input) and pairs (real examples)."""
    m = cfg.batch_size
    if len(batch.triples) != m or (cfg.adversarial and len(batch.pairs) != m):
        raise ShapeMismatch(f"batch must hold {m} triples and {m} pairs")
    out_hw = generator_output_hw(cfg)
    if batch.triples[0].below.shape != (cfg.patch, cfg.patch):
        raise ShapeMismatch(f"triples must be {cfg.patch}x{cfg.patch}, got {batch.triples[0].below.shape}")
    targets = [center_crop(t.target, out_hw) for t in batch.triples]
    belows = [center_crop(t.below, out_hw) for t in batch.triples]

    if not cfg.adversarial:
        return _pixel_only_interp(gen, adam_g, batch.triples, targets, cfg, step)

    frozen_g = gen.detached()
    fakes = [[belows[i], _interp_fake(frozen_g, t).data] for i, t in enumerate(batch.triples)]
    reals = [[center_crop(p.below, out_hw), center_crop(p.target, out_hw)] for p in batch.pairs]
    d_loss, p_real, p_fake = _d_update(disc, adam_d, fakes, reals, rng)

    def sample_loss(i, frozen_d):
        def fn():
            pred = _interp_fake(gen, batch.triples[i])
            total = bce_loss(nets.forward_discriminator(frozen_d, [belows[i], pred], rng, training=True), 1)
            pix = 0.0
            if cfg.use_pixelwise_loss:
                pl = mul(pixel_loss(cfg.pixel_loss, pred, targets[i]), _lam(cfg, pred.size))
                total = total + pl
                pix = pl.item()
            return total, pix
        return fn

    first = None
    for _ in range(2):
        frozen_d = disc.detached()
        g = _g_update(gen, adam_g, [sample_loss(i, frozen_d) for i in range(m)])
        first = first or g
    report = StepReport(step, d_loss, first[0], first[1], p_real, p_fake)
    _check_finite(report, f"step {step}")
    return report


def _pixel_only_interp(gen, adam_g, triples, targets, cfg, step):
    def sample_loss(i):
        def fn():
            pred = _interp_fake(gen, triples[i])
            pl = mul(pixel_loss(cfg.pixel_loss, pred, targets[i]), _lam(cfg, pred.size))
            return pl, pl.item()
        return fn

    g_loss, pix = _g_update(gen, adam_g, [sample_loss(i) for i in range(len(triples))])
    return StepReport(step, 0.0, g_loss, pix, 0.0, 0.0)


def _volume_step(gen, disc, adam_g, adam_d, batch, cfg, rng, step):
    m = cfg.batch_size
    if len(batch.patches) != m:
        raise ShapeMismatch(f"batch must hold {m} patches, got {len(batch.patches)}")
    p = cfg.patch
    for patch in batch.patches:
        if patch.shape != (p, p, p):
            raise ShapeMismatch(f"patches must be {p}^3 cubes, got {patch.shape}")
    out_hw = generator_output_hw(cfg)
    windows = [fake_window(cfg, plane) for plane in batch.planes]
    reals = [[center_crop(patch[z], out_hw)] for patch, z in zip(batch.patches, batch.real_z)]

    def losses_for(i, frozen_d):
        def fn():
            block = _volume_forward(cfg, gen, batch.patches[i], windows[i])
            total = None
            if cfg.adversarial:
                img = _reslice_image(block, batch.planes[i])
                total = bce_loss(nets.forward_discriminator(frozen_d, [img], rng, training=True), 1)
            pix = 0.0
            if cfg.use_pixelwise_loss:
                pred, ref = volume_pixel_terms(cfg, block, batch.patches[i], windows[i])
                pl = mul(pixel_loss(cfg.pixel_loss, pred, ref), _lam(cfg, ref.size))
                total = pl if total is None else total + pl
                pix = pl.item()
            return total, pix
        return fn

    if not cfg.adversarial:
        g_loss, pix = _g_update(gen, adam_g, [losses_for(i, None) for i in range(m)])
        return StepReport(step, 0.0, g_loss, pix, 0.0, 0.0)

    frozen_g = gen.detached()
    fakes = []
    for i in range(m):
        block = _volume_forward(cfg, frozen_g, batch.patches[i], windows[i])
        fakes.append([_reslice_image(block, batch.planes[i]).data])
    d_loss, p_real, p_fake = _d_update(disc, adam_d, fakes, reals, rng)

    first = None
    for _ in range(2):
        frozen_d = disc.detached()
        g = _g_update(gen, adam_g, [losses_for(i, frozen_d) for i in range(m)])
        first = first or g
    report = StepReport(step, d_loss, first[0], first[1], p_real, p_fake)
    _check_finite(report, f"step {step}")
    return report


def train_step_align(gen, disc, adam_g, adam_d, batch, cfg, rng, step=0):
    """Alignment step: fakes are xz/yz reslices of G(stack), reals are xy slices.

    The optional pixel term compares the generator output with the input
    voxels under it, over the output window computed for the fake reslice
    (the whole output when ``cfg.full_volume`` is set).
    """
    return _volume_step(gen, disc, adam_g, adam_d, batch, cfg, rng, step)


def train_step_sr(gen, disc, adam_g, adam_d, batch, cfg, rng, step=0):
    """Super-resolution step: reslices are z-cropped to the xy size; pixel loss on even slices only."""
    return _volume_step(gen, disc, adam_g, adam_d, batch, cfg, rng, step)


STEP_FUNCS = {"interp": train_step_interp, "align": train_step_align, "sr": train_step_sr}


def train_step(gen, disc, adam_g, adam_d, batch, cfg, rng, step=0):
    return STEP_FUNCS[cfg.task](gen, disc, adam_g, adam_d, batch, cfg, rng, step)


def train_baseline_interp(gen, adam_g, sampler, cfg, rng=None, on_step=None):
    """Pixel-only regression of the interpolation generator.

    ``sampler(rng)`` returns a list of SliceTriple.  Returns
    ``(gen, loss_curve)`` with one summed batch loss per step.
    """
    if cfg.adversarial:
        raise ValueError("baseline training needs adversarial=False")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    out_hw = generator_output_hw(cfg)
    curve = []
    for step in range(1, cfg.max_step + 1):
        triples = sampler(rng)
        targets = [center_crop(t.target, out_hw) for t in triples]
        report = _pixel_only_interp(gen, adam_g, triples, targets, cfg, step)
        _check_finite(report, f"step {step}")
        curve.append(report.g_loss)
        if on_step is not None:
            on_step(report)
    return gen, curve


# -- driver with checkpoints ---------------------------------------------------------------------

@dataclass
class TrainState:
    gen: object
    disc: object
    adam_g: AdamState
    adam_d: AdamState
    rng: np.random.Generator
    step: int = 0
    reports: list = field(default_factory=list)


def _ckpt_name(step):
    return f"step_{step:08d}"


def save_state(out_dir, state, cfg):
    """Write a complete checkpoint directory, then point ``latest`` at it."""
    os.makedirs(out_dir, exist_ok=True)
    final = os.path.join(out_dir, _ckpt_name(state.step))
    tmp = tempfile.mkdtemp(prefix=".tmp-ckpt-", dir=out_dir)
    try:
        checkpoint.save(os.path.join(tmp, "gen.vxck"), state.gen, state.adam_g)
        checkpoint.save(os.path.join(tmp, "disc.vxck"), state.disc, state.adam_d)
        meta = {"step": state.step, "rng": state.rng.bit_generator.state, "config": cfg.to_dict()}
        with open(os.path.join(tmp, "state.json"), "w") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)
        if os.path.exists(final):
            shutil.rmtree(final)
        os.replace(tmp, final)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    pointer = os.path.join(out_dir, "latest")
    fd, ptmp = tempfile.mkstemp(prefix=".tmp-latest-", dir=out_dir)
    with os.fdopen(fd, "w") as fh:
        fh.write(_ckpt_name(state.step) + "\n")
    os.replace(ptmp, pointer)
    return final


def load_state(out_dir, cfg):
    pointer = os.path.join(out_dir, "latest")
    if not os.path.exists(pointer):
        return None
    with open(pointer) as fh:
        name = fh.read().strip()
    path = os.path.join(out_dir, name)
    gen, adam_g = checkpoint.load(os.path.join(path, "gen.vxck"), cfg.adam_hyper())
    disc, adam_d = checkpoint.load(os.path.join(path, "disc.vxck"), cfg.adam_hyper())
    with open(os.path.join(path, "state.json")) as fh:
        meta = json.load(fh)
    rng = np.random.default_rng()
    rng.bit_generator.state = meta["rng"]
    return TrainState(gen, disc, adam_g, adam_d, rng, int(meta["step"]))


def latest_generator(out_dir):
    """Path of the newest generator checkpoint in a training directory."""
    with open(os.path.join(out_dir, "latest")) as fh:
        return os.path.join(out_dir, fh.read().strip(), "gen.vxck")


def init_state(cfg):
    gen, disc = build_models(cfg)
    return TrainState(
        gen, disc,
        AdamState.for_params(gen, **cfg.adam_hyper()),
        AdamState.for_params(disc, **cfg.adam_hyper()),
        np.random.default_rng([cfg.seed, 1]),
    )


def prepare_volume(cfg, volume):
    data = volume if isinstance(volume, Volume) else Volume(volume)
    if cfg.normalize:
        data = normalize(data)
    p = cfg.patch
    z, y, x = data.dims
    if cfg.task == "interp":
        if z < 3 or y < p or x < p:
            raise VolumeTooSmall(f"volume {data.dims} too small for {p}x{p} interpolation patches")
    elif min(z, y, x) < p:
        raise VolumeTooSmall(f"volume {data.dims} too small for {p}^3 patches")
    return data


def _truncate_log(path, step):
    if not os.path.exists(path):
        return
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and int(ln.split("\t", 1)[0]) <= step]
    with open(path, "w") as fh:
        fh.writelines(lines)


def run_training(cfg, volume, out_dir, resume=True, on_step=None):
    """Train to ``cfg.max_step``, logging every step and checkpointing on cadence.

    The step log is ``<out_dir>/steps.tsv``.  With ``resume`` an existing
    checkpoint in ``out_dir`` is continued (log lines past it are dropped),
    which reproduces the uninterrupted run exactly.
    """
    data = prepare_volume(cfg, volume)
    os.makedirs(out_dir, exist_ok=True)
    log_path = os.path.join(out_dir, "steps.tsv")
    state = load_state(out_dir, cfg) if resume else None
    if state is None:
        state = init_state(cfg)
        if os.path.exists(log_path):
            os.unlink(log_path)
        save_state(out_dir, state, cfg)
    else:
        _truncate_log(log_path, state.step)

    step_fn = STEP_FUNCS[cfg.task]
    with open(log_path, "a") as log:
        while state.step < cfg.max_step:
            step = state.step + 1
            batch = sample_batch(data, state.rng, cfg)
            report = step_fn(state.gen, state.disc, state.adam_g, state.adam_d, batch, cfg, state.rng, step)
            state.step = step
            log.write(report.tsv() + "\n")
            log.flush()
            state.reports.append(report)
            if (cfg.checkpoint_every and step % cfg.checkpoint_every == 0) or step == cfg.max_step:
                save_state(out_dir, state, cfg)
            if on_step is not None:
                on_step(report)
    return state


def read_log(path):
    with open(path) as fh:
        return [StepReport.from_tsv(ln) for ln in fh if ln.strip()]


def discriminator_accuracy(disc, fakes, reals):
    """Fraction of samples classified correctly (dropout off, threshold 0.5)."""
    hits = 0
    for f in fakes:
        hits += nets.forward_discriminator(disc, f).item() < 0.0
    for r in reals:
        hits += nets.forward_discriminator(disc, r).item() > 0.0
    return hits / (len(fakes) + len(reals))


def interp_disc_inputs(gen, batch, cfg):
    """(fake pairs, real pairs) for the interpolation discriminator from one batch."""
    out_hw = generator_output_hw(cfg)
    frozen = gen.detached()
    fakes = [[center_crop(t.below, out_hw), _interp_fake(frozen, t).data] for t in batch.triples]
    reals = [[center_crop(p.below, out_hw), center_crop(p.target, out_hw)] for p in batch.pairs]
    return fakes, reals


def train_discriminator_frozen(gen, disc, adam_d, volume, cfg, steps, rng, eval_every=10,
                               target=None):
    """Discriminator-only updates against a fixed interpolation generator.

    Every ``eval_every`` steps accuracy is measured on a fresh batch.  Stops
    early once ``target`` accuracy is reached; returns ``[(step, accuracy)]``.
    """
    history = []
    for step in range(1, steps + 1):
        fakes, reals = interp_disc_inputs(gen, sample_interp_batch(volume, rng, cfg), cfg)
        _d_update(disc, adam_d, fakes, reals, rng)
        if step % eval_every == 0 or step == steps:
            fakes, reals = interp_disc_inputs(gen, sample_interp_batch(volume, rng, cfg), cfg)
            acc = discriminator_accuracy(disc, fakes, reals)
            history.append((step, acc))
            if target is not None and acc >= target:
                break
    return history
