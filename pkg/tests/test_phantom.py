import numpy as np
import pytest

from emgan import phantom as P
from emgan.errors import DegenerateVolume, IndexOutOfRange
from emgan.volume import Volume


def small(**kw):
    kw.setdefault("dims", (16, 24, 24))
    kw.setdefault("structure_scale", 6.0)
    return P.PhantomConfig(**kw)


def test_no_degradation_is_identity():
    t = P.generate_phantom(small(jitter_amplitude=0, noise_sigma=0.0))
    assert t.degraded == t.clean


def test_offsets_bounded_and_deterministic():
    a = P.generate_phantom(small(jitter_amplitude=2, seed=3))
    b = P.generate_phantom(small(jitter_amplitude=2, seed=3))
    assert set(np.unique(a.offsets)) <= set(range(-2, 3))
    assert a.clean == b.clean and a.degraded == b.degraded
    np.testing.assert_array_equal(a.offsets, b.offsets)


def test_degraded_minus_noise_is_jittered_clean():
    cfg = small(jitter_amplitude=2, noise_sigma=0.0, seed=5)
    t = P.generate_phantom(cfg)
    np.testing.assert_array_equal(t.degraded.data, P.apply_jitter(t.clean, t.offsets).data)


def test_clean_statistics():
    c = P.generate_phantom(small(seed=1)).clean.data
    assert abs(c.mean()) < 1e-9 and abs(c.std() - 1.0) < 1e-9


def test_zero_offset_slices_match_without_noise():
    t = P.generate_phantom(small(jitter_amplitude=1, noise_sigma=0.0, seed=2))
    still = [k for k, o in enumerate(t.offsets) if not o.any()]
    assert still
    for k in still:
        np.testing.assert_array_equal(t.degraded.data[k], t.clean.data[k])


@pytest.mark.parametrize("seed", range(3))
def test_jitter_raises_z_discontinuity(seed):
    t = P.generate_phantom(small(jitter_amplitude=2, noise_sigma=0.0, seed=seed))
    mad = lambda v: np.abs(np.diff(v.data, axis=0)).mean()  # noqa: E731
    assert mad(t.degraded) > mad(t.clean)


def test_apply_jitter_inverse_on_interior(rng):
    v = Volume(rng.standard_normal((4, 12, 12)))
    o = rng.integers(-2, 3, size=(4, 2))
    back = P.apply_jitter(P.apply_jitter(v, o), -o)
    np.testing.assert_array_equal(back.data[:, 2:-2, 2:-2], v.data[:, 2:-2, 2:-2])


def test_single_slice_offset_moves_only_that_slice(rng):
    v = Volume(rng.standard_normal((3, 6, 6)))
    o = np.zeros((3, 2), dtype=int)
    o[1] = (1, -1)
    out = P.apply_jitter(v, o).data
    np.testing.assert_array_equal(out[[0, 2]], v.data[[0, 2]])
    np.testing.assert_array_equal(out[1, 1:, :-1], v.data[1, :-1, 1:])


def test_drop_slice(rng):
    v = Volume(rng.standard_normal((5, 3, 3)))
    damaged, held = P.drop_slice(v, 2)
    np.testing.assert_array_equal(held, v.data[2])
    assert not damaged.data[2].any()
    np.testing.assert_array_equal(damaged.data[[0, 1, 3, 4]], v.data[[0, 1, 3, 4]])
    restored = damaged.data.copy()
    restored[2] = held
    np.testing.assert_array_equal(restored, v.data)
    with pytest.raises(IndexOutOfRange):
        P.drop_slice(v, 0)
    with pytest.raises(IndexOutOfRange):
        P.drop_slice(v, 4)


def test_averaging_volume_exact_without_noise():
    d = P.make_averaging_volume((7, 16, 16), 0.0, 0).data
    np.testing.assert_allclose(d[1:-1], 0.5 * (d[:-2] + d[2:]), atol=1e-12)


def test_perfect_predictor_mae_matches_expected_noise():
    """Analytic E|e| of the noise law, checked by sampling.

    The perfect predictor outputs the clean slice; its error is the noise on
    the target slice alone.
    """
    noise = 0.05
    clean = P.make_averaging_volume((32, 64, 64), 0.0, 4).data
    noisy = P.make_averaging_volume((32, 64, 64), noise, 4).data
    mae = np.abs(noisy[1:-1] - clean[1:-1]).mean()
    assert mae == pytest.approx(P.expected_abs_noise(noise), rel=0.02)


def test_degenerate_dims_rejected():
    with pytest.raises(DegenerateVolume):
        P.generate_phantom(P.PhantomConfig(dims=(4, 30, 30), structure_scale=12.0))
    with pytest.raises(ValueError):
        P.PhantomConfig(jitter_amplitude=-1)
    with pytest.raises(ValueError):
        P.PhantomConfig(structure_scale=1.0)


def test_truth_files_roundtrip(tmp_path):
    t = P.generate_phantom(small(n_dropped=2, seed=9))
    prefix = str(tmp_path / "ph")
    P.write_truth(prefix, t)
    back = P.read_truth(prefix)
    np.testing.assert_array_equal(back.offsets, t.offsets)
    assert back.dropped_slices == t.dropped_slices
    np.testing.assert_allclose(back.clean.data, t.clean.data, atol=1e-6)
    text = (tmp_path / "ph.txt").read_text().splitlines()
    assert text[0].split()[0] == "0" and text[-1].startswith("dropped: ")
