import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uars.harness import (
    CorruptionSpec,
    SynthConfig,
    camera_ring,
    color_cast,
    corrupt_views,
    perturb,
    psnr,
    run_recovery_experiment,
    synth_scene,
)
from uars.raster.render import render
from uars.refine import AdpConfig, RefineConfig
from uars.fst import FstConfig

TINY = SynthConfig(gaussian_count=40, height=32, width=48, n_cameras=6, holdout=2, seed=5)


def test_synth_is_deterministic():
    s1, v1 = synth_scene(TINY)
    s2, v2 = synth_scene(TINY)
    assert np.array_equal(s1.positions, s2.positions) and np.array_equal(s1.colors, s2.colors)
    assert all(np.array_equal(a[1], b[1]) for a, b in zip(v1, v2))


def test_empty_scene_renders_background():
    _, views = synth_scene(SynthConfig(gaussian_count=0, height=16, width=24, seed=1))
    assert all(np.array_equal(img, np.zeros_like(img)) for _, img in views)


def test_default_views_have_coverage():
    cfg = SynthConfig()
    scene, _ = synth_scene(SynthConfig(gaussian_count=cfg.gaussian_count, n_cameras=cfg.n_cameras, height=64, width=96))
    for cam in camera_ring(cfg)[:3]:
        assert render(scene, cam).alpha.mean() > 0.2


def test_ring_looks_at_origin():
    for cam in camera_ring(TINY):
        p = cam.world_to_camera @ np.array([0, 0, 0, 1.0])
        np.testing.assert_allclose(p[:2], 0, atol=1e-12)
        assert p[2] == pytest.approx(TINY.camera_radius)


def test_holdout_split():
    cfg = SynthConfig()
    assert len(cfg.holdout_indices) == 4 and len(cfg.train_indices) == 8
    assert not set(cfg.holdout_indices) & set(cfg.train_indices)
    with pytest.raises(ValueError):
        SynthConfig(n_cameras=4, holdout=4)


def test_perturb_zero_sigma_identity():
    s, _ = synth_scene(TINY)
    p = perturb(s, 0.0, 0.0, seed=3)
    assert np.array_equal(p.positions, s.positions) and np.array_equal(p.colors, s.colors)


def test_perturb_rms_displacement():
    s, _ = synth_scene(SynthConfig(gaussian_count=500, height=8, width=8, n_cameras=2, holdout=1))
    p = perturb(s, 0.01, 0.0, seed=11)
    rms = np.sqrt(np.mean(np.sum((p.positions - s.positions) ** 2, axis=1)))
    assert rms == pytest.approx(0.01 * np.sqrt(3), rel=0.1)


def test_perturb_retakes_snapshot():
    s, _ = synth_scene(TINY)
    s.log_scales += 0.1
    p = perturb(s, seed=0)
    assert np.array_equal(p.initial_scales, np.exp(p.log_scales))


def test_psnr_examples():
    a = np.zeros((4, 4, 3))
    assert psnr(a, a) == 100.0
    assert psnr(a, np.full_like(a, 0.1)) == pytest.approx(20.0)
    assert psnr(a, np.full_like(a, 0.5)) == pytest.approx(6.0206, abs=1e-4)
    with pytest.raises(ValueError):
        psnr(a, np.zeros((4, 5, 3)))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_psnr_symmetric(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(size=(2, 5, 6, 3))
    assert psnr(a, b) == psnr(b, a)


@settings(max_examples=200, deadline=None)
@given(st.floats(2e-5, 0.5), st.floats(1.001, 2.0))
def test_psnr_strictly_decreasing_in_mse(d, k):
    # above the cap, where mse = d**2 >= 1e-10
    a = np.zeros((3, 3, 3))
    assert psnr(a, np.full_like(a, d * k)) < psnr(a, np.full_like(a, d))


def test_psnr_cap_is_continuous():
    a = np.zeros((2, 2, 1))
    assert psnr(a, np.full_like(a, 1e-6)) == 100.0
    assert psnr(a, np.full_like(a, 1.0001e-5)) < 100.0


def test_perturbed_scene_scores_below_truth():
    truth, views = synth_scene(TINY)
    p = perturb(truth, seed=2)
    for i in TINY.holdout_indices:
        cam, img = views[i]
        assert psnr(render(truth, cam).color, img) == 100.0
        assert psnr(render(p, cam).color, img) < 100.0


def test_corruption_marks_rectangles():
    imgs = [np.full((20, 30, 3), 0.5) for _ in range(4)]
    out, logits, chosen = corrupt_views(imgs, CorruptionSpec(), np.random.default_rng(0))
    assert len(chosen) == 2
    for i in range(4):
        changed = np.any(out[i] != 0.5, axis=2)
        uniform = logits[i][..., 0] == logits[i][..., 1]
        if i in chosen:
            assert uniform.any() and not changed[~uniform].any()
        else:
            assert not changed.any() and not uniform.any()
    with pytest.raises(ValueError):
        CorruptionSpec(area_fraction=1.0)


def test_color_cast_is_per_channel_affine():
    img = np.full((2, 2, 3), 0.5)
    np.testing.assert_allclose(color_cast(img)[0, 0], [0.705, 0.385, 0.65])


FAST = RefineConfig(steps=40, adp=AdpConfig(enabled=False), fst=FstConfig(enabled=False))


def test_recovery_is_deterministic():
    a = run_recovery_experiment(TINY, FAST)
    b = run_recovery_experiment(TINY, FAST)
    assert a.to_dict() == b.to_dict() and a.losses == b.losses


def test_no_perturbation_no_change():
    rep = run_recovery_experiment(TINY, FAST, position_sigma=0.0, color_sigma=0.0)
    assert abs(rep.delta) <= 0.2


def test_recovery_improves_small_scene():
    rep = run_recovery_experiment(TINY, RefineConfig(steps=150, adp=AdpConfig(enabled=False), fst=FstConfig(enabled=False)))
    assert rep.delta > 1.0
