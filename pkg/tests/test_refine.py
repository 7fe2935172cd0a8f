from dataclasses import replace

import numpy as np
import pytest

from conftest import make_camera, make_scene
from uars.core import CameraView, PseudoView, logit
from uars.fst import FstConfig
from uars.raster import render
from uars.refine import Adam, AdpConfig, NumericalError, RefineConfig, adp_step, clamp_scales, lr_schedule, refine

NO_FST = FstConfig(enabled=False)


def quick_cfg(steps=10, **kw):
    return RefineConfig(steps=steps, adp=AdpConfig(enabled=False), fst=NO_FST, **kw)


def views_of(scene, n=3, size=24, seed=0):
    cams = []
    for k in range(n):
        th = 0.3 * (k - (n - 1) / 2)
        eye = np.array([2.0 * np.sin(th), 0.0, 2.0 - 2.0 * np.cos(th)])
        cams.append(CameraView.look_at(eye, [0, 0, 2.0], [0, -1, 0], 30, 30, size / 2, size / 2, size, size))
    return [PseudoView(render(scene, c).color, c) for c in cams]


def test_lr_schedule_endpoints():
    cfg = RefineConfig()
    assert lr_schedule(0, cfg) == 1e-3
    assert lr_schedule(cfg.steps, cfg) == pytest.approx(2e-5, rel=1e-12)
    assert lr_schedule(cfg.steps // 2, cfg) == pytest.approx(np.sqrt(1e-3 * 2e-5), rel=1e-12)
    assert lr_schedule(cfg.steps // 2, cfg) == pytest.approx(1.414e-4, rel=1e-3)
    lrs = [lr_schedule(t, cfg) for t in range(0, 1001, 50)]
    assert all(a > b for a, b in zip(lrs, lrs[1:]))


def test_clamp_scales_band():
    scene = make_scene(4, seed=1)
    s0 = scene.initial_scales.copy()
    before = scene.log_scales.copy()
    clamp_scales(scene, RefineConfig())
    assert np.array_equal(scene.log_scales, before)  # no-op inside the band
    scene.log_scales[0, 0] = np.log(s0[0, 0] + 0.05)
    clamp_scales(scene, RefineConfig())
    assert np.exp(scene.log_scales[0, 0]) == pytest.approx(s0[0, 0] + 0.01, rel=1e-12)
    assert np.array_equal(scene.log_scales[1:], before[1:])


def test_clamp_lower_bound_is_positive():
    scene = make_scene(1)
    scene = replace(scene, log_scales=np.log([[0.005, 0.005, 0.005]]), initial_scales=None)
    scene.log_scales[:] = -40.0
    clamp_scales(scene, RefineConfig())
    np.testing.assert_allclose(np.exp(scene.log_scales), 1e-7, rtol=1e-9)


def test_relative_band():
    scene = make_scene(2)
    s0 = scene.initial_scales.copy()
    scene.log_scales[:] += 1.0
    clamp_scales(scene, RefineConfig(scale_band=0.01, scale_band_mode="relative"))
    np.testing.assert_allclose(np.exp(scene.log_scales), s0 * 1.01, rtol=1e-12)


def test_adam_matches_reference_step():
    p = {"x": np.array([1.0, -2.0])}
    opt = Adam(p)
    g = {"x": np.array([0.5, -0.25])}
    opt.step(p, g, {"x": 0.1})
    # first bias-corrected step is lr * sign(g) (up to eps)
    np.testing.assert_allclose(p["x"], [0.9, -1.9], rtol=1e-12)
    before = p["x"].copy()
    opt.step(p, {"x": np.zeros(2)}, {"x": 0.0})
    assert np.array_equal(p["x"], before)


def test_adam_remap():
    p = {"x": np.ones((3, 2))}
    opt = Adam(p)
    opt.step(p, {"x": np.arange(6.0).reshape(3, 2)}, {"x": 0.0})
    m = opt.m["x"].copy()
    opt.remap(np.array([2, 0, -1]))
    np.testing.assert_array_equal(opt.m["x"], [m[2], m[0], [0, 0]])
    assert opt.v["x"].shape == (3, 2)


def test_adp_noop():
    scene = make_scene(6)
    res = adp_step(scene, np.zeros(6), AdpConfig(), np.random.default_rng(0))
    assert len(res.scene) == 6 and res.cloned == res.split == res.pruned == 0
    for k, v in scene.params().items():
        assert np.array_equal(getattr(res.scene, k), v)
    assert np.array_equal(res.source, np.arange(6))


def test_adp_prunes_transparent():
    scene = make_scene(6)
    scene.opacity_logits[2] = logit(0.001)
    res = adp_step(scene, np.zeros(6), AdpConfig(), np.random.default_rng(0))
    assert len(res.scene) == 5 and res.pruned == 1
    assert 2 not in res.source


@pytest.mark.parametrize("seed", range(10))
def test_adp_clone_stays_within_one_sigma(seed):
    scene = make_scene(3, seed=seed, scale=(0.0005, 0.002))
    stat = np.array([0.0, 1.0, 0.0])
    res = adp_step(scene, stat, AdpConfig(), np.random.default_rng(seed))
    assert len(res.scene) == 4 and res.cloned == 1 and res.split == 0
    np.testing.assert_array_equal(res.scene.positions[1], scene.positions[1])
    from uars.core import covariance_3d

    d = res.scene.positions[3] - scene.positions[1]
    assert d @ np.linalg.solve(covariance_3d(scene[1]), d) <= 1.0 + 1e-9
    np.testing.assert_allclose(res.scene.initial_scales[3], scene.scales[1])


def test_adp_split_shrinks_children():
    scene = make_scene(2, scale=(0.2, 0.3))
    res = adp_step(scene, np.array([1.0, 0.0]), AdpConfig(), np.random.default_rng(0))
    assert res.split == 1 and len(res.scene) == 3
    np.testing.assert_allclose(res.scene.scales[1:], np.tile(scene.scales[0] / 1.6, (2, 1)))
    np.testing.assert_array_equal(res.source, [1, -1, -1])


def test_fixed_point():
    scene = make_scene(12, seed=4)
    views = views_of(scene)
    seen = []
    out, rep = refine(scene, views[0].image, views, cfg=quick_cfg(10), on_step=lambda *_: seen.append(1))
    assert rep.losses[0] <= 1e-6
    for k, v in scene.params().items():
        assert np.abs(getattr(out, k) - v).max() < 1e-5
    assert len(seen) == 10


def test_zero_learning_rates_are_identity():
    scene = make_scene(12, seed=5)
    views = views_of(make_scene(12, seed=6))
    cfg = quick_cfg(
        5, lr_position_start=0.0, lr_position_end=0.0, lr_rotation=0.0, lr_scale=0.0, lr_opacity=0.0, lr_color=0.0
    )
    out, rep = refine(scene, views[0].image, views, cfg=cfg)
    assert rep.losses[0] > 1e-4
    for k, v in scene.params().items():
        assert np.array_equal(getattr(out, k), v)


def _jittered(seed):
    truth = make_scene(15, seed=seed)
    start = truth.copy()
    start.positions += np.random.default_rng(0).normal(0, 0.02, start.positions.shape)
    return truth, start.with_snapshot()


def test_refine_reduces_loss():
    truth, start = _jittered(7)
    views = views_of(truth, n=4)
    _, rep = refine(start, views[0].image, views, cfg=quick_cfg(60))
    assert np.median(rep.losses[-10:]) < 0.5 * np.median(rep.losses[:10])


def test_refine_is_deterministic_with_densification():
    truth, start = _jittered(7)
    views = views_of(truth, n=4)
    cfg = RefineConfig(steps=60, adp=AdpConfig(densify_start=20, densify_end=40, densify_interval=20), fst=NO_FST)
    a, ra = refine(start, views[0].image, views, cfg=cfg)
    b, rb = refine(start, views[0].image, views, cfg=cfg)
    assert ra.adp_events and ra.gaussian_counts[-1] > 15
    assert ra.losses == rb.losses and ra.adp_events == rb.adp_events
    for k, v in a.params().items():
        assert np.array_equal(getattr(b, k), v)
    # the input scene is not modified
    assert not np.array_equal(start.positions, a.positions)


def test_count_changes_only_at_adp_steps():
    truth = make_scene(15, seed=8)
    start = truth.copy()
    start.positions += 0.03
    views = views_of(truth, n=4)
    cfg = RefineConfig(
        steps=40, adp=AdpConfig(densify_start=10, densify_end=30, densify_interval=10, grad_threshold=1e-6), fst=NO_FST
    )
    _, rep = refine(start.with_snapshot(), views[0].image, views, cfg=cfg)
    adp_steps = {e["step"] for e in rep.adp_events}
    assert adp_steps == {9, 19, 29}
    for t in range(1, 40):
        if rep.gaussian_counts[t] != rep.gaussian_counts[t - 1]:
            assert t in adp_steps
    assert max(rep.gaussian_counts) > 15
    assert len(rep.losses) == len(rep.step_seconds) == 40


def test_origin_tracks_input_rows():
    truth, _ = _jittered(9)
    views = views_of(truth, n=2)
    cfg = RefineConfig(steps=20, adp=AdpConfig(densify_start=10, densify_end=10, densify_interval=10, grad_threshold=1e-9), fst=NO_FST)
    log = {}

    def cb(step, scene, origin):
        log[step] = (scene.initial_scales.copy(), origin.copy())

    _, start = _jittered(9)
    refine(start, views[0].image, views, cfg=cfg, on_step=cb)
    snaps, origin = log[19]
    kept = origin >= 0
    assert (origin == -1).any()
    np.testing.assert_array_equal(snaps[kept], start.initial_scales[origin[kept]])


def test_errors():
    scene = make_scene(4)
    views = views_of(scene, n=1)
    with pytest.raises(ValueError, match="at least one"):
        refine(scene, views[0].image, [], cfg=quick_cfg())
    bad = PseudoView(np.zeros((10, 10, 3)), views[0].camera)
    with pytest.raises(ValueError, match="does not match camera"):
        refine(scene, views[0].image, [bad], cfg=quick_cfg())
    lg = PseudoView(views[0].image, views[0].camera, logits=np.zeros((5, 5, 2)))
    with pytest.raises(ValueError, match="logits size"):
        refine(scene, views[0].image, [lg], cfg=quick_cfg())


def test_non_finite_loss_raises_numerical_error(monkeypatch):
    import uars.refine.engine as eng

    scene = make_scene(4)
    views = views_of(scene, n=1)

    real = eng.refine_loss

    def nan_loss(*a, **k):
        out = real(*a, **k)
        out.value = float("nan")
        return out

    monkeypatch.setattr(eng, "refine_loss", nan_loss)
    with pytest.raises(NumericalError):
        refine(scene, views[0].image, views, cfg=quick_cfg())


def test_config_roundtrip_and_validation():
    cfg = RefineConfig(steps=50, adp=AdpConfig(densify_start=10, densify_end=40), background=[1, 1, 1])
    assert RefineConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError, match="unknown keys"):
        RefineConfig.from_dict({"stepz": 3})
    with pytest.raises(ValueError, match="densify_end"):
        AdpConfig(densify_start=50, densify_end=40)
    with pytest.raises(ValueError, match="densify_end"):
        RefineConfig(steps=100)
    with pytest.raises(ValueError):
        RefineConfig(lr_position_start=1e-3, lr_position_end=1e-2)
    with pytest.raises(ValueError):
        RefineConfig(scale_band=0)
