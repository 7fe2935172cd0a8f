"""The refinement loop: render pseudo-views, weight residuals by confidence,
backpropagate through the rasterizer and take Adam steps."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..core import PseudoView, GaussianScene, check_image
from ..fst import fst_transfer
from ..io.images import resize_image
from ..loss import refine_loss, ssim
from ..metrics import psnr
from ..raster import render, render_backward
from ..uncertainty import uncertainty_from_logits
from .adp import adp_step
from .config import RefineConfig
from .optim import Adam

logger = logging.getLogger(__name__)

SCALE_FLOOR = 1e-7


class NumericalError(RuntimeError):
    pass


@dataclass
class RefineReport:
    losses: list[float] = field(default_factory=list)
    gaussian_counts: list[int] = field(default_factory=list)
    step_seconds: list[float] = field(default_factory=list)
    lr_position: list[float] = field(default_factory=list)
    adp_events: list[dict] = field(default_factory=list)
    final_psnr: float | None = None
    final_ssim: float | None = None

    def step_records(self, timings: bool = False):
        for i, (loss, count, lr) in enumerate(zip(self.losses, self.gaussian_counts, self.lr_position)):
            rec = {"step": i, "loss": loss, "gaussians": count, "lr_position": lr}
            if timings:
                rec["seconds"] = self.step_seconds[i]
            yield rec

    def summary(self) -> dict:
        return {
            "summary": True,
            "steps": len(self.losses),
            "initial_loss": self.losses[0] if self.losses else None,
            "final_loss": self.losses[-1] if self.losses else None,
            "final_gaussians": self.gaussian_counts[-1] if self.gaussian_counts else None,
            "final_psnr": self.final_psnr,
            "final_ssim": self.final_ssim,
            "adp_events": self.adp_events,
        }


def lr_schedule(step: int, cfg: RefineConfig) -> float:
    """Exponential decay of the position learning rate over the run."""
    start, end = cfg.lr_position_start, cfg.lr_position_end
    if start == end:
        return start
    t = min(max(step, 0), cfg.steps) / cfg.steps
    return start * (end / start) ** t


def clamp_scales(scene: GaussianScene, cfg: RefineConfig) -> GaussianScene:
    """Keep each axis scale within the band around its snapshot, in place."""
    s0 = scene.initial_scales
    if cfg.scale_band_mode == "relative":
        lo, hi = s0 * (1.0 - cfg.scale_band), s0 * (1.0 + cfg.scale_band)
    else:
        lo, hi = s0 - cfg.scale_band, s0 + cfg.scale_band
    lo = np.maximum(lo, SCALE_FLOOR)
    s = np.exp(scene.log_scales)
    out = (s < lo) | (s > hi)
    if np.any(out):
        scene.log_scales[out] = np.log(np.clip(s, lo, hi)[out])
    return scene


@dataclass
class _Target:
    camera: object
    image: np.ndarray
    uncertainty: np.ndarray


def prepare_targets(input_image, views: list[PseudoView], cfg: RefineConfig) -> list[_Target]:
    """Style-adapt every pseudo-view against the input image and turn its
    logits into an uncertainty map (no logits means full confidence)."""
    input_image = check_image(input_image, "input_image")
    out = []
    for i, v in enumerate(views):
        img = check_image(v.image, f"pseudo_views[{i}].image")
        cam = v.camera
        if img.shape[:2] != (cam.height, cam.width):
            raise ValueError(f"pseudo_views[{i}]: image size {img.shape[:2]} does not match camera {(cam.height, cam.width)}")
        if cfg.fst.enabled:
            style = resize_image(input_image, cam.height, cam.width)
            img = fst_transfer(img, style, cfg.fst)
        if v.logits is None:
            u = np.zeros(img.shape[:2] + (1,))
        else:
            if v.logits.shape[:2] != img.shape[:2]:
                raise ValueError(f"pseudo_views[{i}]: logits size {v.logits.shape[:2]} does not match image {img.shape[:2]}")
            u = uncertainty_from_logits(v.logits, probs=v.probs)
        out.append(_Target(cam, img, u))
    return out


def evaluate(scene: GaussianScene, views, background=None) -> tuple[float, float]:
    """Mean PSNR and SSIM of renders against ``(camera, image)`` pairs."""
    ps, ss = [], []
    for cam, img in views:
        r = render(scene, cam, background).color
        ps.append(psnr(r, img))
        ss.append(ssim(r, img, with_grad=False))
    return float(np.mean(ps)), float(np.mean(ss))


def refine(
    scene: GaussianScene,
    input_image,
    pseudo_views: list[PseudoView],
    eval_views=None,
    cfg: RefineConfig = RefineConfig(),
    on_step=None,
) -> tuple[GaussianScene, RefineReport]:
    """Optimize a copy of ``scene`` against the pseudo-views.

    ``eval_views`` is an optional list of ``(camera, image)`` pairs scored
    after the run. ``on_step(step, scene, origin)`` is called after every
    step; ``origin[i]`` is the input row of Gaussian ``i``, or -1 for
    Gaussians created by densification.
    Given the same inputs, config and seed the result is bit-reproducible.
    """
    if not pseudo_views:
        raise ValueError("refine: at least one pseudo-view is required")
    targets = prepare_targets(input_image, pseudo_views, cfg)
    scene = scene.copy()
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(targets))
    cursor = 0
    bg = np.asarray(cfg.background, dtype=np.float64)
    fixed_lrs = {
        "rotations": cfg.lr_rotation,
        "log_scales": cfg.lr_scale,
        "opacity_logits": cfg.lr_opacity,
        "colors": cfg.lr_color,
    }
    opt = Adam(scene.params())
    stat_sum = np.zeros(len(scene))
    stat_cnt = np.zeros(len(scene))
    origin = np.arange(len(scene))
    report = RefineReport()

    for step in range(cfg.steps):
        t0 = time.perf_counter()
        grads = {k: np.zeros_like(v) for k, v in scene.params().items()}
        loss = 0.0
        for _ in range(cfg.batch_size):
            tgt = targets[order[cursor % len(order)]]
            cursor += 1
            fwd = render(scene, tgt.camera, bg)
            lo = refine_loss(fwd.color, tgt.image, tgt.uncertainty, cfg.loss)
            if not np.isfinite(lo.value):
                raise NumericalError(f"non-finite loss at step {step}")
            g = render_backward(scene, tgt.camera, lo.grad_rendered, background=bg, forward=fwd)
            for k, v in g.as_dict().items():
                grads[k] += v / cfg.batch_size
            loss += lo.value / cfg.batch_size
            stat_sum += g.mean2d_norm * g.visible
            stat_cnt += g.visible
        for k, v in grads.items():
            if not np.all(np.isfinite(v)):
                raise NumericalError(f"non-finite gradient for {k} at step {step}")

        lr_pos = lr_schedule(step, cfg)
        opt.step(scene.params(), grads, {"positions": lr_pos, **fixed_lrs})
        clamp_scales(scene, cfg)
        np.clip(scene.colors, 0.0, 1.0, out=scene.colors)

        done = step + 1
        a = cfg.adp
        if a.enabled and a.densify_start <= done <= a.densify_end and done % a.densify_interval == 0:
            mean_stat = np.divide(stat_sum, stat_cnt, out=np.zeros_like(stat_sum), where=stat_cnt > 0)
            res = adp_step(scene, mean_stat, a, rng)
            scene = res.scene
            opt.remap(res.source)
            origin = np.where(res.source >= 0, origin[np.maximum(res.source, 0)], -1)
            stat_sum = np.zeros(len(scene))
            stat_cnt = np.zeros(len(scene))
            report.adp_events.append(
                {"step": step, "cloned": res.cloned, "split": res.split, "pruned": res.pruned, "gaussians": len(scene)}
            )
            logger.debug("adp at step %d: %s", step, report.adp_events[-1])

        report.losses.append(float(loss))
        report.gaussian_counts.append(len(scene))
        report.lr_position.append(float(lr_pos))
        report.step_seconds.append(time.perf_counter() - t0)
        if on_step is not None:
            on_step(step, scene, origin)

    if eval_views:
        report.final_psnr, report.final_ssim = evaluate(scene, eval_views, bg)
    return scene, report
