"""Synthetic oracle scenes and paired refinement experiments.

Views rendered from a known scene stand in for generated pseudo-views; the
known scene gives exact ground truth for held-out evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import CameraView, GaussianScene, PseudoView, logit
from .metrics import psnr
from .raster import render
from .refine import RefineConfig, evaluate, refine


@dataclass(frozen=True)
class SynthConfig:
    gaussian_count: int = 500
    box: tuple = (-0.5, 0.5)
    scale_range: tuple = (0.005, 0.05)
    opacity_range: tuple = (0.5, 0.98)
    n_cameras: int = 12
    camera_radius: float = 2.5
    holdout: int = 4
    height: int = 256
    width: int = 384
    # focal length in pixels = focal_factor * height
    focal_factor: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.holdout < self.n_cameras):
            raise ValueError("synth: holdout must be smaller than the camera count")

    @property
    def holdout_indices(self) -> np.ndarray:
        if self.holdout == 0:
            return np.zeros(0, dtype=int)
        step = self.n_cameras / self.holdout
        return (np.floor(np.arange(self.holdout) * step + step / 2)).astype(int)

    @property
    def train_indices(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n_cameras), self.holdout_indices)


@dataclass(frozen=True)
class CorruptionSpec:
    fraction_of_views: float = 0.5
    rectangles: int = 3
    area_fraction: float = 0.1
    mark_uncertain: bool = True

    def __post_init__(self):
        if not (0 < self.area_fraction < 1) or not (0 <= self.fraction_of_views <= 1):
            raise ValueError("corruption: fractions must lie in (0, 1)")


def camera_ring(cfg: SynthConfig) -> list[CameraView]:
    f = cfg.focal_factor * cfg.height
    cams = []
    for k in range(cfg.n_cameras):
        th = 2 * np.pi * k / cfg.n_cameras
        eye = cfg.camera_radius * np.array([np.sin(th), 0.0, -np.cos(th)])
        cams.append(CameraView.look_at(eye, [0, 0, 0], [0, -1, 0], f, f, cfg.width / 2, cfg.height / 2, cfg.width, cfg.height))
    return cams


def random_scene(cfg: SynthConfig, rng: np.random.Generator) -> GaussianScene:
    n = cfg.gaussian_count
    lo, hi = cfg.box
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    s_lo, s_hi = np.log(cfg.scale_range[0]), np.log(cfg.scale_range[1])
    return GaussianScene(
        positions=rng.uniform(lo, hi, size=(n, 3)),
        rotations=q,
        log_scales=rng.uniform(s_lo, s_hi, size=(n, 3)),
        opacity_logits=logit(rng.uniform(*cfg.opacity_range, size=n)),
        colors=rng.uniform(0.0, 1.0, size=(n, 3)),
    )


def synth_scene(cfg: SynthConfig = SynthConfig()) -> tuple[GaussianScene, list[tuple[CameraView, np.ndarray]]]:
    """Random ground-truth scene and its renders from every ring camera."""
    rng = np.random.default_rng(cfg.seed)
    scene = random_scene(cfg, rng)
    views = [(cam, render(scene, cam).color) for cam in camera_ring(cfg)]
    return scene, views


def perturb(scene: GaussianScene, position_sigma: float = 0.01, color_sigma: float = 0.05, seed: int = 0) -> GaussianScene:
    """Zero-mean jitter of positions and colors; the scale snapshot is re-taken."""
    rng = np.random.default_rng(seed)
    out = scene.with_snapshot()
    if position_sigma > 0:
        out.positions += rng.normal(0.0, position_sigma, size=out.positions.shape)
    if color_sigma > 0:
        out.colors[:] = np.clip(out.colors + rng.normal(0.0, color_sigma, size=out.colors.shape), 0.0, 1.0)
    return out


def corrupt_views(images: list[np.ndarray], spec: CorruptionSpec, rng: np.random.Generator):
    """Overwrite rectangles of a subset of views with uniform noise.

    Returns new images and per-view logits (``None`` when not marking): two
    classes, uniform inside the rectangles and one-hot outside.
    """
    n = len(images)
    chosen = set(rng.choice(n, size=int(round(spec.fraction_of_views * n)), replace=False).tolist())
    out_imgs, out_logits = [], []
    for i, img in enumerate(images):
        H, W = img.shape[:2]
        mask = np.zeros((H, W), dtype=bool)
        img = img.copy()
        if i in chosen:
            rh = max(1, int(round(H * np.sqrt(spec.area_fraction))))
            rw = max(1, int(round(W * np.sqrt(spec.area_fraction))))
            for _ in range(spec.rectangles):
                y = rng.integers(0, H - rh + 1)
                x = rng.integers(0, W - rw + 1)
                mask[y : y + rh, x : x + rw] = True
            img[mask] = rng.uniform(0.0, 1.0, size=(int(mask.sum()), img.shape[2]))
        out_imgs.append(img)
        if spec.mark_uncertain:
            logits = np.zeros((H, W, 2))
            logits[~mask, 0] = 1000.0
            out_logits.append(logits)
        else:
            out_logits.append(None)
    return out_imgs, out_logits, sorted(chosen)


def color_cast(img: np.ndarray, gain=(1.25, 0.85, 1.1), offset=(0.08, -0.04, 0.1)) -> np.ndarray:
    """Per-channel affine shift, clipped to [0, 1]."""
    return np.clip(img * np.asarray(gain) + np.asarray(offset), 0.0, 1.0)


@dataclass
class ExperimentReport:
    init_psnr: float
    final_psnr: float
    init_ssim: float
    final_ssim: float
    losses: list = field(default_factory=list, repr=False)
    gaussian_counts: list = field(default_factory=list, repr=False)
    corrupted_views: list = field(default_factory=list)

    @property
    def delta(self) -> float:
        return self.final_psnr - self.init_psnr

    def to_dict(self) -> dict:
        return {
            "init_psnr": self.init_psnr,
            "final_psnr": self.final_psnr,
            "delta": self.delta,
            "init_ssim": self.init_ssim,
            "final_ssim": self.final_ssim,
            "final_gaussians": self.gaussian_counts[-1] if self.gaussian_counts else None,
            "corrupted_views": self.corrupted_views,
        }


def run_recovery_experiment(
    cfg: SynthConfig = SynthConfig(),
    refine_cfg: RefineConfig = RefineConfig(),
    corruption: CorruptionSpec | None = None,
    use_uncertainty: bool = True,
    cast: bool = False,
    position_sigma: float = 0.01,
    color_sigma: float = 0.05,
    on_step=None,
) -> ExperimentReport:
    """synth -> perturb -> (corrupt / cast) -> refine -> score held-out views.

    The conditioning image is the clean render of the first training camera.
    Runs that differ only in ``use_uncertainty`` or the FST switch share every
    random draw.
    """
    truth, views = synth_scene(cfg)
    start = perturb(truth, position_sigma, color_sigma, seed=cfg.seed + 1)
    train = [views[i] for i in cfg.train_indices]
    held = [views[i] for i in cfg.holdout_indices]
    input_image = train[0][1]

    images = [img for _, img in train]
    if cast:
        images = [color_cast(img) for img in images]
    logits = [None] * len(images)
    corrupted = []
    if corruption is not None:
        images, logits, corrupted = corrupt_views(images, corruption, np.random.default_rng(cfg.seed + 2))
    if not use_uncertainty:
        logits = [None] * len(images)
    pseudo = [PseudoView(img, cam, lg) for (cam, _), img, lg in zip(train, images, logits)]

    init_psnr, init_ssim = evaluate(start, held, refine_cfg.background)
    _, rep = refine(start, input_image, pseudo, held, replace(refine_cfg, seed=cfg.seed), on_step=on_step)
    return ExperimentReport(init_psnr, rep.final_psnr, init_ssim, rep.final_ssim, rep.losses, rep.gaussian_counts, corrupted)


__all__ = [
    "CorruptionSpec",
    "ExperimentReport",
    "SynthConfig",
    "camera_ring",
    "color_cast",
    "corrupt_views",
    "perturb",
    "psnr",
    "random_scene",
    "run_recovery_experiment",
    "synth_scene",
]
