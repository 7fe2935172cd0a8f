"""Adaptive densification and pruning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import GaussianScene, normalize_quaternion, quaternion_to_matrix, sigmoid
from .config import AdpConfig

SPLIT_SHRINK = 1.6


@dataclass
class AdpResult:
    scene: GaussianScene
    source: np.ndarray  # old index per new Gaussian; -1 for newly created
    cloned: int
    split: int
    pruned: int


def _unit_ball(rng, n) -> np.ndarray:
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * rng.uniform(size=(n, 1)) ** (1.0 / 3.0)


def adp_step(scene: GaussianScene, grad_stat, cfg: AdpConfig, rng: np.random.Generator) -> AdpResult:
    """Clone or split Gaussians whose mean screen-space gradient exceeds the
    threshold, then drop those with opacity below ``prune_opacity``.

    Small Gaussians are cloned with the copy offset inside the parent's
    1-sigma ellipsoid; large ones are replaced by ``split_count`` children
    sampled from the parent with scales divided by 1.6. New Gaussians get
    their own scale snapshot.
    """
    n = len(scene)
    grad_stat = np.asarray(grad_stat, dtype=np.float64)
    if grad_stat.shape != (n,):
        raise ValueError("adp: gradient statistic must have one entry per Gaussian")
    hot = grad_stat > cfg.grad_threshold
    scales = scene.scales
    small = scales.max(axis=1, initial=0.0) <= cfg.split_scale_fraction * scene.scene_extent
    clone = np.flatnonzero(hot & small)
    split = np.flatnonzero(hot & ~small)

    R = quaternion_to_matrix(normalize_quaternion(scene.rotations)) if n else np.zeros((0, 3, 3))
    params = scene.params()
    parts = {k: [v[np.setdiff1d(np.arange(n), split)]] for k, v in params.items()}
    snaps = [scene.initial_scales[np.setdiff1d(np.arange(n), split)]]
    source = [np.setdiff1d(np.arange(n), split)]

    if clone.size:
        offs = np.einsum("nij,nj->ni", R[clone], scales[clone] * _unit_ball(rng, clone.size))
        for k, v in params.items():
            parts[k].append(v[clone] + offs if k == "positions" else v[clone].copy())
        snaps.append(scales[clone].copy())
        source.append(np.full(clone.size, -1))

    if split.size:
        rep = np.repeat(split, cfg.split_count)
        offs = np.einsum("nij,nj->ni", R[rep], scales[rep] * rng.normal(size=(rep.size, 3)))
        for k, v in params.items():
            if k == "positions":
                parts[k].append(v[rep] + offs)
            elif k == "log_scales":
                parts[k].append(np.log(scales[rep] / SPLIT_SHRINK))
            else:
                parts[k].append(v[rep].copy())
        snaps.append(scales[rep] / SPLIT_SHRINK)
        source.append(np.full(rep.size, -1))

    merged = {k: np.concatenate(v) for k, v in parts.items()}
    snap = np.concatenate(snaps)
    src = np.concatenate(source).astype(np.int64)
    alive = sigmoid(merged["opacity_logits"]) >= cfg.prune_opacity
    out = GaussianScene(
        **{k: v[alive] for k, v in merged.items()}, initial_scales=snap[alive], scene_extent=scene.scene_extent
    )
    return AdpResult(out, src[alive], int(clone.size), int(split.size), int(np.count_nonzero(~alive)))
