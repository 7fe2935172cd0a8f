"""Tile-based forward rasterizer and its analytic backward pass."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _jit
from ..core import CameraView, GaussianScene, sigmoid
from . import kernels as _nb
from . import kernels_np as _np
from .kernels import TILE
from .project import Projected, project_arrays, project_backward


def _backend(name: str | None):
    name = name or _jit.backend()
    if name == "numba":
        return _nb
    if name == "numpy":
        return _np
    raise ValueError(f"unknown raster backend {name!r}")


@dataclass
class Binning:
    order: np.ndarray  # visible Gaussian indices, depth ascending
    tile_start: np.ndarray
    tile_end: np.ndarray
    pair_gauss: np.ndarray  # Gaussian index per (tile, splat) pair


def bin_splats(p: Projected, cam: CameraView) -> Binning:
    """Sort visible splats by depth and assign them to every 16x16 tile their
    3-sigma box touches. Within a tile, pairs keep the global depth order."""
    vis = np.flatnonzero(p.visible)
    order = vis[np.lexsort((vis, p.depths[vis]))]
    n_tx = (cam.width + TILE - 1) // TILE
    n_ty = (cam.height + TILE - 1) // TILE
    n_tiles = n_tx * n_ty
    if order.size == 0:
        z = np.zeros(n_tiles, dtype=np.int64)
        return Binning(order, z, z.copy(), np.zeros(0, dtype=np.int64))

    mx, my, r = p.means[order, 0], p.means[order, 1], p.radii[order]
    # pixel j has its center at j + 0.5; one pixel of slack on each side
    x0 = np.clip(np.floor(mx - r - 1.0), 0, cam.width - 1).astype(np.int64) // TILE
    x1 = np.clip(np.floor(mx + r + 1.0), 0, cam.width - 1).astype(np.int64) // TILE
    y0 = np.clip(np.floor(my - r - 1.0), 0, cam.height - 1).astype(np.int64) // TILE
    y1 = np.clip(np.floor(my + r + 1.0), 0, cam.height - 1).astype(np.int64) // TILE
    bw = x1 - x0 + 1
    bh = y1 - y0 + 1
    counts = bw * bh
    splat = np.repeat(np.arange(order.size), counts)
    local = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    tx = x0[splat] + local % bw[splat]
    ty = y0[splat] + local // bw[splat]
    tile = ty * n_tx + tx
    perm = np.argsort(tile, kind="stable")
    tile = tile[perm]
    pair_gauss = order[splat[perm]].astype(np.int64)
    ids = np.arange(n_tiles)
    tile_start = np.searchsorted(tile, ids, side="left").astype(np.int64)
    tile_end = np.searchsorted(tile, ids, side="right").astype(np.int64)
    return Binning(order, tile_start, tile_end, pair_gauss)


@dataclass
class RenderOutput:
    color: np.ndarray  # (H, W, 3)
    alpha: np.ndarray  # (H, W, 1)
    depth: np.ndarray  # (H, W, 1), expected (unnormalized) depth
    projected: Projected = field(default=None, repr=False)
    binning: Binning = field(default=None, repr=False)


def _background(background) -> np.ndarray:
    if background is None:
        return np.zeros(3)
    bg = np.broadcast_to(np.asarray(background, dtype=np.float64), (3,))
    return np.ascontiguousarray(bg)


def _flat_inputs(scene: GaussianScene, p: Projected):
    return (
        np.ascontiguousarray(p.means),
        np.ascontiguousarray(p.conics),
        np.ascontiguousarray(sigmoid(scene.opacity_logits)),
        np.ascontiguousarray(scene.colors),
        np.ascontiguousarray(p.depths),
    )


def render(scene: GaussianScene, cam: CameraView, background=None, backend: str | None = None) -> RenderOutput:
    """Composite the scene front-to-back through ``cam``.

    Each pixel blends the splats of its tile in ascending camera depth and
    stops once transmittance falls below 1e-4.
    """
    bg = _background(background)
    H, W = cam.height, cam.width
    color = np.empty((H, W, 3))
    alpha = np.empty((H, W))
    depth = np.empty((H, W))
    p = project_arrays(scene, cam)
    b = bin_splats(p, cam)
    means, conics, opac, colors, depths = _flat_inputs(scene, p)
    _backend(backend).composite_forward(
        b.tile_start, b.tile_end, b.pair_gauss, means, conics, opac, colors, depths, bg, H, W, color, alpha, depth
    )
    return RenderOutput(color, alpha[..., None], depth[..., None], p, b)


def render_bruteforce(scene: GaussianScene, cam: CameraView, background=None, backend: str | None = None) -> RenderOutput:
    """Reference render that ignores tiling: every pixel visits every visible
    splat in the same global depth order as :func:`render`."""
    bg = _background(background)
    H, W = cam.height, cam.width
    color = np.empty((H, W, 3))
    alpha = np.empty((H, W))
    depth = np.empty((H, W))
    p = project_arrays(scene, cam)
    vis = np.flatnonzero(p.visible)
    order = vis[np.lexsort((vis, p.depths[vis]))].astype(np.int64)
    means, conics, opac, colors, depths = _flat_inputs(scene, p)
    _backend(backend).composite_bruteforce(order, means, conics, opac, colors, depths, bg, H, W, color, alpha, depth)
    return RenderOutput(color, alpha[..., None], depth[..., None], p, None)


@dataclass
class RenderGradients:
    positions: np.ndarray
    rotations: np.ndarray
    log_scales: np.ndarray
    opacity_logits: np.ndarray
    colors: np.ndarray
    mean2d_norm: np.ndarray  # |dL/dmean_2d| per Gaussian, pixel units
    visible: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {
            "positions": self.positions,
            "rotations": self.rotations,
            "log_scales": self.log_scales,
            "opacity_logits": self.opacity_logits,
            "colors": self.colors,
        }


def render_backward(
    scene: GaussianScene,
    cam: CameraView,
    grad_color,
    grad_alpha=None,
    background=None,
    forward: RenderOutput | None = None,
    backend: str | None = None,
) -> RenderGradients:
    """Gradients of a scalar loss w.r.t. every Gaussian parameter, given the
    loss gradients w.r.t. the rendered color (and optionally alpha)."""
    H, W = cam.height, cam.width
    grad_color = np.asarray(grad_color, dtype=np.float64)
    if grad_color.shape != (H, W, 3):
        raise ValueError(f"grad_color: dimension mismatch {grad_color.shape} vs {(H, W, 3)}")
    if grad_alpha is None:
        grad_alpha = np.zeros((H, W))
    else:
        grad_alpha = np.asarray(grad_alpha, dtype=np.float64)
        if grad_alpha.shape not in ((H, W), (H, W, 1)):
            raise ValueError(f"grad_alpha: dimension mismatch {grad_alpha.shape} vs {(H, W, 1)}")
        grad_alpha = grad_alpha.reshape(H, W)
    bg = _background(background)

    if forward is not None and forward.projected is not None and forward.binning is not None:
        p, b = forward.projected, forward.binning
    else:
        p = project_arrays(scene, cam)
        b = bin_splats(p, cam)
    n = len(scene)
    means, conics, opac, colors, _ = _flat_inputs(scene, p)
    pair_grads = np.zeros((b.pair_gauss.size, 9))
    _backend(backend).composite_backward(
        b.tile_start,
        b.tile_end,
        b.pair_gauss,
        means,
        conics,
        opac,
        colors,
        bg,
        H,
        W,
        np.ascontiguousarray(grad_color),
        np.ascontiguousarray(grad_alpha),
        pair_grads,
    )
    per = np.zeros((n, 9))
    np.add.at(per, b.pair_gauss, pair_grads)

    geo = project_backward(p, cam, per[:, 0:2], per[:, 2:5])
    g_opacity = per[:, 5] * opac * (1.0 - opac)
    return RenderGradients(
        positions=geo["positions"],
        rotations=geo["rotations"],
        log_scales=geo["log_scales"],
        opacity_logits=g_opacity,
        colors=per[:, 6:9].copy(),
        mean2d_norm=np.linalg.norm(per[:, 0:2], axis=1),
        visible=p.visible.copy(),
    )
