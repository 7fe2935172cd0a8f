"""Reconstruction objectives with analytic gradients w.r.t. the rendered image."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import check_image, check_same_shape
from .filters import sep_filter, ssim_terms


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.2
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    dynamic_range: float = 1.0
    # add +alpha*SSIM instead of alpha*(1 - SSIM)/2; only for investigating the sign
    literal_ssim: bool = False

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("loss alpha must be >= 0")
        if self.ssim_window < 1 or self.ssim_window % 2 == 0:
            raise ValueError("ssim_window must be a positive odd integer")


@dataclass
class LossOutput:
    value: float
    grad_rendered: np.ndarray
    l2: float = 0.0
    ssim: float = 1.0


@lru_cache(maxsize=8)
def _gauss_kernel(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    k = np.exp(-(x**2) / (2 * sigma**2))
    return k / k.sum()


@lru_cache(maxsize=8)
def _window_mass(height: int, width: int, size: int, sigma: float) -> np.ndarray:
    # share of the window that falls inside the image at each pixel
    m = sep_filter(np.ones((height, width, 1)), _gauss_kernel(size, sigma))
    m.flags.writeable = False
    return m


def ssim(a, b, cfg: LossConfig = LossConfig(), with_grad: bool = True):
    """Mean SSIM over pixels and channels, plus its gradient w.r.t. ``a``.

    Local statistics use a Gaussian window clipped at the image border with
    the remaining weights renormalized.
    """
    a = check_image(a, "ssim a", channels=None)
    b = check_image(b, "ssim b", channels=None)
    check_same_shape(a, b, "ssim")
    k = _gauss_kernel(cfg.ssim_window, cfg.ssim_sigma)
    H, W, C = a.shape
    norm = _window_mass(H, W, cfg.ssim_window, cfg.ssim_sigma)
    # one filter pass over all five moment maps
    moments = sep_filter(np.concatenate([a, b, a * a, b * b, a * b], axis=2), k) / norm
    C1 = (0.01 * cfg.dynamic_range) ** 2
    C2 = (0.03 * cfg.dynamic_range) ** 2
    smap, pre = ssim_terms(moments, C, C1, C2, 1.0 / (H * W * C))
    value = float(smap.mean())
    if not with_grad:
        return value
    back = sep_filter(pre / norm, k)
    grad = back[..., :C] + 2 * a * back[..., C : 2 * C] + b * back[..., 2 * C :]
    return value, grad


def _weights(u, shape) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 2:
        u = u[..., None]
    if u.shape != shape[:2] + (1,):
        raise ValueError(f"uncertainty map: dimension mismatch {u.shape[:2]} vs {shape[:2]}")
    return u


def uw_l2(rendered, target, u) -> tuple[float, np.ndarray]:
    """Mean of ((1 - U) * (rendered - target))^2 with U broadcast over channels."""
    rendered = check_image(rendered, "rendered", channels=None)
    target = check_image(target, "target", channels=None)
    check_same_shape(rendered, target, "uw_l2")
    u = _weights(u, rendered.shape)
    conf = 1.0 - u
    r = conf * (rendered - target)
    n = rendered.size
    value = float(np.sum(r * r) / n)
    grad = 2.0 * conf * r / n
    # fully uncertain pixels must not leak any gradient
    full = np.broadcast_to(u == 1.0, grad.shape)
    assert not np.any(grad[full]), "nonzero L2 gradient on U = 1 pixels"
    return value, grad


def refine_loss(rendered, pseudo_fst, u, cfg: LossConfig = LossConfig()) -> LossOutput:
    """Uncertainty-weighted L2 plus alpha * D-SSIM against the style-adapted
    pseudo-view."""
    l2, g_l2 = uw_l2(rendered, pseudo_fst, u)
    if cfg.alpha == 0:
        return LossOutput(l2, g_l2, l2, float("nan"))
    s, g_s = ssim(rendered, pseudo_fst, cfg)
    if cfg.literal_ssim:
        return LossOutput(l2 + cfg.alpha * s, g_l2 + cfg.alpha * g_s, l2, s)
    value = l2 + cfg.alpha * (1.0 - s) / 2.0
    return LossOutput(value, g_l2 - 0.5 * cfg.alpha * g_s, l2, s)
