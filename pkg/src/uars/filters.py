"""Separable zero-padded correlation over the two spatial axes of an
``(H, W, C)`` array: a numba kernel and a scipy fallback."""

import numpy as np
from scipy.ndimage import correlate1d

from . import _jit
from ._jit import njit, prange


@njit(cache=True, parallel=True)
def _sep_filter_nb(x, k):
    H, W, C = x.shape
    r = k.shape[0] // 2
    tmp = np.zeros_like(x)
    out = np.zeros_like(x)
    for i in prange(H):
        for j in range(W):
            lo = max(0, j - r)
            hi = min(W - 1, j + r)
            for jj in range(lo, hi + 1):
                w = k[jj - j + r]
                for c in range(C):
                    tmp[i, j, c] += w * x[i, jj, c]
    for i in prange(H):
        lo = max(0, i - r)
        hi = min(H - 1, i + r)
        for ii in range(lo, hi + 1):
            w = k[ii - i + r]
            for j in range(W):
                for c in range(C):
                    out[i, j, c] += w * tmp[ii, j, c]
    return out


def _sep_filter_np(x, k):
    return correlate1d(correlate1d(x, k, axis=1, mode="constant"), k, axis=0, mode="constant")


def sep_filter(x, k, backend: str | None = None) -> np.ndarray:
    """Correlate with ``k`` along W then H, treating out-of-image samples as 0."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    k = np.ascontiguousarray(k, dtype=np.float64)
    if (backend or _jit.backend()) == "numba":
        return _sep_filter_nb(x, k)
    return _sep_filter_np(x, k)


@njit(cache=True, parallel=True)
def _ssim_terms_nb(m, C, C1, C2, g):
    H, W = m.shape[0], m.shape[1]
    smap = np.empty((H, W, C))
    back = np.empty((H, W, 3 * C))
    for i in prange(H):
        for j in range(W):
            for c in range(C):
                mu_a = m[i, j, c]
                mu_b = m[i, j, C + c]
                A1 = 2 * mu_a * mu_b + C1
                A2 = 2 * (m[i, j, 4 * C + c] - mu_a * mu_b) + C2
                B1 = mu_a**2 + mu_b**2 + C1
                B2 = (m[i, j, 2 * C + c] - mu_a**2) + (m[i, j, 3 * C + c] - mu_b**2) + C2
                r1 = A1 / B1
                s = r1 * (A2 / B2)
                smap[i, j, c] = s
                back[i, j, c] = g * (2.0 * (mu_b * (A2 - A1) - s * mu_a * (B2 - B1)) / (B1 * B2))
                back[i, j, C + c] = g * (-s / B2)
                back[i, j, 2 * C + c] = g * (2.0 * r1 / B2)
    return smap, back


def _ssim_terms_np(m, C, C1, C2, g):
    mu_a, mu_b, faa, fbb, fab = (m[..., i * C : (i + 1) * C] for i in range(5))
    A1 = 2 * mu_a * mu_b + C1
    A2 = 2 * (fab - mu_a * mu_b) + C2
    B1 = mu_a**2 + mu_b**2 + C1
    B2 = (faa - mu_a**2) + (fbb - mu_b**2) + C2
    r1 = A1 / B1
    smap = r1 * (A2 / B2)
    d_mu = 2.0 * (mu_b * (A2 - A1) - smap * mu_a * (B2 - B1)) / (B1 * B2)
    return smap, np.concatenate([g * d_mu, g * (-smap / B2), g * (2.0 * r1 / B2)], axis=2)


def ssim_terms(moments, C: int, C1: float, C2: float, g: float, backend: str | None = None):
    """Per-pixel SSIM map and the three pre-filter adjoint maps (scaled by
    ``g``) from the stacked local moments ``mu_a, mu_b, E[a^2], E[b^2], E[ab]``.

    The adjoints are written so they cancel exactly when the two images agree.
    """
    moments = np.ascontiguousarray(moments, dtype=np.float64)
    if (backend or _jit.backend()) == "numba":
        return _ssim_terms_nb(moments, C, float(C1), float(C2), float(g))
    return _ssim_terms_np(moments, C, C1, C2, g)
