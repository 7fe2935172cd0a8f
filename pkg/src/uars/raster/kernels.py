"""Compositing kernels compiled with numba.

Every splat is a truncated Gaussian. Inside its 3-sigma ellipse the weight is
``exp(-m/2)`` minus its second-order Taylor polynomial around the cutoff
``m = 9``, rescaled so the center weight is 1; outside it is exactly zero.
The footprint and its first two derivatives vanish at the cutoff, so finite
differences stay smooth there and tile binning can skip splats without
changing any pixel value.
"""

import math

import numpy as np

from .._jit import njit, prange

TILE = 16
CUTOFF_M = 9.0
T_STOP = 1e-4
EXP_CUT = math.exp(-0.5 * CUTOFF_M)
# 1 + t + t^2/2 at t = CUTOFF_M / 2, i.e. the Taylor polynomial at the center
KNORM = 1.0 / (1.0 - EXP_CUT * (1.0 + 0.5 * CUTOFF_M + 0.125 * CUTOFF_M * CUTOFF_M))


@njit(cache=True, inline="always")
def _footprint(m):
    t = 0.5 * (CUTOFF_M - m)
    return (math.exp(-0.5 * m) - EXP_CUT * (1.0 + t + 0.5 * t * t)) * KNORM


@njit(cache=True, inline="always")
def _footprint_dm(m):
    t = 0.5 * (CUTOFF_M - m)
    return (-0.5 * math.exp(-0.5 * m) + 0.5 * EXP_CUT * (1.0 + t)) * KNORM


@njit(cache=True, inline="always")
def _mahalanobis(px, py, means, conics, g):
    dx = px - means[g, 0]
    dy = py - means[g, 1]
    return conics[g, 0] * dx * dx + 2.0 * conics[g, 1] * dx * dy + conics[g, 2] * dy * dy, dx, dy


@njit(cache=True, parallel=True)
def composite_forward(
    tile_start, tile_end, pair_gauss, means, conics, opac, colors, depths, bg, height, width, out_color, out_alpha, out_depth
):
    n_tx = (width + TILE - 1) // TILE
    n_tiles = tile_start.shape[0]
    for t in prange(n_tiles):
        ty = t // n_tx
        tx = t - ty * n_tx
        s0 = tile_start[t]
        s1 = tile_end[t]
        for iy in range(ty * TILE, min((ty + 1) * TILE, height)):
            py = iy + 0.5
            for ix in range(tx * TILE, min((tx + 1) * TILE, width)):
                px = ix + 0.5
                T = 1.0
                cr = 0.0
                cg = 0.0
                cb = 0.0
                d = 0.0
                for k in range(s0, s1):
                    g = pair_gauss[k]
                    m, dx, dy = _mahalanobis(px, py, means, conics, g)
                    if m > CUTOFF_M:
                        continue
                    a = opac[g] * _footprint(m)
                    w = a * T
                    cr += w * colors[g, 0]
                    cg += w * colors[g, 1]
                    cb += w * colors[g, 2]
                    d += w * depths[g]
                    T = T * (1.0 - a)
                    if T < T_STOP:
                        break
                out_color[iy, ix, 0] = cr + T * bg[0]
                out_color[iy, ix, 1] = cg + T * bg[1]
                out_color[iy, ix, 2] = cb + T * bg[2]
                out_alpha[iy, ix] = 1.0 - T
                out_depth[iy, ix] = d


@njit(cache=True)
def composite_bruteforce(order, means, conics, opac, colors, depths, bg, height, width, out_color, out_alpha, out_depth):
    """Reference compositor: every pixel walks every splat in depth order."""
    for iy in range(height):
        py = iy + 0.5
        for ix in range(width):
            px = ix + 0.5
            T = 1.0
            cr = 0.0
            cg = 0.0
            cb = 0.0
            d = 0.0
            for k in range(order.shape[0]):
                g = order[k]
                m, dx, dy = _mahalanobis(px, py, means, conics, g)
                if m > CUTOFF_M:
                    continue
                a = opac[g] * _footprint(m)
                w = a * T
                cr += w * colors[g, 0]
                cg += w * colors[g, 1]
                cb += w * colors[g, 2]
                d += w * depths[g]
                T = T * (1.0 - a)
                if T < T_STOP:
                    break
            out_color[iy, ix, 0] = cr + T * bg[0]
            out_color[iy, ix, 1] = cg + T * bg[1]
            out_color[iy, ix, 2] = cb + T * bg[2]
            out_alpha[iy, ix] = 1.0 - T
            out_depth[iy, ix] = d


@njit(cache=True, parallel=True)
def composite_backward(
    tile_start, tile_end, pair_gauss, means, conics, opac, colors, bg, height, width, grad_color, grad_alpha, pair_grads
):
    """Accumulate per (tile, splat) pair gradients into ``pair_grads``.

    Columns: d/dmean (2), d/dconic a, b, c (3), d/dopacity (1), d/dcolor (3).
    Pairs are owned by exactly one tile, so tiles never write the same row.
    """
    n_tx = (width + TILE - 1) // TILE
    n_tiles = tile_start.shape[0]
    for t in prange(n_tiles):
        ty = t // n_tx
        tx = t - ty * n_tx
        s0 = tile_start[t]
        s1 = tile_end[t]
        n = s1 - s0
        if n == 0:
            continue
        alphas = np.empty(n)
        trans = np.empty(n)
        for iy in range(ty * TILE, min((ty + 1) * TILE, height)):
            py = iy + 0.5
            for ix in range(tx * TILE, min((tx + 1) * TILE, width)):
                px = ix + 0.5
                T = 1.0
                last = -1
                for k in range(s0, s1):
                    g = pair_gauss[k]
                    m, dx, dy = _mahalanobis(px, py, means, conics, g)
                    if m > CUTOFF_M:
                        alphas[k - s0] = 0.0
                        trans[k - s0] = T
                        continue
                    a = opac[g] * _footprint(m)
                    alphas[k - s0] = a
                    trans[k - s0] = T
                    last = k
                    T = T * (1.0 - a)
                    if T < T_STOP:
                        break
                if last < 0:
                    continue
                gr = grad_color[iy, ix, 0]
                gg = grad_color[iy, ix, 1]
                gb = grad_color[iy, ix, 2]
                ga = grad_alpha[iy, ix]
                br = bg[0]
                bgg = bg[1]
                bb = bg[2]
                P = 1.0
                for k in range(last, s0 - 1, -1):
                    a = alphas[k - s0]
                    if a == 0.0:
                        continue
                    g = pair_gauss[k]
                    Tk = trans[k - s0]
                    w = a * Tk
                    c0 = colors[g, 0]
                    c1 = colors[g, 1]
                    c2 = colors[g, 2]
                    pair_grads[k, 6] += gr * w
                    pair_grads[k, 7] += gg * w
                    pair_grads[k, 8] += gb * w
                    dl_da = Tk * (gr * (c0 - br) + gg * (c1 - bgg) + gb * (c2 - bb)) + ga * Tk * P
                    br = a * c0 + (1.0 - a) * br
                    bgg = a * c1 + (1.0 - a) * bgg
                    bb = a * c2 + (1.0 - a) * bb
                    P = (1.0 - a) * P
                    m, dx, dy = _mahalanobis(px, py, means, conics, g)
                    pair_grads[k, 5] += dl_da * _footprint(m)
                    dl_dm = dl_da * opac[g] * _footprint_dm(m)
                    pair_grads[k, 0] += dl_dm * -2.0 * (conics[g, 0] * dx + conics[g, 1] * dy)
                    pair_grads[k, 1] += dl_dm * -2.0 * (conics[g, 1] * dx + conics[g, 2] * dy)
                    pair_grads[k, 2] += dl_dm * dx * dx
                    pair_grads[k, 3] += dl_dm * 2.0 * dx * dy
                    pair_grads[k, 4] += dl_dm * dy * dy
