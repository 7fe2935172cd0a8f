"""Pure-numpy compositing kernels.

Same contract and same per-pixel arithmetic as :mod:`uars.raster.kernels`;
vectorized over the pixels of a tile and sequential over splats.
"""

import numpy as np

from .kernels import CUTOFF_M, EXP_CUT, KNORM, T_STOP, TILE


def _tile_pixels(t, n_tx, height, width):
    ty, tx = divmod(t, n_tx)
    ys = np.arange(ty * TILE, min((ty + 1) * TILE, height))
    xs = np.arange(tx * TILE, min((tx + 1) * TILE, width))
    iy, ix = np.meshgrid(ys, xs, indexing="ij")
    return iy.ravel(), ix.ravel()


def _footprint(m):
    t = 0.5 * (CUTOFF_M - m)
    return (np.exp(-0.5 * m) - EXP_CUT * (1.0 + t + 0.5 * t * t)) * KNORM


def _footprint_dm(m):
    t = 0.5 * (CUTOFF_M - m)
    return (-0.5 * np.exp(-0.5 * m) + 0.5 * EXP_CUT * (1.0 + t)) * KNORM


def _mahalanobis(px, py, means, conics, g):
    dx = px - means[g, 0]
    dy = py - means[g, 1]
    return conics[g, 0] * dx * dx + 2.0 * conics[g, 1] * dx * dy + conics[g, 2] * dy * dy, dx, dy


def _composite_pixels(px, py, splats, means, conics, opac, colors, depths, bg):
    n = px.shape[0]
    T = np.ones(n)
    col = np.zeros((n, 3))
    d = np.zeros(n)
    live = np.arange(n)
    for g in splats:
        if live.size == 0:
            break
        m, _, _ = _mahalanobis(px[live], py[live], means, conics, g)
        hit = m <= CUTOFF_M
        if not hit.any():
            continue
        idx = live[hit]
        a = opac[g] * _footprint(m[hit])
        w = a * T[idx]
        col[idx, 0] += w * colors[g, 0]
        col[idx, 1] += w * colors[g, 1]
        col[idx, 2] += w * colors[g, 2]
        d[idx] += w * depths[g]
        T[idx] = T[idx] * (1.0 - a)
        done = T[idx] < T_STOP
        if done.any():
            keep = np.ones(live.size, dtype=bool)
            keep[np.flatnonzero(hit)[done]] = False
            live = live[keep]
    out = np.empty((n, 3))
    for c in range(3):
        out[:, c] = col[:, c] + T * bg[c]
    return out, 1.0 - T, d


def composite_forward(
    tile_start, tile_end, pair_gauss, means, conics, opac, colors, depths, bg, height, width, out_color, out_alpha, out_depth
):
    n_tx = (width + TILE - 1) // TILE
    for t in range(tile_start.shape[0]):
        iy, ix = _tile_pixels(t, n_tx, height, width)
        c, a, d = _composite_pixels(
            ix + 0.5, iy + 0.5, pair_gauss[tile_start[t] : tile_end[t]], means, conics, opac, colors, depths, bg
        )
        out_color[iy, ix] = c
        out_alpha[iy, ix] = a
        out_depth[iy, ix] = d


def composite_bruteforce(order, means, conics, opac, colors, depths, bg, height, width, out_color, out_alpha, out_depth):
    iy, ix = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    iy, ix = iy.ravel(), ix.ravel()
    c, a, d = _composite_pixels(ix + 0.5, iy + 0.5, order, means, conics, opac, colors, depths, bg)
    out_color[iy, ix] = c
    out_alpha[iy, ix] = a
    out_depth[iy, ix] = d


def composite_backward(
    tile_start, tile_end, pair_gauss, means, conics, opac, colors, bg, height, width, grad_color, grad_alpha, pair_grads
):
    n_tx = (width + TILE - 1) // TILE
    for t in range(tile_start.shape[0]):
        s0, s1 = tile_start[t], tile_end[t]
        if s1 == s0:
            continue
        iy, ix = _tile_pixels(t, n_tx, height, width)
        px, py = ix + 0.5, iy + 0.5
        n = px.shape[0]
        K = s1 - s0
        alphas = np.zeros((K, n))
        trans = np.zeros((K, n))
        T = np.ones(n)
        live = np.ones(n, dtype=bool)
        for j in range(K):
            g = pair_gauss[s0 + j]
            m, _, _ = _mahalanobis(px, py, means, conics, g)
            hit = live & (m <= CUTOFF_M)
            a = np.where(hit, opac[g] * _footprint(np.minimum(m, CUTOFF_M)), 0.0)
            alphas[j] = a
            trans[j] = T
            T = np.where(hit, T * (1.0 - a), T)
            live &= T >= T_STOP
        gc = grad_color[iy, ix]
        ga = grad_alpha[iy, ix]
        B = np.tile(np.asarray(bg, dtype=np.float64), (n, 1))
        P = np.ones(n)
        for j in range(K - 1, -1, -1):
            a = alphas[j]
            on = a != 0.0
            if not on.any():
                continue
            g = pair_gauss[s0 + j]
            Tk = trans[j]
            w = a * Tk
            pair_grads[s0 + j, 6:9] += (gc * w[:, None]).sum(axis=0)
            c = colors[g]
            dl_da = Tk * ((gc * (c[None, :] - B)).sum(axis=1)) + ga * Tk * P
            B = np.where(on[:, None], a[:, None] * c[None, :] + (1.0 - a[:, None]) * B, B)
            P = np.where(on, (1.0 - a) * P, P)
            m, dx, dy = _mahalanobis(px, py, means, conics, g)
            mc = np.minimum(m, CUTOFF_M)
            dl_da = np.where(on, dl_da, 0.0)
            pair_grads[s0 + j, 5] += np.sum(dl_da * _footprint(mc))
            dl_dm = dl_da * opac[g] * _footprint_dm(mc)
            pair_grads[s0 + j, 0] += np.sum(dl_dm * -2.0 * (conics[g, 0] * dx + conics[g, 1] * dy))
            pair_grads[s0 + j, 1] += np.sum(dl_dm * -2.0 * (conics[g, 1] * dx + conics[g, 2] * dy))
            pair_grads[s0 + j, 2] += np.sum(dl_dm * dx * dx)
            pair_grads[s0 + j, 3] += np.sum(dl_dm * 2.0 * dx * dy)
            pair_grads[s0 + j, 4] += np.sum(dl_dm * dy * dy)
