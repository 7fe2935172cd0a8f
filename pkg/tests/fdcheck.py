"""Central finite differences over every scene parameter (double precision)."""

import numpy as np

from uars.core import PARAM_GROUPS

H_STEP = 1e-4


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def fd_scene_grads(loss_fn, scene, h=H_STEP):
    """``loss_fn(scene) -> float``; returns a dict of numerical gradients."""
    out = {}
    for name in PARAM_GROUPS:
        arr = getattr(scene, name)
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            lp = loss_fn(scene)
            flat[i] = keep - h
            lm = loss_fn(scene)
            flat[i] = keep
            gflat[i] = (lp - lm) / (2 * h)
        out[name] = g
    return out


def fd_image_grad(loss_fn, img, h=H_STEP):
    g = np.zeros_like(img)
    flat, gflat = img.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        lp = loss_fn(img)
        flat[i] = keep - h
        lm = loss_fn(img)
        flat[i] = keep
        gflat[i] = (lp - lm) / (2 * h)
    return g


def worst(analytic: dict, numeric: dict):
    return max(float(rel_err(analytic[k], numeric[k]).max()) for k in numeric)
