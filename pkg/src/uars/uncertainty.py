"""Per-pixel class logits to a normalized entropy (uncertainty) map."""

from __future__ import annotations

import numpy as np


class ProbabilitySumError(ValueError):
    pass


def softmax_probs(logits) -> np.ndarray:
    """Channel-wise softmax of an ``(H, W, C)`` logit map, max-subtracted."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 3 or logits.shape[2] < 2:
        raise ValueError("need at least two classes")
    z = logits - logits.max(axis=2, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=2, keepdims=True)


def entropy_map(probs, normalize: bool = True, tol: float = 1e-4) -> np.ndarray:
    """Shannon entropy (natural log, 0 log 0 = 0) per pixel, shape ``(H, W, 1)``.

    With ``normalize`` the entropy is divided by ``ln C`` so the map lies in
    [0, 1].
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 3 or probs.shape[2] < 2:
        raise ValueError("need at least two classes")
    sums = probs.sum(axis=2)
    err = np.abs(sums - 1.0)
    if not np.all(err <= tol):
        i, j = np.unravel_index(np.argmax(np.where(np.isfinite(err), err, np.inf)), err.shape)
        raise ProbabilitySumError(f"probabilities at pixel (row={i}, col={j}) sum to {sums[i, j]!r}, not 1")
    if np.any(probs < 0):
        raise ValueError("negative probabilities")
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(probs > 0, probs * np.log(probs), 0.0)
    # sorting first makes the sum independent of class order, bit for bit
    u = -np.sort(plogp, axis=2).sum(axis=2, keepdims=True)
    u = np.maximum(u, 0.0)
    if normalize:
        u = np.minimum(u / np.log(probs.shape[2]), 1.0)
    return u


def uncertainty_from_logits(logits, probs: bool = False) -> np.ndarray:
    """Normalized uncertainty map; ``probs=True`` skips the softmax for
    producers that already emit probabilities."""
    p = np.asarray(logits, dtype=np.float64) if probs else softmax_probs(logits)
    return entropy_map(p, normalize=True)
