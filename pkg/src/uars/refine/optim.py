"""Adam over named parameter groups, with row remapping for ADP."""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, params: dict[str, np.ndarray], betas=(0.9, 0.999), eps=1e-15):
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lrs: dict[str, float]) -> None:
        """In-place update of every group in ``params``."""
        self.t += 1
        bc1 = 1.0 - self.b1**self.t
        bc2 = 1.0 - self.b2**self.t
        for k, p in params.items():
            g = grads[k]
            m = self.m[k]
            v = self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            lr = lrs[k]
            if lr == 0.0:
                continue
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def remap(self, source: np.ndarray) -> None:
        """Rows follow ``source`` (old row index per new row, -1 = fresh)."""
        keep = source >= 0
        for state in (self.m, self.v):
            for k, arr in state.items():
                new = np.zeros((source.size,) + arr.shape[1:])
                new[keep] = arr[source[keep]]
                state[k] = new
