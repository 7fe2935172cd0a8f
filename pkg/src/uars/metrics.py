"""Image quality metrics."""

import numpy as np

from .core import check_same_shape
from .loss import LossConfig, ssim

PSNR_CAP = 100.0


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB for unit dynamic range, capped at 100."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_same_shape(a, b, "psnr")
    mse = float(np.mean((a - b) ** 2))
    if mse < 1e-10:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def ssim_value(a, b, cfg: LossConfig = LossConfig()) -> float:
    return ssim(a, b, cfg, with_grad=False)
