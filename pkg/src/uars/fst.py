"""Fourier style transfer: swap the low-frequency amplitude spectrum of a
content image for that of a style image while keeping the content phase."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import check_image, check_same_shape


@dataclass(frozen=True)
class FstConfig:
    beta: float = 0.01
    enabled: bool = True

    def __post_init__(self):
        if not (0.0 < self.beta <= 0.5):
            raise ValueError(f"fst beta must lie in (0, 0.5], got {self.beta}")


def amplitude_phase_split(channel) -> tuple[np.ndarray, np.ndarray]:
    spec = np.fft.fft2(np.asarray(channel, dtype=np.float64))
    return np.abs(spec), np.angle(spec)


def reconstruct(amplitude, phase) -> np.ndarray:
    return np.real(np.fft.ifft2(np.asarray(amplitude) * np.exp(1j * np.asarray(phase))))


def low_freq_mask(height: int, width: int, beta: float) -> np.ndarray:
    """Boolean mask (unshifted FFT layout) of the centered square window with
    half-width ``floor(beta * min(H, W))`` frequency bins, DC included.

    The window is symmetric under frequency negation, so swapping amplitudes
    inside it keeps a real image's spectrum Hermitian.
    """
    b = int(np.floor(beta * min(height, width)))
    fy = np.abs(np.rint(np.fft.fftfreq(height) * height)).astype(int)
    fx = np.abs(np.rint(np.fft.fftfreq(width) * width)).astype(int)
    return (fy[:, None] <= b) & (fx[None, :] <= b)


def fst_spectrum(content, style, cfg: FstConfig = FstConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude and phase ``(C, H, W)`` of the style-adapted image before the
    inverse transform. The phase is the content phase, untouched."""
    content = check_image(content, "content")
    style = check_image(style, "style")
    check_same_shape(content, style, "fst content/style")
    H, W, C = content.shape
    mask = low_freq_mask(H, W, cfg.beta)
    amp = np.empty((C, H, W))
    phase = np.empty((C, H, W))
    for c in range(C):
        amp_c, phase[c] = amplitude_phase_split(content[..., c])
        amp_s, _ = amplitude_phase_split(style[..., c])
        amp[c] = np.where(mask, amp_s, amp_c)
    return amp, phase


def fst_transfer(content, style, cfg: FstConfig = FstConfig(), clamp: bool = True) -> np.ndarray:
    amp, phase = fst_spectrum(content, style, cfg)
    out = np.stack([reconstruct(a, p) for a, p in zip(amp, phase)], axis=-1)
    return np.clip(out, 0.0, 1.0) if clamp else out
