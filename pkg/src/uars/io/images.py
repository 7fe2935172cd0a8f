"""Image files <-> float arrays in [0, 1].

8-bit PNG is the interchange format. UARS tensor files (detected by their
magic bytes) are accepted too, for float32-exact supervision images.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageError, TensorError
from .tensor import MAGIC, parse_tensor, tensor_bytes


def _load_tensor_image(path, buf: bytes) -> np.ndarray:
    try:
        arr = parse_tensor(buf)
    except TensorError as e:
        raise ImageError(f"{path}: {e}", e.code) from None
    if arr.shape[2] != 3:
        raise ImageError(f"{path}: expected 3 channels, got {arr.shape[2]}", "image.channels")
    if arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0:
        raise ImageError(f"{path}: values outside [0, 1]", "image.range")
    return arr


def load_image(path) -> np.ndarray:
    try:
        with open(path, "rb") as f:
            head = f.read(4)
            if head == MAGIC:
                return _load_tensor_image(path, head + f.read())
    except FileNotFoundError:
        raise ImageError(f"{path}: no such file", "image.missing") from None
    try:
        with Image.open(path) as im:
            if im.mode not in ("RGB", "RGBA", "L", "P"):
                raise ImageError(f"{path}: unsupported image mode {im.mode} (8-bit only)", "image.mode")
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    except FileNotFoundError:
        raise ImageError(f"{path}: no such file", "image.missing") from None
    except (UnidentifiedImageError, OSError) as e:
        raise ImageError(f"{path}: unreadable image ({e})", "image.unreadable") from None
    return arr / 255.0


def to_uint8(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def png_bytes(img) -> bytes:
    a = to_uint8(img)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[..., 0]
    buf = io.BytesIO()
    Image.fromarray(a).save(buf, format="PNG")
    return buf.getvalue()


def save_image(img, path) -> None:
    """PNG by default; a ``.uars`` suffix writes a float32 tensor instead."""
    data = tensor_bytes(np.asarray(img, dtype=np.float64)) if str(path).endswith(".uars") else png_bytes(img)
    with open(path, "wb") as f:
        f.write(data)


def resize_image(img, height: int, width: int) -> np.ndarray:
    """Bilinear resample of each channel to ``(height, width)``."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape[:2] == (height, width):
        return img.copy()
    chans = [
        np.asarray(Image.fromarray(img[..., c].astype(np.float32), mode="F").resize((width, height), Image.BILINEAR))
        for c in range(img.shape[2])
    ]
    return np.clip(np.stack(chans, axis=-1).astype(np.float64), 0.0, 1.0)
