"""UARS dense tensor files.

Layout (little-endian): b"UARS", u32 version (=1), u32 ndim, ndim x u32 dims
(row-major, [H, W, C] or [H, W]), then prod(dims) float32 values.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import TensorError

MAGIC = b"UARS"
VERSION = 1


def tensor_bytes(arr) -> bytes:
    arr = np.asarray(arr)
    if arr.ndim not in (2, 3):
        raise ValueError("tensor must be 2-D or 3-D")
    head = MAGIC + struct.pack("<II", VERSION, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def save_tensor(arr, path) -> None:
    with open(path, "wb") as f:
        f.write(tensor_bytes(arr))


def parse_tensor(buf: bytes) -> np.ndarray:
    if len(buf) < 12:
        raise TensorError("truncated tensor header", "tensor.truncated_header")
    if buf[:4] != MAGIC:
        raise TensorError(f"bad magic {buf[:4]!r}", "tensor.bad_magic")
    version, ndim = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise TensorError(f"unsupported tensor version {version}", "tensor.bad_version")
    if ndim not in (2, 3):
        raise TensorError(f"unsupported ndim {ndim}", "tensor.bad_ndim")
    off = 12 + 4 * ndim
    if len(buf) < off:
        raise TensorError("truncated tensor header", "tensor.truncated_header")
    dims = struct.unpack_from(f"<{ndim}I", buf, 12)
    n = int(np.prod(dims, dtype=np.int64))
    if len(buf) - off != 4 * n:
        raise TensorError(f"truncated tensor: dims {dims} need {4 * n} bytes, payload has {len(buf) - off}", "tensor.truncated")
    data = np.frombuffer(buf, dtype="<f4", count=n, offset=off).astype(np.float64).reshape(dims)
    if not np.all(np.isfinite(data)):
        raise TensorError("non-finite values in tensor", "tensor.non_finite")
    if ndim == 2:
        data = data[..., None]
    return data


def load_tensor(path) -> np.ndarray:
    """Dense map ``(H, W, C)`` in float64; 2-D files load with ``C = 1``."""
    with open(path, "rb") as f:
        return parse_tensor(f.read())
