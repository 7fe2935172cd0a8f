"""Gaussian PLY in the common 3DGS layout (binary little-endian, float32)."""

from __future__ import annotations

import os

import numpy as np

from ..core import SH_C0, GaussianScene
from .errors import PlyError

REQUIRED = (
    ["x", "y", "z"]
    + [f"f_dc_{i}" for i in range(3)]
    + ["opacity"]
    + [f"scale_{i}" for i in range(3)]
    + [f"rot_{i}" for i in range(4)]
)
_FLOAT_TYPES = {"float", "float32"}
_UNIT_TOL = 1e-6


def _read_header(f) -> tuple[int, list[str], int]:
    first = f.readline()
    if first.rstrip(b"\r\n") != b"ply":
        raise PlyError("not a PLY file (missing 'ply' magic)", "ply.bad_magic")
    fmt = None
    count = None
    props: list[str] = []
    in_vertex = False
    while True:
        raw = f.readline()
        if not raw:
            raise PlyError("truncated header (no end_header)", "ply.truncated_header")
        try:
            line = raw.decode("ascii").strip()
        except UnicodeDecodeError:
            raise PlyError("header is not ASCII", "ply.bad_header") from None
        if line == "end_header":
            break
        parts = line.split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        if parts[0] == "format":
            fmt = parts[1] if len(parts) > 1 else ""
        elif parts[0] == "element":
            in_vertex = len(parts) == 3 and parts[1] == "vertex"
            if in_vertex:
                try:
                    count = int(parts[2])
                except ValueError:
                    raise PlyError(f"bad vertex count {parts[2]!r}", "ply.bad_header") from None
                if count < 0:
                    raise PlyError("negative vertex count", "ply.bad_header")
            else:
                raise PlyError(f"unsupported element {' '.join(parts[1:])!r}", "ply.bad_header")
        elif parts[0] == "property":
            if not in_vertex or len(parts) != 3:
                raise PlyError(f"unsupported property line {line!r}", "ply.bad_header")
            if parts[1] not in _FLOAT_TYPES:
                raise PlyError(f"property {parts[2]} has type {parts[1]}, expected float", "ply.bad_property_type")
            props.append(parts[2])
        else:
            raise PlyError(f"unrecognized header line {line!r}", "ply.bad_header")
    if fmt != "binary_little_endian":
        raise PlyError("binary_little_endian required", "ply.format")
    if count is None:
        raise PlyError("no vertex element", "ply.bad_header")
    if len(set(props)) != len(props):
        raise PlyError("duplicate property names", "ply.bad_header")
    return count, props, f.tell()


def load_ply(path) -> GaussianScene:
    with open(path, "rb") as f:
        count, props, _ = _read_header(f)
        payload = f.read()
    for name in REQUIRED:
        if name not in props:
            raise PlyError(f"missing property {name}", "ply.missing_property")
    dtype = np.dtype([(p, "<f4") for p in props])
    need = count * dtype.itemsize
    if len(payload) < need:
        raise PlyError(f"truncated payload: {len(payload)} of {need} bytes", "ply.truncated")
    if len(payload) > need:
        raise PlyError(f"{len(payload) - need} trailing bytes after vertex data", "ply.trailing_data")
    data = np.frombuffer(payload, dtype=dtype, count=count)

    def cols(names):
        return np.stack([data[n].astype(np.float64) for n in names], axis=1) if count else np.zeros((0, len(names)))

    fields = {
        "positions": cols(["x", "y", "z"]),
        "f_dc": cols([f"f_dc_{i}" for i in range(3)]),
        "opacity": cols(["opacity"])[:, 0] if count else np.zeros(0),
        "scales": cols([f"scale_{i}" for i in range(3)]),
        "rots": cols([f"rot_{i}" for i in range(4)]),
    }
    for name, arr in fields.items():
        if not np.all(np.isfinite(arr)):
            raise PlyError(f"non-finite values in {name}", "ply.non_finite")
    rots = fields["rots"]
    norms = np.linalg.norm(rots, axis=1)
    if np.any(norms == 0):
        raise PlyError("degenerate rotation (zero quaternion)", "ply.degenerate_rotation")
    # already-unit quaternions are kept untouched so save/load is byte-stable
    fix = np.abs(norms - 1.0) > _UNIT_TOL
    rots[fix] = rots[fix] / norms[fix, None]
    colors = np.clip(fields["f_dc"] * SH_C0 + 0.5, 0.0, 1.0)
    return GaussianScene(fields["positions"], rots, fields["scales"], fields["opacity"], colors)


def ply_bytes(scene: GaussianScene) -> bytes:
    n = len(scene)
    header = "ply\nformat binary_little_endian 1.0\n"
    header += f"element vertex {n}\n"
    header += "".join(f"property float {p}\n" for p in REQUIRED)
    header += "end_header\n"
    dtype = np.dtype([(p, "<f4") for p in REQUIRED])
    rec = np.empty(n, dtype=dtype)
    f_dc = (scene.colors - 0.5) / SH_C0
    for i, p in enumerate("xyz"):
        rec[p] = scene.positions[:, i]
    for i in range(3):
        rec[f"f_dc_{i}"] = f_dc[:, i]
        rec[f"scale_{i}"] = scene.log_scales[:, i]
    rec["opacity"] = scene.opacity_logits
    for i in range(4):
        rec[f"rot_{i}"] = scene.rotations[:, i]
    return header.encode("ascii") + rec.tobytes()


def save_ply(scene: GaussianScene, path) -> None:
    data = ply_bytes(scene)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)
