"""JSON view manifests and camera records."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import CameraView
from .errors import ImageError, ManifestError, TensorError
from .images import load_image
from .tensor import load_tensor

ORTHO_TOL = 1e-4


@dataclass
class ViewEntry:
    image: Path
    camera: CameraView
    logits: Path | None = None


@dataclass
class ViewManifest:
    input_image: Path
    views: list[ViewEntry]
    eval_views: list[ViewEntry] = field(default_factory=list)


def _num(obj, key, where, kind=float):
    if key not in obj:
        raise ManifestError(f"{where}.{key}: missing", "manifest.schema")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ManifestError(f"{where}.{key}: expected a number, got {type(v).__name__}", "manifest.schema")
    if kind is int:
        if float(v) != int(v):
            raise ManifestError(f"{where}.{key}: expected an integer", "manifest.schema")
        return int(v)
    if not np.isfinite(v):
        raise ManifestError(f"{where}.{key}: not finite", "manifest.schema")
    return float(v)


def parse_camera(obj, where: str = "camera") -> CameraView:
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}: expected an object", "manifest.schema")
    fx, fy, cx, cy = (_num(obj, k, where) for k in ("fx", "fy", "cx", "cy"))
    width, height = _num(obj, "width", where, int), _num(obj, "height", where, int)
    m = obj.get("world_to_camera")
    if not isinstance(m, list) or len(m) != 16:
        raise ManifestError(f"{where}.world_to_camera: expected 16 numbers (row-major 4x4)", "manifest.schema")
    for i, v in enumerate(m):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            raise ManifestError(f"{where}.world_to_camera[{i}]: expected a finite number", "manifest.schema")
    cam = CameraView(fx, fy, cx, cy, np.array(m, dtype=np.float64).reshape(4, 4), width, height)
    R = cam.rotation
    if not np.allclose(R @ R.T, np.eye(3), atol=ORTHO_TOL, rtol=0) or np.linalg.det(R) < 0:
        raise ManifestError(f"{where}.world_to_camera: rotation block is not orthonormal", "manifest.non_orthonormal")
    try:
        cam.validate(tol=ORTHO_TOL)
    except ValueError as e:
        raise ManifestError(f"{where}: {e}", "manifest.camera") from None
    return cam


def load_camera(path) -> CameraView:
    try:
        obj = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ManifestError(f"{path}: no such file", "manifest.missing_file") from None
    except json.JSONDecodeError as e:
        raise ManifestError(f"{path}: invalid JSON ({e})", "manifest.syntax") from None
    return parse_camera(obj, "camera")


def _path(base: Path, obj, key, where, required=True):
    if key not in obj or obj[key] is None:
        if required:
            raise ManifestError(f"{where}.{key}: missing", "manifest.schema")
        return None
    if not isinstance(obj[key], str):
        raise ManifestError(f"{where}.{key}: expected a path string", "manifest.schema")
    p = Path(obj[key])
    p = p if p.is_absolute() else base / p
    if not p.is_file():
        raise ManifestError(f"{where}.{key}: file not found: {p}", "manifest.missing_file")
    return p


def _views(base, arr, where) -> list[ViewEntry]:
    if not isinstance(arr, list):
        raise ManifestError(f"{where}: expected a list", "manifest.schema")
    out = []
    for i, v in enumerate(arr):
        w = f"{where}[{i}]"
        if not isinstance(v, dict):
            raise ManifestError(f"{w}: expected an object", "manifest.schema")
        unknown = set(v) - {"image", "camera", "logits"}
        if unknown:
            raise ManifestError(f"{w}: unknown keys {sorted(unknown)}", "manifest.schema")
        out.append(ViewEntry(_path(base, v, "image", w), parse_camera(v.get("camera"), f"{w}.camera"), _path(base, v, "logits", w, False)))
    return out


def load_manifest(path) -> ViewManifest:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except FileNotFoundError:
        raise ManifestError(f"{path}: no such file", "manifest.missing_file") from None
    except json.JSONDecodeError as e:
        raise ManifestError(f"{path}: invalid JSON ({e})", "manifest.syntax") from None
    if not isinstance(obj, dict):
        raise ManifestError("manifest: expected a top-level object", "manifest.schema")
    unknown = set(obj) - {"input_image", "views", "eval_views"}
    if unknown:
        raise ManifestError(f"manifest: unknown keys {sorted(unknown)}", "manifest.schema")
    base = path.parent
    views = _views(base, obj.get("views"), "views")
    if not views:
        raise ManifestError("views: at least one view required", "manifest.schema")
    evals = _views(base, obj.get("eval_views", []), "eval_views")
    return ViewManifest(_path(base, obj, "input_image", "manifest"), views, evals)


@dataclass
class LoadedView:
    image: np.ndarray
    camera: CameraView
    logits: np.ndarray | None


def load_views(entries: list[ViewEntry], where: str = "views") -> list[LoadedView]:
    """Read images and logits, enforcing one shared resolution and matching
    camera/logit sizes."""
    out = []
    shape = None
    for i, e in enumerate(entries):
        w = f"{where}[{i}]"
        try:
            img = load_image(e.image)
        except ImageError as err:
            raise ManifestError(f"{w}.image: {err}", "manifest.image") from None
        if shape is None:
            shape = img.shape[:2]
        elif img.shape[:2] != shape:
            raise ManifestError(f"{w}.image: resolution {img.shape[:2]} differs from {shape}", "manifest.image_resolution")
        if (e.camera.height, e.camera.width) != img.shape[:2]:
            raise ManifestError(
                f"{w}.camera: size {(e.camera.height, e.camera.width)} does not match image {img.shape[:2]}",
                "manifest.camera_size",
            )
        logits = None
        if e.logits is not None:
            try:
                logits = load_tensor(e.logits)
            except TensorError as err:
                raise ManifestError(f"{w}.logits: {err}", err.code) from None
            if logits.shape[:2] != img.shape[:2]:
                raise ManifestError(
                    f"{w}.logits: resolution {logits.shape[:2]} does not match image {img.shape[:2]}",
                    "manifest.logits_resolution",
                )
        out.append(LoadedView(img, e.camera, logits))
    return out


def manifest_dict(input_image: str, views: list[dict], eval_views: list[dict] | None = None) -> dict:
    d = {"input_image": input_image, "views": views}
    if eval_views:
        d["eval_views"] = eval_views
    return d
