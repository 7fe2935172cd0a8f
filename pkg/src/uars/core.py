"""Shared domain types: Gaussian primitives, scenes, cameras and image maps.

Images and dense maps are plain ``numpy`` arrays of shape ``(H, W, C)`` in
float64. Scenes store their Gaussians as parallel arrays (one row per
primitive) so the rasterizer and optimizer can work on whole parameter groups.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SH_C0 = 0.28209479177387814
PARAM_GROUPS = ("positions", "rotations", "log_scales", "opacity_logits", "colors")


class DegenerateRotation(ValueError):
    pass


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def logit(p):
    p = np.asarray(p, dtype=np.float64)
    return np.log(p) - np.log1p(-p)


def normalize_quaternion(q) -> np.ndarray:
    """Scale a wxyz quaternion (or an ``(N, 4)`` stack) to unit length."""
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm == 0) or not np.all(np.isfinite(norm)):
        raise DegenerateRotation("degenerate rotation")
    return q / norm


def quaternion_to_matrix(q) -> np.ndarray:
    """Rotation matrices for unit wxyz quaternions, shape ``(..., 3, 3)``."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def covariances(rotations, log_scales) -> np.ndarray:
    """World-space covariances R diag(s)^2 R^T for stacked Gaussians."""
    R = quaternion_to_matrix(normalize_quaternion(rotations))
    M = R * np.exp(np.asarray(log_scales, dtype=np.float64))[..., None, :]
    return M @ np.swapaxes(M, -1, -2)


@dataclass(frozen=True)
class Gaussian3D:
    position: np.ndarray
    rotation: np.ndarray
    log_scale: np.ndarray
    opacity_logit: float
    color: np.ndarray

    @property
    def opacity(self) -> float:
        return float(sigmoid(self.opacity_logit))

    @property
    def scale(self) -> np.ndarray:
        return np.exp(np.asarray(self.log_scale, dtype=np.float64))


def covariance_3d(g: Gaussian3D) -> np.ndarray:
    return covariances(np.asarray(g.rotation)[None], np.asarray(g.log_scale)[None])[0]


def _as_rows(a, width, name, n=None) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    if width == 1:
        a = a.reshape(-1)
    else:
        a = a.reshape(-1, width)
    if n is not None and a.shape[0] != n:
        raise ValueError(f"{name}: expected {n} rows, got {a.shape[0]}")
    return a


def _extent(positions: np.ndarray) -> float:
    if len(positions) == 0:
        return 0.0
    center = positions.mean(axis=0)
    radius = float(np.max(np.linalg.norm(positions - center, axis=1)))
    # a single point (or coincident points) still needs a usable extent
    return radius if radius > 0 else 1.0


@dataclass
class GaussianScene:
    """Ordered Gaussians stored as parameter arrays.

    ``initial_scales`` is the per-Gaussian snapshot of ``exp(log_scales)`` taken
    at construction; the refinement clamps scales against it. ``scene_extent``
    is the bounding-sphere radius of the positions at construction.
    """

    positions: np.ndarray
    rotations: np.ndarray
    log_scales: np.ndarray
    opacity_logits: np.ndarray
    colors: np.ndarray
    initial_scales: np.ndarray = None
    scene_extent: float = None

    def __post_init__(self):
        self.positions = _as_rows(self.positions, 3, "positions")
        n = len(self.positions)
        self.rotations = _as_rows(self.rotations, 4, "rotations", n)
        self.log_scales = _as_rows(self.log_scales, 3, "log_scales", n)
        self.opacity_logits = _as_rows(self.opacity_logits, 1, "opacity_logits", n)
        self.colors = _as_rows(self.colors, 3, "colors", n)
        if self.initial_scales is None:
            self.initial_scales = np.exp(self.log_scales)
        else:
            self.initial_scales = _as_rows(self.initial_scales, 3, "initial_scales", n)
        self.initial_scales.setflags(write=False)
        if self.scene_extent is None:
            self.scene_extent = _extent(self.positions)
        for name in PARAM_GROUPS:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name}: non-finite values")

    @classmethod
    def empty(cls) -> "GaussianScene":
        return cls(np.zeros((0, 3)), np.zeros((0, 4)), np.zeros((0, 3)), np.zeros(0), np.zeros((0, 3)))

    @classmethod
    def from_gaussians(cls, gaussians) -> "GaussianScene":
        gaussians = list(gaussians)
        if not gaussians:
            return cls.empty()
        return cls(
            positions=[g.position for g in gaussians],
            rotations=[g.rotation for g in gaussians],
            log_scales=[g.log_scale for g in gaussians],
            opacity_logits=[g.opacity_logit for g in gaussians],
            colors=[g.color for g in gaussians],
        )

    def __len__(self) -> int:
        return len(self.positions)

    def __getitem__(self, i: int) -> Gaussian3D:
        return Gaussian3D(
            self.positions[i].copy(),
            self.rotations[i].copy(),
            self.log_scales[i].copy(),
            float(self.opacity_logits[i]),
            self.colors[i].copy(),
        )

    @property
    def gaussians(self) -> list[Gaussian3D]:
        return [self[i] for i in range(len(self))]

    @property
    def opacities(self) -> np.ndarray:
        return sigmoid(self.opacity_logits)

    @property
    def scales(self) -> np.ndarray:
        return np.exp(self.log_scales)

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_GROUPS}

    def copy(self) -> "GaussianScene":
        return GaussianScene(
            **{k: v.copy() for k, v in self.params().items()},
            initial_scales=self.initial_scales.copy(),
            scene_extent=self.scene_extent,
        )

    def with_snapshot(self) -> "GaussianScene":
        """Copy whose initial-scale snapshot is re-taken from current scales."""
        return GaussianScene(**{k: v.copy() for k, v in self.params().items()}, scene_extent=self.scene_extent)

    def subset(self, keep) -> "GaussianScene":
        return GaussianScene(
            **{k: v[keep].copy() for k, v in self.params().items()},
            initial_scales=self.initial_scales[keep].copy(),
            scene_extent=self.scene_extent,
        )


@dataclass(frozen=True)
class CameraView:
    """Pinhole camera; world_to_camera maps world points into a +z forward,
    +x right, +y down frame. Pixel centers sit at integer + 0.5."""

    fx: float
    fy: float
    cx: float
    cy: float
    world_to_camera: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        w2c = np.array(self.world_to_camera, dtype=np.float64).reshape(4, 4)
        w2c.setflags(write=False)
        object.__setattr__(self, "world_to_camera", w2c)

    def validate(self, tol: float = 1e-6) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("camera: focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("camera: principal point outside image")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("camera: empty image size")
        R = self.rotation
        if not np.allclose(R @ R.T, np.eye(3), atol=tol, rtol=0) or np.linalg.det(R) < 0:
            raise ValueError("camera: world_to_camera rotation block is not orthonormal")
        if not np.allclose(self.world_to_camera[3], [0, 0, 0, 1]):
            raise ValueError("camera: world_to_camera last row must be (0, 0, 0, 1)")

    @property
    def rotation(self) -> np.ndarray:
        return self.world_to_camera[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.world_to_camera[:3, 3]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def center(self) -> np.ndarray:
        return -self.rotation.T @ self.translation

    @classmethod
    def look_at(cls, eye, target, up, fx, fy, cx, cy, width, height) -> "CameraView":
        """Camera at ``eye`` looking at ``target``; ``up`` points toward -y in the image."""
        eye = np.asarray(eye, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - eye
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, -np.asarray(up, dtype=np.float64))
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        R = np.stack([right, down, forward])
        w2c = np.eye(4)
        w2c[:3, :3] = R
        w2c[:3, 3] = -R @ eye
        return cls(fx, fy, cx, cy, w2c, width, height)

    def to_dict(self) -> dict:
        return {
            "fx": float(self.fx),
            "fy": float(self.fy),
            "cx": float(self.cx),
            "cy": float(self.cy),
            "width": int(self.width),
            "height": int(self.height),
            "world_to_camera": [float(v) for v in self.world_to_camera.reshape(-1)],
        }


def check_image(img, name: str = "image", channels: int | None = 3) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3:
        raise ValueError(f"{name}: expected (H, W, C) array, got shape {img.shape}")
    if channels is not None and img.shape[2] != channels:
        raise ValueError(f"{name}: expected {channels} channels, got {img.shape[2]}")
    if not np.all(np.isfinite(img)):
        raise ValueError(f"{name}: non-finite values")
    return img


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "images") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: dimension mismatch {a.shape} vs {b.shape}")


@dataclass
class PseudoView:
    image: np.ndarray
    camera: CameraView
    logits: np.ndarray | None = None
    name: str = field(default="")
    # logits already hold class probabilities
    probs: bool = False
