"""EWA projection of 3D Gaussians to screen-space splats, and its adjoint."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import CameraView, GaussianScene, normalize_quaternion, quaternion_to_matrix

NEAR_PLANE = 0.01
LOWPASS = 0.3
SIGMA_CUTOFF = 3.0


@dataclass(frozen=True)
class SplatProjection:
    mean_2d: np.ndarray
    cov_2d: np.ndarray
    depth: float
    radius: float
    gaussian_index: int


@dataclass
class Projected:
    """Per-Gaussian projection arrays; rows of culled Gaussians are junk and
    masked out by ``visible``."""

    means: np.ndarray  # (N, 2) pixels
    conics: np.ndarray  # (N, 3) inverse cov_2d as (a, b, c) = [[a, b], [b, c]]
    cov2d: np.ndarray  # (N, 2, 2), dilated
    depths: np.ndarray  # (N,)
    radii: np.ndarray  # (N,)
    visible: np.ndarray  # (N,) bool
    # saved for the backward pass
    t_cam: np.ndarray
    J: np.ndarray
    cov_cam: np.ndarray
    R: np.ndarray
    scales: np.ndarray
    quat_unit: np.ndarray
    quat_norm: np.ndarray


def project_arrays(scene: GaussianScene, cam: CameraView) -> Projected:
    n = len(scene)
    W = cam.rotation
    t_cam = scene.positions @ W.T + cam.translation
    x, y, z = t_cam[:, 0], t_cam[:, 1], t_cam[:, 2]
    in_front = z >= NEAR_PLANE
    zs = np.where(in_front, z, 1.0)

    qn = np.linalg.norm(scene.rotations, axis=1) if n else np.zeros(0)
    quat_unit = normalize_quaternion(scene.rotations) if n else np.zeros((0, 4))
    R = quaternion_to_matrix(quat_unit)
    scales = np.exp(scene.log_scales)
    M = R * scales[:, None, :]
    cov_world = M @ np.swapaxes(M, 1, 2)
    cov_cam = W @ cov_world @ W.T

    J = np.zeros((n, 2, 3))
    J[:, 0, 0] = cam.fx / zs
    J[:, 0, 2] = -cam.fx * x / (zs * zs)
    J[:, 1, 1] = cam.fy / zs
    J[:, 1, 2] = -cam.fy * y / (zs * zs)
    cov2d = J @ cov_cam @ np.swapaxes(J, 1, 2)
    cov2d[:, 0, 0] += LOWPASS
    cov2d[:, 1, 1] += LOWPASS
    # exact symmetry keeps the conic well defined
    off = 0.5 * (cov2d[:, 0, 1] + cov2d[:, 1, 0])
    cov2d[:, 0, 1] = off
    cov2d[:, 1, 0] = off

    a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
    det = a * c - b * b
    ok = in_front & (det > 0)
    det_s = np.where(ok, det, 1.0)
    conics = np.stack([c / det_s, -b / det_s, a / det_s], axis=1)
    lam = 0.5 * (a + c) + np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    radii = SIGMA_CUTOFF * np.sqrt(np.maximum(lam, 0.0))

    means = np.stack([cam.fx * x / zs + cam.cx, cam.fy * y / zs + cam.cy], axis=1)
    on_screen = (
        (means[:, 0] + radii >= 0)
        & (means[:, 0] - radii <= cam.width)
        & (means[:, 1] + radii >= 0)
        & (means[:, 1] - radii <= cam.height)
    )
    visible = ok & on_screen & (radii >= 1.0) & np.all(np.isfinite(means), axis=1)
    return Projected(means, conics, cov2d, z, radii, visible, t_cam, J, cov_cam, R, scales, quat_unit, qn)


def project(scene: GaussianScene, cam: CameraView) -> list[SplatProjection]:
    """Screen-space splats of every Gaussian that survives near-plane and
    viewport culling, in scene order."""
    p = project_arrays(scene, cam)
    return [
        SplatProjection(p.means[i].copy(), p.cov2d[i].copy(), float(p.depths[i]), float(p.radii[i]), int(i))
        for i in np.flatnonzero(p.visible)
    ]


def _dR_dq(q: np.ndarray) -> np.ndarray:
    """Partials of the rotation matrix w.r.t. (w, x, y, z), shape (N, 4, 3, 3)."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    o = np.zeros_like(w)
    dw = np.stack([o, -2 * z, 2 * y, 2 * z, o, -2 * x, -2 * y, 2 * x, o], axis=1)
    dx = np.stack([o, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x], axis=1)
    dy = np.stack([-4 * y, 2 * x, 2 * w, 2 * x, o, 2 * z, -2 * w, 2 * z, -4 * y], axis=1)
    dz = np.stack([-4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, o], axis=1)
    return np.stack([dw, dx, dy, dz], axis=1).reshape(-1, 4, 3, 3)


def project_backward(p: Projected, cam: CameraView, grad_means: np.ndarray, grad_conics: np.ndarray) -> dict:
    """Chain screen-space gradients back to the Gaussian parameters.

    ``grad_conics`` holds dL/d(a, b, c) where the conic enters the exponent as
    a*dx^2 + 2*b*dx*dy + c*dy^2.
    """
    n = len(p.depths)
    vis = p.visible
    gm = np.where(vis[:, None], grad_means, 0.0)
    gq = np.where(vis[:, None], grad_conics, 0.0)

    Q = np.empty((n, 2, 2))
    Q[:, 0, 0] = p.conics[:, 0]
    Q[:, 0, 1] = Q[:, 1, 0] = p.conics[:, 1]
    Q[:, 1, 1] = p.conics[:, 2]
    GQ = np.empty((n, 2, 2))
    GQ[:, 0, 0] = gq[:, 0]
    GQ[:, 0, 1] = GQ[:, 1, 0] = 0.5 * gq[:, 1]
    GQ[:, 1, 1] = gq[:, 2]
    G_cov2d = -Q @ GQ @ Q

    J, Mc = p.J, p.cov_cam
    G_J = 2.0 * G_cov2d @ J @ Mc
    G_covcam = np.swapaxes(J, 1, 2) @ G_cov2d @ J
    Wr = cam.rotation
    G_cov = Wr.T @ G_covcam @ Wr

    x, y, z = p.t_cam[:, 0], p.t_cam[:, 1], np.where(vis, p.t_cam[:, 2], 1.0)
    fx, fy = cam.fx, cam.fy
    g_t = np.zeros((n, 3))
    g_t[:, 0] = gm[:, 0] * fx / z
    g_t[:, 1] = gm[:, 1] * fy / z
    g_t[:, 2] = -gm[:, 0] * fx * x / z**2 - gm[:, 1] * fy * y / z**2
    g_t[:, 0] += G_J[:, 0, 2] * (-fx / z**2)
    g_t[:, 1] += G_J[:, 1, 2] * (-fy / z**2)
    g_t[:, 2] += (
        G_J[:, 0, 0] * (-fx / z**2)
        + G_J[:, 0, 2] * (2 * fx * x / z**3)
        + G_J[:, 1, 1] * (-fy / z**2)
        + G_J[:, 1, 2] * (2 * fy * y / z**3)
    )
    g_pos = g_t @ Wr

    R, s = p.R, p.scales
    M = R * s[:, None, :]
    G_M = 2.0 * G_cov @ M
    g_s = np.einsum("nji,nji->ni", R, G_M)
    g_log_scale = g_s * s
    G_R = G_M * s[:, None, :]
    g_qhat = np.einsum("nij,nkij->nk", G_R, _dR_dq(p.quat_unit))
    qn = np.where(p.quat_norm > 0, p.quat_norm, 1.0)
    g_quat = (g_qhat - p.quat_unit * np.sum(p.quat_unit * g_qhat, axis=1, keepdims=True)) / qn[:, None]

    g_pos[~vis] = 0.0
    g_log_scale[~vis] = 0.0
    g_quat[~vis] = 0.0
    return {"positions": g_pos, "rotations": g_quat, "log_scales": g_log_scale}
