"""Pinhole camera models, inverse-depth sampling, plane homographies and warping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from npmvs.features import FeatureMap


@dataclass(frozen=True)
class CameraView:
    """One calibrated view: K, world-to-camera R|t, and image dimensions."""

    intrinsics: np.ndarray  # 3x3, pixels
    rotation: np.ndarray  # 3x3 world-to-camera
    translation: np.ndarray  # 3-vector world-to-camera, scene units
    width: int
    height: int

    def __post_init__(self):
        K = np.asarray(self.intrinsics, dtype=np.float64)
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "intrinsics", K)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        if K.shape != (3, 3) or R.shape != (3, 3):
            raise ValueError("intrinsics and rotation must be 3x3")
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-6):
            raise ValueError("rotation is not orthonormal")
        if not np.isclose(np.linalg.det(R), 1.0, atol=1e-6):
            raise ValueError("rotation determinant must be +1")
        if abs(K[1, 0]) > 1e-9 or abs(K[2, 0]) > 1e-9 or abs(K[2, 1]) > 1e-9:
            raise ValueError("intrinsics must be upper-triangular")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be at least 1 pixel")


@dataclass(frozen=True)
class DepthRange:
    """Global metric depth search range, 0 < d_min < d_max."""

    d_min: float
    d_max: float

    def __post_init__(self):
        if not (0 < self.d_min < self.d_max):
            raise ValueError(f"invalid depth range [{self.d_min}, {self.d_max}]")


def scale_camera(cam: CameraView, level: int) -> CameraView:
    """Camera for a pyramid level: focal/principal divided by 2**level."""
    if level < 0:
        raise ValueError("level must be >= 0")
    if level == 0:
        return cam
    s = 2**level
    K = cam.intrinsics.copy()
    K[:2, :] /= s
    w, h = cam.width // s, cam.height // s
    if w < 1 or h < 1:
        raise ValueError(f"camera dimensions collapse below 1 pixel at level {level}")
    return CameraView(K, cam.rotation, cam.translation, w, h)


def sample_inverse_depth(rng: DepthRange, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample M depths uniformly in inverse-depth space, endpoints included.

    Returns (depths, intervals): ascending metric depths and the per-sample
    metric spacing (d[m+1]-d[m-1])/2, one-sided at the ends.
    """
    if M < 2:
        raise ValueError("need at least 2 depth samples")
    inv = np.linspace(1.0 / rng.d_min, 1.0 / rng.d_max, M)
    depths = 1.0 / inv
    intervals = np.empty(M)
    intervals[1:-1] = (depths[2:] - depths[:-2]) / 2.0
    intervals[0] = depths[1] - depths[0]
    intervals[-1] = depths[-1] - depths[-2]
    return depths, intervals


def plane_homography(ref: CameraView, src: CameraView, depth: float) -> np.ndarray:
    """Homography mapping ref pixels to src pixels via the fronto-parallel
    plane at the given depth in the reference frame."""
    if depth <= 0:
        raise ValueError("plane depth must be positive")
    R_rel = src.rotation @ ref.rotation.T
    t_rel = src.translation - R_rel @ ref.translation
    n = np.array([0.0, 0.0, 1.0])
    K_ref_inv = np.linalg.inv(ref.intrinsics)
    # with x_src = R_rel x_ref + t_rel and the plane n.x = depth in the
    # reference frame, the induced map is R_rel + t_rel n^T / depth
    return src.intrinsics @ (R_rel + np.outer(t_rel, n) / depth) @ K_ref_inv


def bilinear_sample(
    values: np.ndarray, valid: np.ndarray, u: np.ndarray, v: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Bilinearly sample an (H, W, D) grid at continuous pixel coords (u, v).

    Pixel centers sit at integer coordinates. A sample is valid only when all
    contributing neighbors are in bounds and valid. Exact integer coordinates
    reproduce stored values bit-exactly.
    """
    h, w = values.shape[:2]
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    u0 = np.floor(u).astype(np.int64)
    v0 = np.floor(v).astype(np.int64)
    fu = u - u0
    fv = v - v0
    # collapse to the base pixel when the fraction is exactly zero so that
    # integer coordinates never touch an out-of-bounds neighbor
    u1 = u0 + (fu > 0)
    v1 = v0 + (fv > 0)
    ok = (u0 >= 0) & (v0 >= 0) & (u1 < w) & (v1 < h)
    u0c = np.clip(u0, 0, w - 1)
    v0c = np.clip(v0, 0, h - 1)
    u1c = np.clip(u1, 0, w - 1)
    v1c = np.clip(v1, 0, h - 1)
    ok &= valid[v0c, u0c] & valid[v0c, u1c] & valid[v1c, u0c] & valid[v1c, u1c]

    w00 = (1 - fu) * (1 - fv)
    w01 = fu * (1 - fv)
    w10 = (1 - fu) * fv
    w11 = fu * fv
    if values.ndim == 3:
        w00, w01, w10, w11 = (x[..., None] for x in (w00, w01, w10, w11))
    out = (
        w00 * values[v0c, u0c]
        + w01 * values[v0c, u1c]
        + w10 * values[v1c, u0c]
        + w11 * values[v1c, u1c]
    )
    return out, ok


def warp_map(src_map: FeatureMap, H: np.ndarray) -> FeatureMap:
    """Warp a source feature map onto the reference grid of the same size.

    Out-of-bounds or behind-plane samples are flagged invalid with zero value.
    """
    h, w = src_map.height, src_map.width
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    p = H @ np.stack([xs.ravel(), ys.ravel(), np.ones(h * w)])
    zw = p[2]
    front = zw > 1e-12
    zw_safe = np.where(front, zw, 1.0)
    u = (p[0] / zw_safe).reshape(h, w)
    v = (p[1] / zw_safe).reshape(h, w)
    out, ok = bilinear_sample(src_map.values, src_map.valid, u, v)
    ok &= front.reshape(h, w)
    out[~ok] = 0.0
    return FeatureMap(values=out, valid=ok)


def unproject(pixel, depth, cam: CameraView) -> np.ndarray:
    """World point at camera-frame depth along the ray through a pixel.

    Accepts a single (u, v) pair or an (..., 2) array; depth broadcasts.
    """
    px = np.asarray(pixel, dtype=np.float64)
    d = np.asarray(depth, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("depth must be positive")
    ones = np.ones(px.shape[:-1] + (1,))
    homo = np.concatenate([px, ones], axis=-1)
    ray = homo @ np.linalg.inv(cam.intrinsics).T  # z-component is 1
    p_cam = ray * d[..., None]
    return (p_cam - cam.translation) @ cam.rotation


def project(point, cam: CameraView) -> tuple[np.ndarray, np.ndarray]:
    """Pinhole projection of world points; returns ((u, v), camera depth)."""
    p = np.asarray(point, dtype=np.float64)
    p_cam = p @ cam.rotation.T + cam.translation
    z = p_cam[..., 2]
    if np.any(z <= 0) and p.ndim == 1:
        raise ValueError("point projects behind the camera")
    z_safe = np.where(z > 0, z, 1.0)
    uv = (p_cam @ cam.intrinsics.T)[..., :2] / z_safe[..., None]
    return uv, z
