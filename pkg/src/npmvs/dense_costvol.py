"""Dense plane-sweep cost volume at the coarsest level.

Builds per-view matching costs by homography warping and group-wise
correlation, fuses views with photo-consistency visibility weights and turns
the fused volume into an initial per-pixel depth distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from npmvs.features import FeatureMap, filter1d, _TRIANGLE3
from npmvs.geometry import CameraView, plane_homography, warp_map


@dataclass
class CostVolume:
    """(H, W, M, G) matching costs plus a per-cell count of contributing views."""

    costs: np.ndarray
    validity: np.ndarray  # (H, W, M) int

    def __post_init__(self):
        self.costs = np.asarray(self.costs, dtype=np.float64)
        self.validity = np.asarray(self.validity)


@dataclass
class ProbabilityVolume:
    """Per-pixel discrete distribution over M depth samples.

    Valid pixels sum to 1; invalid pixels are all-zero.
    """

    probs: np.ndarray  # (H, W, M)
    valid: np.ndarray  # (H, W) bool

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)


def groupwise_correlation(f_ref: np.ndarray, f_src: np.ndarray, G: int) -> np.ndarray:
    """Per-group mean inner product between two (..., D) descriptor arrays."""
    f_ref = np.asarray(f_ref, dtype=np.float64)
    f_src = np.asarray(f_src, dtype=np.float64)
    D = f_ref.shape[-1]
    if D % G != 0:
        raise ValueError(f"channel count {D} not divisible by {G} groups")
    per = D // G
    prod = f_ref * f_src
    prod = prod.reshape(prod.shape[:-1] + (G, per))
    return prod.sum(axis=-1) / per


def build_view_cost(
    ref_features: FeatureMap,
    src_features: FeatureMap,
    ref_cam: CameraView,
    src_cam: CameraView,
    hypotheses: np.ndarray,
    G: int,
) -> CostVolume:
    """Plane-sweep cost volume for one source view.

    For every depth hypothesis the source features are warped through the
    plane homography and correlated group-wise against the reference.
    """
    h, w = ref_features.height, ref_features.width
    M = len(hypotheses)
    costs = np.zeros((h, w, M, G))
    validity = np.zeros((h, w, M), dtype=np.int64)
    for m, d in enumerate(hypotheses):
        H = plane_homography(ref_cam, src_cam, float(d))
        warped = warp_map(src_features, H)
        ok = warped.valid & ref_features.valid
        c = groupwise_correlation(ref_features.values, warped.values, G)
        c[~ok] = 0.0
        costs[:, :, m, :] = c
        validity[:, :, m] = ok
    return CostVolume(costs=costs, validity=validity)


def view_visibility(volume: CostVolume) -> np.ndarray:
    """Per-pixel visibility weight: best group-mean correlation over depth,
    clamped to be nonnegative."""
    mean_g = volume.costs.mean(axis=-1)  # (H, W, M)
    mean_g = np.where(volume.validity > 0, mean_g, -np.inf)
    best = mean_g.max(axis=-1)
    best = np.where(np.isfinite(best), best, 0.0)
    return np.maximum(best, 0.0)


def aggregate_views(volumes: list[CostVolume]) -> CostVolume:
    """Visibility-weighted fusion of per-view cost volumes.

    Order-invariant; pixels with zero total visibility come out invalid.
    """
    if len(volumes) == 0:
        raise ValueError("need at least one view volume")
    h, w, M, G = volumes[0].costs.shape
    num = np.zeros((h, w, M, G))
    den = np.zeros((h, w))
    validity = np.zeros((h, w, M), dtype=np.int64)
    for vol in volumes:
        v = view_visibility(vol)
        num += v[:, :, None, None] * vol.costs
        den += v
        validity += (vol.validity > 0)
    ok = den > 0
    fused = np.zeros_like(num)
    fused[ok] = num[ok] / den[ok, None, None]
    validity[~ok] = 0
    return CostVolume(costs=fused, validity=validity)


def smooth_volume(s: np.ndarray, passes: int = 2) -> np.ndarray:
    """Separable (1,2,1)/4 smoothing along x, y and depth, repeated."""
    for _ in range(passes):
        s = filter1d(s, _TRIANGLE3, 1)  # x
        s = filter1d(s, _TRIANGLE3, 0)  # y
        s = filter1d(s, _TRIANGLE3, 2)  # depth
    return s


def softmax(s: np.ndarray, tau: float = 1.0, axis: int = -1) -> np.ndarray:
    z = s / tau
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def regularize_dense(
    volume: CostVolume, tau: float = 1.0, smooth_passes: int = 2
) -> ProbabilityVolume:
    """Group-average, smooth and softmax the fused volume into a per-pixel
    depth distribution."""
    s = volume.costs.mean(axis=-1)
    s = smooth_volume(s, passes=smooth_passes)
    probs = softmax(s, tau=tau, axis=-1)
    valid = volume.validity.sum(axis=-1) > 0
    probs[~valid] = 0.0
    return ProbabilityVolume(probs=probs, valid=valid)
