"""Evaluation protocol: boundary-aware region segmentation, per-region depth
error, depth-map fusion into point clouds and accuracy/completeness metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from npmvs.geometry import CameraView, project, unproject

NUM_REGIONS = 5
INVALID_REGION = -1


@dataclass
class RegionLabels:
    """Per-pixel smoothness region in {0..4}; -1 marks invalid pixels.

    Region 0 collects the most abrupt depth changes (boundaries, small
    objects); region 4 is smooth.
    """

    labels: np.ndarray

    def counts(self) -> np.ndarray:
        return np.array([(self.labels == r).sum() for r in range(NUM_REGIONS)])


@dataclass
class PointCloud:
    """Point set in scene units with optional per-point color."""

    points: np.ndarray  # (N, 3)
    colors: np.ndarray | None = None  # (N, 3) uint8

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(self.points)):
            raise ValueError("point cloud contains non-finite coordinates")

    def __len__(self) -> int:
        return len(self.points)


def valid_depth_mask(depth: np.ndarray) -> np.ndarray:
    return np.isfinite(depth) & (depth > 0)


def downsample_depth(depth: np.ndarray) -> np.ndarray:
    """Valid-aware 2x downsampling: mean of the valid entries per 2x2 block."""
    d = np.asarray(depth, dtype=np.float64)
    h, w = d.shape
    ph, pw = -h % 2, -w % 2
    if ph or pw:
        d = np.pad(d, ((0, ph), (0, pw)), constant_values=np.nan)
    blocks = d.reshape(d.shape[0] // 2, 2, d.shape[1] // 2, 2).transpose(0, 2, 1, 3)
    blocks = blocks.reshape(blocks.shape[0], blocks.shape[1], 4)
    ok = valid_depth_mask(blocks)
    n = ok.sum(axis=-1)
    s = np.where(ok, blocks, 0.0).sum(axis=-1)
    out = np.full(n.shape, np.nan)
    nz = n > 0
    out[nz] = s[nz] / n[nz]
    return out


def _upsample_nearest(a: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    return np.repeat(np.repeat(a, 2, axis=0), 2, axis=1)[: shape[0], : shape[1]]


def laplacian_segmentation(
    gt_depth: np.ndarray, theta: float, Q: int = NUM_REGIONS
) -> RegionLabels:
    """Segment a depth map into Q smoothness regions via Laplacian bands.

    Band q is the absolute difference between pyramid level q and the
    upsampled level q+1. A pixel takes the finest band whose response exceeds
    theta; pixels below threshold in every band land in the last region.
    """
    gt = np.asarray(gt_depth, dtype=np.float64)
    if min(gt.shape) < 2**Q:
        raise ValueError(f"depth map smaller than {2**Q} pixels per side")
    pyramid = [np.where(valid_depth_mask(gt), gt, np.nan)]
    for _ in range(Q):
        pyramid.append(downsample_depth(pyramid[-1]))

    h, w = gt.shape
    labels = np.full((h, w), INVALID_REGION, dtype=np.int8)
    valid = valid_depth_mask(gt)
    labels[valid] = Q - 1
    assigned = ~valid
    for q in range(Q):
        band = np.abs(pyramid[q] - _upsample_nearest(pyramid[q + 1], pyramid[q].shape))
        band_full = band
        for _ in range(q):
            band_full = np.repeat(np.repeat(band_full, 2, axis=0), 2, axis=1)
        band_full = band_full[:h, :w]
        hit = valid & ~assigned & (band_full > theta)
        labels[hit] = q
        assigned |= hit
    return RegionLabels(labels=labels)


def region_depth_error(
    est_depth: np.ndarray, gt_depth: np.ndarray, labels: RegionLabels
) -> np.ndarray:
    """Mean absolute depth error per region; empty regions come back NaN."""
    est = np.asarray(est_depth, dtype=np.float64)
    gt = np.asarray(gt_depth, dtype=np.float64)
    ok = valid_depth_mask(est) & valid_depth_mask(gt)
    err = np.abs(est - gt)
    out = np.full(NUM_REGIONS, np.nan)
    for r in range(NUM_REGIONS):
        m = ok & (labels.labels == r)
        if m.any():
            out[r] = err[m].mean()
    return out


def boundary_mask(gt_depth: np.ndarray, threshold: float, margin: int) -> np.ndarray:
    """Pixels within `margin` of a depth discontinuity larger than threshold."""
    gt = np.asarray(gt_depth, dtype=np.float64)
    gy, gx = np.gradient(gt)
    edge = (np.abs(gx) > threshold) | (np.abs(gy) > threshold)
    edge |= ~valid_depth_mask(gt)
    return ndimage.binary_dilation(edge, iterations=margin)


def occlusion_mask(
    ref_depth: np.ndarray,
    ref_cam: CameraView,
    src_depths: list[np.ndarray],
    src_cams: list[CameraView],
    tol: float = 0.01,
) -> np.ndarray:
    """Pixels whose point is hidden or out of frame in any source view."""
    h, w = ref_depth.shape
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    ok = valid_depth_mask(ref_depth)
    depth = np.where(ok, ref_depth, 1.0)
    pts = unproject(np.stack([xs, ys], axis=-1), depth, ref_cam)
    occluded = np.zeros((h, w), dtype=bool)
    for sd, sc in zip(src_depths, src_cams):
        uv, z = project(pts, sc)
        ui = np.round(uv[..., 0]).astype(np.int64)
        vi = np.round(uv[..., 1]).astype(np.int64)
        inb = (ui >= 0) & (ui < sc.width) & (vi >= 0) & (vi < sc.height) & (z > 0)
        occluded |= ~inb
        uic, vic = np.clip(ui, 0, sc.width - 1), np.clip(vi, 0, sc.height - 1)
        seen = sd[vic, uic]
        blocked = inb & valid_depth_mask(seen) & (z > seen * (1.0 + tol))
        occluded |= blocked
    occluded[~ok] = True
    return occluded


def fuse_depth_maps(
    depths: list[np.ndarray],
    cams: list[CameraView],
    tau_depth: float = 0.01,
    n_min: int = 3,
    images: list[np.ndarray] | None = None,
) -> PointCloud:
    """Geometric-consistency fusion of per-view depth maps.

    A reference pixel survives when at least n_min source views see its point
    at a consistent depth (relative error <= tau_depth). Source pixels that
    supported a kept point are claimed and skipped when their view becomes the
    reference, so each surface point is emitted once (first view wins).
    Output ordering is deterministic: (view, row, column).
    """
    n_views = len(depths)
    claimed = [np.zeros(d.shape, dtype=bool) for d in depths]
    all_pts = []
    all_colors = []
    for i in range(n_views):
        d = depths[i]
        h, w = d.shape
        ok = valid_depth_mask(d) & ~claimed[i]
        if not ok.any():
            continue
        xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
        pts = unproject(np.stack([xs, ys], axis=-1), np.where(ok, d, 1.0), cams[i])
        support = np.zeros((h, w), dtype=np.int64)
        hits = []
        for j in range(n_views):
            if j == i:
                continue
            uv, z = project(pts, cams[j])
            ui = np.round(uv[..., 0]).astype(np.int64)
            vi = np.round(uv[..., 1]).astype(np.int64)
            inb = (ui >= 0) & (ui < cams[j].width) & (vi >= 0) & (vi < cams[j].height) & (z > 0)
            uic, vic = np.clip(ui, 0, cams[j].width - 1), np.clip(vi, 0, cams[j].height - 1)
            seen = depths[j][vic, uic]
            consistent = (
                ok & inb & valid_depth_mask(seen) & (np.abs(seen - z) / z <= tau_depth)
            )
            support += consistent
            hits.append((j, consistent, uic, vic))
        keep = ok & (support >= n_min)
        for j, consistent, uic, vic in hits:
            sel = keep & consistent
            claimed[j][vic[sel], uic[sel]] = True
        order = np.where(keep)
        all_pts.append(pts[order])
        if images is not None:
            img = images[i]
            vals = np.clip(np.round(np.asarray(img, dtype=np.float64) * 255), 0, 255)
            if vals.ndim == 2:
                vals = np.repeat(vals[..., None], 3, axis=-1)
            all_colors.append(vals[order].astype(np.uint8))
    if not all_pts:
        return PointCloud(points=np.zeros((0, 3)), colors=None)
    points = np.concatenate(all_pts)
    colors = np.concatenate(all_colors) if images is not None else None
    return PointCloud(points=points, colors=colors)


def accuracy_completeness(
    est: PointCloud, gt: PointCloud, d_cap: float = 20.0
) -> tuple[float, float, float]:
    """Mean nearest-neighbor distances est->gt (accuracy) and gt->est
    (completeness), outliers beyond d_cap excluded; overall is their mean."""
    if len(est) == 0 or len(gt) == 0:
        raise ValueError("point clouds must be non-empty")

    def directed(a, b):
        dists, _ = cKDTree(b).query(a, k=1)
        kept = dists[dists <= d_cap]
        return float(kept.mean()) if len(kept) else 0.0

    acc = directed(est.points, gt.points)
    comp = directed(gt.points, est.points)
    return acc, comp, (acc + comp) / 2.0
