"""Sparse cost volume for the refinement levels.

Each per-pixel depth sample becomes one lattice point carrying its metric 3D
position and a group cost vector. Aggregation runs factorized (1,2,1)/4
filtering over lattice neighbors found through a spatial index, then a
per-pixel softmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from npmvs.dense_costvol import (
    CostVolume,
    ProbabilityVolume,
    aggregate_views,
    groupwise_correlation,
    softmax,
)
from npmvs.features import FeatureMap
from npmvs.geometry import CameraView, bilinear_sample, project, unproject
from npmvs.npdist import HypothesisSet

_AXIS_U, _AXIS_V, _AXIS_BIN = 0, 1, 2
_BIN_SHIFT = 1 << 21  # lattice codes pack (u, v, bin) into one int64


@dataclass
class SparsePoint:
    """One lattice record: pixel, sample, lattice coordinate, metric point,
    group costs and the number of views that contributed."""

    u: int
    v: int
    sample_index: int
    lattice: tuple[int, int, int]
    point: np.ndarray
    costs: np.ndarray
    validity: int


@dataclass
class SparseCostVolume:
    """Columnar set of sparse points for one pyramid level.

    Points are stored in (row, column, sample) order; `lattice` rows are
    (u, v, depth-bin) and are unique.
    """

    height: int
    width: int
    num_samples: int
    level: int
    pixel_u: np.ndarray
    pixel_v: np.ndarray
    sample_index: np.ndarray
    lattice: np.ndarray  # (K, 3) int64
    points: np.ndarray  # (K, 3)
    costs: np.ndarray  # (K, G)
    validity: np.ndarray  # (K,)
    pixel_valid: np.ndarray  # (H, W) bool
    _index: dict = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.lattice)

    @property
    def index(self) -> dict:
        """Lattice coordinate -> row index."""
        if self._index is None:
            self._index = {tuple(c): i for i, c in enumerate(self.lattice)}
            if len(self._index) != len(self.lattice):
                raise ValueError("lattice keys are not unique")
        return self._index

    def point_record(self, i: int) -> SparsePoint:
        return SparsePoint(
            u=int(self.pixel_u[i]),
            v=int(self.pixel_v[i]),
            sample_index=int(self.sample_index[i]),
            lattice=tuple(int(x) for x in self.lattice[i]),
            point=self.points[i],
            costs=self.costs[i],
            validity=int(self.validity[i]),
        )


def depth_bins(samples: np.ndarray, delta: float) -> np.ndarray:
    """Round-half-up depth bins, forced strictly increasing per pixel.

    The monotonic fix keeps lattice keys unique when the local sample spacing
    dips below the level's representative interval.
    """
    b = np.floor(samples / delta + 0.5).astype(np.int64)
    M = b.shape[-1]
    for m in range(1, M):
        b[..., m] = np.maximum(b[..., m], b[..., m - 1] + 1)
    return b


def build_sparse_volume(
    hyps: HypothesisSet,
    feature_maps: list[FeatureMap],
    cams: list[CameraView],
    level: int,
    G: int = 4,
) -> SparseCostVolume:
    """Sparse cost volume from per-pixel hypotheses.

    feature_maps/cams hold the reference view first, then the source views,
    all at the given level. Every sample is unprojected to a metric point,
    projected into each source view, sampled bilinearly and correlated
    group-wise against the reference feature; views are fused with the same
    visibility weighting as the dense level.
    """
    if hyps.num_samples == 0 or hyps.samples.size == 0:
        raise ValueError("empty hypothesis set")
    h, w = hyps.shape
    M = hyps.num_samples
    ref_feat, src_feats = feature_maps[0], feature_maps[1:]
    ref_cam, src_cams = cams[0], cams[1:]

    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    pixels = np.stack([xs, ys], axis=-1)[:, :, None, :]  # (H, W, 1, 2)
    pixels = np.broadcast_to(pixels, (h, w, M, 2))
    points = unproject(pixels, hyps.samples, ref_cam)  # (H, W, M, 3)

    ref_vals = ref_feat.values[:, :, None, :]  # (H, W, 1, D)
    per_view = []
    for feat, cam in zip(src_feats, src_cams):
        uv, z = project(points, cam)
        front = z > 1e-9
        sampled, ok = bilinear_sample(feat.values, feat.valid, uv[..., 0], uv[..., 1])
        ok = ok & front & ref_feat.valid[:, :, None]
        c = groupwise_correlation(ref_vals, sampled, G)
        c[~ok] = 0.0
        per_view.append(CostVolume(costs=c, validity=ok.astype(np.int64)))
    fused = aggregate_views(per_view)

    delta = float(np.mean(hyps.intervals))
    bins = depth_bins(hyps.samples, delta)
    uu = np.broadcast_to(xs.astype(np.int64)[:, :, None], (h, w, M))
    vv = np.broadcast_to(ys.astype(np.int64)[:, :, None], (h, w, M))
    mm = np.broadcast_to(np.arange(M, dtype=np.int64), (h, w, M))
    lattice = np.stack([uu.ravel(), vv.ravel(), bins.ravel()], axis=-1)
    return SparseCostVolume(
        height=h,
        width=w,
        num_samples=M,
        level=level,
        pixel_u=uu.ravel(),
        pixel_v=vv.ravel(),
        sample_index=mm.ravel(),
        lattice=lattice,
        points=points.reshape(-1, 3),
        costs=fused.costs.reshape(-1, G),
        validity=fused.validity.reshape(-1),
        pixel_valid=fused.validity.sum(axis=-1) > 0,
    )


def neighbor_lookup(volume: SparseCostVolume, coord, axis: int, offset: int) -> SparsePoint | None:
    """Exact lattice lookup at coord shifted along one axis; None if absent."""
    q = list(coord)
    q[axis] += offset
    i = volume.index.get(tuple(q))
    return None if i is None else volume.point_record(i)


def _encode(lattice: np.ndarray) -> np.ndarray:
    u, v, b = lattice[:, 0], lattice[:, 1], lattice[:, 2]
    return (u * _BIN_SHIFT + v) * _BIN_SHIFT + b


def _neighbor_rows(volume: SparseCostVolume) -> list[tuple[np.ndarray, np.ndarray]]:
    """For each axis, row indices of the -1/+1 lattice neighbors (-1 absent)."""
    codes = _encode(volume.lattice)
    order = np.argsort(codes)
    sorted_codes = codes[order]
    strides = [_BIN_SHIFT * _BIN_SHIFT, _BIN_SHIFT, 1]
    out = []
    for axis in (_AXIS_U, _AXIS_V, _AXIS_BIN):
        pair = []
        for off in (-1, +1):
            q = codes + off * strides[axis]
            pos = np.searchsorted(sorted_codes, q)
            pos_c = np.clip(pos, 0, len(sorted_codes) - 1)
            hit = sorted_codes[pos_c] == q
            rows = np.where(hit, order[pos_c], -1)
            pair.append(rows)
        out.append((pair[0], pair[1]))
    return out


def sparse_aggregate(volume: SparseCostVolume, tau: float = 1.0, passes: int = 2) -> ProbabilityVolume:
    """Factorized lattice filtering followed by a per-pixel softmax.

    Each pass filters along u, then v, then the depth-bin axis with a
    (1,2,1)/4 kernel re-normalized over the neighbors actually present.
    """
    s = volume.costs.mean(axis=-1)
    neighbors = _neighbor_rows(volume)
    for _ in range(passes):
        for lo, hi in neighbors:
            acc = 2.0 * s
            wsum = np.full(len(s), 2.0)
            has_lo = lo >= 0
            has_hi = hi >= 0
            acc[has_lo] += s[lo[has_lo]]
            wsum[has_lo] += 1.0
            acc[has_hi] += s[hi[has_hi]]
            wsum[has_hi] += 1.0
            s = acc / wsum
    grid = s.reshape(volume.height, volume.width, volume.num_samples)
    probs = softmax(grid, tau=tau, axis=-1)
    probs[~volume.pixel_valid] = 0.0
    return ProbabilityVolume(probs=probs, valid=volume.pixel_valid.copy())
