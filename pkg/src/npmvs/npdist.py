"""Non-parametric depth distribution machinery.

Top-K hypothesis selection, interval-halving subdivision, patch-shared
upsampling, expectation readout, covering-ratio diagnostics and the
unimodal ablation sampler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from npmvs.dense_costvol import ProbabilityVolume

_MERGE_RTOL = 1e-12


@dataclass
class HypothesisSet:
    """Per-pixel depth samples and their search intervals at one level.

    samples and intervals are (H, W, M); samples strictly increase along the
    last axis and intervals are positive.
    """

    level: int
    samples: np.ndarray
    intervals: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.intervals = np.asarray(self.intervals, dtype=np.float64)
        if self.samples.shape != self.intervals.shape:
            raise ValueError("samples and intervals must have the same shape")

    @property
    def num_samples(self) -> int:
        return self.samples.shape[-1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape[:2]

    def check(self):
        if np.any(np.diff(self.samples, axis=-1) <= 0):
            raise ValueError("samples must be strictly increasing per pixel")
        if np.any(self.intervals <= 0):
            raise ValueError("intervals must be positive")


def topk_select(pixel_probs: np.ndarray, K: int) -> np.ndarray:
    """Indices of the K largest probabilities, ties broken toward the smaller
    index (nearer depth); result sorted ascending.

    Works on a single M-vector or any (..., M) array.
    """
    probs = np.asarray(pixel_probs, dtype=np.float64)
    M = probs.shape[-1]
    if not 1 <= K <= M:
        raise ValueError(f"K={K} out of range for {M} samples")
    # stable sort keeps equal probabilities in index order
    order = np.argsort(-probs, axis=-1, kind="stable")[..., :K]
    return np.sort(order, axis=-1)


def subdivide(selected_depths: np.ndarray, delta) -> tuple[np.ndarray, np.ndarray]:
    """Split each selected depth into two children at d -/+ delta/4.

    Returns (children, child_intervals) sorted ascending by depth with the
    interval halved; coincident children (within 1e-12 relative) are merged.
    Accepts per-sample delta arrays alongside scalar delta.
    """
    d = np.atleast_1d(np.asarray(selected_depths, dtype=np.float64))
    dd = np.broadcast_to(np.asarray(delta, dtype=np.float64), d.shape)
    children = np.concatenate([d - dd / 4.0, d + dd / 4.0])
    child_int = np.concatenate([dd, dd]) / 2.0
    order = np.argsort(children, kind="stable")
    children = children[order]
    child_int = child_int[order]
    gaps = np.diff(children)
    keep = np.concatenate([[True], gaps > _MERGE_RTOL * np.abs(children[1:])])
    return children[keep], child_int[keep]


def subdivide_grid(samples: np.ndarray, intervals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized subdivision of (H, W, K) selected samples into (H, W, 2K).

    Children of lattice-aligned parents never coincide; the strict-ordering
    invariant is re-checked instead of merging.
    """
    lo = samples - intervals / 4.0
    hi = samples + intervals / 4.0
    children = np.concatenate([lo, hi], axis=-1)
    child_int = np.concatenate([intervals, intervals], axis=-1) / 2.0
    order = np.argsort(children, axis=-1, kind="stable")
    children = np.take_along_axis(children, order, axis=-1)
    child_int = np.take_along_axis(child_int, order, axis=-1)
    if np.any(np.diff(children, axis=-1) <= 0):
        raise ValueError("coincident children after subdivision")
    return children, child_int


def upsample_hypotheses(coarse: HypothesisSet, fine_shape: tuple[int, int] | None = None) -> HypothesisSet:
    """Share each coarse pixel's samples with its 2x2 patch one level finer.

    Odd fine dimensions replicate the nearest coarse pixel in the last
    row/column.
    """
    h, w = coarse.shape
    if fine_shape is None:
        fine_shape = (2 * h, 2 * w)
    fh, fw = fine_shape
    if not (2 * h >= fh and 2 * w >= fw):
        raise ValueError("fine shape larger than 2x the coarse shape")
    samples = np.repeat(np.repeat(coarse.samples, 2, axis=0), 2, axis=1)[:fh, :fw]
    intervals = np.repeat(np.repeat(coarse.intervals, 2, axis=0), 2, axis=1)[:fh, :fw]
    return HypothesisSet(level=coarse.level - 1, samples=samples, intervals=intervals)


def expectation(samples: np.ndarray, probs: np.ndarray) -> float:
    """Expected depth of a discrete distribution (sum of d * P(d))."""
    s = np.asarray(samples, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    total = p.sum(axis=-1)
    if np.any(np.abs(total - 1.0) > 1e-6):
        raise ValueError("probabilities must sum to 1")
    return (s * p).sum(axis=-1)


def expectation_map(hyps: HypothesisSet, dist: ProbabilityVolume) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel expected depth; invalid pixels come back NaN."""
    depth = np.full(hyps.shape, np.nan)
    ok = dist.valid
    depth[ok] = (hyps.samples[ok] * dist.probs[ok]).sum(axis=-1)
    return depth, ok.copy()


def covering_ratio(hyps: HypothesisSet, gt_depth: np.ndarray, valid: np.ndarray | None = None) -> float:
    """Fraction of pixels where some sample lands within half an interval of
    the ground-truth depth."""
    gt = np.asarray(gt_depth, dtype=np.float64)
    if gt.shape != hyps.shape:
        raise ValueError("ground truth shape does not match the hypothesis grid")
    ok = np.isfinite(gt) & (gt > 0)
    if valid is not None:
        ok &= valid
    if not ok.any():
        return 0.0
    hit = np.abs(hyps.samples - gt[..., None]) <= hyps.intervals / 2.0
    return float(hit.any(axis=-1)[ok].mean())


def unimodal_baseline_samples(
    pixel_probs: np.ndarray,
    samples: np.ndarray,
    M_next: int,
    delta,
) -> tuple[np.ndarray, np.ndarray]:
    """Ablation sampler: a uniform window of M_next samples centered on the
    distribution's expectation, with the interval halved.

    Works per pixel on M-vectors or on full (H, W, M) grids; delta broadcasts
    (per-pixel scalar interval).
    """
    e_hat = expectation(samples, pixel_probs)
    dd = np.asarray(delta, dtype=np.float64) / 2.0
    offsets = np.arange(M_next, dtype=np.float64) - (M_next - 1) / 2.0
    new_samples = np.asarray(e_hat)[..., None] + offsets * np.asarray(dd)[..., None]
    new_int = np.broadcast_to(dd[..., None], new_samples.shape).copy()
    if new_samples.ndim == 1 and np.isscalar(delta):
        return new_samples, new_int
    return new_samples, new_int
