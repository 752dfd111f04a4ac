"""Ground-truth depth distributions and the supervision losses.

The ground truth for a coarse pixel is the triangular-weighted histogram of
full-resolution depth observations inside its patch; losses are class-balanced
binary cross entropy per level plus an L1 term on the final depth map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from npmvs.dense_costvol import ProbabilityVolume
from npmvs.npdist import HypothesisSet

EPS_CLAMP = 1e-7


@dataclass
class GroundTruthDistribution:
    """Target per-pixel distribution; valid pixels sum to 1, others all-zero."""

    probs: np.ndarray  # (H, W, M)
    valid: np.ndarray  # (H, W) bool

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)


def gt_histogram(gt_fullres: np.ndarray, level: int, hyps: HypothesisSet) -> GroundTruthDistribution:
    """Triangular histogram of patch depth observations per hypothesis.

    The patch of a coarse pixel is its 2**level x 2**level full-resolution
    block; missing (NaN or nonpositive) observations are skipped. A pixel
    whose histogram sums to zero is flagged invalid.
    """
    gt = np.asarray(gt_fullres, dtype=np.float64)
    h, w = hyps.shape
    M = hyps.num_samples
    p = 2**level
    if gt.shape[0] > h * p or gt.shape[1] > w * p:
        raise ValueError("ground truth larger than the hypothesis grid footprint")
    padded = np.full((h * p, w * p), np.nan)
    padded[: gt.shape[0], : gt.shape[1]] = gt
    blocks = padded.reshape(h, p, w, p).transpose(0, 2, 1, 3).reshape(h, w, p * p)
    obs_ok = np.isfinite(blocks) & (blocks > 0)
    blocks = np.where(obs_ok, blocks, 0.0)

    diff = np.abs(blocks[:, :, :, None] - hyps.samples[:, :, None, :])  # (H, W, P, M)
    dd = hyps.intervals[:, :, None, :]
    weight = np.where((diff <= dd) & obs_ok[:, :, :, None], 1.0 - diff / dd, 0.0)
    hist = weight.sum(axis=2)  # (H, W, M)
    total = hist.sum(axis=-1)
    valid = total > 0
    probs = np.zeros((h, w, M))
    probs[valid] = hist[valid] / total[valid, None]
    return GroundTruthDistribution(probs=probs, valid=valid)


def bce_term(p_est, p_gt) -> np.ndarray:
    """Binary cross entropy with the estimate clamped away from 0 and 1."""
    p = np.clip(np.asarray(p_est, dtype=np.float64), EPS_CLAMP, 1.0 - EPS_CLAMP)
    g = np.asarray(p_gt, dtype=np.float64)
    return -(g * np.log(p) + (1.0 - g) * np.log1p(-p))


def class_balance(gt: GroundTruthDistribution) -> tuple[float, np.ndarray]:
    """Positive-fraction sigma over valid pixels and the per-entry weight
    volume: 1-sigma on positive entries, sigma on zero entries."""
    n_valid = int(gt.valid.sum())
    if n_valid == 0:
        return 0.0, np.zeros_like(gt.probs)
    M = gt.probs.shape[-1]
    pos = gt.probs > 0
    sigma = float(pos[gt.valid].sum()) / (n_valid * M)
    lam = np.where(pos, 1.0 - sigma, sigma)
    lam[~gt.valid] = 0.0
    return sigma, lam


def level_loss(est: ProbabilityVolume, gt: GroundTruthDistribution) -> float:
    """Class-balanced BCE summed over valid pixels and samples."""
    sigma, lam = class_balance(gt)
    terms = lam * bce_term(est.probs, gt.probs)
    mask = gt.valid & est.valid
    return float(terms[mask].sum())


def l1_loss(est_depth: np.ndarray, gt_depth: np.ndarray, mask: np.ndarray) -> float:
    """Sum of absolute depth errors over the masked pixels."""
    e = np.asarray(est_depth, dtype=np.float64)
    g = np.asarray(gt_depth, dtype=np.float64)
    m = np.asarray(mask, dtype=bool)
    return float(np.abs(e[m] - g[m]).sum())


def total_loss(level_losses, weights) -> float:
    """Weighted sum over per-level losses."""
    ls = np.asarray(level_losses, dtype=np.float64)
    ws = np.asarray(weights, dtype=np.float64)
    if ls.shape != ws.shape:
        raise ValueError("losses and weights must align")
    return float((ws * ls).sum())
