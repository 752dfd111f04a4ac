"""End-to-end coarse-to-fine depth inference.

The coarsest level builds a dense plane-sweep volume; each refinement either
branches the top-K hypotheses (non-parametric mode) or re-centers a uniform
window on the expectation (unimodal ablation), then scores the new samples in
a sparse cost volume and aggregates them into the next distribution. Depth is
read out only at full resolution as the distribution's expectation.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from npmvs.dense_costvol import (
    ProbabilityVolume,
    aggregate_views,
    build_view_cost,
    regularize_dense,
)
from npmvs.features import build_feature_pyramid
from npmvs.fileio import SceneBundle
from npmvs.geometry import sample_inverse_depth, scale_camera
from npmvs.npdist import (
    HypothesisSet,
    expectation_map,
    subdivide_grid,
    topk_select,
    upsample_hypotheses,
)
from npmvs.sparse_costvol import build_sparse_volume, sparse_aggregate

MODES = ("nonparametric", "unimodal")
K_RULES = ("budget", "all")


@dataclass
class PipelineConfig:
    """Inference configuration.

    hyps lists the per-pixel sample counts from the finest level (index 0) to
    the coarsest; under the default "budget" rule each refinement selects
    K = M_next / 2 hypotheses so subdivision exactly fills the next level.
    """

    levels: int = 4  # L + 1
    hyps: tuple = (8, 16, 32, 96)
    groups: int = 4
    views: int = 5
    mode: str = "nonparametric"
    k_rule: str = "budget"
    loss_weights: tuple = (1.0, 1.0, 1.0, 1.0)
    softmax_tau: float = 0.05
    smooth_passes: int = 6
    fusion_tau_depth: float = 0.01
    fusion_n_min: int = 3
    theta_pct: float = 1.0  # segmentation threshold, % of depth range
    d_cap: float = 20.0

    def __post_init__(self):
        self.hyps = tuple(int(m) for m in self.hyps)
        self.loss_weights = tuple(float(w) for w in self.loss_weights)
        if self.levels < 2:
            raise ValueError("need at least 2 pyramid levels")
        if len(self.hyps) != self.levels:
            raise ValueError("hyps must list one sample count per level")
        if len(self.loss_weights) != self.levels:
            raise ValueError("loss_weights must list one weight per level")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.k_rule not in K_RULES:
            raise ValueError(f"k_rule must be one of {K_RULES}")
        if self.k_rule == "budget":
            for l in range(1, self.levels):
                if self.hyps[l - 1] % 2 != 0:
                    raise ValueError("hypothesis counts below the top level must be even")

    def K_for_level(self, level: int) -> int:
        """Hypotheses carried forward when refining from `level` to level-1."""
        if self.k_rule == "all":
            return self.hyps[level] if level == self.levels - 1 else None
        return self.hyps[level - 1] // 2

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        return cls(**json.loads(text))


@dataclass
class InferenceResult:
    """Full-resolution depth plus per-level intermediates for diagnostics."""

    depth: np.ndarray
    valid: np.ndarray
    distributions: list = field(default_factory=list)  # ProbabilityVolume, index=level
    hypotheses: list = field(default_factory=list)  # HypothesisSet, index=level
    ref_index: int = 0


def thread_count() -> int:
    """Worker cap from NP_MVS_THREADS, defaulting to the available cores."""
    env = os.environ.get("NP_MVS_THREADS")
    if env:
        try:
            n = int(env)
            if n >= 1:
                return n
        except ValueError:
            pass
    return os.cpu_count() or 1


def select_views(scene: SceneBundle, ref_index: int, n_views: int) -> list[int]:
    """Reference view followed by the first n_views-1 other views in order."""
    if not 0 <= ref_index < scene.num_views:
        raise ValueError(f"reference view {ref_index} out of range")
    others = [i for i in range(scene.num_views) if i != ref_index]
    return [ref_index] + others[: n_views - 1]


def _uniform_fill(dist: ProbabilityVolume) -> np.ndarray:
    """Probabilities with invalid pixels replaced by a uniform distribution,
    so selection stays well-defined everywhere."""
    M = dist.probs.shape[-1]
    probs = dist.probs.copy()
    probs[~dist.valid] = 1.0 / M
    return probs


def _refine_hypotheses(
    dist: ProbabilityVolume, hyps: HypothesisSet, cfg: PipelineConfig, level: int
) -> HypothesisSet:
    """New hypothesis set one level finer, before sparse scoring."""
    probs = _uniform_fill(dist)
    if cfg.mode == "nonparametric":
        if cfg.k_rule == "all":
            K = hyps.num_samples
        else:
            K = cfg.K_for_level(level)
        idx = topk_select(probs, K)
        sel_samples = np.take_along_axis(hyps.samples, idx, axis=-1)
        sel_int = np.take_along_axis(hyps.intervals, idx, axis=-1)
        children, child_int = subdivide_grid(sel_samples, sel_int)
    else:
        M_next = 2 * hyps.num_samples if cfg.k_rule == "all" else cfg.hyps[level - 1]
        e_hat = (hyps.samples * probs).sum(axis=-1)
        half = np.mean(hyps.intervals, axis=-1) / 2.0
        offsets = np.arange(M_next, dtype=np.float64) - (M_next - 1) / 2.0
        children = e_hat[..., None] + offsets * half[..., None]
        child_int = np.broadcast_to(half[..., None], children.shape).copy()
    coarse = HypothesisSet(level=level, samples=children, intervals=child_int)
    return coarse


def run_inference(scene: SceneBundle, cfg: PipelineConfig, ref_index: int = 0) -> InferenceResult:
    """Infer the reference view's depth map through the full pyramid."""
    L = cfg.levels - 1
    view_ids = select_views(scene, ref_index, cfg.views)
    if len(view_ids) < 2:
        raise ValueError("need at least one source view")

    pyramids = [build_feature_pyramid(scene.images[i], L) for i in view_ids]
    cams0 = [scene.cams[i] for i in view_ids]
    cams = [[scale_camera(c, l) for c in cams0] for l in range(L + 1)]

    # coarsest level: dense plane sweep over the global range
    depths, intervals = sample_inverse_depth(scene.depth_range, cfg.hyps[L])
    ref_feat_L = pyramids[0][L]
    hL, wL = ref_feat_L.height, ref_feat_L.width
    hyp = HypothesisSet(
        level=L,
        samples=np.broadcast_to(depths, (hL, wL, cfg.hyps[L])).copy(),
        intervals=np.broadcast_to(intervals, (hL, wL, cfg.hyps[L])).copy(),
    )
    per_view = [
        build_view_cost(ref_feat_L, pyramids[v][L], cams[L][0], cams[L][v], depths, cfg.groups)
        for v in range(1, len(view_ids))
    ]
    fused = aggregate_views(per_view)
    if not (fused.validity.sum(axis=-1) > 0).any():
        raise ValueError("view frusta never overlap at the coarsest level")
    dist = regularize_dense(fused, tau=cfg.softmax_tau, smooth_passes=cfg.smooth_passes)

    distributions = [None] * (L + 1)
    hypotheses = [None] * (L + 1)
    distributions[L] = dist
    hypotheses[L] = hyp

    for level in range(L, 0, -1):
        refined = _refine_hypotheses(dist, hyp, cfg, level)
        fine_feat = pyramids[0][level - 1]
        hyp = upsample_hypotheses(refined, (fine_feat.height, fine_feat.width))
        feature_maps = [pyramids[v][level - 1] for v in range(len(view_ids))]
        volume = build_sparse_volume(hyp, feature_maps, cams[level - 1], level - 1, cfg.groups)
        dist = sparse_aggregate(volume, tau=cfg.softmax_tau, passes=cfg.smooth_passes)
        distributions[level - 1] = dist
        hypotheses[level - 1] = hyp

    depth, valid = expectation_map(hyp, dist)
    return InferenceResult(
        depth=depth,
        valid=valid,
        distributions=distributions,
        hypotheses=hypotheses,
        ref_index=ref_index,
    )
