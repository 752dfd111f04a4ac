"""Command-line interface: synth, infer, eval, fuse and losses subcommands."""

from __future__ import annotations

import argparse
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from npmvs import evaluation, report, supervision
from npmvs.dense_costvol import ProbabilityVolume
from npmvs.fileio import (
    load_scene,
    read_pfm,
    save_scene,
    write_pfm,
    write_ply,
)
from npmvs.npdist import HypothesisSet
from npmvs.pipeline import PipelineConfig, run_inference, thread_count
from npmvs.synth import PRESETS, synth_scene


def _parse_hyps(text: str) -> tuple:
    return tuple(int(x) for x in text.split(","))


def _view_stem(i: int) -> str:
    return f"{i:08d}"


def cmd_synth(args) -> int:
    scene = synth_scene(
        args.preset, size=args.size, views=args.views, noise=args.noise, seed=args.seed
    )
    save_scene(scene, args.out)
    print(f"wrote {scene.num_views}-view {args.preset} scene to {args.out}")
    return 0


def cmd_infer(args) -> int:
    scene = load_scene(args.scene)
    cfg = PipelineConfig(
        levels=args.levels,
        hyps=_parse_hyps(args.hyps),
        views=min(args.views, scene.num_views),
        groups=args.groups,
        mode=args.mode,
        loss_weights=tuple([1.0] * args.levels),
    )
    out = Path(args.out)
    (out / "depths").mkdir(parents=True, exist_ok=True)
    (out / "dist").mkdir(exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    cams_src = Path(args.scene) / "cams"
    if cams_src.is_dir():
        shutil.copytree(cams_src, out / "cams", dirs_exist_ok=True)

    refs = range(scene.num_views) if args.ref is None else [args.ref]

    def one(i):
        res = run_inference(scene, cfg, ref_index=i)
        write_pfm(out / "depths" / f"{_view_stem(i)}.pfm", np.where(res.valid, res.depth, np.nan))
        arrays = {}
        for l, (dist, hyp) in enumerate(zip(res.distributions, res.hypotheses)):
            arrays[f"probs_{l}"] = dist.probs
            arrays[f"valid_{l}"] = dist.valid
            arrays[f"samples_{l}"] = hyp.samples
            arrays[f"intervals_{l}"] = hyp.intervals
        np.savez_compressed(out / "dist" / f"{_view_stem(i)}.npz", **arrays)
        if args.figures:
            figdir = out / "figures"
            figdir.mkdir(exist_ok=True)
            report.save_depth_figure(res.depth, figdir / f"{_view_stem(i)}_depth.png",
                                     title=f"view {i} depth")
        return i

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        done = list(pool.map(one, refs))
    print(f"inferred depth for views {sorted(done)} -> {out}")
    return 0


def _load_est_gt(est_dir, gt_dir):
    gt_scene = load_scene(gt_dir)
    if gt_scene.gt_depths is None:
        raise ValueError(f"{gt_dir}: scene has no ground-truth depth maps")
    est_dir = Path(est_dir)
    pairs = []
    for i in range(gt_scene.num_views):
        p = est_dir / "depths" / f"{_view_stem(i)}.pfm"
        if p.exists():
            pairs.append((i, read_pfm(p)))
    if not pairs:
        raise ValueError(f"{est_dir}: no estimated depth maps found")
    return gt_scene, pairs


def cmd_eval(args) -> int:
    gt_scene, pairs = _load_est_gt(args.est, args.gt)
    rng = gt_scene.depth_range
    theta = args.theta / 100.0 * (rng.d_max - rng.d_min)
    per_region = [[] for _ in range(evaluation.NUM_REGIONS)]
    first_labels = None
    first = None
    for i, est in pairs:
        gt = gt_scene.gt_depths[i]
        labels = evaluation.laplacian_segmentation(gt, theta=theta)
        ok = evaluation.valid_depth_mask(est) & evaluation.valid_depth_mask(gt)
        err = np.abs(est - gt)
        for r in range(evaluation.NUM_REGIONS):
            m = ok & (labels.labels == r)
            if m.any():
                per_region[r].append(err[m])
        if first is None:
            first, first_labels = (est, gt), labels
    errors = np.array(
        [np.concatenate(e).mean() if e else np.nan for e in per_region]
    )
    print(" ".join("nan" if np.isnan(e) else f"{e:.6f}" for e in errors))
    if args.report:
        rep = Path(args.report)
        report.save_region_errors(errors, rep)
        report.save_region_figure(first_labels, rep / "regions.png")
        report.save_error_figure(first[0], first[1], rep / "error_map.png")
        report.save_depth_figure(first[0], rep / "depth.png", title="estimated depth")
    return 0


def cmd_fuse(args) -> int:
    in_dir = Path(args.in_dir)
    scene = load_scene(args.cams) if args.cams else None
    depth_dir = in_dir / "depths"
    paths = sorted(depth_dir.glob("*.pfm"))
    if not paths:
        raise ValueError(f"{depth_dir}: no depth maps to fuse")
    depths = [read_pfm(p) for p in paths]
    if scene is not None:
        cams = [scene.cams[int(p.stem)] for p in paths]
        images = [scene.images[int(p.stem)] for p in paths]
    else:
        from npmvs.fileio import read_cam_txt

        cams, images = [], None
        for p, d in zip(paths, depths):
            cam_path = in_dir / "cams" / f"{p.stem}_cam.txt"
            cam, _, _ = read_cam_txt(cam_path, d.shape[1], d.shape[0])
            cams.append(cam)
    cloud = evaluation.fuse_depth_maps(
        depths, cams, tau_depth=args.tau, n_min=args.nmin, images=images
    )
    write_ply(args.out, cloud)
    print(f"fused {len(depths)} views into {len(cloud)} points -> {args.out}")
    return 0


def cmd_losses(args) -> int:
    gt_scene, pairs = _load_est_gt(args.est, args.gt)
    est_dir = Path(args.est)
    cfg_path = est_dir / "config.json"
    cfg = PipelineConfig.from_json(cfg_path.read_text()) if cfg_path.exists() else PipelineConfig()
    rows = []
    bce_by_level = {}
    l1_total = 0.0
    for i, est in pairs:
        gt = gt_scene.gt_depths[i]
        npz = np.load(est_dir / "dist" / f"{_view_stem(i)}.npz")
        for l in range(cfg.levels):
            hyp = HypothesisSet(level=l, samples=npz[f"samples_{l}"], intervals=npz[f"intervals_{l}"])
            dist = ProbabilityVolume(probs=npz[f"probs_{l}"], valid=npz[f"valid_{l}"])
            gt_dist = supervision.gt_histogram(gt, l, hyp)
            sigma, _ = supervision.class_balance(gt_dist)
            loss = supervision.level_loss(dist, gt_dist)
            agg = bce_by_level.setdefault(l, [0.0, 0.0])
            agg[0] += loss
            agg[1] = sigma
        ok = evaluation.valid_depth_mask(est) & evaluation.valid_depth_mask(gt)
        l1_total += supervision.l1_loss(est, gt, ok)
    per_level = []
    for l in sorted(bce_by_level):
        loss, sigma = bce_by_level[l]
        rows.append({"level": l, "bce": loss, "sigma": sigma})
        print(f"level {l} bce {loss:.6f} sigma {sigma:.6f}")
        per_level.append(loss)
    per_level[0] += l1_total  # final level carries the L1 depth term
    total = supervision.total_loss(per_level, cfg.loss_weights[: len(per_level)])
    print(f"l1 {l1_total:.6f}")
    print(f"total {total:.6f}")
    rows.append({"level": "", "l1": l1_total, "total": total})
    if args.report:
        report.save_loss_report(rows, args.report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="np-mvs", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="render a synthetic scene with ground truth")
    sp.add_argument("--preset", choices=PRESETS, default="two-plane")
    sp.add_argument("--size", type=int, default=128)
    sp.add_argument("--views", type=int, default=5)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.set_defaults(func=cmd_synth)

    ip = sub.add_parser("infer", help="infer depth maps for a scene")
    ip.add_argument("--scene", required=True)
    ip.add_argument("--out", required=True)
    ip.add_argument("--levels", type=int, default=4)
    ip.add_argument("--hyps", default="8,16,32,96")
    ip.add_argument("--views", type=int, default=5)
    ip.add_argument("--groups", type=int, default=4)
    ip.add_argument("--mode", choices=("nonparametric", "unimodal"), default="nonparametric")
    ip.add_argument("--ref", type=int, default=None, help="single reference view (default: all)")
    ip.add_argument("--figures", action="store_true", help="render depth figures")
    ip.set_defaults(func=cmd_infer)

    ep = sub.add_parser("eval", help="region-segmented depth error")
    ep.add_argument("--est", required=True)
    ep.add_argument("--gt", required=True)
    ep.add_argument("--theta", type=float, default=1.0, help="band threshold, %% of depth range")
    ep.add_argument("--report", default=None, help="write CSV and figures here")
    ep.set_defaults(func=cmd_eval)

    fp = sub.add_parser("fuse", help="fuse depth maps into a point cloud")
    fp.add_argument("--in", dest="in_dir", required=True)
    fp.add_argument("--out", required=True)
    fp.add_argument("--tau", type=float, default=0.01)
    fp.add_argument("--nmin", type=int, default=3)
    fp.add_argument("--cams", default=None, help="scene directory supplying cameras/colors")
    fp.set_defaults(func=cmd_fuse)

    lp = sub.add_parser("losses", help="supervision loss report against ground truth")
    lp.add_argument("--est", required=True)
    lp.add_argument("--gt", required=True)
    lp.add_argument("--report", default=None, help="write CSV and figures here")
    lp.set_defaults(func=cmd_losses)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:  # surface a single machine-readable line
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
