"""Report rendering: matplotlib figures written next to delimited output."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from npmvs.evaluation import NUM_REGIONS, RegionLabels

_REGION_NAMES = [f"R{r}" for r in range(NUM_REGIONS)]


def save_depth_figure(depth: np.ndarray, path, title: str = "depth"):
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(depth, cmap="viridis")
    ax.set_title(title)
    ax.axis("off")
    fig.colorbar(im, ax=ax, shrink=0.8, label="depth")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def save_error_figure(est: np.ndarray, gt: np.ndarray, path, title: str = "abs error"):
    err = np.abs(est - gt)
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(err, cmap="magma")
    ax.set_title(title)
    ax.axis("off")
    fig.colorbar(im, ax=ax, shrink=0.8, label="|est - gt|")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def save_region_figure(labels: RegionLabels, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(labels.labels, cmap="tab10", vmin=-1, vmax=NUM_REGIONS)
    ax.set_title("smoothness regions (R0 = boundary)")
    ax.axis("off")
    fig.colorbar(im, ax=ax, shrink=0.8, ticks=range(NUM_REGIONS))
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def save_region_errors(region_errors: np.ndarray, out_dir):
    """Per-region MAE as region_errors.csv plus a bar figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "region_errors.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["region", "mae"])
        for name, e in zip(_REGION_NAMES, region_errors):
            writer.writerow([name, "" if np.isnan(e) else f"{e:.6g}"])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    vals = np.nan_to_num(region_errors, nan=0.0)
    ax.bar(_REGION_NAMES, vals, color="steelblue")
    ax.set_ylabel("mean |est - gt|")
    ax.set_title("depth error by smoothness region")
    fig.savefig(out / "region_errors.png", dpi=120, bbox_inches="tight")
    plt.close(fig)


def save_loss_report(rows: list[dict], out_dir):
    """Per-level loss terms as losses.csv plus a bar figure.

    Each row: {"level": int, "bce": float, "sigma": float} with an extra
    summary row carrying "l1" and "total".
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    keys = sorted({k for r in rows for k in r})
    with open(out / "losses.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=keys)
        writer.writeheader()
        writer.writerows(rows)
    level_rows = [r for r in rows if "bce" in r]
    if level_rows:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.bar(
            [f"level {r['level']}" for r in level_rows],
            [r["bce"] for r in level_rows],
            color="indianred",
        )
        ax.set_ylabel("class-balanced BCE")
        ax.set_title("distribution loss per level")
        fig.savefig(out / "losses.png", dpi=120, bbox_inches="tight")
        plt.close(fig)
