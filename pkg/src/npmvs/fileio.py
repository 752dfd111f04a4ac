"""Scene and artifact I/O: PFM depth maps, cam.txt cameras, ASCII PLY clouds
and whole-scene directory bundles. All writes are atomic (temp + rename)."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from npmvs.evaluation import PointCloud
from npmvs.geometry import CameraView, DepthRange

# depth planes assumed by the cam.txt d_interval convention when no explicit
# range is stored with the scene
DEFAULT_NUM_PLANES = 192


class SceneFormatError(ValueError):
    """Malformed scene file; message carries the file and position."""


@dataclass
class SceneBundle:
    """All inputs for one scene: per-view images and cameras, optional
    ground-truth depth maps and the global depth search range."""

    images: list  # (H, W) float in [0, 1], 8-bit quantized
    cams: list  # CameraView per view
    depth_range: DepthRange
    gt_depths: list | None = None
    name: str = "scene"

    def __post_init__(self):
        if len(self.images) != len(self.cams):
            raise ValueError("image/camera count mismatch")
        h, w = self.images[0].shape[:2]
        for i, img in enumerate(self.images):
            if img.shape[:2] != (h, w):
                raise ValueError(f"view {i} has inconsistent dimensions")
        if self.gt_depths is not None and len(self.gt_depths) != len(self.images):
            raise ValueError("ground-truth depth count mismatch")

    @property
    def num_views(self) -> int:
        return len(self.images)


def _atomic_write(path: Path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_pfm(path, depth: np.ndarray):
    """Grayscale PFM, little-endian, rows bottom-to-top; NaN marks invalid."""
    d = np.asarray(depth, dtype=np.float32)
    if d.ndim != 2:
        raise ValueError("PFM writer expects a 2D map")
    h, w = d.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    _atomic_write(Path(path), header + d[::-1].tobytes())


def read_pfm(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as f:
        ident = f.readline().strip()
        if ident != b"Pf":
            raise SceneFormatError(f"{path}: line 1: expected 'Pf', got {ident!r}")
        dims = f.readline().split()
        if len(dims) != 2:
            raise SceneFormatError(f"{path}: line 2: expected '<width> <height>'")
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        data = f.read(4 * w * h)
        if len(data) != 4 * w * h:
            raise SceneFormatError(
                f"{path}: byte offset {f.tell()}: truncated raster "
                f"({len(data)} of {4 * w * h} bytes)"
            )
    endian = "<" if scale < 0 else ">"
    d = np.frombuffer(data, dtype=endian + "f4").reshape(h, w)
    return d[::-1].astype(np.float64)


def write_cam_txt(path, cam: CameraView, d_min: float, d_interval: float):
    E = np.eye(4)
    E[:3, :3] = cam.rotation
    E[:3, 3] = cam.translation
    lines = ["extrinsic"]
    lines += [" ".join(f"{x:.17g}" for x in row) for row in E]
    lines += ["", "intrinsic"]
    lines += [" ".join(f"{x:.17g}" for x in row) for row in cam.intrinsics]
    lines += ["", f"{d_min:.17g} {d_interval:.17g}", ""]
    _atomic_write(Path(path), "\n".join(lines).encode("ascii"))


def read_cam_txt(path, width: int, height: int) -> tuple[CameraView, float, float]:
    """Parse a cam.txt file; image dimensions come from the paired image."""
    path = Path(path)
    lines = path.read_text().splitlines()

    def grab(idx, what):
        if idx >= len(lines):
            raise SceneFormatError(f"{path}: line {idx + 1}: missing {what}")
        return lines[idx]

    def matrix(start, rows, cols, what):
        out = np.zeros((rows, cols))
        for r in range(rows):
            parts = grab(start + r, what).split()
            if len(parts) != cols:
                raise SceneFormatError(
                    f"{path}: line {start + r + 1}: expected {cols} values for {what}"
                )
            try:
                out[r] = [float(x) for x in parts]
            except ValueError as e:
                raise SceneFormatError(f"{path}: line {start + r + 1}: {e}") from e
        return out

    if grab(0, "'extrinsic' header").strip() != "extrinsic":
        raise SceneFormatError(f"{path}: line 1: expected 'extrinsic'")
    E = matrix(1, 4, 4, "extrinsic row")
    if grab(6, "'intrinsic' header").strip() != "intrinsic":
        raise SceneFormatError(f"{path}: line 7: expected 'intrinsic'")
    K = matrix(7, 3, 3, "intrinsic row")
    parts = grab(11, "depth range line").split()
    if len(parts) < 2:
        raise SceneFormatError(f"{path}: line 12: expected 'd_min d_interval'")
    d_min, d_interval = float(parts[0]), float(parts[1])
    cam = CameraView(K, E[:3, :3], E[:3, 3], width, height)
    return cam, d_min, d_interval


def write_ply(path, cloud: PointCloud):
    n = len(cloud)
    colors = cloud.colors
    if colors is None:
        colors = np.full((n, 3), 128, dtype=np.uint8)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {n}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    for p, c in zip(cloud.points, colors):
        lines.append(f"{p[0]:.8g} {p[1]:.8g} {p[2]:.8g} {c[0]} {c[1]} {c[2]}")
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode("ascii"))


def read_ply(path) -> PointCloud:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != "ply":
        raise SceneFormatError(f"{path}: line 1: not a PLY file")
    try:
        n = next(int(l.split()[-1]) for l in lines if l.startswith("element vertex"))
        start = lines.index("end_header") + 1
    except (StopIteration, ValueError) as e:
        raise SceneFormatError(f"{path}: malformed PLY header") from e
    pts = np.zeros((n, 3))
    cols = np.zeros((n, 3), dtype=np.uint8)
    for i in range(n):
        parts = lines[start + i].split()
        pts[i] = [float(x) for x in parts[:3]]
        if len(parts) >= 6:
            cols[i] = [int(x) for x in parts[3:6]]
    return PointCloud(points=pts, colors=cols)


def _view_name(i: int) -> str:
    return f"{i:08d}"


def save_scene(scene: SceneBundle, directory):
    root = Path(directory)
    for sub in ("images", "cams"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for i, (img, cam) in enumerate(zip(scene.images, scene.cams)):
        arr = np.clip(np.round(np.asarray(img) * 255), 0, 255).astype(np.uint8)
        Image.fromarray(arr).save(root / "images" / f"{_view_name(i)}.png")
        n_planes = DEFAULT_NUM_PLANES
        interval = (scene.depth_range.d_max - scene.depth_range.d_min) / n_planes
        write_cam_txt(root / "cams" / f"{_view_name(i)}_cam.txt", cam,
                      scene.depth_range.d_min, interval)
    if scene.gt_depths is not None:
        (root / "depths").mkdir(exist_ok=True)
        for i, d in enumerate(scene.gt_depths):
            write_pfm(root / "depths" / f"{_view_name(i)}.pfm", d)
    meta = {
        "name": scene.name,
        "d_min": scene.depth_range.d_min,
        "d_max": scene.depth_range.d_max,
    }
    _atomic_write(root / "scene.json", json.dumps(meta, indent=2).encode("ascii"))


def load_scene(directory) -> SceneBundle:
    root = Path(directory)
    img_dir = root / "images"
    if not img_dir.is_dir():
        raise SceneFormatError(f"{img_dir}: missing images directory")
    img_paths = sorted(img_dir.glob("*.png"))
    if not img_paths:
        raise SceneFormatError(f"{img_dir}: no images found")
    images, cams = [], []
    d_mins, d_maxs = [], []
    for p in img_paths:
        arr = np.asarray(Image.open(p).convert("L"), dtype=np.float64) / 255.0
        cam_path = root / "cams" / f"{p.stem}_cam.txt"
        if not cam_path.exists():
            raise SceneFormatError(f"{cam_path}: missing camera file for view {p.stem}")
        cam, d_min, d_interval = read_cam_txt(cam_path, arr.shape[1], arr.shape[0])
        images.append(arr)
        cams.append(cam)
        d_mins.append(d_min)
        d_maxs.append(d_min + d_interval * DEFAULT_NUM_PLANES)
    meta_path = root / "scene.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        rng = DepthRange(float(meta["d_min"]), float(meta["d_max"]))
        name = meta.get("name", root.name)
    else:
        rng = DepthRange(min(d_mins), max(d_maxs))
        name = root.name
    gt = None
    depth_dir = root / "depths"
    if depth_dir.is_dir():
        gt = [read_pfm(depth_dir / f"{p.stem}.pfm") for p in img_paths]
    return SceneBundle(images=images, cams=cams, depth_range=rng, gt_depths=gt, name=name)
