"""Analytic synthetic scenes with exact ground-truth depth.

Each preset is procedural geometry (fronto-parallel planes, a raised box or a
sphere over a background plane) textured in world space, so rendered views are
photo-consistent by construction. Cameras sit on a baseline lattice and
converge on the scene center, which keeps frustum overlap high while giving
the coarse pyramid levels usable parallax.
"""

from __future__ import annotations

import numpy as np

from npmvs.fileio import SceneBundle
from npmvs.geometry import CameraView, DepthRange

PRESETS = ("two-plane", "step-box", "sphere")

# scene layout shared by all presets
DEPTH_FG = 5.0
DEPTH_BG = 8.0
DEPTH_RANGE = (3.5, 30.0)
LOOK_AT = np.array([0.0, 0.0, 6.5])
DEFAULT_BASELINE = 4.0

_VIEW_OFFSETS = [
    (0.0, 0.0),
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
    (1.0, 1.0),
    (-1.0, -1.0),
    (1.0, -1.0),
    (-1.0, 1.0),
]


def _look_at_rotation(center: np.ndarray, target: np.ndarray) -> np.ndarray:
    """World-to-camera rotation with the optical axis through the target.

    Rows are the camera's right / down / forward axes (image y grows down).
    """
    forward = target - center
    forward = forward / np.linalg.norm(forward)
    down_hint = np.array([0.0, 1.0, 0.0])
    right = np.cross(down_hint, forward)
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    return np.stack([right, down, forward])


def _texture(seed: int, num_waves: int = 14):
    """World-space texture as a sum of seeded sinusoids, values in [0, 1]."""
    rng = np.random.default_rng(seed)
    freqs = np.exp(rng.uniform(np.log(0.2), np.log(6.0), size=(num_waves, 2)))
    freqs *= rng.choice([-1, 1], size=(num_waves, 2))
    phases = rng.uniform(0, 2 * np.pi, size=num_waves)
    amps = rng.uniform(0.5, 1.0, size=num_waves)
    norm = amps.sum()

    def tex(x, y):
        s = np.zeros_like(x, dtype=np.float64)
        for k in range(num_waves):
            s += amps[k] * np.sin(2 * np.pi * (freqs[k, 0] * x + freqs[k, 1] * y) + phases[k])
        return 0.5 + 0.5 * s / norm

    return tex


def synth_scene(
    preset: str,
    size: int = 128,
    views: int = 5,
    noise: float = 0.0,
    seed: int = 0,
    baseline: float = DEFAULT_BASELINE,
) -> SceneBundle:
    """Render a textured analytic scene from `views` calibrated viewpoints.

    Ground-truth depth is exact per pixel. `noise` adds Gaussian pixel noise
    (std, in [0, 1] intensity units) before 8-bit quantization.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {PRESETS}")
    if views < 2 or views > len(_VIEW_OFFSETS):
        raise ValueError(f"views must be in [2, {len(_VIEW_OFFSETS)}]")

    z_fg, z_bg = DEPTH_FG, DEPTH_BG
    rng_depth = DepthRange(*DEPTH_RANGE)
    f = float(size)
    c = (size - 1) / 2.0
    K = np.array([[f, 0.0, c], [0.0, f, c], [0.0, 0.0, 1.0]])

    tex_fg = _texture(seed * 1000 + 1)
    tex_bg = _texture(seed * 1000 + 2)

    us, vs = np.meshgrid(np.arange(size, dtype=np.float64), np.arange(size, dtype=np.float64))
    dir_cam = np.stack([(us - c) / f, (vs - c) / f, np.ones_like(us)], axis=-1)

    images, cams, gts = [], [], []
    noise_rng = np.random.default_rng(seed + 7777)
    for i in range(views):
        ox, oy = _VIEW_OFFSETS[i]
        center = np.array([ox * baseline, oy * baseline, 0.0])
        R = _look_at_rotation(center, LOOK_AT)
        cams.append(CameraView(K, R, -R @ center, size, size))

        d_world = dir_cam @ R  # R^T applied to each ray
        # ray parameter s equals camera-frame depth because dir_cam has z=1
        s_fg = (z_fg - center[2]) / d_world[..., 2]
        s_bg = (z_bg - center[2]) / d_world[..., 2]
        fg_pt = center + d_world * s_fg[..., None]
        bg_pt = center + d_world * s_bg[..., None]

        if preset == "two-plane":
            # slightly tilted split line so the depth edge is not aligned with
            # the pixel lattice at any pyramid level
            hit_fg = fg_pt[..., 0] + 0.06 * fg_pt[..., 1] < 0.14
            depth = np.where(hit_fg, s_fg, s_bg)
        elif preset == "step-box":
            hit_fg = (np.abs(fg_pt[..., 0]) < 0.9) & (np.abs(fg_pt[..., 1]) < 0.9)
            depth = np.where(hit_fg, s_fg, s_bg)
        else:  # sphere
            s_center = np.array([0.0, 0.0, z_fg + 0.4])
            radius = 0.9
            oc = center - s_center
            a = (d_world**2).sum(axis=-1)
            b = 2.0 * (d_world @ oc)
            disc = b**2 - 4 * a * (oc @ oc - radius**2)
            hit_fg = disc > 0
            s_hit = np.where(hit_fg, (-b - np.sqrt(np.maximum(disc, 0.0))) / (2 * a), s_bg)
            hit_fg &= s_hit > 0
            depth = np.where(hit_fg, s_hit, s_bg)
            fg_pt = center + d_world * np.where(hit_fg, s_hit, s_bg)[..., None]

        value = np.where(
            hit_fg, tex_fg(fg_pt[..., 0], fg_pt[..., 1]), tex_bg(bg_pt[..., 0], bg_pt[..., 1])
        )
        if noise > 0:
            value = value + noise_rng.normal(0.0, noise, size=value.shape)
        img = np.round(np.clip(value, 0.0, 1.0) * 255) / 255.0
        images.append(img)
        gts.append(depth.astype(np.float64))

    return SceneBundle(
        images=images,
        cams=cams,
        depth_range=rng_depth,
        gt_depths=gts,
        name=f"{preset}-{size}-s{seed}",
    )
