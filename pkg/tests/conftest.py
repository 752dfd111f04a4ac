"""Shared fixtures: small calibrated rigs and cached synthetic scenes."""

import numpy as np
import pytest

from npmvs.features import extract_features
from npmvs.geometry import CameraView
from npmvs.synth import _texture, synth_scene


def identity_camera(width=8, height=8):
    return CameraView(np.eye(3), np.eye(3), np.zeros(3), width, height)


@pytest.fixture(scope="session")
def plane_rig():
    """Two views of a textured fronto-parallel plane at depth 6.

    Pure-translation cameras with baseline 1.5; ground-truth depth is exactly
    6.0 at every pixel of both views.
    """
    size, baseline, depth = 64, 1.5, 6.0
    f = float(size)
    c = (size - 1) / 2.0
    K = np.array([[f, 0.0, c], [0.0, f, c], [0.0, 0.0, 1.0]])
    tex = _texture(3)
    us, vs = np.meshgrid(np.arange(size, dtype=np.float64), np.arange(size, dtype=np.float64))
    rays = np.stack([(us - c) / f, (vs - c) / f, np.ones_like(us)], axis=-1)

    def render(cx):
        center = np.array([cx, 0.0, 0.0])
        s = depth / rays[..., 2]
        pt = center + rays * s[..., None]
        img = np.round(np.clip(tex(pt[..., 0], pt[..., 1]), 0.0, 1.0) * 255) / 255.0
        cam = CameraView(K, np.eye(3), -center, size, size)
        return img, cam

    img0, cam0 = render(0.0)
    img1, cam1 = render(baseline)
    return {
        "size": size,
        "depth": depth,
        "images": [img0, img1],
        "cams": [cam0, cam1],
        "features": [extract_features(img0), extract_features(img1)],
    }


@pytest.fixture(scope="session")
def small_two_plane():
    return synth_scene("two-plane", size=64, views=3)


@pytest.fixture(scope="session")
def small_step_box():
    return synth_scene("step-box", size=64, views=3)
