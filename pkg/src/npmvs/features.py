"""Image pyramids and hand-crafted multi-channel matching descriptors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

#: descriptor channels produced by extract_features
NUM_CHANNELS = 8

_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
_TRIANGLE3 = np.array([1.0, 2.0, 1.0]) / 4.0


@dataclass
class FeatureMap:
    """Dense (H, W, D) descriptor grid with a per-pixel validity mask."""

    values: np.ndarray
    valid: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 2:
            self.values = self.values[..., None]
        if self.valid is None:
            self.valid = np.ones(self.values.shape[:2], dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass
class FeaturePyramid:
    """Per-level feature maps, index 0 = full resolution."""

    levels: list = field(default_factory=list)

    def __getitem__(self, level: int) -> FeatureMap:
        return self.levels[level]

    def __len__(self) -> int:
        return len(self.levels)


def filter1d(a: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    """Correlate along one axis with border renormalization.

    Near the border the kernel is re-normalized over its in-bounds taps, so a
    constant input stays constant everywhere.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[axis]
    r = len(kernel) // 2
    acc = np.zeros_like(a)
    wsum = np.zeros(n)
    moved = np.moveaxis(acc, axis, 0)
    src = np.moveaxis(a, axis, 0)
    for k, wk in enumerate(kernel):
        off = k - r
        lo = max(0, -off)
        hi = min(n, n - off)
        if lo >= hi:
            continue
        moved[lo:hi] += wk * src[lo + off : hi + off]
        wsum[lo:hi] += wk
    shape = [1] * a.ndim
    shape[axis] = n
    return acc / wsum.reshape(shape)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """RGB to luma with fixed 0.299/0.587/0.114 weights; grayscale passthrough."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        if img.shape[2] == 1:
            return img[..., 0]
        if img.shape[2] != 3:
            raise ValueError("expected grayscale or 3-channel image")
        return img @ LUMA_WEIGHTS
    return img


def binomial_blur(image: np.ndarray) -> np.ndarray:
    """Separable 5-tap binomial blur."""
    return filter1d(filter1d(image, _BINOMIAL5, 0), _BINOMIAL5, 1)


def build_image_pyramid(image: np.ndarray, L: int) -> list[np.ndarray]:
    """L+1 levels, each a 2x downsample of the previous after a binomial blur."""
    if L < 0:
        raise ValueError("L must be >= 0")
    levels = [to_grayscale(image)]
    for _ in range(L):
        levels.append(binomial_blur(levels[-1])[::2, ::2])
    return levels


def extract_features(image: np.ndarray) -> FeatureMap:
    """8-channel descriptor: centered intensity, gradients and local contrast
    at the native and a 2x-blurred scale, each globally variance-normalized.

    Offset-invariant: adding a constant to the image leaves all channels
    unchanged.
    """
    img = to_grayscale(image)
    h, w = img.shape
    if h < 3 or w < 3:
        raise ValueError("image smaller than the 3x3 descriptor support")

    def scale_channels(x):
        local_mean = filter1d(filter1d(x, np.ones(3) / 3, 0), np.ones(3) / 3, 1)
        local_sq = filter1d(filter1d(x * x, np.ones(3) / 3, 0), np.ones(3) / 3, 1)
        gy, gx = np.gradient(x)
        var = np.maximum(local_sq - local_mean**2, 0.0)
        return [x - local_mean, gx, gy, np.sqrt(var)]

    channels = scale_channels(img) + scale_channels(binomial_blur(img))
    out = np.empty((h, w, NUM_CHANNELS))
    for i, c in enumerate(channels):
        mu = c.mean()
        sd = c.std()
        out[..., i] = (c - mu) / sd if sd > 1e-12 else 0.0
    return FeatureMap(values=out)


def build_feature_pyramid(image: np.ndarray, L: int) -> FeaturePyramid:
    """Feature maps for every level of the image pyramid."""
    return FeaturePyramid([extract_features(im) for im in build_image_pyramid(image, L)])
