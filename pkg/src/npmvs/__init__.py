"""Multi-view stereo depth inference with non-parametric per-pixel depth distributions."""

from npmvs.geometry import CameraView, DepthRange
from npmvs.pipeline import PipelineConfig, run_inference

__all__ = ["CameraView", "DepthRange", "PipelineConfig", "run_inference"]

__version__ = "0.1.0"
