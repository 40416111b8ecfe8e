"""Feature post-processing: gray-world correction and border enhancement.

The pipeline equalizes channel means toward a global gray target, builds a
border enhancement mask (the Gaussian high-pass residual recentered at an
intensity pivot), and blends it back soft-light-style to sharpen
boundaries. It runs both on network feature maps (followed by a learned
3x3 projection) and standalone on raw pixel images.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .tensor import Array, ConvKernel, as_tensor, clamp01, conv2d, gaussian_blur


@dataclass(frozen=True)
class FppConfig:
    """Post-processing parameters.

    omega is the Gaussian low-pass scale; lambda_bem the mask pivot and
    intensity (0.5 is the only value at which the two blend branches meet
    continuously); target_gray overrides the gray-world target, which
    otherwise defaults to the mean of the channel means; epsilon guards
    degenerate channels.
    """

    omega: float = 1.5
    lambda_bem: float = 0.5
    target_gray: float | None = None
    epsilon: float = 1e-6

    def __post_init__(self):
        if not self.omega > 0.0:
            raise ParameterError(f"omega must be positive, got {self.omega}")
        if not 0.0 < self.lambda_bem < 1.0:
            raise ParameterError(f"lambda_bem must lie in (0, 1), got {self.lambda_bem}")
        if not self.epsilon > 0.0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.target_gray is not None and not np.isfinite(self.target_gray):
            raise ParameterError("target_gray must be finite")


@dataclass(frozen=True)
class GrayWorldReport:
    """Scales applied by gray-world correction plus pass-through channels."""

    target: float
    scales: tuple[float, ...]
    passed_through: tuple[int, ...]


def _gray_world_scales(x: Array, cfg: FppConfig) -> tuple[float, np.ndarray, list[int]]:
    means = x.mean(axis=(1, 2))
    target = float(means.mean()) if cfg.target_gray is None else float(cfg.target_gray)
    scales = np.ones_like(means)
    skipped = []
    for c, mean in enumerate(means):
        if abs(mean) > cfg.epsilon:
            scales[c] = target / mean
        else:
            skipped.append(c)
    return target, scales, skipped


def gray_world_correct(x: Array, cfg: FppConfig | None = None) -> Array:
    """Scale each channel so its mean hits the global gray target.

    Channels whose mean magnitude is within epsilon of zero pass through
    unscaled. Applying the correction twice equals applying it once.
    """
    x = as_tensor(x)
    cfg = cfg or FppConfig()
    _, scales, _ = _gray_world_scales(x, cfg)
    return x * scales[:, None, None]


def gray_world_report(x: Array, cfg: FppConfig | None = None) -> GrayWorldReport:
    """The target, per-channel scales, and skipped channels of a correction."""
    x = as_tensor(x)
    cfg = cfg or FppConfig()
    target, scales, skipped = _gray_world_scales(x, cfg)
    return GrayWorldReport(
        target=target, scales=tuple(float(s) for s in scales), passed_through=tuple(skipped)
    )


def border_enhancement_mask(x: Array, cfg: FppConfig | None = None) -> Array:
    """High-pass residual recentered at the pivot: x - blur(x, omega) + lambda."""
    x = as_tensor(x)
    cfg = cfg or FppConfig()
    return x - gaussian_blur(x, cfg.omega) + cfg.lambda_bem


def bem_blend(x: Array, mask: Array, cfg: FppConfig | None = None) -> Array:
    """Soft-light-style blend of a feature map with its enhancement mask.

    Where mask < lambda: x*mask/lambda; otherwise 1 - (1-x)(1-mask)/lambda.
    With lambda = 0.5 both branches return x at the pivot, so the blend is
    the identity on a constant image. Monotone in the mask for x in [0, 1].
    """
    x = as_tensor(x, "feature map")
    mask = as_tensor(mask, "mask")
    if x.shape != mask.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {mask.shape}")
    cfg = cfg or FppConfig()
    lam = cfg.lambda_bem
    darken = x * mask / lam
    lighten = 1.0 - (1.0 - x) * (1.0 - mask) / lam
    return np.where(mask < lam, darken, lighten)


def postprocess_features(
    features: Array, out_kernel: ConvKernel, cfg: FppConfig | None = None
) -> Array:
    """Correct, blend, and project a feature map to a clamped pixel image."""
    cfg = cfg or FppConfig()
    corrected = gray_world_correct(features, cfg)
    blended = bem_blend(corrected, border_enhancement_mask(corrected, cfg), cfg)
    return clamp01(conv2d(blended, out_kernel, "same"))


def enhance_classical(img: Array, cfg: FppConfig | None = None) -> Array:
    """Standalone enhancement of a pixel image, no learned weights.

    gray-world correction -> border enhancement mask -> blend -> clamp.
    Shape and the [0, 1] range are preserved; a constant gray image passes
    through unchanged at the default pivot.
    """
    x = as_tensor(img, "image")
    if x.min() < -1e-9 or x.max() > 1.0 + 1e-9:
        raise ParameterError("standalone enhancement expects pixel values in [0, 1]")
    cfg = cfg or FppConfig()
    corrected = gray_world_correct(x, cfg)
    blended = bem_blend(corrected, border_enhancement_mask(corrected, cfg), cfg)
    return clamp01(blended)
