"""Colour/sharpness/contrast quality scoring and the balance-loss family.

The quality score combines three indices computed from robust statistics:

* a colour index from alpha-trimmed means and variances of the RG/YB
  opponent planes,
* a sharpness index from block-wise log max/min ratios (EME) of
  edge-weighted channel intensities,
* a contrast index from a block-wise log-entropy of luminance extrema.

The indices are defined on the 8-bit value range, so pixel-domain [0, 1]
inputs are rescaled by 255 internally; the published coefficient sets only
produce their familiar magnitudes on that range.

The balance loss is the squared shift of the quality score between an
output image and a reference, optionally biased. A composite training loss
adds a diagonal-Gaussian KL term, a mean-absolute reconstruction term, and
a pluggable perceptual term (zero when no plug-in is supplied).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, ParameterError
from .tensor import (
    Array,
    alpha_trimmed_mean,
    alpha_trimmed_variance,
    as_tensor,
    block_partition,
    opponent_channels,
    sobel_magnitude,
)

METRIC_SCALE = 255.0

# Colour index coefficients on the trimmed chroma shift (l) and spread (r).
COLOR_SHIFT_COEF = -0.027
COLOR_SPREAD_COEF = 0.159

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class QualityWeights:
    """Coefficients and hyperparameters of the quality score.

    c1/c2/c3 weight the colour, sharpness, and contrast indices;
    lambda_imp biases the balance loss. trim is the per-tail fraction for
    the robust colour statistics, eme_blocks/cti_blocks the block grids of
    the sharpness and contrast indices, alpha_entropy the contrast entropy
    scale, and epsilon the guard added to logs and divisions.
    """

    c1: float = 0.029
    c2: float = 0.295
    c3: float = 3.550
    lambda_imp: float = 0.0
    trim: float = 0.1
    channel_weights: tuple[float, float, float] = LUMA_WEIGHTS
    eme_blocks: tuple[int, int] = (8, 8)
    cti_blocks: tuple[int, int] = (8, 8)
    alpha_entropy: float = 1.0
    epsilon: float = 1e-6

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "lambda_imp", "alpha_entropy", "epsilon"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if not 0.0 <= self.trim < 0.5:
            raise ParameterError(f"trim must lie in [0, 0.5), got {self.trim}")
        if self.alpha_entropy <= 0.0:
            raise ParameterError(f"alpha_entropy must be positive, got {self.alpha_entropy}")
        if self.epsilon <= 0.0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        cw = tuple(float(v) for v in self.channel_weights)
        if len(cw) != 3 or not all(np.isfinite(v) and v >= 0.0 for v in cw):
            raise ParameterError("channel_weights must be three finite non-negative values")
        object.__setattr__(self, "channel_weights", cw)
        for name in ("eme_blocks", "cti_blocks"):
            k1, k2 = getattr(self, name)
            if int(k1) < 1 or int(k2) < 1:
                raise ParameterError(f"{name} must be a grid of positive counts")
            object.__setattr__(self, name, (int(k1), int(k2)))


@dataclass(frozen=True)
class QualityBreakdown:
    """Quality score with its three indices and the colour intermediates."""

    color: float
    sharpness: float
    contrast: float
    score: float
    chroma_shift: float  # l: magnitude of the trimmed RG/YB means
    chroma_spread: float  # r: magnitude of the trimmed RG/YB variances


@dataclass(frozen=True)
class LossWeights:
    """Term weights of the composite loss (perceptual, KL, reconstruction, balance)."""

    perceptual: float = 0.025
    kl: float = 1.0
    reconstruction: float = 0.1
    balance: float = 0.1

    def __post_init__(self):
        for name in ("perceptual", "kl", "reconstruction", "balance"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} weight must be finite")


@dataclass(frozen=True)
class LossBreakdown:
    perceptual: float
    kl: float
    reconstruction: float
    balance: float
    total: float


def _pixel_image(img, name: str = "image") -> Array:
    arr = as_tensor(img, name)
    if arr.shape[0] != 3:
        raise DimensionError(f"{name} must have 3 channels, got {arr.shape[0]}")
    if arr.min() < -1e-9 or arr.max() > 1.0 + 1e-9:
        raise ParameterError(f"{name} must be a pixel-domain image with values in [0, 1]")
    return arr


def luminance(img: Array, weights: tuple[float, float, float] = LUMA_WEIGHTS) -> Array:
    """Weighted channel sum of a 3-channel image, as an (H, W) plane."""
    arr = as_tensor(img)
    if arr.shape[0] != 3:
        raise DimensionError(f"luminance needs 3 channels, got {arr.shape[0]}")
    w = np.asarray(weights, dtype=np.float64)
    return np.tensordot(w, arr, axes=(0, 0))


def color_index(img: Array, w: QualityWeights) -> tuple[float, float, float]:
    """Colour index with its intermediates (l_coi, l, r).

    l is the root-sum-square of the alpha-trimmed means of RG and YB,
    r the root of the sum of their alpha-trimmed variances, and
    l_coi = -0.027*l + 0.159*r. A large l flags a colour cast; a large r
    rewards colourfulness.
    """
    scaled = _pixel_image(img) * METRIC_SCALE
    rg, yb = opponent_channels(scaled)
    mu_rg = alpha_trimmed_mean(rg, w.trim)
    mu_yb = alpha_trimmed_mean(yb, w.trim)
    var_rg = alpha_trimmed_variance(rg, w.trim)
    var_yb = alpha_trimmed_variance(yb, w.trim)
    shift = float(np.sqrt(mu_rg * mu_rg + mu_yb * mu_yb))
    spread = float(np.sqrt(var_rg + var_yb))
    return COLOR_SHIFT_COEF * shift + COLOR_SPREAD_COEF * spread, shift, spread


def _eme(plane: Array, grid: tuple[int, int], eps: float) -> float:
    k1, k2 = grid
    total = 0.0
    for block in block_partition(plane, k1, k2):
        total += float(np.log((block.vmax + eps) / (block.vmin + eps)))
    return 2.0 / (k1 * k2) * total


def sharpness_index(img: Array, w: QualityWeights) -> float:
    """Weighted sum over channels of the EME of edge-weighted intensity.

    Each channel is multiplied elementwise by its own Sobel magnitude
    before the block-wise log max/min measure, so flat regions contribute
    nothing and strong, bright edges dominate.
    """
    scaled = _pixel_image(img) * METRIC_SCALE
    h, width = scaled.shape[1], scaled.shape[2]
    if h < 3 or width < 3:
        raise DimensionError(f"sharpness index needs at least 3x3 images, got {h}x{width}")
    k1, k2 = w.eme_blocks
    if k1 > h or k2 > width:
        raise DimensionError(f"block grid {k1}x{k2} exceeds image size {h}x{width}")
    total = 0.0
    for i in range(3):
        edge_map = sobel_magnitude(scaled[i]) * scaled[i]
        total += w.channel_weights[i] * _eme(edge_map, w.eme_blocks, w.epsilon)
    return float(total)


def contrast_index(img: Array, w: QualityWeights) -> float:
    """Block-entropy contrast measure on the luminance plane.

    Per block with extrema (min, max): top = max - min, bot = max + min;
    blocks with top <= epsilon contribute zero (the x^a*log(x) -> 0 limit),
    otherwise a*(top/bot)^a*log(top/bot). The block sum is weighted by
    -1/(k1*k2), making the index non-negative for a > 0.
    """
    luma = luminance(_pixel_image(img)) * METRIC_SCALE
    k1, k2 = w.cti_blocks
    a = w.alpha_entropy
    total = 0.0
    for block in block_partition(luma, k1, k2):
        top = block.vmax - block.vmin
        if top <= w.epsilon:
            continue
        ratio = top / (block.vmax + block.vmin)
        total += float(a * ratio**a * np.log(ratio))
    return -total / (k1 * k2)


def quality_score(img: Array, w: QualityWeights | None = None) -> QualityBreakdown:
    """Composite quality score c1*color + c2*sharpness + c3*contrast."""
    w = w or QualityWeights()
    coi, shift, spread = color_index(img, w)
    si = sharpness_index(img, w)
    cti = contrast_index(img, w)
    return QualityBreakdown(
        color=coi,
        sharpness=si,
        contrast=cti,
        score=w.c1 * coi + w.c2 * si + w.c3 * cti,
        chroma_shift=shift,
        chroma_spread=spread,
    )


def balance_loss(out_img: Array, ref_img: Array, w: QualityWeights | None = None) -> float:
    """Squared, optionally biased, quality-score shift between two images.

    |score(out) - score(ref) + lambda_imp|^2; zero for identical images
    when lambda_imp is zero, and symmetric in its arguments in that case.
    """
    w = w or QualityWeights()
    diff = quality_score(out_img, w).score - quality_score(ref_img, w).score
    return float((diff + w.lambda_imp) ** 2)


def kl_diag_gaussian(mu_p, sigma_p, mu_q, sigma_q) -> float:
    """KL divergence between diagonal Gaussians p and q.

    Sum over dimensions of log(sq/sp) + (sp^2 + (mp - mq)^2) / (2 sq^2) - 1/2.
    Non-negative; zero exactly when the parameters coincide.
    """
    mu_p = np.atleast_1d(np.asarray(mu_p, dtype=np.float64))
    mu_q = np.atleast_1d(np.asarray(mu_q, dtype=np.float64))
    sigma_p = np.atleast_1d(np.asarray(sigma_p, dtype=np.float64))
    sigma_q = np.atleast_1d(np.asarray(sigma_q, dtype=np.float64))
    try:
        mu_p, sigma_p, mu_q, sigma_q = np.broadcast_arrays(mu_p, sigma_p, mu_q, sigma_q)
    except ValueError as exc:
        raise DimensionError(f"gaussian parameter lengths do not match: {exc}") from exc
    if (sigma_p <= 0.0).any() or (sigma_q <= 0.0).any():
        raise ParameterError("standard deviations must be strictly positive")
    terms = (
        np.log(sigma_q / sigma_p)
        + (sigma_p**2 + (mu_p - mu_q) ** 2) / (2.0 * sigma_q**2)
        - 0.5
    )
    return float(terms.sum())


def reconstruction_loss(out: Array, gt: Array) -> float:
    """Mean absolute error over all elements of two same-shaped tensors."""
    a = as_tensor(out, "output")
    b = as_tensor(gt, "ground truth")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).mean())


def composite_loss(
    out: Array,
    gt: Array,
    stats,
    lw: LossWeights | None = None,
    w: QualityWeights | None = None,
    perceptual: Optional[Callable[[Array, Array], float]] = None,
    balance_ref: Array | None = None,
) -> LossBreakdown:
    """Weighted sum of perceptual, KL, reconstruction, and balance terms.

    ``stats`` carries the four Gaussian parameter vectors produced by the
    statistics head (mean_loc/mean_scale/std_loc/std_scale); both Gaussians
    are scored against a standard-normal prior. The perceptual plug-in
    (out, gt) -> float contributes zero when absent. The balance term is
    referenced against ``gt`` unless ``balance_ref`` (e.g. the degraded
    input) is supplied.
    """
    lw = lw or LossWeights()
    w = w or QualityWeights()
    perc = float(perceptual(out, gt)) if perceptual is not None else 0.0
    ones = np.ones_like(stats.mean_scale)
    zeros = np.zeros_like(stats.mean_loc)
    kl = kl_diag_gaussian(stats.mean_loc, stats.mean_scale, zeros, ones)
    kl += kl_diag_gaussian(stats.std_loc, stats.std_scale, zeros, ones)
    rec = reconstruction_loss(out, gt)
    ref = gt if balance_ref is None else balance_ref
    bal = balance_loss(out, ref, w)
    total = lw.perceptual * perc + lw.kl * kl + lw.reconstruction * rec + lw.balance * bal
    return LossBreakdown(
        perceptual=perc, kl=kl, reconstruction=rec, balance=bal, total=float(total)
    )
