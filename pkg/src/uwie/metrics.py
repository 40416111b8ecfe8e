"""Reference-based and no-reference image quality metrics.

PSNR and SSIM compare against a reference; UIQM and UCIQE score a single
image. UIQM is literally the quality score of :mod:`uwie.losses` (one
source of truth, no reimplementation drift). UCIQE here is an
opponent-space variant: chroma and saturation come from the RG/YB planes
rather than a CIELab transform, which keeps the package self-contained;
reports flag it as such.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, InputError, ParameterError
from .losses import LUMA_WEIGHTS, QualityWeights, luminance, quality_score
from .tensor import Array, as_tensor, opponent_channels

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

UCIQE_CHROMA_STD = 0.4680
UCIQE_LUMA_CONTRAST = 0.2745
UCIQE_SATURATION = 0.2576
UCIQE_NOTE = "UCIQE (opponent-space variant)"

REFERENCE_METRICS = ("psnr", "ssim")
NO_REFERENCE_METRICS = ("uiqm", "uciqe")
ALL_METRICS = REFERENCE_METRICS + NO_REFERENCE_METRICS

_SAT_EPS = 1e-8


def _pixel_pair(a, b) -> tuple[Array, Array]:
    x = as_tensor(a, "first image")
    y = as_tensor(b, "second image")
    if x.shape != y.shape:
        raise DimensionError(f"image shapes differ: {x.shape} vs {y.shape}")
    for name, arr in (("first image", x), ("second image", y)):
        if arr.min() < -1e-9 or arr.max() > 1.0 + 1e-9:
            raise ParameterError(f"{name} must have pixel values in [0, 1]")
    return x, y


def psnr(a: Array, b: Array) -> float:
    """Peak signal-to-noise ratio in dB on the [0, 1] domain (MAX = 1).

    Identical images return the 100 dB cap instead of infinity so batch
    aggregation stays finite.
    """
    x, y = _pixel_pair(a, b)
    mse = float(np.square(x - y).mean())
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, float(10.0 * np.log10(1.0 / mse)))


def _ssim_luma(img: Array) -> Array:
    if img.shape[0] == 3:
        return luminance(img)
    if img.shape[0] == 1:
        return img[0]
    raise DimensionError(f"ssim expects 1- or 3-channel images, got {img.shape[0]}")


def ssim_window() -> Array:
    """The normalized 11x11 Gaussian window (sigma 1.5) used by ssim."""
    half = SSIM_WINDOW // 2
    xs = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(xs * xs) / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
    w = np.outer(g, g)
    return w / w.sum()


def _window_means(plane: Array, window: Array) -> Array:
    views = sliding_window_view(plane, window.shape)
    return np.tensordot(views, window, axes=([2, 3], [0, 1]))


def ssim(a: Array, b: Array) -> float:
    """Mean structural similarity over Gaussian-weighted 11x11 windows.

    Computed on luminance with the reference constants K1 = 0.01,
    K2 = 0.03, L = 1; values lie in [-1, 1] and identical images score 1.
    """
    x, y = _pixel_pair(a, b)
    if x.shape[1] < SSIM_WINDOW or x.shape[2] < SSIM_WINDOW:
        raise DimensionError(
            f"ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} images, got "
            f"{x.shape[1]}x{x.shape[2]}"
        )
    lx = _ssim_luma(x)
    ly = _ssim_luma(y)
    w = ssim_window()
    mu_x = _window_means(lx, w)
    mu_y = _window_means(ly, w)
    var_x = _window_means(lx * lx, w) - mu_x * mu_x
    var_y = _window_means(ly * ly, w) - mu_y * mu_y
    cov = _window_means(lx * ly, w) - mu_x * mu_y
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float((num / den).mean())


def uiqm(img: Array, w: QualityWeights | None = None) -> float:
    """Underwater image quality measure: the composite quality score."""
    return quality_score(img, w or QualityWeights()).score


def uciqe(img: Array) -> float:
    """Opponent-space underwater colour quality score.

    0.4680 * std(chroma) + 0.2745 * (p99 - p1 of luminance)
    + 0.2576 * mean(chroma / (luminance + eps)), with chroma the
    per-pixel magnitude of the RG/YB opponent pair. Zero on any constant
    achromatic image.
    """
    x = as_tensor(img, "image")
    if x.shape[0] != 3:
        raise DimensionError(f"uciqe needs a 3-channel image, got {x.shape[0]}")
    rg, yb = opponent_channels(x)
    chroma = np.sqrt(rg * rg + yb * yb)
    luma = luminance(x, LUMA_WEIGHTS)
    contrast = float(np.percentile(luma, 99) - np.percentile(luma, 1))
    saturation = chroma / (luma + _SAT_EPS)
    return (
        UCIQE_CHROMA_STD * float(chroma.std())
        + UCIQE_LUMA_CONTRAST * contrast
        + UCIQE_SATURATION * float(saturation.mean())
    )


@dataclass
class MetricReport:
    """Per-image metric values, aggregate means, and skipped inputs."""

    metrics: list[str]
    rows: dict[str, dict[str, float]]
    aggregates: dict[str, float]
    skipped: list[tuple[str, str]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def evaluate(
    tests: Mapping[str, Array],
    refs: Mapping[str, Array] | None = None,
    metrics: list[str] | None = None,
    w: QualityWeights | None = None,
) -> MetricReport:
    """Score a set of images, pairing references by name.

    Reference metrics (psnr, ssim) require a matching entry in ``refs``
    for each test name; unpairable images are listed under ``skipped``
    rather than silently dropped. Rows follow sorted name order and each
    aggregate is the arithmetic mean of its column.
    """
    metrics = list(metrics) if metrics else list(ALL_METRICS)
    unknown = [m for m in metrics if m not in ALL_METRICS]
    if unknown:
        raise ParameterError(f"unknown metrics: {', '.join(unknown)}")
    if not tests:
        raise InputError("no test images supplied")
    needs_ref = [m for m in metrics if m in REFERENCE_METRICS]
    if needs_ref and refs is None:
        raise InputError(f"metrics {', '.join(needs_ref)} need a reference image set")
    w = w or QualityWeights()

    rows: dict[str, dict[str, float]] = {}
    skipped: list[tuple[str, str]] = []
    for name in sorted(tests):
        img = tests[name]
        if needs_ref and name not in refs:
            skipped.append((name, "no reference image with this name"))
            continue
        row: dict[str, float] = {}
        for metric in metrics:
            if metric == "psnr":
                row[metric] = psnr(img, refs[name])
            elif metric == "ssim":
                row[metric] = ssim(img, refs[name])
            elif metric == "uiqm":
                row[metric] = uiqm(img, w)
            else:
                row[metric] = uciqe(img)
        rows[name] = row
    if not rows:
        raise InputError("no evaluable images (all inputs were skipped)")
    aggregates = {
        metric: float(np.mean([row[metric] for row in rows.values()])) for metric in metrics
    }
    notes = [UCIQE_NOTE] if "uciqe" in metrics else []
    return MetricReport(
        metrics=metrics, rows=rows, aggregates=aggregates, skipped=skipped, notes=notes
    )
