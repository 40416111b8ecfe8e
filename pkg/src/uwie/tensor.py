"""Dense numerical kernels on channel-major image arrays.

The universal carrier is a float64 numpy array shaped ``(C, H, W)``;
single-channel filters operate on plain ``(H, W)`` planes. Every function
here is pure and deterministic: identical inputs give bit-identical
outputs, so everything is safe to call from any number of threads.

Network-style convolutions use the cross-correlation convention with zero
padding; image filters (Gaussian, Sobel) use replicate-edge padding to
avoid dark halos at the borders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, ParameterError

Array = np.ndarray

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()


def as_tensor(x, name: str = "input") -> Array:
    """Validate and convert to a finite float64 (C, H, W) array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionError(
            f"{name} must be shaped (channels, height, width), got {arr.shape}"
        )
    if min(arr.shape) < 1:
        raise DimensionError(f"{name} has an empty axis: {arr.shape}")
    if not np.isfinite(arr).all():
        raise ParameterError(f"{name} contains non-finite values")
    return arr


def as_plane(x, name: str = "channel") -> Array:
    """Validate a single-channel image given as (H, W) or (1, H, W)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise DimensionError(
            f"{name} must be a single (height, width) plane, got {arr.shape}"
        )
    if not np.isfinite(arr).all():
        raise ParameterError(f"{name} contains non-finite values")
    return arr


def clamp01(x: Array) -> Array:
    return np.clip(x, 0.0, 1.0)


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel mean and population (divisor H*W) standard deviation."""

    means: Array
    stds: Array


@dataclass(frozen=True)
class ConvKernel:
    """Convolution weights shaped (out, in, kh, kw) plus a per-output bias.

    Kernel sides are restricted to 1 or 3: 1x1 for channel gates and the
    statistics heads, 3x3 everywhere else.
    """

    weights: Array
    bias: Array

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 4:
            raise DimensionError(f"kernel weights must be 4-d, got {w.shape}")
        kh, kw = w.shape[2], w.shape[3]
        if kh not in (1, 3) or kw not in (1, 3):
            raise ParameterError(f"kernel sides must be 1 or 3, got {kh}x{kw}")
        if b.shape != (w.shape[0],):
            raise DimensionError(
                f"bias must have length out_channels={w.shape[0]}, got {b.shape}"
            )
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ParameterError("kernel weights and bias must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_size(self) -> tuple[int, int]:
        return self.weights.shape[2], self.weights.shape[3]


def conv2d(x: Array, kernel: ConvKernel, padding: str = "same") -> Array:
    """Direct 2-d cross-correlation of a (C, H, W) array with a ConvKernel.

    padding="same" zero-pads by floor(k/2) per side and preserves H x W;
    padding="valid" applies no padding and shrinks each axis by k - 1.
    """
    x = as_tensor(x)
    if kernel.in_channels != x.shape[0]:
        raise DimensionError(
            f"kernel expects {kernel.in_channels} input channels, image has {x.shape[0]}"
        )
    kh, kw = kernel.kernel_size
    if padding == "same":
        ph, pw = kh // 2, kw // 2
    elif padding == "valid":
        ph = pw = 0
    else:
        raise ParameterError(f"padding must be 'same' or 'valid', got {padding!r}")
    out_h = x.shape[1] + 2 * ph - kh + 1
    out_w = x.shape[2] + 2 * pw - kw + 1
    if out_h < 1 or out_w < 1:
        raise DimensionError(
            f"kernel {kh}x{kw} with {padding} padding leaves no output for "
            f"input {x.shape[1]}x{x.shape[2]}"
        )
    if ph or pw:
        x = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))
    out = np.tensordot(kernel.weights, windows, axes=([1, 2, 3], [0, 3, 4]))
    return out + kernel.bias[:, None, None]


def elu(x: Array) -> Array:
    """Elementwise ELU with alpha = 1: x for x > 0, exp(x) - 1 otherwise."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))


def sigmoid(x: Array) -> Array:
    """Numerically stable logistic function, values in (0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))


def softplus(x: Array) -> Array:
    """log(1 + exp(x)) computed without overflow; strictly positive."""
    return np.logaddexp(0.0, np.asarray(x, dtype=np.float64))


def max_pool2(x: Array) -> Array:
    """2x2 max pooling with stride 2; odd trailing rows/columns are dropped."""
    x = as_tensor(x)
    c, h, w = x.shape
    if h < 2 or w < 2:
        raise DimensionError(f"max_pool2 needs at least 2x2 input, got {h}x{w}")
    h2, w2 = h // 2, w // 2
    trimmed = x[:, : 2 * h2, : 2 * w2]
    return trimmed.reshape(c, h2, 2, w2, 2).max(axis=(2, 4))


def upsample2(x: Array) -> Array:
    """Nearest-neighbor 2x upsampling: (C, H, W) -> (C, 2H, 2W)."""
    x = as_tensor(x)
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


def concat_channels(a: Array, b: Array) -> Array:
    """Stack two tensors along the channel axis; spatial sizes must match."""
    a = as_tensor(a, "first operand")
    b = as_tensor(b, "second operand")
    if a.shape[1:] != b.shape[1:]:
        raise DimensionError(
            f"spatial sizes differ: {a.shape[1:]} vs {b.shape[1:]}"
        )
    return np.concatenate([a, b], axis=0)


def global_avg_pool(x: Array) -> Array:
    """Per-channel mean over the spatial axes, returned as a (C,) vector."""
    return as_tensor(x).mean(axis=(1, 2))


def channel_stats(x: Array) -> ChannelStats:
    """Per-channel mean and population standard deviation."""
    x = as_tensor(x)
    return ChannelStats(means=x.mean(axis=(1, 2)), stds=x.std(axis=(1, 2)))


def gaussian_kernel(omega: float) -> tuple[Array, int]:
    """Normalized 1-d Gaussian taps and the radius ceil(3*omega)."""
    if not omega > 0.0:
        raise ParameterError(f"gaussian scale must be positive, got {omega}")
    radius = int(np.ceil(3.0 * omega))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * omega * omega))
    return k / k.sum(), radius


def gaussian_blur(x: Array, omega: float) -> Array:
    """Per-channel Gaussian low-pass with replicate-edge padding.

    The 2-d kernel is the outer product of normalized 1-d taps truncated at
    radius ceil(3*omega), so its weights sum to one and constants pass
    through unchanged.
    """
    x = as_tensor(x)
    k, r = gaussian_kernel(omega)
    padded = np.pad(x, ((0, 0), (r, r), (r, r)), mode="edge")
    horiz = sliding_window_view(padded, 2 * r + 1, axis=2) @ k
    return sliding_window_view(horiz, 2 * r + 1, axis=1) @ k


def sobel_magnitude(channel: Array) -> Array:
    """sqrt(Gx^2 + Gy^2) with the standard 3x3 Sobel stencils.

    Uses replicate-edge padding; the result is non-negative and has the
    same shape as the input plane.
    """
    ch = as_plane(channel)
    if ch.shape[0] < 3 or ch.shape[1] < 3:
        raise DimensionError(f"sobel needs at least 3x3 input, got {ch.shape}")
    padded = np.pad(ch, 1, mode="edge")
    windows = sliding_window_view(padded, (3, 3))
    gx = np.tensordot(windows, SOBEL_X, axes=([2, 3], [0, 1]))
    gy = np.tensordot(windows, SOBEL_Y, axes=([2, 3], [0, 1]))
    return np.sqrt(gx * gx + gy * gy)


def _trim_count(n: int, trim: float) -> int:
    if not 0.0 <= trim < 0.5:
        raise ParameterError(f"trim fraction must lie in [0, 0.5), got {trim}")
    t = int(np.floor(trim * n))
    if n - 2 * t < 1:
        raise ParameterError(f"trim {trim} leaves no values out of {n}")
    return t


def alpha_trimmed_mean(values, trim: float) -> float:
    """Mean after dropping floor(trim*n) values from each tail.

    Summation is exactly rounded (math.fsum), so the result is independent
    of the input order down to the last bit.
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size == 0:
        raise ParameterError("cannot trim an empty value list")
    if not np.isfinite(vals).all():
        raise ParameterError("values contain non-finite entries")
    t = _trim_count(vals.size, trim)
    kept = np.sort(vals)[t : vals.size - t]
    return math.fsum(kept) / kept.size


def alpha_trimmed_variance(values, trim: float) -> float:
    """Mean squared deviation of ALL values from the alpha-trimmed mean.

    The divisor is the full count n, not the post-trim count; trimming only
    robustifies the center, not the spread's denominator.
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    mu = alpha_trimmed_mean(vals, trim)
    return math.fsum(np.square(vals - mu)) / vals.size


def opponent_channels(rgb: Array) -> tuple[Array, Array]:
    """Red-green and yellow-blue difference planes of a 3-channel image.

    RG = R - G and YB = (R + G)/2 - B, elementwise; both are zero on any
    achromatic (R = G = B) image.
    """
    img = as_tensor(rgb, "rgb image")
    if img.shape[0] != 3:
        raise DimensionError(f"expected 3 channels (R, G, B), got {img.shape[0]}")
    r, g, b = img[0], img[1], img[2]
    return r - g, (r + g) / 2.0 - b


@dataclass(frozen=True)
class Block:
    """One rectangle of a block partition, with its value extrema.

    rows/cols are half-open [start, stop) index ranges.
    """

    rows: tuple[int, int]
    cols: tuple[int, int]
    vmin: float
    vmax: float


def _band_edges(n: int, k: int) -> list[tuple[int, int]]:
    base, extra = divmod(n, k)
    sizes = [base] * (k - extra) + [base + 1] * extra
    edges, start = [], 0
    for size in sizes:
        edges.append((start, start + size))
        start += size
    return edges


def block_partition(channel: Array, k1: int, k2: int) -> list[Block]:
    """Partition a plane into a k1 x k2 grid of near-equal blocks.

    Remainder rows/columns go to the trailing blocks. Every pixel belongs
    to exactly one block; each block reports its min and max.
    """
    ch = as_plane(channel)
    h, w = ch.shape
    if k1 < 1 or k2 < 1:
        raise ParameterError(f"block grid must be at least 1x1, got {k1}x{k2}")
    if k1 > h or k2 > w:
        raise ParameterError(f"block grid {k1}x{k2} exceeds image size {h}x{w}")
    blocks = []
    for r0, r1 in _band_edges(h, k1):
        for c0, c1 in _band_edges(w, k2):
            tile = ch[r0:r1, c0:c1]
            blocks.append(Block((r0, r1), (c0, c1), float(tile.min()), float(tile.max())))
    return blocks
