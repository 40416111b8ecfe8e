"""Forward-only toy enhancement network.

Three-stage encoder with skip connections, a gated residual bottleneck, a
mirrored decoder (the extractor), a statistics head that turns the feature
map's channel statistics into Gaussian parameters whose means drive AdaIN
restyling, and a gated residual refinement stage. The final feature map is
handed to :mod:`uwie.fpp` for post-processing into a pixel image.

No batch axis, no training, no autodiff: a single (3, H, W) image per call,
H and W divisible by 8. Weights are immutable after construction and any
number of forward passes may share them concurrently; the only randomness
is the optional sampled mode, seeded explicitly by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DimensionError, ParameterError
from . import fpp
from .tensor import (
    Array,
    ChannelStats,
    ConvKernel,
    as_tensor,
    channel_stats,
    concat_channels,
    conv2d,
    elu,
    global_avg_pool,
    max_pool2,
    sigmoid,
    softplus,
    upsample2,
)

ADAIN_EPS = 1e-8


def layer_shapes(channel_width: int) -> dict[str, tuple[int, int, int]]:
    """Architecture graph: layer name -> (out_channels, in_channels, kernel side).

    The encoder and bottleneck run at width C; the decoder's final stage
    emits 2C channels so the restyle stage and statistics head operate on
    a doubled feature map; the head projects back to 3 channels.
    """
    if channel_width < 1:
        raise ParameterError(f"channel_width must be >= 1, got {channel_width}")
    c = channel_width
    c2 = 2 * channel_width
    shapes: dict[str, tuple[int, int, int]] = {}
    shapes["enc1.conv1"] = (c, 3, 3)
    shapes["enc1.conv2"] = (c, c, 3)
    for name in ("enc2", "enc3"):
        shapes[f"{name}.conv1"] = (c, c, 3)
        shapes[f"{name}.conv2"] = (c, c, 3)
    shapes["mid.conv1"] = (c, c, 3)
    shapes["mid.conv2"] = (c, c, 3)
    shapes["mid.gate1"] = (c, c, 1)
    shapes["mid.gate2"] = (c, c, 1)
    shapes["dec1.conv"] = (c, c2, 3)
    shapes["dec2.conv"] = (c, c2, 3)
    shapes["dec3.conv"] = (c2, c2, 3)
    for name in ("stats.mean_loc", "stats.mean_scale", "stats.std_loc", "stats.std_scale"):
        shapes[name] = (c2, c2, 1)
    shapes["restyle.conv1"] = (c2, c2, 3)
    shapes["restyle.conv2"] = (c2, c2, 3)
    shapes["restyle.gate1"] = (c2, c2, 1)
    shapes["restyle.gate2"] = (c2, c2, 1)
    shapes["head.conv"] = (3, c2, 3)
    return shapes


@dataclass(frozen=True)
class NetworkWeights:
    """Named kernels for every layer of the architecture graph."""

    channel_width: int
    layers: dict[str, ConvKernel]

    def __post_init__(self):
        validate_weights(self)

    def __getitem__(self, name: str) -> ConvKernel:
        return self.layers[name]


def validate_weights(weights: NetworkWeights) -> None:
    """Check layer names and shapes against the architecture graph."""
    expected = layer_shapes(weights.channel_width)
    missing = sorted(set(expected) - set(weights.layers))
    unknown = sorted(set(weights.layers) - set(expected))
    if missing:
        raise DimensionError(f"missing layers: {', '.join(missing)}")
    if unknown:
        raise DimensionError(f"unknown layers: {', '.join(unknown)}")
    for name, (out_ch, in_ch, k) in expected.items():
        kern = weights.layers[name]
        got = kern.weights.shape
        if got != (out_ch, in_ch, k, k):
            raise DimensionError(
                f"layer {name}: expected shape {(out_ch, in_ch, k, k)}, got {got}"
            )


def init_weights(seed: int, channel_width: int) -> NetworkWeights:
    """Seeded He-style initialization: normal(0, sqrt(2/fan_in)), zero bias."""
    rng = np.random.default_rng(seed)
    layers: dict[str, ConvKernel] = {}
    for name, (out_ch, in_ch, k) in layer_shapes(channel_width).items():
        fan_in = in_ch * k * k
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(out_ch, in_ch, k, k))
        layers[name] = ConvKernel(weights=w, bias=np.zeros(out_ch))
    return NetworkWeights(channel_width=channel_width, layers=layers)


@dataclass(frozen=True)
class GaussianParams:
    """Diagonal-Gaussian parameters produced by the statistics head.

    mean_loc/mean_scale parameterize the distribution whose mean becomes
    the AdaIN target mean; std_loc/std_scale the one behind the target
    standard deviation. Scales are stored post-softplus, strictly positive.
    """

    mean_loc: Array
    mean_scale: Array
    std_loc: Array
    std_scale: Array


def fe_block(x: Array, conv1: ConvKernel, conv2: ConvKernel) -> tuple[Array, Array]:
    """conv3x3 -> ELU -> dropout (identity at inference) -> conv3x3 -> ELU -> pool.

    Returns the pre-pool feature map (same H x W as the input, used as a
    skip connection) and its 2x max-pooled counterpart.
    """
    h = elu(conv2d(x, conv1, "same"))
    h = elu(conv2d(h, conv2, "same"))
    return h, max_pool2(h)


def se_gate(x: Array, w1: ConvKernel, w2: ConvKernel) -> Array:
    """Channel attention: x * sigmoid(w2(ELU(w1(GAP(x))))).

    The gate lies strictly in (0, 1) per channel, so the output never
    exceeds the input in magnitude.
    """
    x = as_tensor(x)
    if w2.out_channels != x.shape[0]:
        raise DimensionError(
            f"gate output width {w2.out_channels} must match input channels {x.shape[0]}"
        )
    pooled = global_avg_pool(x).reshape(-1, 1, 1)
    squeezed = elu(conv2d(pooled, w1, "valid"))
    gate = sigmoid(conv2d(squeezed, w2, "valid"))
    return x * gate


def se_resblock(
    x: Array,
    conv1: ConvKernel,
    conv2: ConvKernel,
    gate1: ConvKernel,
    gate2: ConvKernel,
) -> Array:
    """Residual block with a channel-gated branch: gate(conv(ELU(conv(x)))) + x."""
    x = as_tensor(x)
    if conv2.out_channels != x.shape[0]:
        raise DimensionError("residual branch must preserve the channel count")
    branch = conv2d(x, conv1, "same")
    branch = conv2d(elu(branch), conv2, "same")
    return se_gate(branch, gate1, gate2) + x


def encode(img: Array, weights: NetworkWeights) -> tuple[Array, list[Array]]:
    """Run the three pooling stages plus the gated bottleneck.

    Returns the bottleneck feature map (C x H/8 x W/8) and the three
    pre-pool skip maps at full, half, and quarter resolution.
    """
    x = as_tensor(img, "image")
    if x.shape[0] != 3:
        raise DimensionError(f"network input must have 3 channels, got {x.shape[0]}")
    if x.shape[1] % 8 or x.shape[2] % 8:
        raise DimensionError(
            f"height and width must be divisible by 8, got {x.shape[1]}x{x.shape[2]}"
        )
    layers = weights.layers
    skips = []
    h = x
    for name in ("enc1", "enc2", "enc3"):
        pre_pool, h = fe_block(h, layers[f"{name}.conv1"], layers[f"{name}.conv2"])
        skips.append(pre_pool)
    mid = se_resblock(
        h, layers["mid.conv1"], layers["mid.conv2"], layers["mid.gate1"], layers["mid.gate2"]
    )
    return mid, skips


def extractor_forward(img: Array, weights: NetworkWeights) -> tuple[Array, list[Array]]:
    """Encoder-decoder feature extraction.

    The decoder upsamples 2x per stage, concatenates the matching skip map
    (skip channels first), and fuses with a 3x3 convolution + ELU. The
    final stage doubles the channel budget, returning a 2C x H x W feature
    map together with the skip list.
    """
    mid, skips = encode(img, weights)
    layers = weights.layers
    h = mid
    for stage, skip in zip(("dec1", "dec2", "dec3"), reversed(skips)):
        h = elu(conv2d(concat_channels(skip, upsample2(h)), layers[f"{stage}.conv"], "same"))
    return h, skips


def gaussian_stat_params(
    features: Array,
    weights: NetworkWeights,
    mode: str = "deterministic",
    seed: int | None = None,
) -> tuple[GaussianParams, Array, Array]:
    """Map channel statistics to Gaussian parameters and AdaIN targets.

    The per-channel mean and std vectors each pass through two 1x1
    convolutions, giving the location and (softplus-positive) scale of two
    diagonal Gaussians. Deterministic mode uses the distribution means:
    the target mean is mean_loc and the target std softplus(std_loc).
    Sampled mode draws both from their Gaussians with the supplied seed,
    keeping the std positive via softplus.
    """
    feats = as_tensor(features, "feature map")
    stats = channel_stats(feats)
    mean_in = stats.means.reshape(-1, 1, 1)
    std_in = stats.stds.reshape(-1, 1, 1)
    layers = weights.layers
    mean_loc = conv2d(mean_in, layers["stats.mean_loc"], "valid").ravel()
    mean_scale = softplus(conv2d(mean_in, layers["stats.mean_scale"], "valid").ravel())
    std_loc = conv2d(std_in, layers["stats.std_loc"], "valid").ravel()
    std_scale = softplus(conv2d(std_in, layers["stats.std_scale"], "valid").ravel())
    params = GaussianParams(
        mean_loc=mean_loc, mean_scale=mean_scale, std_loc=std_loc, std_scale=std_scale
    )
    if mode == "deterministic":
        target_mean = mean_loc
        target_std = softplus(std_loc)
    elif mode == "sampled":
        if seed is None:
            raise ParameterError("sampled mode requires a seed")
        rng = np.random.default_rng(seed)
        target_mean = mean_loc + mean_scale * rng.standard_normal(mean_loc.size)
        target_std = softplus(std_loc + std_scale * rng.standard_normal(std_loc.size))
    else:
        raise ParameterError(f"mode must be 'deterministic' or 'sampled', got {mode!r}")
    return params, target_mean, target_std


def adain(
    content: Array,
    target_mean: Array,
    target_std: Array,
    eps: float = ADAIN_EPS,
) -> Array:
    """Adaptive instance normalization toward per-channel target statistics.

    Per channel c: target_std[c] * (x - mean_x[c]) / (std_x[c] + eps)
    + target_mean[c]. Constant channels (std 0) map to the target mean
    everywhere; the eps guard keeps the operation total.
    """
    x = as_tensor(content, "content")
    mu_t = np.asarray(target_mean, dtype=np.float64).ravel()
    sd_t = np.asarray(target_std, dtype=np.float64).ravel()
    if mu_t.size != x.shape[0] or sd_t.size != x.shape[0]:
        raise DimensionError(
            f"target vectors must have length {x.shape[0]}, got {mu_t.size}/{sd_t.size}"
        )
    if (sd_t < 0.0).any():
        raise ParameterError("target standard deviations must be non-negative")
    if eps <= 0.0:
        raise ParameterError(f"eps must be positive, got {eps}")
    stats = channel_stats(x)
    mu_x = stats.means[:, None, None]
    sd_x = stats.stds[:, None, None]
    return sd_t[:, None, None] * (x - mu_x) / (sd_x + eps) + mu_t[:, None, None]


def restyle_forward(
    features: Array,
    weights: NetworkWeights,
    mode: str = "deterministic",
    seed: int | None = None,
) -> tuple[Array, GaussianParams]:
    """AdaIN restyling followed by the gated residual refinement block.

    Returns the refined feature map and the Gaussian parameters for KL
    scoring in the composite loss.
    """
    params, target_mean, target_std = gaussian_stat_params(features, weights, mode, seed)
    styled = adain(features, target_mean, target_std)
    layers = weights.layers
    refined = se_resblock(
        styled,
        layers["restyle.conv1"],
        layers["restyle.conv2"],
        layers["restyle.gate1"],
        layers["restyle.gate2"],
    )
    return refined, params


def enhance_forward(
    img: Array,
    weights: NetworkWeights,
    cfg: "fpp.FppConfig | None" = None,
    mode: str = "deterministic",
    seed: int | None = None,
) -> Array:
    """Full forward pass: extract, restyle, post-process, clamp to [0, 1].

    The input must be a 3-channel pixel image with H and W divisible by 8;
    the output has the same shape and stays in the pixel domain.
    """
    x = as_tensor(img, "image")
    if x.min() < -1e-9 or x.max() > 1.0 + 1e-9:
        raise ParameterError("network input must be a pixel image with values in [0, 1]")
    cfg = cfg or fpp.FppConfig()
    features, _ = extractor_forward(x, weights)
    refined, _ = restyle_forward(features, weights, mode, seed)
    return fpp.postprocess_features(refined, weights.layers["head.conv"], cfg)
