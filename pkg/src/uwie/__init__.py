"""Underwater image enhancement toolkit.

Numerical kernels on channel-major arrays, a colour/sharpness/contrast
quality score with its balance-loss family, a classical detail-enhancement
pipeline, a small forward-only enhancement network with AdaIN restyling,
no-reference quality metrics, and a batch CLI.
"""

from .errors import (
    DimensionError,
    InputError,
    ParameterError,
    UwieError,
    WeightAuditError,
)
from .fpp import (
    FppConfig,
    bem_blend,
    border_enhancement_mask,
    enhance_classical,
    gray_world_correct,
    gray_world_report,
    postprocess_features,
)
from .gradients import (
    gradient_angle_matrix,
    gradient_report,
    numerical_gradient,
    sample_pixels,
    tie_free_mask,
)
from .losses import (
    LossBreakdown,
    LossWeights,
    QualityBreakdown,
    QualityWeights,
    balance_loss,
    color_index,
    composite_loss,
    contrast_index,
    kl_diag_gaussian,
    luminance,
    quality_score,
    reconstruction_loss,
    sharpness_index,
)
from .metrics import MetricReport, evaluate, psnr, ssim, uciqe, uiqm
from .network import (
    GaussianParams,
    NetworkWeights,
    adain,
    enhance_forward,
    extractor_forward,
    gaussian_stat_params,
    init_weights,
    layer_shapes,
    restyle_forward,
    validate_weights,
)
from .tensor import (
    Block,
    ChannelStats,
    ConvKernel,
    alpha_trimmed_mean,
    alpha_trimmed_variance,
    block_partition,
    channel_stats,
    concat_channels,
    conv2d,
    elu,
    gaussian_blur,
    global_avg_pool,
    max_pool2,
    opponent_channels,
    sigmoid,
    sobel_magnitude,
    softplus,
    upsample2,
)
from .weights_io import inspect_weights, load_weights, save_weights

__version__ = "0.1.0"
