"""Desk-scale skin lesion segmentation: a toy U-Net trained from scratch with
class-weighted cross-entropy and Adam, plus Gaussian/Otsu post-processing and
thresholded-Jaccard evaluation."""

from .augment import AugmentConfig, Sample, flip_h, flip_v, random_augment, rot90
from .imgio import (
    Checkpoint,
    FormatError,
    decode_checkpoint,
    decode_pgm,
    decode_ppm,
    decode_smf,
    encode_checkpoint,
    encode_pgm,
    encode_ppm,
    encode_smf,
    mask_from_gray,
    scoremap_from_smf,
)
from .metrics import EvalReport, evaluate_dataset, jaccard, thresholded_jaccard
from .postprocess import (
    OtsuResult,
    PostprocessConfig,
    ProbabilityMap,
    extract_mask,
    gaussian_blur,
    gaussian_kernel,
    otsu_threshold,
    postprocess_pipeline,
    score_diff,
    softmax2,
)
from .rasters import GrayImage, Mask, RgbImage, ScoreMap
from .stats import (
    ChannelStats,
    PriorMap,
    dataset_stats,
    mask_proportion,
    normalize_image,
    spatial_prior,
)
from .synth import SynthConfig, synth_dataset
from .training import (
    AdamState,
    TrainConfig,
    TrainHistory,
    adam_step,
    class_weights_from_proportion,
    gradient_check,
    plateau_update,
    train,
    weighted_ce_loss,
)
from .unet import UNetConfig, unet_backward, unet_forward, unet_init, unet_param_count

__version__ = "0.1.0"
