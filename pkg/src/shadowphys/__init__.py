"""Physics-based shadow analysis toolkit.

Log-chromaticity shadow-free imaging by entropy minimization, soft shadow
masks and boundaries, the unsupervised loss suite that drives shadow-removal
training, a synthetic Planckian scene generator, and a region-wise
evaluation harness with a CLI front end.
"""

__version__ = "0.1.0"

from .chroma import (
    ChromaticityImage,
    EntropyProfile,
    InvariantAngle,
    LogChroma,
    ShadowFreeChroma,
    chroma_loss,
    chromaticity_map,
    find_invariant_angle,
    log_chromaticity,
    projection_entropy,
    shadow_free_chromaticity,
)
from .evaluation import (
    DatasetLayout,
    DatasetReport,
    EvalRecord,
    evaluate_pair,
    otsu_change_mask,
    psnr,
    region_mae,
    run_dataset,
)
from .features import standin_features
from .gradcheck import run_gradcheck
from .imagecore import (
    FeatureMap,
    Image,
    SoftMask,
    TensorFormatError,
    TruncatedFileError,
    UnsupportedFormatError,
    normalize_minmax,
    read_image,
    read_mask,
    read_tensor,
    read_tensor_array,
    rgb_to_lab,
    write_image,
    write_mask,
    write_tensor,
)
from .losses import (
    AttentionMap,
    DomainScore,
    LossReport,
    LossWeights,
    adv_loss_removal,
    adv_loss_synthesis,
    attention_map,
    build_report,
    domcls_loss_discriminator,
    domcls_loss_generator,
    loss_consistency,
    loss_feature,
    loss_identity,
    total_loss,
    zero_mask,
)
from .maskbound import (
    AffinityKernel,
    BoundaryMap,
    affinity_kernel,
    boundary,
    loss_smooth,
    shadow_mask,
)
from .synth import SceneParams, SyntheticScene, generate, planck_rgb

__all__ = [
    "__version__",
    "AffinityKernel",
    "AttentionMap",
    "BoundaryMap",
    "ChromaticityImage",
    "DatasetLayout",
    "DatasetReport",
    "DomainScore",
    "EntropyProfile",
    "EvalRecord",
    "FeatureMap",
    "Image",
    "InvariantAngle",
    "LogChroma",
    "LossReport",
    "LossWeights",
    "SceneParams",
    "ShadowFreeChroma",
    "SoftMask",
    "TensorFormatError",
    "TruncatedFileError",
    "UnsupportedFormatError",
    "SyntheticScene",
    "adv_loss_removal",
    "adv_loss_synthesis",
    "affinity_kernel",
    "attention_map",
    "boundary",
    "build_report",
    "chroma_loss",
    "chromaticity_map",
    "domcls_loss_discriminator",
    "domcls_loss_generator",
    "evaluate_pair",
    "find_invariant_angle",
    "generate",
    "log_chromaticity",
    "loss_consistency",
    "loss_feature",
    "loss_identity",
    "loss_smooth",
    "normalize_minmax",
    "otsu_change_mask",
    "planck_rgb",
    "projection_entropy",
    "psnr",
    "read_image",
    "read_mask",
    "read_tensor",
    "read_tensor_array",
    "region_mae",
    "rgb_to_lab",
    "run_dataset",
    "run_gradcheck",
    "shadow_free_chromaticity",
    "shadow_mask",
    "standin_features",
    "total_loss",
    "write_image",
    "write_mask",
    "write_tensor",
]
