"""Pretrained VGG-16 feature maps exported as SPTN tensor files.

The exporter runs an image through the convolutional trunk of VGG-16 up to
a chosen post-activation layer (default conv2_2: 128 channels at half the
input resolution) and writes the activations as an SPTN file plus a JSON
manifest recording the source, layer, preprocessing constants, and shape.
"""

from .exporter import (
    DEFAULT_LAYER,
    IMAGENET_MEAN,
    IMAGENET_STD,
    LAYERS,
    ExportManifest,
    MissingWeightsError,
    TOOL_VERSION,
    default_weights_path,
    export,
    manifest_path,
    resolve_layer,
)

__version__ = TOOL_VERSION

__all__ = [
    "DEFAULT_LAYER",
    "IMAGENET_MEAN",
    "IMAGENET_STD",
    "LAYERS",
    "ExportManifest",
    "MissingWeightsError",
    "TOOL_VERSION",
    "default_weights_path",
    "export",
    "manifest_path",
    "resolve_layer",
]
