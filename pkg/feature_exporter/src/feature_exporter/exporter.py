"""VGG-16 convolutional feature export.

The trunk is built explicitly from the published VGG-16 layout (thirteen
3x3 convolutions in five blocks, 2x2 max-pooling between blocks) so the
module works with either a full-model checkpoint or a features-only state
dict, and so the layer-name table is self-contained. Layer names follow
the conv<block>_<index> convention and always mean the post-activation
output of that convolution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from shadowphys import read_image, write_tensor

TOOL_VERSION = "0.1.0"

DEFAULT_LAYER = "conv2_2"

# ImageNet channel statistics the published VGG-16 weights were trained with.
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

# channel widths per conv layer, with pooling breaks between blocks
_LAYOUT = (
    64, 64, "pool",
    128, 128, "pool",
    256, 256, 256, "pool",
    512, 512, 512, "pool",
    512, 512, 512, "pool",
)

_CHECKPOINT_NAME = "vgg16-397923af.pth"


class MissingWeightsError(FileNotFoundError):
    """No weights file could be located for the trunk."""


def _build_trunk() -> nn.Sequential:
    layers: list[nn.Module] = []
    width = 3
    for entry in _LAYOUT:
        if entry == "pool":
            layers.append(nn.MaxPool2d(kernel_size=2, stride=2))
        else:
            layers.append(nn.Conv2d(width, entry, kernel_size=3, padding=1))
            layers.append(nn.ReLU(inplace=True))
            width = entry
    return nn.Sequential(*layers)


def _layer_table() -> dict[str, int]:
    # name -> exclusive module index just past the conv's ReLU
    table: dict[str, int] = {}
    block, conv, idx = 1, 0, 0
    for entry in _LAYOUT:
        if entry == "pool":
            block += 1
            conv = 0
            idx += 1
        else:
            conv += 1
            table[f"conv{block}_{conv}"] = idx + 2
            idx += 2
    return table


LAYERS = _layer_table()


def resolve_layer(name: str) -> tuple[str, int]:
    """Normalize a layer name and return (canonical_name, trunk_slice_end).

    Accepts conv<block>_<index> and the underscore-free spelling
    (e.g. "Conv22" -> "conv2_2"). Unknown names raise ValueError.
    """
    key = name.strip().lower().replace("-", "_")
    if key.startswith("conv") and "_" not in key and len(key) == 6:
        key = f"conv{key[4]}_{key[5]}"
    if key not in LAYERS:
        raise ValueError(
            f"unsupported layer name {name!r}; choose from {sorted(LAYERS)}"
        )
    return key, LAYERS[key]


def default_weights_path() -> Path:
    """Location the published VGG-16 checkpoint is cached at, if present."""
    return Path(torch.hub.get_dir()) / "checkpoints" / _CHECKPOINT_NAME


def _load_trunk(weights) -> nn.Sequential:
    path = Path(weights) if weights is not None else default_weights_path()
    if not path.is_file():
        raise MissingWeightsError(
            f"weights file not found at {path}; place the VGG-16 checkpoint "
            "there or pass an explicit weights path"
        )
    state = torch.load(path, map_location="cpu", weights_only=True)
    if any(k.startswith("features.") for k in state):
        # full-model checkpoint: keep the conv trunk, drop the classifier
        state = {
            k[len("features."):]: v
            for k, v in state.items()
            if k.startswith("features.")
        }
    trunk = _build_trunk()
    trunk.load_state_dict(state)
    trunk.eval()
    return trunk


def manifest_path(out_path) -> Path:
    """Sidecar manifest location for an SPTN output path."""
    return Path(str(out_path) + ".json")


@dataclass(frozen=True)
class ExportManifest:
    """Record of one export: inputs, preprocessing, and the tensor shape."""

    source_image: str
    layer_name: str
    output: str
    preprocessing: dict
    shape: tuple
    tool_version: str = TOOL_VERSION

    def as_dict(self) -> dict:
        return {
            "source_image": self.source_image,
            "layer_name": self.layer_name,
            "output": self.output,
            "preprocessing": dict(self.preprocessing),
            "shape": list(self.shape),
            "tool_version": self.tool_version,
        }


def export(image_path, out_path, *, layer: str = DEFAULT_LAYER,
           weights=None, size=None) -> ExportManifest:
    """Run an image through the trunk and write SPTN + manifest files.

    size, when given, is an (H, W) pair the image is bilinearly resized to
    before normalization; otherwise the native resolution is used and the
    output spatial dims follow the layer's stride (conv2_2: H/2 x W/2).
    Returns the manifest that was written alongside the SPTN file.
    """
    canonical, slice_end = resolve_layer(layer)
    trunk = _load_trunk(weights)
    rgb = read_image(image_path).data

    x = torch.from_numpy(np.array(rgb, dtype=np.float32))
    x = x.permute(2, 0, 1).unsqueeze(0)
    if size is not None:
        h, w = (int(size[0]), int(size[1]))
        if h < 1 or w < 1:
            raise ValueError(f"resize target must be positive, got {(h, w)}")
        x = nn.functional.interpolate(
            x, size=(h, w), mode="bilinear", align_corners=False
        )
    mean = torch.tensor(IMAGENET_MEAN, dtype=torch.float32).view(1, 3, 1, 1)
    std = torch.tensor(IMAGENET_STD, dtype=torch.float32).view(1, 3, 1, 1)
    x = (x - mean) / std

    # single-thread forward: bit-identical activations run to run
    n_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        with torch.no_grad():
            feat = trunk[:slice_end](x)[0]
    finally:
        torch.set_num_threads(n_threads)

    arr = np.ascontiguousarray(feat.numpy(), dtype=np.float32)
    if not np.all(np.isfinite(arr)):
        raise ValueError("exported features contain non-finite values")
    write_tensor(arr, out_path)

    manifest = ExportManifest(
        source_image=str(image_path),
        layer_name=canonical,
        output=str(out_path),
        preprocessing={
            "resize": None if size is None else [int(size[0]), int(size[1])],
            "interpolation": "bilinear",
            "normalize_mean": list(IMAGENET_MEAN),
            "normalize_std": list(IMAGENET_STD),
        },
        shape=tuple(int(d) for d in arr.shape),
    )
    manifest_path(out_path).write_text(
        json.dumps(manifest.as_dict(), indent=2, sort_keys=True) + "\n"
    )
    return manifest
