"""Core image types, colorimetry helpers, and file IO.

Images are float arrays in [0, 1] with shape (H, W, 3); soft masks are
(H, W) in [0, 1]; feature maps are (C, H, W) finite floats.  Loaders clamp,
writers quantize round-half-up.  Tensor files use the SPTN container:
little-endian header (magic, version, ndim, dims) + float32 payload.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
PPM_MAGIC = b"P6"

SPTN_MAGIC = b"SPTN"
SPTN_VERSION = 1
# element-count guard: a dim header can claim up to (2^32-1)^4 entries
SPTN_MAX_ELEMENTS = 2**31


class UnsupportedFormatError(ValueError):
    """File is not one of the supported image formats / layouts."""


class TruncatedFileError(ValueError):
    """File has a recognized signature but cannot be fully decoded."""


class TensorFormatError(ValueError):
    """SPTN container violates the format contract."""


class TensorMagicError(TensorFormatError):
    """Leading magic bytes are not 'SPTN'."""


class TensorDimError(TensorFormatError):
    """Dimension count or sizes outside the allowed range."""


class TensorPayloadError(TensorFormatError):
    """Payload (or header) shorter or longer than the dims require."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Image:
    """RGB image, float64 (H, W, 3), every value finite and in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64, copy=True)
        if a.ndim != 3 or a.shape[2] != 3:
            raise ValueError(f"image must be (H, W, 3), got {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError("image must contain at least one pixel")
        if not np.all(np.isfinite(a)):
            raise ValueError("image contains non-finite values")
        if a.min() < 0.0 or a.max() > 1.0:
            raise ValueError("image values must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(a))

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class SoftMask:
    """Scalar field (H, W) in [0, 1]; 0 = certainly lit, 1 = certainly shadow."""

    data: np.ndarray

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64, copy=True)
        if a.ndim != 2:
            raise ValueError(f"mask must be (H, W), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("mask contains non-finite values")
        if a.min() < 0.0 or a.max() > 1.0:
            raise ValueError("mask values must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(a))

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class FeatureMap:
    """Stack of feature channels, (C, H, W), finite floats.

    dtype is preserved as given (float32 for tensors loaded from disk) so
    that file round-trips are bit-exact.
    """

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data)
        if not np.issubdtype(a.dtype, np.floating):
            a = a.astype(np.float64)
        a = np.array(a, copy=True)
        if a.ndim != 3:
            raise ValueError(f"feature map must be (C, H, W), got {a.shape}")
        if min(a.shape) < 1:
            raise ValueError("feature map dims must be nonzero")
        if not np.all(np.isfinite(a)):
            raise ValueError("feature map contains non-finite values")
        object.__setattr__(self, "data", _freeze(a))

    @property
    def shape(self):
        return self.data.shape


def as_image_array(img) -> np.ndarray:
    """Coerce Image | ndarray to a validated (H, W, 3) float64 array."""
    if isinstance(img, Image):
        return img.data
    return Image(np.asarray(img, dtype=np.float64)).data


def as_mask_array(mask) -> np.ndarray:
    """Coerce SoftMask | ndarray to a validated (H, W) float64 array."""
    if isinstance(mask, SoftMask):
        return mask.data
    return SoftMask(np.asarray(mask, dtype=np.float64)).data


# ---------- scalar-field normalization ----------


def normalize_minmax(values: np.ndarray) -> np.ndarray:
    """Affinely map values to [0, 1]; a constant input maps to all zeros."""
    a = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("normalize_minmax: input contains non-finite values")
    lo = a.min()
    hi = a.max()
    if hi == lo:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


# ---------- colorimetry ----------

# sRGB (D65) linear-RGB -> XYZ.  The reference white is taken as the row
# sums of this exact matrix so neutral grays map to a = b = 0 identically.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_LAB_WHITE = _RGB_TO_XYZ.sum(axis=1)
_LAB_DELTA = 6.0 / 29.0


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def rgb_to_lab(img) -> np.ndarray:
    """sRGB [0,1] image to CIE Lab (D65), returned as (H, W, 3) float64."""
    rgb = as_image_array(img)
    xyz = _srgb_to_linear(rgb) @ _RGB_TO_XYZ.T
    t = xyz / _LAB_WHITE
    f = np.where(
        t > _LAB_DELTA**3,
        np.cbrt(t),
        t / (3.0 * _LAB_DELTA**2) + 4.0 / 29.0,
    )
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


# ---------- raster file IO ----------


def _decode_raster(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if not (raw.startswith(PNG_SIGNATURE) or raw.startswith(PPM_MAGIC)):
        raise UnsupportedFormatError(f"{path}: not a PNG or binary PPM file")
    arr = cv2.imdecode(np.frombuffer(raw, np.uint8), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise TruncatedFileError(f"{path}: recognized signature but undecodable")
    return arr


def _sample_scale(arr: np.ndarray, path) -> float:
    if arr.dtype == np.uint8:
        return 255.0
    if arr.dtype == np.uint16:
        return 65535.0
    raise UnsupportedFormatError(f"{path}: unsupported sample depth {arr.dtype}")


def read_image(path) -> Image:
    """Read an 8/16-bit RGB or RGBA PNG, or a binary PPM.  Alpha is dropped."""
    arr = _decode_raster(path)
    if arr.ndim != 3 or arr.shape[2] not in (3, 4):
        raise UnsupportedFormatError(
            f"{path}: expected RGB or RGBA samples, got shape {arr.shape}"
        )
    scale = _sample_scale(arr, path)
    rgb = arr[:, :, 2::-1]  # BGR(A) -> RGB, alpha dropped
    return Image(np.clip(rgb.astype(np.float64) / scale, 0.0, 1.0))


def write_image(img, path, *, bits: int = 8) -> None:
    """Write an 8- or 16-bit PNG, quantizing with round-half-up."""
    rgb = as_image_array(img)
    if bits == 8:
        q = np.floor(rgb * 255.0 + 0.5).astype(np.uint8)
    elif bits == 16:
        q = np.floor(rgb * 65535.0 + 0.5).astype(np.uint16)
    else:
        raise ValueError(f"bits must be 8 or 16, got {bits}")
    if not cv2.imwrite(str(path), q[:, :, ::-1]):
        raise OSError(f"could not write image to {path}")


def read_mask(path) -> SoftMask:
    """Read a mask PNG/PPM: grayscale directly, RGB as the channel mean."""
    arr = _decode_raster(path)
    scale = _sample_scale(arr, path)
    if arr.ndim == 2:
        m = arr.astype(np.float64) / scale
    elif arr.ndim == 3 and arr.shape[2] in (3, 4):
        m = arr[:, :, :3].astype(np.float64).mean(axis=2) / scale
    else:
        raise UnsupportedFormatError(f"{path}: unsupported mask layout {arr.shape}")
    return SoftMask(np.clip(m, 0.0, 1.0))


def write_mask(mask, path) -> None:
    """Write a mask as an 8-bit grayscale PNG (round-half-up)."""
    m = as_mask_array(mask)
    q = np.floor(m * 255.0 + 0.5).astype(np.uint8)
    if not cv2.imwrite(str(path), q):
        raise OSError(f"could not write mask to {path}")


# ---------- SPTN tensor container ----------


def write_tensor(data, path) -> None:
    """Write a 1..4-dim float tensor as an SPTN file (float32 LE payload)."""
    a = data.data if isinstance(data, FeatureMap) else np.asarray(data)
    if a.ndim < 1 or a.ndim > 4:
        raise TensorDimError(f"SPTN supports 1..4 dims, got {a.ndim}")
    if min(a.shape) < 1:
        raise TensorDimError("SPTN dims must be nonzero")
    if a.size > SPTN_MAX_ELEMENTS:
        raise TensorDimError(f"dim overflow: {a.shape} exceeds element budget")
    header = SPTN_MAGIC + struct.pack("<HH", SPTN_VERSION, a.ndim)
    header += struct.pack(f"<{a.ndim}I", *a.shape)
    payload = np.ascontiguousarray(a, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_tensor_array(path) -> np.ndarray:
    """Read an SPTN file into a float32 array of its stored shape."""
    raw = Path(path).read_bytes()
    if raw[:4] != SPTN_MAGIC:
        raise TensorMagicError(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < 8:
        raise TensorPayloadError(f"{path}: truncated header")
    version, ndim = struct.unpack_from("<HH", raw, 4)
    if version != SPTN_VERSION:
        raise TensorFormatError(f"{path}: unsupported SPTN version {version}")
    if ndim < 1 or ndim > 4:
        raise TensorDimError(f"{path}: dim count {ndim} outside 1..4")
    if len(raw) < 8 + 4 * ndim:
        raise TensorPayloadError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{ndim}I", raw, 8)
    if min(dims) < 1:
        raise TensorDimError(f"{path}: zero-sized dim in {dims}")
    count = 1
    for d in dims:
        count *= d
    if count > SPTN_MAX_ELEMENTS:
        raise TensorDimError(f"{path}: dim overflow {dims}")
    payload = raw[8 + 4 * ndim :]
    if len(payload) != 4 * count:
        raise TensorPayloadError(
            f"{path}: payload holds {len(payload)} bytes, dims require {4 * count}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def read_tensor(path) -> FeatureMap:
    """Read an SPTN file as a FeatureMap; 2-dim files become (1, H, W)."""
    a = read_tensor_array(path)
    if a.ndim == 2:
        a = a[np.newaxis]
    if a.ndim != 3:
        raise TensorDimError(f"{path}: {a.ndim}-dim tensor is not a feature map")
    return FeatureMap(a)
