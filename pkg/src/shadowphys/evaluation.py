"""Region-wise error metrics and a dataset evaluation runner.

Shadow-removal results are scored as mean absolute error over the whole
frame and separately over shadow / non-shadow regions (CIE Lab channels
by default), plus PSNR on RGB. A dataset runner pairs result and
ground-truth directories by file stem, evaluates every pair under a
fixed resize protocol, and emits JSON and CSV reports with
pixel-weighted aggregate rows.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import cv2
import numpy as np

from .imagecore import (
    Image,
    SoftMask,
    as_image_array,
    as_mask_array,
    read_image,
    read_mask,
    rgb_to_lab,
)

__all__ = [
    "DEFAULT_PROTOCOL_SIZE",
    "MASK_THRESHOLD",
    "PSNR_CAP_DB",
    "DatasetLayout",
    "DatasetReport",
    "EvalRecord",
    "evaluate_pair",
    "otsu_change_mask",
    "psnr",
    "region_mae",
    "run_dataset",
]

# Evaluation resolution used unless the caller asks for native size.
DEFAULT_PROTOCOL_SIZE = 256

# Soft mask values at or above this count as shadow pixels.
MASK_THRESHOLD = 0.5

PSNR_CAP_DB = 99.0
_PSNR_MSE_FLOOR = 1e-10

# Formats the raster reader accepts; other files in the directories are ignored.
_IMAGE_EXTENSIONS = (".png", ".ppm")

_METRIC_SPACES = ("lab", "rgb")

# How a record's shadow mask was obtained ("mixed" only on aggregate rows).
MASK_FROM_FILE = "file"
MASK_FROM_OTSU = "otsu-fallback"
MASK_ABSENT = "none"
MASK_MIXED = "mixed"


@dataclass(frozen=True)
class EvalRecord:
    """Per-image (or aggregate) evaluation result.

    Region fields are ``None`` when no mask was available, and
    ``mae_shadow`` / ``mae_nonshadow`` are ``None`` when the respective
    region is empty. Absent fields are omitted from serialized reports
    rather than written as zeros.
    """

    name: str
    mae_all: float
    psnr: float
    pixels_all: int
    mae_shadow: Optional[float] = None
    mae_nonshadow: Optional[float] = None
    pixels_shadow: Optional[int] = None
    mask_source: str = MASK_ABSENT

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("record name must be non-empty")
        for label in ("mae_all", "mae_shadow", "mae_nonshadow"):
            value = getattr(self, label)
            if value is None:
                continue
            if not math.isfinite(value) or value < 0.0:
                raise ValueError(f"{label} must be finite and >= 0, got {value!r}")
        if not math.isfinite(self.psnr) or not 0.0 <= self.psnr <= PSNR_CAP_DB:
            raise ValueError(f"psnr must lie in [0, {PSNR_CAP_DB}], got {self.psnr!r}")
        if self.pixels_all <= 0:
            raise ValueError("pixels_all must be positive")
        if self.pixels_shadow is not None:
            if not 0 <= self.pixels_shadow <= self.pixels_all:
                raise ValueError("pixels_shadow must lie in [0, pixels_all]")
        if self.mask_source not in (MASK_FROM_FILE, MASK_FROM_OTSU, MASK_ABSENT, MASK_MIXED):
            raise ValueError(f"unknown mask_source {self.mask_source!r}")

    def as_dict(self) -> dict:
        """Serializable mapping; absent region fields are omitted."""
        out: dict = {
            "name": self.name,
            "mae_all": self.mae_all,
            "psnr": self.psnr,
            "pixels_all": self.pixels_all,
        }
        if self.mae_shadow is not None:
            out["mae_shadow"] = self.mae_shadow
        if self.mae_nonshadow is not None:
            out["mae_nonshadow"] = self.mae_nonshadow
        if self.pixels_shadow is not None:
            out["pixels_shadow"] = self.pixels_shadow
        out["mask_source"] = self.mask_source
        return out


_CSV_COLUMNS = (
    "name",
    "mae_all",
    "mae_shadow",
    "mae_nonshadow",
    "psnr",
    "pixels_all",
    "pixels_shadow",
    "mask_source",
)


@dataclass(frozen=True)
class DatasetLayout:
    """Directories holding results, ground truths, and optional masks.

    Files pair by identical stem (filename without extension); the mask
    directory may cover only a subset of stems.
    """

    result_dir: Path
    gt_dir: Path
    mask_dir: Optional[Path] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "result_dir", Path(self.result_dir))
        object.__setattr__(self, "gt_dir", Path(self.gt_dir))
        if self.mask_dir is not None:
            object.__setattr__(self, "mask_dir", Path(self.mask_dir))
        for label in ("result_dir", "gt_dir"):
            directory = getattr(self, label)
            if not directory.is_dir():
                raise FileNotFoundError(f"{label} is not a directory: {directory}")
        if self.mask_dir is not None and not self.mask_dir.is_dir():
            raise FileNotFoundError(f"mask_dir is not a directory: {self.mask_dir}")


@dataclass(frozen=True)
class DatasetReport:
    """Outcome of a dataset run: per-image records plus the aggregate row.

    ``unpaired_results`` / ``unpaired_gt`` list stems that were skipped
    because the opposite directory had no match; a clean run has both
    empty.
    """

    records: tuple
    aggregate: Optional[EvalRecord]
    unpaired_results: tuple
    unpaired_gt: tuple
    protocol: dict

    @property
    def clean(self) -> bool:
        return not self.unpaired_results and not self.unpaired_gt

    def as_dict(self) -> dict:
        return {
            "protocol": dict(self.protocol),
            "records": [record.as_dict() for record in self.records],
            "aggregate": None if self.aggregate is None else self.aggregate.as_dict(),
            "unpaired_results": list(self.unpaired_results),
            "unpaired_gt": list(self.unpaired_gt),
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2) + "\n")

    def write_csv(self, path) -> None:
        rows = list(self.records)
        if self.aggregate is not None:
            rows.append(self.aggregate)
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(_CSV_COLUMNS)
            for record in rows:
                data = record.as_dict()
                writer.writerow([data.get(column, "") for column in _CSV_COLUMNS])


def _require_same_shape(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")


def _resize_image(arr: np.ndarray, size: int) -> np.ndarray:
    return cv2.resize(arr, (size, size), interpolation=cv2.INTER_LINEAR)


def _resize_mask(arr: np.ndarray, size: int) -> np.ndarray:
    return cv2.resize(arr, (size, size), interpolation=cv2.INTER_NEAREST)


def _metric_planes(arr: np.ndarray, space: str) -> np.ndarray:
    """Channels the MAE is measured over: CIE Lab, or RGB on a 255 scale."""
    if space == "lab":
        return rgb_to_lab(arr)
    if space == "rgb":
        return arr * 255.0
    raise ValueError(f"space must be one of {_METRIC_SPACES}, got {space!r}")


def psnr(pred: Image, gt: Image) -> float:
    """Peak signal-to-noise ratio in dB over RGB in [0, 1], capped at 99."""
    p = as_image_array(pred)
    g = as_image_array(gt)
    _require_same_shape(p, g)
    mse = float(np.mean((p - g) ** 2, dtype=np.longdouble))
    if mse < _PSNR_MSE_FLOOR:
        return PSNR_CAP_DB
    return min(-10.0 * math.log10(mse), PSNR_CAP_DB)


def region_mae(pred: Image, gt: Image, mask: Optional[SoftMask] = None, *, space: str = "lab"):
    """Mean absolute error over (all, shadow, nonshadow) pixels.

    Errors are averaged over region pixels and the three channels of the
    metric space. The shadow region is ``mask >= 0.5``; without a mask
    the region entries are ``None``, as is either entry whose region is
    empty.
    """
    p = as_image_array(pred)
    g = as_image_array(gt)
    _require_same_shape(p, g)
    diff = np.abs(_metric_planes(p, space) - _metric_planes(g, space))
    mae_all = float(diff.mean(dtype=np.longdouble))
    if mask is None:
        return mae_all, None, None
    m = as_mask_array(mask)
    if m.shape != p.shape[:2]:
        raise ValueError(f"mask shape {m.shape} does not match image shape {p.shape[:2]}")
    shadow = m >= MASK_THRESHOLD
    mae_shadow = float(diff[shadow].mean(dtype=np.longdouble)) if shadow.any() else None
    nonshadow = ~shadow
    mae_nonshadow = float(diff[nonshadow].mean(dtype=np.longdouble)) if nonshadow.any() else None
    return mae_all, mae_shadow, mae_nonshadow


def otsu_change_mask(result: Image, gt: Image) -> SoftMask:
    """Binary change mask from an Otsu threshold on the Lab L1 difference.

    Fallback for datasets that ship no shadow masks: pixels whose Lab
    difference between the two frames exceeds the Otsu split are marked
    as changed (shadow).
    """
    p = as_image_array(result)
    g = as_image_array(gt)
    _require_same_shape(p, g)
    diff = np.abs(rgb_to_lab(p) - rgb_to_lab(g)).mean(axis=2)
    threshold = _otsu_threshold(diff.ravel())
    return SoftMask((diff > threshold).astype(np.float64))


def _otsu_threshold(values: np.ndarray) -> float:
    """Otsu split point of a 1-D sample (256-bin histogram over its range)."""
    lo = float(values.min())
    hi = float(values.max())
    if lo == hi:
        return lo
    hist, edges = np.histogram(values, bins=256, range=(lo, hi))
    hist = hist.astype(np.float64)
    centers = (edges[:-1] + edges[1:]) / 2.0
    weight_lo = np.cumsum(hist)
    weight_hi = np.cumsum(hist[::-1])[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_lo = np.cumsum(hist * centers) / weight_lo
        mean_hi = np.cumsum((hist * centers)[::-1])[::-1] / weight_hi
        between = weight_lo[:-1] * weight_hi[1:] * (mean_lo[:-1] - mean_hi[1:]) ** 2
    between = np.nan_to_num(between, nan=0.0)
    return float(centers[:-1][int(np.argmax(between))])


def evaluate_pair(
    pred: Image,
    gt: Image,
    mask: Optional[SoftMask] = None,
    *,
    name: str = "pair",
    space: str = "lab",
    size: Optional[int] = DEFAULT_PROTOCOL_SIZE,
    mask_source: Optional[str] = None,
) -> EvalRecord:
    """Score one result against its ground truth under the resize protocol.

    Both images (bilinear) and the mask (nearest-neighbor) are resized
    to ``size`` x ``size`` before any metric; pass ``size=None`` to
    evaluate at native resolution, where all shapes must already agree.
    """
    p = as_image_array(pred)
    g = as_image_array(gt)
    m = None if mask is None else as_mask_array(mask)
    if size is not None:
        if size < 2:
            raise ValueError("protocol size must be at least 2")
        p = _resize_image(p, size)
        g = _resize_image(g, size)
        if m is not None:
            m = _resize_mask(m, size)
    _require_same_shape(p, g)
    if m is not None and m.shape != p.shape[:2]:
        raise ValueError(f"mask shape {m.shape} does not match image shape {p.shape[:2]}")

    mae_all, mae_shadow, mae_nonshadow = region_mae(
        p, g, None if m is None else SoftMask(np.clip(m, 0.0, 1.0)), space=space
    )
    if mask_source is None:
        mask_source = MASK_ABSENT if m is None else MASK_FROM_FILE
    return EvalRecord(
        name=name,
        mae_all=mae_all,
        psnr=psnr(p, g),
        pixels_all=int(p.shape[0] * p.shape[1]),
        mae_shadow=mae_shadow,
        mae_nonshadow=mae_nonshadow,
        pixels_shadow=None if m is None else int((m >= MASK_THRESHOLD).sum()),
        mask_source=mask_source,
    )


def _stem_index(directory: Path) -> dict:
    """Map file stem -> path for every recognized image in a directory."""
    index: dict = {}
    for entry in sorted(directory.iterdir()):
        if not entry.is_file() or entry.suffix.lower() not in _IMAGE_EXTENSIONS:
            continue
        if entry.stem in index:
            raise ValueError(f"duplicate stem {entry.stem!r} in {directory}")
        index[entry.stem] = entry
    return index


def _weighted_mean(pairs) -> Optional[float]:
    """Pixel-weighted mean via exact summation; None when nothing present."""
    pairs = [(value, weight) for value, weight in pairs if value is not None and weight]
    if not pairs:
        return None
    total = math.fsum(value * weight for value, weight in pairs)
    weight = math.fsum(weight for _, weight in pairs)
    return total / weight


def _aggregate(records: Sequence[EvalRecord]) -> Optional[EvalRecord]:
    if not records:
        return None
    pixels_all = sum(record.pixels_all for record in records)
    shadow_counts = [r.pixels_shadow for r in records if r.pixels_shadow is not None]
    mae_shadow = _weighted_mean((r.mae_shadow, r.pixels_shadow or 0) for r in records)
    mae_nonshadow = _weighted_mean(
        (r.mae_nonshadow, r.pixels_all - (r.pixels_shadow or 0))
        for r in records
        if r.pixels_shadow is not None
    )
    sources = {record.mask_source for record in records}
    return EvalRecord(
        name="aggregate",
        mae_all=_weighted_mean((r.mae_all, r.pixels_all) for r in records),
        psnr=_weighted_mean((r.psnr, r.pixels_all) for r in records),
        pixels_all=pixels_all,
        mae_shadow=mae_shadow,
        mae_nonshadow=mae_nonshadow,
        pixels_shadow=sum(shadow_counts) if shadow_counts else None,
        mask_source=sources.pop() if len(sources) == 1 else MASK_MIXED,
    )


def _evaluate_stem(
    stem: str,
    result_path: Path,
    gt_path: Path,
    mask_path: Optional[Path],
    space: str,
    size: Optional[int],
    mask_fallback: Optional[str],
) -> EvalRecord:
    pred = read_image(result_path)
    gt = read_image(gt_path)
    mask = None
    mask_source = None
    if mask_path is not None:
        mask = read_mask(mask_path)
    elif mask_fallback == "otsu":
        p = as_image_array(pred)
        g = as_image_array(gt)
        if size is not None:
            p = _resize_image(p, size)
            g = _resize_image(g, size)
        mask = otsu_change_mask(p, g)
        mask_source = MASK_FROM_OTSU
    return evaluate_pair(
        pred, gt, mask, name=stem, space=space, size=size, mask_source=mask_source
    )


def run_dataset(
    layout: DatasetLayout,
    *,
    space: str = "lab",
    size: Optional[int] = DEFAULT_PROTOCOL_SIZE,
    mask_fallback: Optional[str] = None,
    threads: Optional[int] = None,
    protocol_extra: Optional[Mapping] = None,
) -> DatasetReport:
    """Evaluate every stem-paired result/ground-truth file in a layout.

    Images are scored concurrently but records and aggregates are
    reduced in sorted-stem order with exact summation, so the report is
    independent of thread count and of directory listing order.
    Unpaired stems on either side are skipped and listed in the report.
    """
    if space not in _METRIC_SPACES:
        raise ValueError(f"space must be one of {_METRIC_SPACES}, got {space!r}")
    if mask_fallback not in (None, "otsu"):
        raise ValueError(f"mask_fallback must be None or 'otsu', got {mask_fallback!r}")
    results = _stem_index(layout.result_dir)
    gts = _stem_index(layout.gt_dir)
    masks = {} if layout.mask_dir is None else _stem_index(layout.mask_dir)
    paired = sorted(set(results) & set(gts))
    unpaired_results = tuple(sorted(set(results) - set(gts)))
    unpaired_gt = tuple(sorted(set(gts) - set(results)))

    worker_count = threads if threads and threads > 0 else (os.cpu_count() or 1)

    def job(stem: str) -> EvalRecord:
        return _evaluate_stem(
            stem, results[stem], gts[stem], masks.get(stem), space, size, mask_fallback
        )

    if worker_count == 1 or len(paired) <= 1:
        records = tuple(job(stem) for stem in paired)
    else:
        with ThreadPoolExecutor(max_workers=worker_count) as pool:
            records = tuple(pool.map(job, paired))

    protocol = {
        "space": space,
        "size": "native" if size is None else size,
        "mask_fallback": mask_fallback,
        "result_dir": str(layout.result_dir),
        "gt_dir": str(layout.gt_dir),
        "mask_dir": None if layout.mask_dir is None else str(layout.mask_dir),
    }
    if protocol_extra:
        protocol.update(protocol_extra)
    return DatasetReport(
        records=records,
        aggregate=_aggregate(records),
        unpaired_results=unpaired_results,
        unpaired_gt=unpaired_gt,
        protocol=protocol,
    )
