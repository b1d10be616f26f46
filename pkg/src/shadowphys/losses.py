"""Unsupervised loss suite for shadow removal, with analytic gradients.

Every term is evaluated over caller-supplied images, feature maps, or
classifier scores; this module owns formulas, not networks.  All L1 terms
use the mean reduction, probabilities are clamped away from {0, 1} before
logs, and reductions accumulate in extended precision in a fixed index
order so results are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .imagecore import FeatureMap, SoftMask, as_image_array, normalize_minmax

# probability clamp applied before every log
EPS_PROB = 1e-7


@dataclass(frozen=True)
class LossWeights:
    """Per-term weights of the overall objective; all nonnegative."""

    chroma: float = 1.0
    feat: float = 1.0
    sm: float = 1.0
    dom: float = 1.0
    adv: float = 1.0
    cons: float = 10.0
    iden: float = 10.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value) or value < 0.0:
                raise ValueError(f"weight {name}={value} must be finite and >= 0")


@dataclass(frozen=True)
class DomainScore:
    """Classifier probability that an input comes from the shadow domain.

    The stored value is clamped to [1e-7, 1 - 1e-7] so every log taken of
    it (or of its complement) stays finite.
    """

    p: float

    def __post_init__(self):
        p = float(self.p)
        if not math.isfinite(p):
            raise ValueError("domain score must be finite")
        object.__setattr__(self, "p", min(max(p, EPS_PROB), 1.0 - EPS_PROB))


@dataclass(frozen=True)
class LossReport:
    """Every loss term by name plus the weighted total; JSON-stable keys."""

    chroma: float
    feature: float
    smooth: float
    domcls_g: float
    domcls_d: float
    adv_s_to_sf: float
    adv_sf_to_s: float
    cons_s: float
    cons_sf: float
    iden_s: float
    iden_sf: float
    total: float

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise ValueError(f"loss term {name} is not finite: {value}")

    def as_dict(self) -> dict:
        return asdict(self)


def _mean_extended(values: np.ndarray) -> float:
    """Mean in extended precision, fixed index order."""
    a = np.asarray(values)
    return float(a.sum(dtype=np.longdouble) / a.size)


def _mean_l1(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean absolute difference and its subgradient w.r.t. the first array."""
    if a.shape != b.shape:
        raise ValueError(f"shapes differ: {a.shape} vs {b.shape}")
    diff = a - b
    value = _mean_extended(np.abs(diff))
    grad = np.sign(diff) / diff.size
    return value, grad


def loss_feature(v_z: FeatureMap, v_i: FeatureMap) -> tuple[float, FeatureMap]:
    """Shadow-robust feature loss: mean L1 between two feature stacks."""
    a = v_z.data if isinstance(v_z, FeatureMap) else FeatureMap(np.asarray(v_z)).data
    b = v_i.data if isinstance(v_i, FeatureMap) else FeatureMap(np.asarray(v_i)).data
    value, grad = _mean_l1(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))
    return value, FeatureMap(grad)


def loss_consistency(reconstructed, original) -> tuple[float, np.ndarray]:
    """Cycle-reconstruction penalty: mean L1 to the original image.

    Serves both cycle directions; callers supply the composed images.
    The gradient is w.r.t. the reconstruction, with sign(0) = 0.
    """
    return _mean_l1(as_image_array(reconstructed), as_image_array(original))


def loss_identity(output, inp) -> tuple[float, np.ndarray]:
    """Identity penalty: a generator fed its own domain must change nothing."""
    return _mean_l1(as_image_array(output), as_image_array(inp))


def zero_mask(height: int, width: int) -> SoftMask:
    """All-zero soft mask (the no-shadow conditioning input)."""
    return SoftMask(np.zeros((height, width)))


@dataclass(frozen=True)
class AttentionMap:
    """Weighted-average feature response with a [0,1] view for display."""

    raw: np.ndarray
    normalized: SoftMask


def attention_map(features: FeatureMap, weights) -> AttentionMap:
    """Average the weighted feature channels: A = (1/n) sum_i w_i F_i."""
    f = features.data if isinstance(features, FeatureMap) else FeatureMap(features).data
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] != f.shape[0]:
        raise ValueError(f"need {f.shape[0]} weights, got shape {w.shape}")
    raw = np.tensordot(w, np.asarray(f, dtype=np.float64), axes=(0, 0)) / f.shape[0]
    return AttentionMap(raw, SoftMask(normalize_minmax(raw)))


def _clamped_probs(scores, label: str) -> np.ndarray:
    items = list(scores)
    if not items:
        raise ValueError(f"{label}: empty score list")
    return np.array(
        [s.p if isinstance(s, DomainScore) else DomainScore(float(s)).p for s in items]
    )


def domcls_loss_discriminator(scores_on_shadow, scores_on_shadowfree) -> float:
    """Domain-classification loss: shadow inputs labeled 1, shadow-free 0.

    mean(-log p) over shadow inputs plus mean(-log(1-p)) over shadow-free.
    """
    p_s = _clamped_probs(scores_on_shadow, "shadow scores")
    p_f = _clamped_probs(scores_on_shadowfree, "shadow-free scores")
    return _mean_extended(-np.log(p_s)) + _mean_extended(-np.log1p(-p_f))


def domcls_loss_generator(scores_on_shadow, scores_on_shadowfree) -> float:
    """Generator-side domain-classification loss; same form as the
    discriminator version, evaluated on the generator's classifier head."""
    return domcls_loss_discriminator(scores_on_shadow, scores_on_shadowfree)


def adv_loss_removal(d_on_real_shadowfree, d_on_generated) -> float:
    """Adversarial value for the removal direction, as written:
    E[log D(real shadow-free)] + E[log(1 - D(generated))]."""
    p_real = _clamped_probs(d_on_real_shadowfree, "real scores")
    p_gen = _clamped_probs(d_on_generated, "generated scores")
    return _mean_extended(np.log(p_real)) + _mean_extended(np.log1p(-p_gen))


def adv_loss_synthesis(d_on_real_shadow, d_on_generated_shadow) -> float:
    """Adversarial value for the synthesis direction, mirrored domains."""
    p_real = _clamped_probs(d_on_real_shadow, "real scores")
    p_gen = _clamped_probs(d_on_generated_shadow, "generated scores")
    return _mean_extended(np.log(p_real)) + _mean_extended(np.log1p(-p_gen))


def total_loss(
    chroma: float,
    feature: float,
    smooth: float,
    domcls: float,
    adv: float,
    cons: float,
    iden: float,
    weights: LossWeights = LossWeights(),
) -> float:
    """Weighted sum of the seven loss groups."""
    terms = (chroma, feature, smooth, domcls, adv, cons, iden)
    if not all(math.isfinite(t) for t in terms):
        raise ValueError("loss components must be finite")
    return float(
        math.fsum(
            (
                weights.chroma * chroma,
                weights.feat * feature,
                weights.sm * smooth,
                weights.dom * domcls,
                weights.adv * adv,
                weights.cons * cons,
                weights.iden * iden,
            )
        )
    )


def build_report(
    chroma: float,
    feature: float,
    smooth: float,
    domcls_g: float,
    domcls_d: float,
    adv_s_to_sf: float,
    adv_sf_to_s: float,
    cons_s: float,
    cons_sf: float,
    iden_s: float,
    iden_sf: float,
    weights: LossWeights = LossWeights(),
) -> LossReport:
    """Assemble the full report; paired terms sum into their weight group."""
    total = total_loss(
        chroma,
        feature,
        smooth,
        domcls_g + domcls_d,
        adv_s_to_sf + adv_sf_to_s,
        cons_s + cons_sf,
        iden_s + iden_sf,
        weights,
    )
    return LossReport(
        chroma=float(chroma),
        feature=float(feature),
        smooth=float(smooth),
        domcls_g=float(domcls_g),
        domcls_d=float(domcls_d),
        adv_s_to_sf=float(adv_s_to_sf),
        adv_sf_to_s=float(adv_sf_to_s),
        cons_s=float(cons_s),
        cons_sf=float(cons_sf),
        iden_s=float(iden_s),
        iden_sf=float(iden_sf),
        total=total,
    )


__all__ = [
    "EPS_PROB",
    "AttentionMap",
    "DomainScore",
    "LossReport",
    "LossWeights",
    "adv_loss_removal",
    "adv_loss_synthesis",
    "attention_map",
    "build_report",
    "domcls_loss_discriminator",
    "domcls_loss_generator",
    "loss_consistency",
    "loss_feature",
    "loss_identity",
    "total_loss",
    "zero_mask",
]
