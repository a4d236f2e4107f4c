"""Image-complexity statistics that drive the depth weighting.

The complexity of an image is the mean absolute central-difference sum
over interior pixels; it is zero exactly for constant images and scales
linearly with the image values.  The adaptive depth weight combines the
intensity/depth variance ratio with the squared complexity ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import FramePair
from .errors import DegenerateScaleError
from .imaging import DepthImage, IntensityImage

__all__ = [
    "TuningConfig",
    "ComplexityReport",
    "complexity_metric",
    "variance_ratio",
    "adaptive_lambda",
    "median_ratio_lambda",
    "select_epsilon",
    "complexity_report",
]

WEIGHT_MODES = ("fixed", "tykkala", "complexity")


@dataclass(frozen=True)
class TuningConfig:
    """Knobs for the adaptive weighting and the depth bound.

    bound_min/bound_max are per-valid-pixel budgets; select_epsilon scales
    them by the valid pixel count so the bound tracks the unnormalized
    depth objective.
    """

    weight_gain: float = 1.0            # multiplies the adaptive weight
    structure_threshold: float = 0.02   # depth complexity at or below => loose bound
    bound_min: float = 1e-3
    bound_max: float = 1e3
    weight_mode: str = "complexity"
    fixed_weight: float = 1.0
    weight_cap: float = 1e4             # used when the frame has no texture

    def __post_init__(self):
        if self.weight_gain <= 0:
            raise ValueError("weight_gain must be positive")
        if not 0 < self.bound_min < self.bound_max:
            raise ValueError("need 0 < bound_min < bound_max")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}")
        if self.fixed_weight < 0:
            raise ValueError("fixed_weight must be non-negative")


@dataclass(frozen=True)
class ComplexityReport:
    intensity_complexity: float
    depth_complexity: float
    variance_ratio: float
    depth_weight: float
    depth_bound: float


def _metric_from_arrays(data: np.ndarray, valid=None) -> float:
    h, w = data.shape
    if h < 3 or w < 3:
        raise ValueError("complexity needs at least a 3x3 image")
    row_diff = np.abs(data[2:, 1:-1] - data[:-2, 1:-1])
    col_diff = np.abs(data[1:-1, 2:] - data[1:-1, :-2])
    if valid is None:
        return float((row_diff + col_diff).mean())
    # Skip interior pixels with any invalid operand; the normalizer counts
    # only the pixels actually evaluated.
    ok = (valid[2:, 1:-1] & valid[:-2, 1:-1]
          & valid[1:-1, 2:] & valid[1:-1, :-2])
    count = int(ok.sum())
    if count == 0:
        return 0.0
    return float((row_diff + col_diff)[ok].sum() / count)


def complexity_metric(img) -> float:
    """Mean absolute central-difference sum over interior pixels."""
    if isinstance(img, DepthImage):
        return _metric_from_arrays(img.data, img.valid)
    if isinstance(img, IntensityImage):
        return _metric_from_arrays(img.data)
    return _metric_from_arrays(np.asarray(img, dtype=np.float64))


def variance_ratio(intensity: IntensityImage, depth: DepthImage) -> float:
    """Population variance of intensity over that of valid depth."""
    depth_values = depth.data[depth.valid]
    var_d = float(np.var(depth_values)) if depth_values.size else 0.0
    if var_d == 0.0:
        raise DegenerateScaleError("depth variance is zero; cannot scale")
    return float(np.var(intensity.data)) / var_d


def adaptive_lambda(pair: FramePair, cfg: TuningConfig) -> float:
    """Depth weight from the first frame's complexity statistics.

    A frame with zero intensity complexity has no texture at all; the
    configured cap is returned so the depth term dominates.
    """
    pi_i = complexity_metric(pair.first.intensity)
    if pi_i == 0.0:
        return cfg.weight_cap
    pi_d = complexity_metric(pair.first.depth)
    gamma = variance_ratio(pair.first.intensity, pair.first.depth)
    return cfg.weight_gain * gamma ** 2 * pi_d ** 2 / pi_i ** 2


def median_ratio_lambda(pair: FramePair) -> float:
    """Squared ratio of the median intensity to the median valid depth."""
    depth_values = pair.first.depth.data[pair.first.depth.valid]
    if depth_values.size == 0:
        raise DegenerateScaleError("no valid depth pixels")
    med_d = float(np.median(depth_values))
    if med_d == 0.0:
        raise DegenerateScaleError("median depth is zero")
    med_i = float(np.median(pair.first.intensity.data))
    return (med_i / med_d) ** 2


def select_epsilon(pair: FramePair, cfg: TuningConfig) -> float:
    """Total depth-objective bound for the pair's finest level.

    Structure-poor frames (depth complexity at or below the threshold) get
    the loose bound; structured frames get the tight one.  Either is
    scaled by the count of valid source-depth pixels.
    """
    pi_d = complexity_metric(pair.first.depth)
    per_pixel = cfg.bound_max if pi_d <= cfg.structure_threshold else cfg.bound_min
    n_valid = int(pair.first.depth.valid.sum())
    return per_pixel * max(n_valid, 1)


def complexity_report(pair: FramePair, cfg: TuningConfig) -> ComplexityReport:
    """All statistics plus the weight chosen by the configured mode."""
    pi_i = complexity_metric(pair.first.intensity)
    pi_d = complexity_metric(pair.first.depth)
    try:
        gamma = variance_ratio(pair.first.intensity, pair.first.depth)
    except DegenerateScaleError:
        gamma = float("nan")
    if cfg.weight_mode == "fixed":
        weight = cfg.fixed_weight
    elif cfg.weight_mode == "tykkala":
        weight = median_ratio_lambda(pair)
    else:
        try:
            weight = adaptive_lambda(pair, cfg)
        except DegenerateScaleError:
            # Constant depth leaves Eq-style scaling undefined; fall back.
            weight = cfg.fixed_weight
    return ComplexityReport(
        intensity_complexity=pi_i,
        depth_complexity=pi_d,
        variance_ratio=gamma,
        depth_weight=weight,
        depth_bound=select_epsilon(pair, cfg),
    )
