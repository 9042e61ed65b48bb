"""Evaluation metrics (MSE / PSNR), hotspot detection, and risk reporting.

Hotspots are counted as 8-connected components of the above-threshold mask: a
contiguous risky region is one design problem, not N per-pixel problems. A
per-pixel count is available for comparability. Predictions are never clipped
before analysis, so a drop value above 1.0 shows up as such in the report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .grids import as_grid
from .unet import UNetParams, predict_batch

__all__ = [
    "RiskLevel",
    "MetricsReport",
    "RiskReport",
    "DEFAULT_HOTSPOT_THRESHOLD",
    "psnr",
    "detect_hotspots",
    "classify_risk",
    "evaluate",
    "risk_report",
]

DEFAULT_HOTSPOT_THRESHOLD = 0.8

# pixels touching diagonally belong to the same hotspot
_CONNECTIVITY_8 = np.ones((3, 3), dtype=int)


class RiskLevel(str, Enum):
    LOW = "LOW"
    MEDIUM = "MEDIUM"
    HIGH = "HIGH"


def psnr(mse: float, max_val: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB: 10*log10(max_val^2 / mse).

    A perfect reconstruction (mse = 0) returns +infinity.
    """
    if mse < 0:
        raise ValueError(f"mse must be nonnegative, got {mse}")
    if max_val <= 0:
        raise ValueError(f"max_val must be positive, got {max_val}")
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(max_val * max_val / mse)


def detect_hotspots(drop_map, threshold: float):
    """Binary mask of pixels strictly above threshold and the number of
    8-connected regions in it. Returns (mask, count)."""
    g = as_grid(drop_map, "drop_map")
    if not math.isfinite(threshold):
        raise ValueError("threshold must be finite")
    mask = g > threshold
    _, count = ndimage.label(mask, structure=_CONNECTIVITY_8)
    return mask, int(count)


def classify_risk(count: int, high_min: int = 10) -> RiskLevel:
    """LOW for no hotspots, MEDIUM for 1..high_min-1, HIGH from high_min up."""
    if count < 0:
        raise ValueError(f"hotspot count cannot be negative: {count}")
    if high_min < 2:
        raise ValueError("high_min must be at least 2")
    if count == 0:
        return RiskLevel.LOW
    if count < high_min:
        return RiskLevel.MEDIUM
    return RiskLevel.HIGH


@dataclass
class MetricsReport:
    mse: float
    psnr_db: float
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "mse": self.mse,
            "psnr_db": None if math.isinf(self.psnr_db) else self.psnr_db,
            "n_samples": self.n_samples,
        }


@dataclass
class RiskReport:
    max_ir_drop: float
    mean_ir_drop: float
    hotspot_count: int
    risk_level: RiskLevel
    threshold_used: float

    def to_dict(self) -> dict:
        return {
            "max_ir_drop": self.max_ir_drop,
            "mean_ir_drop": self.mean_ir_drop,
            "hotspot_count": self.hotspot_count,
            "risk_level": self.risk_level.value,
            "threshold_used": self.threshold_used,
        }


def evaluate(params: UNetParams, x: np.ndarray, y: np.ndarray,
             batch_size: int = 32) -> MetricsReport:
    """Whole-set mean squared error and PSNR (max_val = 1, normalized data)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("dataset is empty")
    if y.ndim == 3:
        y = y[:, None, :, :]
    pred = predict_batch(params, x, batch_size=batch_size)
    if pred.shape != y.shape:
        raise ValueError(f"label shape {y.shape} does not match predictions {pred.shape}")
    mse = float(np.mean((pred - y) ** 2))
    return MetricsReport(mse=mse, psnr_db=psnr(mse, 1.0), n_samples=int(x.shape[0]))


def risk_report(prediction, threshold: float = DEFAULT_HOTSPOT_THRESHOLD,
                count_pixels: bool = False) -> RiskReport:
    """Summary statistics of a predicted drop map (values are not clipped)."""
    g = as_grid(prediction, "prediction")
    mask, count = detect_hotspots(g, threshold)
    if count_pixels:
        count = int(mask.sum())
    return RiskReport(
        max_ir_drop=float(g.max()),
        mean_ir_drop=float(g.mean()),
        hotspot_count=count,
        risk_level=classify_risk(count),
        threshold_used=float(threshold),
    )
