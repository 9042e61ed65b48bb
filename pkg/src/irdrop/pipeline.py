"""The four-step prediction pipeline shared by the CLI and the HTTP service:
validate inputs, normalize and stack, run one forward pass, analyze the
result. Keeping this in one place guarantees both front ends report
identical numbers for identical inputs."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .analysis import DEFAULT_HOTSPOT_THRESHOLD, RiskReport, risk_report
from .grids import as_grid, normalize_minmax, stack_channels
from .unet import UNetParams, forward_batch

__all__ = ["PredictionResult", "run_prediction"]


@dataclass
class PredictionResult:
    ir_drop: np.ndarray
    report: RiskReport
    inference_ms: float

    def to_dict(self) -> dict:
        d = {"ir_drop": self.ir_drop.tolist()}
        d.update(self.report.to_dict())
        d["inference_ms"] = self.inference_ms
        return d


def run_prediction(
    params: UNetParams,
    power_grid,
    cell_density,
    switching,
    threshold: float = DEFAULT_HOTSPOT_THRESHOLD,
    count_pixels: bool = False,
) -> PredictionResult:
    """Predict the drop map for three raw feature maps and analyze it.

    Each map is min-max normalized before stacking, mirroring the training
    data convention; the model output is analyzed unclipped. inference_ms
    times the forward pass only.
    """
    power = as_grid(power_grid, "power_grid")
    density = as_grid(cell_density, "cell_density")
    switching = as_grid(switching, "switching")
    tensor = stack_channels(
        normalize_minmax(power),
        normalize_minmax(density),
        normalize_minmax(switching),
    )
    t0 = time.perf_counter()
    pred, _ = forward_batch(params, tensor[None], keep_cache=False)
    inference_ms = (time.perf_counter() - t0) * 1e3
    drop = pred[0, 0]
    return PredictionResult(
        ir_drop=drop,
        report=risk_report(drop, threshold=threshold, count_pixels=count_pixels),
        inference_ms=inference_ms,
    )
