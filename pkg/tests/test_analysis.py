import math

import numpy as np
import pytest

from irdrop.analysis import (
    RiskLevel,
    classify_risk,
    detect_hotspots,
    evaluate,
    psnr,
    risk_report,
)
from irdrop.cli import dataset_tensors
from irdrop.unet import UNetParams


def seventeen_component_map(above=0.95, below=0.1):
    """64x64 map with exactly 17 isolated 2x2 blocks above any threshold
    in (below, above)."""
    g = np.full((64, 64), below)
    count = 0
    for r in range(2, 60, 8):
        for c in range(2, 60, 8):
            if count == 17:
                break
            g[r : r + 2, c : c + 2] = above
            count += 1
        if count == 17:
            break
    assert count == 17
    return g


class TestPsnr:
    def test_exact_power_of_ten(self):
        assert psnr(1e-4, 1.0) == pytest.approx(40.0, abs=1e-9)

    def test_near_paper_operating_point(self):
        # independent arithmetic: 10*log10(1/4.9e-4)
        assert psnr(4.9e-4, 1.0) == pytest.approx(10 * math.log10(1 / 4.9e-4), abs=1e-12)
        assert psnr(4.9e-4, 1.0) == pytest.approx(33.0980, abs=1e-3)

    def test_zero_mse_is_infinite(self):
        assert math.isinf(psnr(0.0, 1.0))

    def test_negative_mse_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            psnr(-1e-9, 1.0)

    def test_strictly_decreasing_in_mse(self):
        values = [psnr(m, 1.0) for m in np.logspace(-6, -1, 20)]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestHotspots:
    def test_empty_mask(self):
        mask, count = detect_hotspots(np.zeros((8, 8)), 0.5)
        assert count == 0
        assert not mask.any()

    def test_single_pixel(self):
        g = np.zeros((8, 8))
        g[3, 4] = 0.9
        _, count = detect_hotspots(g, 0.5)
        assert count == 1

    def test_threshold_is_strict(self):
        g = np.full((4, 4), 0.5)
        _, count = detect_hotspots(g, 0.5)
        assert count == 0

    def test_two_squares_with_gap(self):
        g = np.zeros((16, 16))
        g[2:5, 2:5] = 1.0
        g[2:5, 7:10] = 1.0  # 2-pixel gap
        _, count = detect_hotspots(g, 0.5)
        assert count == 2

    def test_diagonal_touch_is_one_component(self):
        g = np.zeros((16, 16))
        g[2:5, 2:5] = 1.0
        g[5:8, 5:8] = 1.0  # touches only at the corner
        _, count = detect_hotspots(g, 0.5)
        assert count == 1

    def test_seventeen_fixture(self):
        _, count = detect_hotspots(seventeen_component_map(), 0.8)
        assert count == 17


class TestClassify:
    def test_bands(self):
        assert classify_risk(0) is RiskLevel.LOW
        assert classify_risk(5) is RiskLevel.MEDIUM
        assert classify_risk(17) is RiskLevel.HIGH

    def test_boundaries(self):
        assert classify_risk(1) is RiskLevel.MEDIUM
        assert classify_risk(9) is RiskLevel.MEDIUM
        assert classify_risk(10) is RiskLevel.HIGH

    def test_negative_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            classify_risk(-1)

    def test_monotone_in_count(self):
        order = {RiskLevel.LOW: 0, RiskLevel.MEDIUM: 1, RiskLevel.HIGH: 2}
        levels = [order[classify_risk(c)] for c in range(0, 30)]
        assert levels == sorted(levels)


class TestEvaluate:
    def test_zero_model_mse_equals_label_mean_square(self, tiny_dataset_dir):
        x, y = dataset_tensors(tiny_dataset_dir)
        params = UNetParams.init(np.random.default_rng(0))
        for layer in params.layers.values():
            layer.weight[:] = 0.0
            layer.bias[:] = 0.0
        report = evaluate(params, x, y)
        assert report.mse == pytest.approx(float(np.mean(y**2)), rel=1e-12)
        assert report.n_samples == x.shape[0]

    def test_self_prediction_gives_zero_mse(self, random_params, tiny_dataset_dir):
        x, _ = dataset_tensors(tiny_dataset_dir)
        from irdrop.unet import predict_batch

        pred = predict_batch(random_params, x)
        report = evaluate(random_params, x, pred)
        assert report.mse == 0.0
        assert math.isinf(report.psnr_db)

    def test_deterministic(self, random_params, tiny_dataset_dir):
        x, y = dataset_tensors(tiny_dataset_dir)
        r1 = evaluate(random_params, x, y)
        r2 = evaluate(random_params, x, y)
        assert r1 == r2

    def test_empty_dataset_rejected(self, random_params):
        with pytest.raises(ValueError, match="empty"):
            evaluate(random_params, np.zeros((0, 3, 64, 64)), np.zeros((0, 64, 64)))


class TestRiskReport:
    def test_zero_map(self):
        rep = risk_report(np.zeros((64, 64)), threshold=0.8)
        assert rep.max_ir_drop == 0.0
        assert rep.mean_ir_drop == 0.0
        assert rep.hotspot_count == 0
        assert rep.risk_level is RiskLevel.LOW

    def test_seventeen_components_high(self):
        rep = risk_report(seventeen_component_map(), threshold=0.8)
        assert rep.hotspot_count == 17
        assert rep.risk_level is RiskLevel.HIGH

    def test_mean_matches_arithmetic_mean(self):
        g = np.random.default_rng(1).uniform(size=(64, 64))
        rep = risk_report(g, threshold=0.8)
        assert abs(rep.mean_ir_drop - g.mean()) < 1e-12

    def test_values_not_clipped(self):
        g = np.zeros((8, 8))
        g[2, 2] = 1.0904
        rep = risk_report(g, threshold=0.8)
        assert rep.max_ir_drop == pytest.approx(1.0904)

    def test_pixel_count_mode(self):
        g = seventeen_component_map()
        rep = risk_report(g, threshold=0.8, count_pixels=True)
        assert rep.hotspot_count == 17 * 4
        assert rep.risk_level is RiskLevel.HIGH
