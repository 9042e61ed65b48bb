"""Procedural generation of layout feature maps and synthetic voltage-drop labels.

Each sample is three 64x64 input maps (power grid strength, cell density,
switching activity) plus a label computed from the resistive-drop relation
raw = density * switching / (power + eps), smoothed and normalized to [0, 1].
Per-sample RNG streams are derived from (seed, sample index), so generation
order and parallelism cannot change the output.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .grids import as_grid, gaussian_smooth, normalize_minmax
from .npyio import load_npy, save_npy

__all__ = [
    "GenConfig",
    "LabeledSample",
    "DATASET_FILES",
    "sample_rng",
    "gen_power_grid",
    "gen_cell_density",
    "gen_switching",
    "raw_ir_drop",
    "synth_label",
    "generate_dataset",
    "load_dataset",
]

POWER_GRID_FILE = "input_power_grid.npy"
CELL_DENSITY_FILE = "input_cell_density.npy"
SWITCHING_FILE = "input_switching.npy"
LABELS_FILE = "labels_ir_drop.npy"
DATASET_FILES = (POWER_GRID_FILE, CELL_DENSITY_FILE, SWITCHING_FILE, LABELS_FILE)

# sigma used when smoothing the uniform-noise component of the input maps
_NOISE_SIGMA = 2.0


@dataclass
class GenConfig:
    seed: int = 0
    n_samples: int = 1000
    height: int = 64
    width: int = 64
    eps: float = 1e-6
    label_sigma: float = 2.0
    blob_count_range: tuple[int, int] = (3, 8)
    blob_sigma_range: tuple[float, float] = (3.0, 10.0)
    stripe_period_range: tuple[int, int] = (4, 12)
    grid_floor: float = 0.05

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.height < 1 or self.width < 1:
            raise ValueError("height and width must be positive")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.grid_floor <= 0:
            raise ValueError("grid_floor must be positive")
        for name in ("blob_count_range", "blob_sigma_range", "stripe_period_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} is empty: ({lo}, {hi})")


@dataclass
class LabeledSample:
    power_grid: np.ndarray
    cell_density: np.ndarray
    switching: np.ndarray
    ir_drop: np.ndarray


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent RNG stream for one sample, stable across generation order."""
    entropy = (int(seed) & 0xFFFFFFFFFFFFFFFF, int(index))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _smoothed_noise(rng, cfg: GenConfig) -> np.ndarray:
    noise = rng.uniform(size=(cfg.height, cfg.width))
    return normalize_minmax(gaussian_smooth(noise, _NOISE_SIGMA))


def _stripe_pattern(rng, cfg: GenConfig) -> np.ndarray:
    """Orthogonal wire stripes: bright rows/columns at a random period and phase."""
    lo, hi = cfg.stripe_period_range
    period_h = int(rng.integers(lo, hi + 1))
    period_v = int(rng.integers(lo, hi + 1))
    phase_h = int(rng.integers(period_h))
    phase_v = int(rng.integers(period_v))
    rows = (np.arange(cfg.height) % period_h) == phase_h
    cols = (np.arange(cfg.width) % period_v) == phase_v
    return np.where(rows[:, None] | cols[None, :], 1.0, 0.0)


def gen_power_grid(rng, cfg: GenConfig) -> np.ndarray:
    """Power-delivery strength map in [grid_floor, 1].

    Stripe pattern blended 50/50 with smoothed uniform noise, normalized, then
    mapped affinely so the weakest spot still has strictly positive strength.
    """
    stripes = _stripe_pattern(rng, cfg)
    noise = _smoothed_noise(rng, cfg)
    blended = normalize_minmax(0.5 * stripes + 0.5 * noise)
    return cfg.grid_floor + (1.0 - cfg.grid_floor) * blended


def blob_field(height: int, width: int, blobs) -> np.ndarray:
    """Sum of isotropic Gaussian bumps given as (row, col, sigma, amplitude)."""
    y = np.arange(height, dtype=np.float64)[:, None]
    x = np.arange(width, dtype=np.float64)[None, :]
    out = np.zeros((height, width))
    for cy, cx, sigma, amp in blobs:
        out += amp * np.exp(-((y - cy) ** 2 + (x - cx) ** 2) / (2.0 * sigma**2))
    return out


def gen_cell_density(rng, cfg: GenConfig) -> np.ndarray:
    """Cell placement density: a handful of Gaussian clusters, normalized to [0, 1]."""
    lo, hi = cfg.blob_count_range
    count = int(rng.integers(lo, hi + 1))
    blobs = [
        (
            rng.uniform(0, cfg.height - 1),
            rng.uniform(0, cfg.width - 1),
            rng.uniform(*cfg.blob_sigma_range),
            rng.uniform(0.5, 1.0),
        )
        for _ in range(count)
    ]
    return normalize_minmax(blob_field(cfg.height, cfg.width, blobs))


def blend_switching(cell_density, noise) -> np.ndarray:
    """Activity tracks density but is diluted by an independent noise term."""
    d = as_grid(cell_density, "cell_density")
    n = as_grid(noise, "noise")
    if d.shape != n.shape:
        raise ValueError(f"shape mismatch: {d.shape} vs {n.shape}")
    mixed = np.clip(0.6 * d + 0.4 * n, 0.0, 1.0)
    return normalize_minmax(mixed)


def gen_switching(rng, cell_density, cfg: GenConfig) -> np.ndarray:
    """Switching-activity map correlated with (but not identical to) density."""
    return blend_switching(cell_density, _smoothed_noise(rng, cfg))


def raw_ir_drop(power_grid, cell_density, switching, eps: float = 1e-6) -> np.ndarray:
    """Pointwise drop estimate: current demand (density*switching) over grid strength.

    Monotone increasing in density and switching, decreasing in power grid.
    """
    p = as_grid(power_grid, "power_grid")
    d = as_grid(cell_density, "cell_density")
    s = as_grid(switching, "switching")
    if p.shape != d.shape or p.shape != s.shape:
        raise ValueError(f"shape mismatch: {p.shape}, {d.shape}, {s.shape}")
    return (d * s) / (p + eps)


def synth_label(power_grid, cell_density, switching, cfg: GenConfig) -> np.ndarray:
    """Synthetic ground-truth drop map: raw estimate, blurred, normalized to [0, 1]."""
    raw = raw_ir_drop(power_grid, cell_density, switching, cfg.eps)
    return normalize_minmax(gaussian_smooth(raw, cfg.label_sigma))


def generate_sample(cfg: GenConfig, index: int) -> LabeledSample:
    """All four maps for one sample, deterministic in (cfg.seed, index)."""
    rng = sample_rng(cfg.seed, index)
    power = gen_power_grid(rng, cfg)
    density = gen_cell_density(rng, cfg)
    switching = gen_switching(rng, density, cfg)
    label = synth_label(power, density, switching, cfg)
    return LabeledSample(power, density, switching, label)


def generate_dataset(cfg: GenConfig, out_dir) -> dict[str, str]:
    """Generate cfg.n_samples samples and write the four (N, H, W) dataset files.

    Returns a mapping of array name to written path.
    """
    shape = (cfg.n_samples, cfg.height, cfg.width)
    power = np.empty(shape)
    density = np.empty(shape)
    switching = np.empty(shape)
    labels = np.empty(shape)
    for i in range(cfg.n_samples):
        s = generate_sample(cfg, i)
        power[i] = s.power_grid
        density[i] = s.cell_density
        switching[i] = s.switching
        labels[i] = s.ir_drop

    os.makedirs(out_dir, exist_ok=True)
    written = {}
    for fname, arr in (
        (POWER_GRID_FILE, power),
        (CELL_DENSITY_FILE, density),
        (SWITCHING_FILE, switching),
        (LABELS_FILE, labels),
    ):
        path = os.path.join(out_dir, fname)
        save_npy(path, arr, dtype="f4")
        written[fname] = path
    return written


def load_dataset(data_dir, with_labels: bool = True) -> dict[str, np.ndarray]:
    """Load the dataset files from a directory as float64 (N, H, W) arrays."""
    names = DATASET_FILES if with_labels else DATASET_FILES[:3]
    arrays = {}
    for fname in names:
        path = os.path.join(data_dir, fname)
        if not os.path.exists(path):
            raise FileNotFoundError(f"dataset file missing: {path}")
        arr = load_npy(path)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3:
            raise ValueError(f"{path}: expected (N, H, W) array, got shape {arr.shape}")
        arrays[fname] = arr
    shapes = {a.shape for a in arrays.values()}
    if len(shapes) != 1:
        raise ValueError(f"dataset files disagree on shape: {sorted(shapes)}")
    return arrays
