"""Fast IR-drop estimation toolkit.

Synthetic power-grid datasets, a from-scratch U-Net pixel regressor, a
finite-difference physics oracle, hotspot risk analysis, and a CLI + HTTP
service tying them together.
"""

__version__ = "0.1.0"

from .analysis import (  # noqa: E402,F401
    MetricsReport,
    RiskLevel,
    RiskReport,
    classify_risk,
    detect_hotspots,
    evaluate,
    psnr,
    risk_report,
)
from .datagen import GenConfig, generate_dataset, load_dataset  # noqa: E402,F401
from .grids import (  # noqa: E402,F401
    gaussian_smooth,
    normalize_minmax,
    stack_channels,
)
from .npyio import load_npy, read_npy, save_npy, write_npy  # noqa: E402,F401
from .physics import PdeProblem, SolverConfig, compare_labels, solve_pde  # noqa: E402,F401
from .pipeline import run_prediction  # noqa: E402,F401
from .training import TrainConfig, train  # noqa: E402,F401
from .unet import (  # noqa: E402,F401
    UNetParams,
    forward,
    backward,
    load_checkpoint,
    save_checkpoint,
)
