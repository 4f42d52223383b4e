"""Multi-modal multi-level complex exponential least squares (MM-QCELS) simulation toolkit.

Modules:
  spectral   Hamiltonians, normalized spectra and overlaps
  sampling   Hadamard-test data generation and the time filter
  estimator  loss, r-subproblem, theta search, schedule and the multi-level driver
  qpe        textbook phase estimation baseline
  bench      experiment presets, sweeps and CSV output
"""

from .estimator import ModeEstimate, Schedule, SearchConfig, build_schedule, minimize_level, mm_qcels
from .qpe import QpeConfig, qpe_distribution, qpe_estimate_min
from .sampling import Dataset, TimeDensity, filter_value, generate_dataset
from .spectral import DominantSpec, HamiltonianModel, Spectrum, assign_overlaps, model_spectrum

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DominantSpec",
    "HamiltonianModel",
    "ModeEstimate",
    "QpeConfig",
    "Schedule",
    "SearchConfig",
    "Spectrum",
    "TimeDensity",
    "assign_overlaps",
    "build_schedule",
    "filter_value",
    "generate_dataset",
    "minimize_level",
    "mm_qcels",
    "model_spectrum",
    "qpe_distribution",
    "qpe_estimate_min",
]
