"""Field-sweep polarization transfer from NV centres to quadrupolar nuclei near zero field."""

__version__ = "0.1.0"

from .dynamics import (
    DephasingSpec,
    NumericalContractError,
    StepSizeError,
    SweepSchedule,
    Trajectory,
    propagate_sweep,
    run_protocol,
)
from .ensemble import (
    BulkEstimateInputs,
    EnsembleResult,
    TransferScenario,
    averaged_transfer,
    bulk_polarization,
    lz_polarization_rate,
)
from .geometry import GeometryConfig, QuadratureError, ensemble_ax, ensemble_ax_numeric
from .hamiltonians import BORON_11, NITROGEN_14, SPECIES, coupled_effective, sweep_hamiltonian
from .initialization import MWConfig, nv_initial_polarization
from .lz import adiabatic_parameter, double_passage, hartmann_hahn, lz_probability, stokes_phase
from .sampling import DisorderModel, TruncatedGaussian, sample_disorder
from .spin import SpinSystem, spin_operators

__all__ = [
    "BORON_11", "NITROGEN_14", "SPECIES",
    "BulkEstimateInputs", "DephasingSpec", "DisorderModel", "EnsembleResult", "GeometryConfig",
    "MWConfig", "NumericalContractError", "QuadratureError", "SpinSystem", "StepSizeError",
    "SweepSchedule", "Trajectory", "TransferScenario", "TruncatedGaussian",
    "adiabatic_parameter", "averaged_transfer", "bulk_polarization", "coupled_effective",
    "double_passage", "ensemble_ax", "ensemble_ax_numeric", "hartmann_hahn", "lz_polarization_rate",
    "lz_probability", "nv_initial_polarization", "propagate_sweep", "run_protocol", "sample_disorder",
    "spin_operators", "stokes_phase", "sweep_hamiltonian",
]
