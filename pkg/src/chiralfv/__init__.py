"""Finite volume solvers for continuum-limit equations of chiral active particles."""

from .analytic import (
    TravelingWaveSolution,
    bessel_ratio,
    solve_sce,
    transition_d_phi,
    traveling_wave_profile,
    von_mises,
)
from .core import (
    Field1D,
    Field3D,
    Grid1D,
    Grid3D,
    InvalidStateError,
    ModelParams,
    periodic_center_distance_sq,
    total_mass,
    wrap,
)
from .experiments import (
    ContinuationConfig,
    QuasirandomICSpec,
    SweepRecord,
    continuation_sweep,
    error_norms_exact,
    error_norms_reference,
    perturb_spatial,
    quasirandom_ic_1d,
    quasirandom_ic_3d,
)
from .observables import (
    free_energy,
    line_profile,
    localization_order,
    max_spatial_deviation,
    momentum_field,
    nonlocal_polar_field,
    polar_order,
    spatial_density,
)
from .stepping import Observer, RunResult, StepperConfig, run, split_step, ssp_rk2_step

__all__ = [
    "TravelingWaveSolution", "bessel_ratio", "solve_sce", "transition_d_phi",
    "traveling_wave_profile", "von_mises",
    "Field1D", "Field3D", "Grid1D", "Grid3D", "InvalidStateError", "ModelParams",
    "periodic_center_distance_sq", "total_mass", "wrap",
    "ContinuationConfig", "QuasirandomICSpec", "SweepRecord", "continuation_sweep",
    "error_norms_exact", "error_norms_reference", "perturb_spatial",
    "quasirandom_ic_1d", "quasirandom_ic_3d",
    "free_energy", "line_profile", "localization_order", "max_spatial_deviation",
    "momentum_field", "nonlocal_polar_field", "polar_order", "spatial_density",
    "Observer", "RunResult", "StepperConfig", "run", "split_step", "ssp_rk2_step",
]

__version__ = "0.1.0"
