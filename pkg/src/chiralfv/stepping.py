"""Time integration: SSP-RK2 stepping, the split composition, and the run loop.

The 3D integrator advances with the Strang-type composition
(spatial half step) o (angular full step) o (spatial half step), each sub-step
an SSP-RK2 pair of convex-form Euler updates. Step sizes follow
min(requested dt, safety * CFL bound of the current state), clipped so the
trajectory lands exactly on observer boundaries; the boundary grid is anchored
at t = 0, which makes checkpoint/resume reproduce an uninterrupted run
bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import Field1D, Field3D, InvalidStateError, ModelParams, total_mass
from .homogeneous import (
    LN_FLOOR,
    cfl_dt_1d,
    euler_step_1d,
    interface_velocities_1d,
    potential_1d,
)
from .kinetic import Solver3D
from .reconstruction import reconstruct


class SolverAbortError(RuntimeError):
    """The run loop stopped: step collapse or a failed invariant."""


@dataclass
class StepperConfig:
    """Step control knobs shared by the 1D and 3D drivers."""

    dt: float
    t_end: float
    cfl_safety: float = 0.9
    theta: float = 2.0
    use_splitting: bool = True
    fast_convolution: bool = False
    compiled: bool = False
    ln_floor: float = LN_FLOOR
    min_dt: float = 1e-12
    workers: int = 1

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise InvalidStateError(f"dt must be positive, got {self.dt}")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise InvalidStateError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if self.t_end < 0.0:
            raise InvalidStateError(f"t_end must be nonnegative, got {self.t_end}")
        if self.min_dt <= 0.0:
            raise InvalidStateError(f"min_dt must be positive, got {self.min_dt}")


@dataclass
class Observer:
    """Callback sampled on the absolute time grid t = 0, cadence, 2*cadence, ..."""

    fn: Callable[[float, Field1D | Field3D], Mapping[str, float]]
    cadence: float

    def __post_init__(self) -> None:
        if self.cadence <= 0.0:
            raise InvalidStateError(f"observer cadence must be positive, got {self.cadence}")


@dataclass
class RunResult:
    field: Field1D | Field3D
    t: float
    n_steps: int
    records: list[dict]
    min_value: float
    max_mass_error: float


def ssp_rk2_step(state, rhs: Callable, dt: float):
    """Generic Heun step: full Euler predictor, then average with a corrected one.

    Preserves nonnegativity and mass whenever the Euler step does. Raises on
    non-finite stages; field steppers use the convex-form updates instead.
    """
    predictor = state + dt * np.asarray(rhs(state))
    corrected = predictor + dt * np.asarray(rhs(predictor))
    out = 0.5 * (state + corrected)
    if not np.all(np.isfinite(np.asarray(out))):
        raise SolverAbortError("non-finite value after SSP-RK2 stage")
    return out


def split_step(field: Field3D, dt: float, config: StepperConfig,
               solver: Solver3D | None = None) -> Field3D:
    """One composition step: spatial half, angular full, spatial half."""
    if solver is None:
        raise InvalidStateError("split_step requires a Solver3D (pass solver=...)")
    return Field3D(field.grid, solver.split_step(field.values, dt))


def _next_boundary(t: float, cadences: Sequence[float], t_end: float) -> float:
    """Smallest boundary strictly after t: cadence multiples (anchored at 0) or t_end."""
    eps = 1e-14 * (abs(t) + 1.0)
    out = t_end
    for cadence in cadences:
        boundary = (math.floor(t / cadence + 1e-9) + 1) * cadence
        if t + eps < boundary < out:
            out = boundary
    return out


def _sample(observers: Sequence[Observer], t: float, state, records: list[dict],
            cadences: Sequence[float], dt_last: float, t0: float) -> None:
    row: dict = {}
    for obs, cadence in zip(observers, cadences):
        phase = t / cadence
        on_grid = abs(phase - round(phase)) < 1e-9 or t == t0
        if on_grid:
            row.update(obs.fn(t, state))
    if row:
        row = {"time": t, **row, "dt": dt_last}
        records.append(row)


def run(
    initial: Field1D | Field3D,
    params: ModelParams,
    config: StepperConfig,
    observers: Sequence[Observer] = (),
    t0: float = 0.0,
) -> RunResult:
    """Advance to t_end with CFL-adaptive steps, sampling observers on the way.

    Tracks the running minimum cell average and the largest total-mass drift
    over every accepted step. Aborts if the step size collapses below
    config.min_dt.
    """
    if isinstance(initial, Field3D) and not config.use_splitting:
        raise InvalidStateError(
            "the 3D driver only integrates with splitting; the unsplit scheme "
            "exists as a CFL reference"
        )
    state = initial.copy()
    cadences = [obs.cadence for obs in observers]
    records: list[dict] = []
    mass_ref = total_mass(state)
    min_value = float(np.min(state.values))
    max_mass_error = 0.0
    n_steps = 0
    t = t0
    _sample(observers, t, state, records, cadences, 0.0, t0)

    if isinstance(state, Field1D) and config.compiled:
        from .fast1d import Fast1DSolver

        fast = Fast1DSolver(state, params, config.theta, config.ln_floor)
        while t < config.t_end - 1e-14 * (abs(config.t_end) + 1.0):
            t_next = _next_boundary(t, cadences, config.t_end)
            t, steps, seg_min, seg_dev, status, last_dt = fast.advance(
                state.values, t, t_next, config.dt, config.cfl_safety,
                config.min_dt, mass_ref,
            )
            n_steps += steps
            min_value = min(min_value, seg_min)
            max_mass_error = max(max_mass_error, seg_dev)
            if status == 2:
                raise SolverAbortError(f"step size collapsed below {config.min_dt} at t={t}")
            if status == 3:
                raise SolverAbortError(f"stage-2 CFL violation at t={t}; lower cfl_safety")
            _sample(observers, t, state, records, cadences, last_dt, t0)
        return RunResult(state, t, n_steps, records, min_value, max_mass_error)

    solver3d = None
    if isinstance(state, Field3D):
        solver3d = Solver3D(state.grid, params, config.theta, config.ln_floor,
                            config.workers)

    while t < config.t_end - 1e-14 * (abs(config.t_end) + 1.0):
        if solver3d is None:
            recon = reconstruct(state, config.theta)
            velocities = interface_velocities_1d(
                potential_1d(recon, params, config.fast_convolution, config.ln_floor),
                state.grid,
            )
            bound = cfl_dt_1d(velocities, state.grid)
        else:
            bound = solver3d.cfl_dt(state.values, split=True)
        dt = min(config.dt, config.cfl_safety * bound)
        if dt < config.min_dt:
            raise SolverAbortError(f"step size collapsed below {config.min_dt} at t={t}")
        t_next = _next_boundary(t, cadences, config.t_end)
        clipped = t + dt >= t_next - 1e-14 * (abs(t_next) + 1.0)
        if clipped:
            dt = t_next - t
        if solver3d is None:
            stage1 = euler_step_1d(recon, velocities, dt)
            recon2 = reconstruct(Field1D(state.grid, stage1), config.theta)
            velocities2 = interface_velocities_1d(
                potential_1d(recon2, params, config.fast_convolution, config.ln_floor),
                state.grid,
            )
            stage2 = euler_step_1d(recon2, velocities2, dt)
            state.values = 0.5 * (state.values + stage2)
        else:
            state.values = solver3d.split_step(state.values, dt)
        n_steps += 1
        t = t_next if clipped else t + dt
        min_value = min(min_value, float(np.min(state.values)))
        max_mass_error = max(max_mass_error, abs(total_mass(state) - mass_ref))
        if clipped:
            _sample(observers, t, state, records, cadences, dt, t0)
    if solver3d is not None:
        solver3d.close()
    return RunResult(state, t, n_steps, records, min_value, max_mass_error)
