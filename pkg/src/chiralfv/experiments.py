"""Initial conditions, error-norm harness, and the continuation sweep driver.

Quasirandom initial conditions are truncated trigonometric series with
uniformly drawn coefficients, integrated exactly over each cell, rejected
until the continuum series is nonnegative, and renormalized to unit mass.

Error norms follow the convergence-study convention: per-cell Gauss-Legendre
integration of the reconstruction against an exact solution (optionally
aligned by circular mean), or of two reconstructions against each other on
the least-common-multiple grid.

The continuation driver warm-starts each parameter point from the previous
final state (re-perturbing on backward legs), equilibrates, then integrates
until the monitored diagnostic's fitted slope falls under a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import Field1D, Field3D, Grid1D, Grid3D, InvalidStateError, ModelParams, total_mass
from .observables import localization_order, max_spatial_deviation, polar_order
from .reconstruction import ReconstructedField1D, ReconstructedField3D
from .stepping import Observer, RunResult, StepperConfig, run


@dataclass(frozen=True)
class QuasirandomICSpec:
    """Mode count K, coefficient amplitude bound, and RNG seed."""

    k_modes: int
    epsilon: float
    seed: int

    def __post_init__(self) -> None:
        if self.k_modes < 1:
            raise InvalidStateError(f"k_modes must be >= 1, got {self.k_modes}")
        if self.epsilon < 0.0:
            raise InvalidStateError(f"epsilon must be >= 0, got {self.epsilon}")


#: Default amplitude bounds keep the rejection sampler from looping.
DEFAULT_EPSILON_1D = 0.01 / (2.0 * math.pi)
DEFAULT_EPSILON_3D = 0.01 / (2.0 * math.pi)

_MAX_REDRAWS = 200
_NORM_NODE_CAP = 200_000_000


def _sinc(x: np.ndarray | float):
    return np.sinc(np.asarray(x) / math.pi)  # sin(x)/x with sinc(0)=1


def quasirandom_ic_1d(spec: QuasirandomICSpec, grid: Grid1D) -> Field1D:
    """Nonnegative normalized trig-series initial condition on the circle.

    Cell averages are the exact integrals of the series; the nonnegativity
    check samples the continuum series on a 16x refined grid (ample for a
    K-band-limited function).
    """
    rng = np.random.default_rng(spec.seed)
    a0 = 1.0 / (2.0 * math.pi)
    modes = np.arange(1, spec.k_modes + 1)
    phi = grid.centers()
    fine = np.arange(16 * grid.l) * (grid.d_phi_cell / 16.0)
    for _ in range(_MAX_REDRAWS):
        a_k = rng.uniform(-spec.epsilon, spec.epsilon, spec.k_modes)
        b_k = rng.uniform(-spec.epsilon, spec.epsilon, spec.k_modes)
        pointwise = a0 + a_k @ np.cos(np.outer(modes, fine)) + b_k @ np.sin(np.outer(modes, fine))
        if np.min(pointwise) < 0.0:
            continue
        weights = _sinc(0.5 * modes * grid.d_phi_cell)
        averages = a0 + (a_k * weights) @ np.cos(np.outer(modes, phi)) \
            + (b_k * weights) @ np.sin(np.outer(modes, phi))
        averages = np.maximum(averages, 0.0)
        field = Field1D(grid, averages)
        field.values /= total_mass(field)
        return field
    raise InvalidStateError(
        f"could not draw a nonnegative initial condition after {_MAX_REDRAWS} tries; "
        f"reduce epsilon (= {spec.epsilon})"
    )


def _product_sine_modes(spec: QuasirandomICSpec, rng: np.random.Generator,
                        grid: Grid3D, refine: int = 1):
    """Sum of c sin(2 pi n x - a) sin(2 pi m y - b) sin(l phi - g) terms.

    Returns (pointwise sum on a refine-x grid, exact cell averages).
    """
    k = spec.k_modes
    coeff = rng.uniform(-spec.epsilon, spec.epsilon, (k, k, k))
    shift_a = rng.uniform(0.0, 2.0 * math.pi, (k, k, k))
    shift_b = rng.uniform(0.0, 2.0 * math.pi, (k, k, k))
    shift_g = rng.uniform(0.0, 2.0 * math.pi, (k, k, k))
    x = grid.x_centers()
    y = grid.y_centers()
    phi = grid.phi_centers()
    xf = np.arange(refine * grid.n) / (refine * grid.n)
    yf = np.arange(refine * grid.m) / (refine * grid.m)
    pf = np.arange(refine * grid.l) * (2.0 * math.pi / (refine * grid.l))
    pointwise = np.zeros((xf.size, yf.size, pf.size))
    averages = np.zeros((grid.n, grid.m, grid.l))
    for n in range(1, k + 1):
        wx = float(_sinc(math.pi * n * grid.dx))
        for m in range(1, k + 1):
            wy = float(_sinc(math.pi * m * grid.dy))
            for l in range(1, k + 1):
                wphi = float(_sinc(0.5 * l * grid.d_phi_cell))
                c = coeff[n - 1, m - 1, l - 1]
                sa = shift_a[n - 1, m - 1, l - 1]
                sb = shift_b[n - 1, m - 1, l - 1]
                sg = shift_g[n - 1, m - 1, l - 1]
                pointwise += c * np.einsum(
                    "i,j,k->ijk",
                    np.sin(2.0 * math.pi * n * xf - sa),
                    np.sin(2.0 * math.pi * m * yf - sb),
                    np.sin(l * pf - sg),
                )
                averages += (c * wx * wy * wphi) * np.einsum(
                    "i,j,k->ijk",
                    np.sin(2.0 * math.pi * n * x - sa),
                    np.sin(2.0 * math.pi * m * y - sb),
                    np.sin(l * phi - sg),
                )
    return pointwise, averages


def quasirandom_ic_3d(spec: QuasirandomICSpec, grid: Grid3D) -> Field3D:
    """Nonnegative normalized product-sine initial condition on the full domain."""
    rng = np.random.default_rng(spec.seed)
    c0 = 1.0 / (2.0 * math.pi)
    for _ in range(_MAX_REDRAWS):
        pointwise, averages = _product_sine_modes(spec, rng, grid, refine=2)
        if float(np.min(c0 + pointwise)) < 0.0:
            continue
        field = Field3D(grid, np.maximum(c0 + averages, 0.0))
        field.values /= total_mass(field)
        return field
    raise InvalidStateError(
        f"could not draw a nonnegative 3D initial condition after {_MAX_REDRAWS} tries; "
        f"reduce epsilon (= {spec.epsilon})"
    )


def perturb_spatial(field: Field3D, spec: QuasirandomICSpec) -> Field3D:
    """Add a fresh zero-mean product-sine perturbation, floor at 0, renormalize."""
    if spec.epsilon == 0.0:
        return field.copy()
    rng = np.random.default_rng(spec.seed)
    _, averages = _product_sine_modes(spec, rng, field.grid, refine=1)
    mass_before = total_mass(field)
    perturbed = Field3D(field.grid, np.maximum(field.values + averages, 0.0))
    perturbed.values *= mass_before / total_mass(perturbed)
    return perturbed


# ---------------------------------------------------------------------------
# error norms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorNorms:
    l1: float
    l2: float
    linf: float


def _gl_offsets(width: float, n_nodes: int):
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    return 0.5 * width * x, 0.5 * width * w


def _circular_mean_phase(values_fn: Callable, n: int = 4096) -> float:
    phi = np.arange(n) * (2.0 * math.pi / n)
    f = np.asarray(values_fn(phi))
    z = np.sum(f * np.exp(1j * phi))
    return math.atan2(z.imag, z.real)


def error_norms_exact(recon: ReconstructedField1D | ReconstructedField3D,
                      exact: Callable, align: bool = False,
                      n_nodes: int = 4) -> ErrorNorms:
    """L1/L2 via per-cell Gauss-Legendre of |recon - exact|; Linf at cell centers.

    With ``align=True`` the exact solution is shifted in the angle so its
    circular mean matches the numerical one before comparing.
    """
    if isinstance(recon, ReconstructedField1D):
        grid = recon.base.grid
        shift = 0.0
        if align:
            theta_num = polar_order(recon.base).phase
            theta_exact = _circular_mean_phase(exact)
            shift = theta_num - theta_exact
        shifted = (lambda phi: exact(phi - shift)) if shift != 0.0 else exact
        off, wts = _gl_offsets(grid.d_phi_cell, n_nodes)
        phi = grid.centers()
        nodes = phi[:, None] + off[None, :]
        diff = recon.base.values[:, None] + recon.slope_phi[:, None] * off[None, :] \
            - shifted(nodes)
        l1 = float(np.sum(np.abs(diff) @ wts))
        l2 = math.sqrt(float(np.sum((diff * diff) @ wts)))
        linf = float(np.max(np.abs(recon.base.values - shifted(phi))))
        return ErrorNorms(l1, l2, linf)

    grid = recon.base.grid
    shift = 0.0
    if align:
        # alignment is angular: compare circular means at a fixed spatial point
        theta_num = polar_order(recon.base).phase
        theta_exact = _circular_mean_phase(
            lambda phi: exact(np.zeros_like(phi), np.zeros_like(phi), phi)
        )
        shift = theta_num - theta_exact
    off_x, wts_x = _gl_offsets(grid.dx, n_nodes)
    off_y, wts_y = _gl_offsets(grid.dy, n_nodes)
    off_p, wts_p = _gl_offsets(grid.d_phi_cell, n_nodes)
    x = grid.x_centers()
    y = grid.y_centers()
    phi = grid.phi_centers()
    l1 = 0.0
    l2 = 0.0
    for i in range(grid.n):  # chunk over x rows to bound memory
        xn = x[i] + off_x  # (qx,)
        recon_vals = (
            recon.base.values[i][None, :, :, None, None]
            + recon.slope_x[i][None, :, :, None, None] * off_x[:, None, None, None, None]
            + recon.slope_y[i][None, :, :, None, None] * off_y[None, None, None, :, None]
            + recon.slope_phi[i][None, :, :, None, None] * off_p[None, None, None, None, :]
        )  # (qx, m, l, qy, qp)
        xa = np.broadcast_to(xn[:, None, None, None, None], recon_vals.shape)
        ya = np.broadcast_to((y[:, None] + off_y[None, :])[None, :, None, :, None],
                             recon_vals.shape)
        pa = np.broadcast_to((phi[:, None] + off_p[None, :])[None, None, :, None, :],
                             recon_vals.shape)
        diff = recon_vals - exact(xa, ya, pa - shift)
        wt = (wts_x[:, None, None, None, None]
              * wts_y[None, None, None, :, None]
              * wts_p[None, None, None, None, :])
        l1 += float(np.sum(np.abs(diff) * wt))
        l2 += float(np.sum(diff * diff * wt))
    xg, yg, pg = np.meshgrid(x, y, phi - shift, indexing="ij")
    linf = float(np.max(np.abs(recon.base.values - exact(xg, yg, pg))))
    return ErrorNorms(l1, math.sqrt(l2), linf)


def _eval_recon_1d(recon: ReconstructedField1D, phi: np.ndarray) -> np.ndarray:
    grid = recon.base.grid
    idx = np.mod(np.floor(phi / grid.d_phi_cell + 0.5).astype(int), grid.l)
    off = phi - idx * grid.d_phi_cell
    off -= (2.0 * math.pi) * np.round(off / (2.0 * math.pi))
    return recon.base.values[idx] + recon.slope_phi[idx] * off


def error_norms_reference(coarse: ReconstructedField1D | ReconstructedField3D,
                          fine: ReconstructedField1D | ReconstructedField3D,
                          n_nodes: int = 4) -> ErrorNorms:
    """Norms of (coarse - fine) on the least-common-multiple grid per dimension."""
    if isinstance(coarse, ReconstructedField1D) != isinstance(fine, ReconstructedField1D):
        raise InvalidStateError("cannot compare reconstructions of different rank")
    if isinstance(coarse, ReconstructedField1D):
        l_cmp = math.lcm(coarse.base.grid.l, fine.base.grid.l)
        if l_cmp * n_nodes > _NORM_NODE_CAP:
            raise InvalidStateError(
                f"lcm grid of {l_cmp} cells exceeds the memory cap; evaluate in tiles"
            )
        width = 2.0 * math.pi / l_cmp
        off, wts = _gl_offsets(width, n_nodes)
        centers = np.arange(l_cmp) * width
        nodes = (centers[:, None] + off[None, :]).ravel()
        diff = _eval_recon_1d(coarse, nodes) - _eval_recon_1d(fine, nodes)
        diff = diff.reshape(l_cmp, n_nodes)
        l1 = float(np.sum(np.abs(diff) @ wts))
        l2 = math.sqrt(float(np.sum((diff * diff) @ wts)))
        linf = float(np.max(np.abs(_eval_recon_1d(coarse, centers)
                                   - _eval_recon_1d(fine, centers))))
        return ErrorNorms(l1, l2, linf)

    gc, gf = coarse.base.grid, fine.base.grid
    n_cmp = math.lcm(gc.n, gf.n)
    m_cmp = math.lcm(gc.m, gf.m)
    l_cmp = math.lcm(gc.l, gf.l)
    if n_cmp * m_cmp * l_cmp * n_nodes**3 > _NORM_NODE_CAP:
        raise InvalidStateError(
            f"lcm grid {n_cmp}x{m_cmp}x{l_cmp} exceeds the memory cap; evaluate in tiles"
        )

    def eval_3d(recon: ReconstructedField3D, xs, ys, ps):
        grid = recon.base.grid
        ii = np.mod(np.floor(xs / grid.dx + 0.5).astype(int), grid.n)
        jj = np.mod(np.floor(ys / grid.dy + 0.5).astype(int), grid.m)
        kk = np.mod(np.floor(ps / grid.d_phi_cell + 0.5).astype(int), grid.l)
        ox = xs - ii * grid.dx
        ox -= np.round(ox)
        oy = ys - jj * grid.dy
        oy -= np.round(oy)
        op = ps - kk * grid.d_phi_cell
        op -= (2.0 * math.pi) * np.round(op / (2.0 * math.pi))
        return (recon.base.values[ii, jj, kk] + recon.slope_x[ii, jj, kk] * ox
                + recon.slope_y[ii, jj, kk] * oy + recon.slope_phi[ii, jj, kk] * op)

    dx_c = 1.0 / n_cmp
    dy_c = 1.0 / m_cmp
    dp_c = 2.0 * math.pi / l_cmp
    off_x, wts_x = _gl_offsets(dx_c, n_nodes)
    off_y, wts_y = _gl_offsets(dy_c, n_nodes)
    off_p, wts_p = _gl_offsets(dp_c, n_nodes)
    xc = np.arange(n_cmp) * dx_c
    yc = np.arange(m_cmp) * dy_c
    pc = np.arange(l_cmp) * dp_c
    l1 = 0.0
    l2 = 0.0
    linf = 0.0
    for i in range(n_cmp):  # chunked
        xs = (xc[i] + off_x)[:, None, None, None, None]
        ys = (yc[:, None] + off_y[None, :])[None, :, None, :, None]
        ps = (pc[:, None] + off_p[None, :])[None, None, :, None, :]
        shape = (n_nodes, m_cmp, l_cmp, n_nodes, n_nodes)
        xs, ys, ps = (np.broadcast_to(a, shape) for a in (xs, ys, ps))
        diff = eval_3d(coarse, xs, ys, ps) - eval_3d(fine, xs, ys, ps)
        wt = (wts_x[:, None, None, None, None] * wts_y[None, None, None, :, None]
              * wts_p[None, None, None, None, :])
        l1 += float(np.sum(np.abs(diff) * wt))
        l2 += float(np.sum(diff * diff * wt))
        xg = np.broadcast_to(np.array([xc[i]])[:, None, None], (1, m_cmp, l_cmp))
        yg = np.broadcast_to(yc[None, :, None], (1, m_cmp, l_cmp))
        pg = np.broadcast_to(pc[None, None, :], (1, m_cmp, l_cmp))
        linf = max(linf, float(np.max(np.abs(
            eval_3d(coarse, xg, yg, pg) - eval_3d(fine, xg, yg, pg)))))
    return ErrorNorms(l1, math.sqrt(l2), linf)


def fitted_order(resolutions: Sequence[int], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(1/resolution)."""
    logs = np.log(np.asarray(errors, dtype=np.float64))
    res = np.log(1.0 / np.asarray(resolutions, dtype=np.float64))
    slope, _ = np.polyfit(res, logs, 1)
    return float(slope)


def linear_slope(times: Sequence[float], values: Sequence[float],
                 window: float) -> float:
    """Slope of a linear fit over the trailing ``window`` of the series."""
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if t.size < 2:
        raise InvalidStateError("slope fit needs at least two samples")
    mask = t >= t[-1] - window
    if int(np.sum(mask)) < 2:
        mask = slice(-2, None)
    slope, _ = np.polyfit(t[mask], v[mask], 1)
    return float(slope)


def phase_drift(times: Sequence[float], phases: Sequence[float],
                window: float) -> float:
    """Wave-speed estimate: linear slope of the unwrapped order-parameter phase."""
    return linear_slope(times, np.unwrap(np.asarray(phases)), window)


# ---------------------------------------------------------------------------
# continuation sweeps
# ---------------------------------------------------------------------------


@dataclass
class ContinuationConfig:
    """Protocol knobs for one continuation branch."""

    equil_time: float = 100.0
    equil_dt: float = 5e-3
    sample_cadence: float = 0.1
    fit_window: float = 50.0
    slope_tol: float = 5e-5
    monitor: str = "delta_r"  # "delta_r" (3D) or "polar_r" (1D)
    max_extra_time: float = 1000.0
    max_steps: int = 10**6
    perturbation: QuasirandomICSpec | None = None
    stepper: StepperConfig | None = None  # template; dt/t_end overridden per phase

    def __post_init__(self) -> None:
        if self.monitor not in ("delta_r", "polar_r"):
            raise InvalidStateError(f"unknown monitor {self.monitor!r}")


@dataclass
class SweepRecord:
    params: ModelParams
    direction: str
    r_final: float
    p_final: float
    v_est: float
    delta_r_times: np.ndarray
    delta_r_values: np.ndarray
    converged: bool
    wall_steps: int
    final_state: Field1D | Field3D | None = None
    initial_state: Field1D | Field3D | None = None


def _monitor_observer(field, cadence: float) -> Observer:
    if isinstance(field, Field3D):
        def fn(t, state):
            order = polar_order(state)
            loc = localization_order(state)
            return {
                "R": order.magnitude, "Theta": order.phase,
                "P": loc.magnitude, "Psi": loc.phase,
                "delta_r": max_spatial_deviation(state),
                "mass": total_mass(state),
            }
    else:
        def fn(t, state):
            order = polar_order(state)
            return {
                "R": order.magnitude, "Theta": order.phase,
                "P": math.nan, "Psi": math.nan, "delta_r": math.nan,
                "mass": total_mass(state),
            }
    return Observer(fn, cadence)


def _stepper_for(protocol: ContinuationConfig, duration: float) -> StepperConfig:
    base = protocol.stepper
    if base is None:
        return StepperConfig(dt=protocol.equil_dt, t_end=duration)
    return StepperConfig(
        dt=protocol.equil_dt, t_end=duration, cfl_safety=base.cfl_safety,
        theta=base.theta, use_splitting=base.use_splitting,
        fast_convolution=base.fast_convolution, compiled=base.compiled,
        ln_floor=base.ln_floor, min_dt=base.min_dt, workers=base.workers,
    )


def continuation_sweep(
    path: Sequence[ModelParams],
    protocol: ContinuationConfig,
    initial: Field1D | Field3D,
    direction: str = "forward",
    keep_states: bool = False,
) -> list[SweepRecord]:
    """Warm-started sweep along a monotone parameter path.

    Per point: optionally re-perturb (backward legs), equilibrate for
    equil_time, then integrate in fit-window segments until the monitored
    series' fitted slope magnitude drops under slope_tol. Non-convergence
    within the step cap records converged=False and continues.
    """
    if direction not in ("forward", "backward"):
        raise InvalidStateError(f"direction must be forward or backward, got {direction!r}")
    state = initial.copy()
    records: list[SweepRecord] = []
    for index, params in enumerate(path):
        if direction == "backward" and protocol.perturbation is not None \
                and isinstance(state, Field3D):
            spec = protocol.perturbation
            state = perturb_spatial(
                state, QuasirandomICSpec(spec.k_modes, spec.epsilon, spec.seed + index)
            )
        start_state = state.copy() if keep_states else None
        observer = _monitor_observer(state, protocol.sample_cadence)
        times: list[float] = []
        monitor_series: list[float] = []
        theta_series: list[float] = []
        delta_series: list[float] = []
        steps = 0

        def absorb(result: RunResult, offset: float) -> None:
            nonlocal steps
            steps += result.n_steps
            for row in result.records:
                if offset > 0.0 and row["time"] == 0.0:
                    continue  # segment start duplicates the previous sample
                times.append(offset + row["time"])
                monitor_value = row["delta_r"] if protocol.monitor == "delta_r" else row["R"]
                monitor_series.append(monitor_value)
                theta_series.append(row["Theta"])
                delta_series.append(row["delta_r"])

        result = run(state, params, _stepper_for(protocol, protocol.equil_time), [observer])
        state = result.field
        absorb(result, 0.0)
        elapsed = protocol.equil_time
        converged = False
        while True:
            window_t = np.asarray(times)
            if window_t.size >= 3 and window_t[-1] - window_t[0] >= protocol.fit_window:
                slope = linear_slope(times, monitor_series, protocol.fit_window)
                if abs(slope) < protocol.slope_tol:
                    converged = True
                    break
            if steps >= protocol.max_steps or elapsed >= protocol.equil_time + protocol.max_extra_time:
                break
            segment = min(protocol.fit_window, protocol.max_extra_time)
            result = run(state, params, _stepper_for(protocol, segment), [observer])
            state = result.field
            absorb(result, elapsed)
            elapsed += segment

        order = polar_order(state)
        p_final = localization_order(state).magnitude if isinstance(state, Field3D) else math.nan
        v_est = phase_drift(times, theta_series, protocol.fit_window)
        records.append(SweepRecord(
            params=params,
            direction=direction,
            r_final=order.magnitude,
            p_final=p_final,
            v_est=v_est,
            delta_r_times=np.asarray(times),
            delta_r_values=np.asarray(delta_series),
            converged=converged,
            wall_steps=steps,
            final_state=state.copy() if keep_states else None,
            initial_state=start_state,
        ))
    return records
