"""Command-line driver: run, sweep, norms, sce, ic.

Failures print a single machine-parsable ``error: <Type>: <message>`` line on
stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .analytic import solve_sce, von_mises
from .config import ConfigError, RunConfig, parse_config
from .core import Field1D, Field3D, Grid1D, Grid3D, ModelParams, total_mass
from .experiments import (
    ContinuationConfig,
    QuasirandomICSpec,
    continuation_sweep,
    error_norms_exact,
    fitted_order,
    perturb_spatial,
    quasirandom_ic_1d,
    quasirandom_ic_3d,
)
from .fieldio import read_field, require_mode, write_field, write_observables, write_table
from .observables import localization_order, max_spatial_deviation, polar_order
from .reconstruction import reconstruct
from .stepping import Observer, StepperConfig, run


def field_from_profile_1d(grid: Grid1D, profile, n_nodes: int = 8) -> Field1D:
    """Exact (Gauss-Legendre) cell averages of a density profile."""
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    half = 0.5 * grid.d_phi_cell
    nodes = grid.centers()[:, None] + half * x[None, :]
    averages = (np.asarray(profile(nodes)) @ w) * 0.5
    return Field1D(grid, averages)


def lift_homogeneous(grid: Grid3D, profile_1d: Field1D) -> Field3D:
    """Spatially homogeneous 3D state from a 1D angular profile."""
    if profile_1d.grid.l != grid.l:
        raise ConfigError("angular grid of the profile does not match the 3D grid")
    values = np.broadcast_to(profile_1d.values, (grid.n, grid.m, grid.l)).copy()
    return Field3D(grid, values)


def _maybe_perturb(cfg: RunConfig, field, time: float):
    if cfg.ic.perturb_epsilon > 0.0 and isinstance(field, Field3D):
        spec = QuasirandomICSpec(5, cfg.ic.perturb_epsilon, cfg.ic.perturb_seed)
        return perturb_spatial(field, spec), time
    return field, time


def build_initial_state(cfg: RunConfig):
    """Initial field and start time from the configured source."""

    def construct():
        if cfg.ic.kind == "checkpoint":
            field, params, time = read_field(cfg.ic.path)
            require_mode(field, cfg.mode, cfg.ic.path)
            if field.grid != cfg.grid:
                raise ConfigError(
                    f"checkpoint grid {field.grid} does not match configured {cfg.grid}")
            return field, time
        angular_grid = cfg.grid if cfg.mode == "1d" else Grid1D(cfg.grid.l)
        if cfg.ic.kind == "uniform":
            profile = Field1D(angular_grid,
                              np.full(angular_grid.l, 1.0 / (2.0 * math.pi)))
        elif cfg.ic.kind == "von_mises":
            state = von_mises(cfg.ic.theta_mean, cfg.params)
            profile = field_from_profile_1d(angular_grid, state)
        elif cfg.ic.kind == "traveling_wave":
            solution = solve_sce(cfg.params)
            profile = field_from_profile_1d(angular_grid, solution.profile)
        elif cfg.ic.kind == "quasirandom":
            if cfg.mode == "1d":
                return quasirandom_ic_1d(cfg.ic.spec, cfg.grid), 0.0
            return quasirandom_ic_3d(cfg.ic.spec, cfg.grid), 0.0
        else:  # pragma: no cover - parse_config rejects unknown kinds
            raise ConfigError(f"unknown ic kind {cfg.ic.kind!r}")
        if cfg.mode == "1d":
            return profile, 0.0
        state3 = lift_homogeneous(cfg.grid, profile)
        state3.values /= total_mass(state3)
        return state3, 0.0

    return _maybe_perturb(cfg, *construct())


def standard_observer(cadence: float) -> Observer:
    def fn(t, state):
        order = polar_order(state)
        row = {"R": order.magnitude, "Theta": order.phase, "mass": total_mass(state)}
        if isinstance(state, Field3D):
            loc = localization_order(state)
            row.update(P=loc.magnitude, Psi=loc.phase,
                       delta_r=max_spatial_deviation(state))
        else:
            row.update(P=math.nan, Psi=math.nan, delta_r=math.nan)
        return row

    return Observer(fn, cadence)


def _metadata(cfg: RunConfig) -> dict:
    meta = {
        "mode": cfg.mode,
        "v0": cfg.params.v0, "sigma": cfg.params.sigma, "alpha": cfg.params.alpha,
        "d_phi": cfg.params.d_phi, "rho": cfg.params.rho,
    }
    if isinstance(cfg.grid, Grid3D):
        meta.update(n=cfg.grid.n, m=cfg.grid.m, l=cfg.grid.l)
    else:
        meta.update(l=cfg.grid.l)
    return meta


def _cmd_run(args) -> int:
    with open(args.config, "r", encoding="utf-8") as handle:
        cfg = parse_config(handle.read())
    if args.output:
        cfg.output_dir = args.output
    os.makedirs(cfg.output_dir, exist_ok=True)
    state, t0 = build_initial_state(cfg)
    observers = [standard_observer(cfg.cadence)]
    if cfg.checkpoint_cadence > 0.0:
        def checkpoint_fn(t, field):
            path = os.path.join(cfg.output_dir, f"ckpt_{t:014.6f}.bin")
            write_field(path, field, cfg.params, t)
            return {}

        observers.append(Observer(checkpoint_fn, cfg.checkpoint_cadence))
    result = run(state, cfg.params, cfg.stepper, observers, t0=t0)
    write_observables(os.path.join(cfg.output_dir, "observables.csv"),
                      result.records, metadata=_metadata(cfg))
    write_field(os.path.join(cfg.output_dir, "final.bin"), result.field,
                cfg.params, result.t)
    print(f"run finished: t={result.t:g} steps={result.n_steps} "
          f"min_f={result.min_value:.3e} mass_err={result.max_mass_error:.3e}")
    return 0


def _cmd_ic(args) -> int:
    with open(args.config, "r", encoding="utf-8") as handle:
        cfg = parse_config(handle.read())
    state, t0 = build_initial_state(cfg)
    write_field(args.output, state, cfg.params, t0)
    print(f"wrote initial condition to {args.output}")
    return 0


def _cmd_norms(args) -> int:
    with open(args.config, "r", encoding="utf-8") as handle:
        cfg = parse_config(handle.read())
    if cfg.mode != "1d":
        raise ConfigError("refinement studies are implemented for 1d configs")
    grids = [int(token) for token in args.grids.split(",")]
    if cfg.params.alpha == 0.0:
        oracle = von_mises(math.pi, cfg.params)
    else:
        oracle = solve_sce(cfg.params).profile
    rows = []
    for l in grids:
        grid = Grid1D(l)
        ic = quasirandom_ic_1d(cfg.ic.spec, grid)
        stepper = cfg.stepper
        stepper_l = StepperConfig(
            dt=stepper.dt, t_end=stepper.t_end, cfl_safety=stepper.cfl_safety,
            theta=stepper.theta, fast_convolution=stepper.fast_convolution,
            compiled=stepper.compiled,
        )
        result = run(ic, cfg.params, stepper_l)
        norms = error_norms_exact(reconstruct(result.field, stepper.theta), oracle,
                                  align=True)
        rows.append((l, norms.l1, norms.l2, norms.linf))
        print(f"L={l:5d}  L1={norms.l1:.6e}  L2={norms.l2:.6e}  Linf={norms.linf:.6e}")
    orders = {
        "order_l1": fitted_order([r[0] for r in rows], [r[1] for r in rows]),
        "order_l2": fitted_order([r[0] for r in rows], [r[2] for r in rows]),
        "order_linf": fitted_order([r[0] for r in rows], [r[3] for r in rows]),
    }
    meta = _metadata(cfg)
    meta.update(orders)
    write_table(args.output, ("l", "e_l1", "e_l2", "e_linf"), rows, metadata=meta)
    print("fitted orders: " + "  ".join(f"{k[6:]}={v:.3f}" for k, v in orders.items()))
    return 0


def _parse_range(token: str) -> np.ndarray:
    """'a' or 'start:stop:step' (stop inclusive to half a step)."""
    parts = token.split(":")
    if len(parts) == 1:
        return np.array([float(parts[0])])
    if len(parts) != 3:
        raise ConfigError(f"range must be 'value' or 'start:stop:step', got {token!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0.0:
        raise ConfigError(f"range step must be positive, got {step}")
    count = int(math.floor((stop - start) / step + 0.5)) + 1
    return start + step * np.arange(max(count, 1))


def _cmd_sce(args) -> int:
    alphas = _parse_range(args.alpha)
    d_phis = _parse_range(args.d_phi)
    rows = []
    for alpha in alphas:
        guess = None
        for d_phi in d_phis:
            params = ModelParams(v0=0.0, sigma=args.sigma, alpha=float(alpha),
                                 d_phi=float(d_phi), rho=0.25)
            solution = solve_sce(params, initial_guess=guess)
            rows.append((float(alpha), float(d_phi), solution.r_mag, solution.v_wave))
            if not solution.disordered:
                guess = (solution.r_mag, solution.v_wave)
    write_table(args.output, ("alpha", "d_phi", "r_mag", "v_wave"), rows,
                metadata={"sigma": args.sigma})
    print(f"wrote {len(rows)} SCE roots to {args.output}")
    return 0


def _cmd_sweep(args) -> int:
    with open(args.config, "r", encoding="utf-8") as handle:
        cfg = parse_config(handle.read())
    os.makedirs(cfg.output_dir, exist_ok=True)
    values = _parse_range(args.values)
    if args.direction == "backward":
        values = values[::-1]
    path = []
    for value in values:
        kwargs = dict(v0=cfg.params.v0, sigma=cfg.params.sigma, alpha=cfg.params.alpha,
                      d_phi=cfg.params.d_phi, rho=cfg.params.rho)
        kwargs[args.param] = float(value)
        path.append(ModelParams(**kwargs))
    state, _ = build_initial_state(cfg)
    perturbation = None
    if args.direction == "backward" and cfg.mode == "3d":
        perturbation = cfg.ic.spec if cfg.ic.spec is not None else QuasirandomICSpec(
            5, 0.01 / (2.0 * math.pi), 1)
    protocol = ContinuationConfig(
        equil_time=args.equil_time,
        equil_dt=cfg.stepper.dt,
        fit_window=args.fit_window,
        slope_tol=args.slope_tol,
        monitor="delta_r" if cfg.mode == "3d" else "polar_r",
        max_extra_time=args.max_extra_time,
        perturbation=perturbation,
        stepper=cfg.stepper,
    )
    records = continuation_sweep(path, protocol, state, direction=args.direction,
                                 keep_states=True)
    rows = []
    for index, record in enumerate(records):
        ckpt = os.path.join(cfg.output_dir, f"sweep_{args.direction}_{index:03d}.bin")
        write_field(ckpt, record.final_state, record.params, 0.0)
        rows.append({
            "time": float(record.delta_r_times[-1]) if record.delta_r_times.size else 0.0,
            "R": record.r_final, "Theta": math.nan,
            "P": record.p_final, "Psi": math.nan,
            "delta_r": float(record.delta_r_values[-1]) if record.delta_r_values.size else math.nan,
            "mass": total_mass(record.final_state), "dt": cfg.stepper.dt,
            "alpha": record.params.alpha, "d_phi": record.params.d_phi,
            "direction": record.direction, "v_est": record.v_est,
            "converged": record.converged,
        })
    out = os.path.join(cfg.output_dir, f"sweep_{args.direction}.csv")
    write_observables(out, rows, metadata=_metadata(cfg), sweep=True)
    print(f"wrote {len(rows)} sweep records to {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chiralfv",
        description="Finite volume solvers for chiral active matter kinetic equations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate a configured initial value problem")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("-o", "--output", default=None, help="override output directory")
    p_run.set_defaults(fn=_cmd_run)

    p_ic = sub.add_parser("ic", help="emit a configured initial condition as a checkpoint")
    p_ic.add_argument("--config", required=True)
    p_ic.add_argument("-o", "--output", required=True)
    p_ic.set_defaults(fn=_cmd_ic)

    p_norms = sub.add_parser("norms", help="grid refinement study against the analytic state")
    p_norms.add_argument("--config", required=True)
    p_norms.add_argument("--grids", default="32,64,128,256,512",
                         help="comma-separated angular cell counts")
    p_norms.add_argument("-o", "--output", default="norms.csv")
    p_norms.set_defaults(fn=_cmd_norms)

    p_sce = sub.add_parser("sce", help="tabulate self-consistent (R, v) roots")
    p_sce.add_argument("--sigma", type=float, default=1.0)
    p_sce.add_argument("--alpha", required=True, help="value or start:stop:step")
    p_sce.add_argument("--d-phi", dest="d_phi", required=True, help="value or start:stop:step")
    p_sce.add_argument("-o", "--output", default="sce.csv")
    p_sce.set_defaults(fn=_cmd_sce)

    p_sweep = sub.add_parser("sweep", help="continuation sweep along one parameter")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--param", choices=("alpha", "d_phi"), required=True)
    p_sweep.add_argument("--values", required=True, help="start:stop:step (ascending)")
    p_sweep.add_argument("--direction", choices=("forward", "backward"), default="forward")
    p_sweep.add_argument("--equil-time", type=float, default=100.0)
    p_sweep.add_argument("--fit-window", type=float, default=50.0)
    p_sweep.add_argument("--slope-tol", type=float, default=5e-5)
    p_sweep.add_argument("--max-extra-time", type=float, default=1000.0)
    p_sweep.set_defaults(fn=_cmd_sweep)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # single-line machine-parsable failure report
        message = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
