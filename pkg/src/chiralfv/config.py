"""Run configuration: INI-style key-value documents, fully validated.

Sections: [run], [model], [grid], [ic], [observers], [output], [parallel].
Unknown sections or keys are errors, as are missing required keys and
out-of-range values; error messages name the offending field.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass

from .core import Grid1D, Grid3D, InvalidStateError, ModelParams
from .experiments import DEFAULT_EPSILON_1D, DEFAULT_EPSILON_3D, QuasirandomICSpec
from .stepping import StepperConfig


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


_KNOWN_KEYS = {
    "run": {"mode", "t_end", "dt", "cfl_safety", "theta", "use_splitting",
            "fast_convolution", "compiled"},
    "model": {"v0", "sigma", "alpha", "d_phi", "rho"},
    "grid": {"n", "m", "l"},
    "ic": {"kind", "k_modes", "epsilon", "seed", "path", "theta_mean",
           "perturb_epsilon", "perturb_seed"},
    "observers": {"cadence", "checkpoint_cadence"},
    "output": {"directory"},
    "parallel": {"workers"},
}

_IC_KINDS = {"quasirandom", "checkpoint", "uniform", "von_mises", "traveling_wave"}


@dataclass
class ICConfig:
    kind: str
    spec: QuasirandomICSpec | None = None
    path: str | None = None
    theta_mean: float = math.pi
    # optional spatial perturbation applied to 3D initial states
    perturb_epsilon: float = 0.0
    perturb_seed: int = 0


@dataclass
class RunConfig:
    mode: str
    params: ModelParams
    grid: Grid1D | Grid3D
    stepper: StepperConfig
    ic: ICConfig
    cadence: float = 0.1
    checkpoint_cadence: float = 0.0
    output_dir: str = "out"
    workers: int = 1


def _get(section, key, parse, required=True, default=None):
    if key not in section:
        if required:
            raise ConfigError(f"missing required key [{section.name}] {key}")
        return default
    raw = section[key]
    try:
        return parse(raw)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid value for [{section.name}] {key}: {raw!r}") from exc


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document into a RunConfig."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc

    for name in parser.sections():
        if name not in _KNOWN_KEYS:
            raise ConfigError(f"unknown section [{name}]")
        for key in parser[name]:
            if key not in _KNOWN_KEYS[name]:
                raise ConfigError(f"unknown key [{name}] {key}")
    for required_section in ("run", "model", "grid"):
        if required_section not in parser:
            raise ConfigError(f"missing required section [{required_section}]")

    run_section = parser["run"]
    mode = _get(run_section, "mode", str).strip().lower()
    if mode not in ("1d", "3d"):
        raise ConfigError(f"[run] mode must be 1d or 3d, got {mode!r}")

    model = parser["model"]
    is_3d = mode == "3d"
    try:
        params = ModelParams(
            v0=_get(model, "v0", float, required=is_3d, default=0.0),
            sigma=_get(model, "sigma", float),
            alpha=_get(model, "alpha", float),
            d_phi=_get(model, "d_phi", float),
            rho=_get(model, "rho", float, required=is_3d, default=0.25),
        )
    except InvalidStateError as exc:
        raise ConfigError(f"[model] {exc}") from exc

    grid_section = parser["grid"]
    l = _get(grid_section, "l", int)
    if is_3d:
        n = _get(grid_section, "n", int)
        m = _get(grid_section, "m", int)
        try:
            grid: Grid1D | Grid3D = Grid3D(n, m, l)
        except InvalidStateError as exc:
            raise ConfigError(f"[grid] {exc}") from exc
    else:
        for key in ("n", "m"):
            if key in grid_section:
                raise ConfigError(f"[grid] {key} is only valid in 3d mode")
        try:
            grid = Grid1D(l)
        except InvalidStateError as exc:
            raise ConfigError(f"[grid] {exc}") from exc

    try:
        stepper = StepperConfig(
            dt=_get(run_section, "dt", float),
            t_end=_get(run_section, "t_end", float),
            cfl_safety=_get(run_section, "cfl_safety", float, required=False, default=0.9),
            theta=_get(run_section, "theta", float, required=False, default=2.0),
            use_splitting=_get(run_section, "use_splitting", _parse_bool,
                               required=False, default=True),
            fast_convolution=_get(run_section, "fast_convolution", _parse_bool,
                                  required=False, default=False),
            compiled=_get(run_section, "compiled", _parse_bool, required=False, default=False),
        )
        if not 1.0 <= stepper.theta <= 2.0:
            raise ConfigError(f"[run] theta must lie in [1, 2], got {stepper.theta}")
    except InvalidStateError as exc:
        raise ConfigError(f"[run] {exc}") from exc

    ic_section = parser["ic"] if "ic" in parser else None
    if ic_section is None:
        ic = ICConfig("quasirandom", QuasirandomICSpec(
            10, DEFAULT_EPSILON_3D if is_3d else DEFAULT_EPSILON_1D, 0))
    else:
        kind = _get(ic_section, "kind", str, required=False, default="quasirandom")
        kind = kind.strip().lower()
        if kind not in _IC_KINDS:
            raise ConfigError(f"[ic] unknown kind {kind!r}")
        path = _get(ic_section, "path", str, required=False)
        perturb_epsilon = _get(ic_section, "perturb_epsilon", float,
                               required=False, default=0.0)
        perturb_seed = _get(ic_section, "perturb_seed", int, required=False, default=0)
        if perturb_epsilon < 0.0:
            raise ConfigError("[ic] perturb_epsilon must be >= 0")
        if perturb_epsilon > 0.0 and not is_3d:
            raise ConfigError("[ic] perturb_epsilon only applies to 3d runs")
        if kind == "checkpoint":
            if path is None:
                raise ConfigError("[ic] kind=checkpoint requires path")
            ic = ICConfig("checkpoint", path=path, perturb_epsilon=perturb_epsilon,
                          perturb_seed=perturb_seed)
        else:
            if path is not None:
                raise ConfigError("[ic] path is only valid with kind=checkpoint "
                                  "(two initial-condition sources given)")
            spec = QuasirandomICSpec(
                k_modes=_get(ic_section, "k_modes", int, required=False,
                             default=10 if not is_3d else 5),
                epsilon=_get(ic_section, "epsilon", float, required=False,
                             default=DEFAULT_EPSILON_3D if is_3d else DEFAULT_EPSILON_1D),
                seed=_get(ic_section, "seed", int, required=False, default=0),
            )
            ic = ICConfig(kind, spec=spec,
                          theta_mean=_get(ic_section, "theta_mean", float,
                                          required=False, default=math.pi),
                          perturb_epsilon=perturb_epsilon,
                          perturb_seed=perturb_seed)

    cadence = 0.1
    checkpoint_cadence = 0.0
    if "observers" in parser:
        cadence = _get(parser["observers"], "cadence", float, required=False, default=0.1)
        checkpoint_cadence = _get(parser["observers"], "checkpoint_cadence", float,
                                  required=False, default=0.0)
        if cadence <= 0.0:
            raise ConfigError(f"[observers] cadence must be positive, got {cadence}")
        if checkpoint_cadence < 0.0:
            raise ConfigError("[observers] checkpoint_cadence must be >= 0")

    output_dir = "out"
    if "output" in parser:
        output_dir = _get(parser["output"], "directory", str, required=False, default="out")

    workers = 1
    if "parallel" in parser:
        workers = _get(parser["parallel"], "workers", int, required=False, default=1)
        if workers < 1:
            raise ConfigError(f"[parallel] workers must be >= 1, got {workers}")

    stepper.workers = workers
    return RunConfig(
        mode=mode, params=params, grid=grid, stepper=stepper, ic=ic,
        cadence=cadence, checkpoint_cadence=checkpoint_cadence,
        output_dir=output_dir, workers=workers,
    )
