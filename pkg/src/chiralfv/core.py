"""Parameters, periodic grids, and field containers shared by all solvers.

The spatial domain is the unit square with periodic boundaries; the angular
domain is the circle [0, 2pi). Cell averages are the state variable
throughout. Field arrays are laid out with the angular index fastest so the
angular flux sweep stays contiguous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class InvalidStateError(ValueError):
    """A field or parameter set violates a solver precondition."""


def _check_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise InvalidStateError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the chiral particle flow.

    v0     self-propulsion speed (>= 0)
    sigma  alignment coupling strength (> 0)
    alpha  phase lag of the alignment kernel, in [-pi, pi]
    d_phi  rotational diffusion coefficient (>= 0)
    rho    interaction radius on the unit square, in (0, 0.5]
    """

    v0: float
    sigma: float
    alpha: float
    d_phi: float
    rho: float

    def __post_init__(self) -> None:
        for name in ("v0", "sigma", "alpha", "d_phi", "rho"):
            _check_finite(name, getattr(self, name))
        if self.v0 < 0:
            raise InvalidStateError(f"v0 must be >= 0, got {self.v0}")
        if self.sigma <= 0:
            raise InvalidStateError(f"sigma must be > 0, got {self.sigma}")
        if not -math.pi <= self.alpha <= math.pi:
            raise InvalidStateError(f"alpha must lie in [-pi, pi], got {self.alpha}")
        if self.d_phi < 0:
            raise InvalidStateError(f"d_phi must be >= 0, got {self.d_phi}")
        if not 0 < self.rho <= 0.5:
            raise InvalidStateError(
                f"rho must lie in (0, 0.5] for minimal-image uniqueness, got {self.rho}"
            )


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on the circle with L cells of width 2pi/L."""

    l: int

    def __post_init__(self) -> None:
        if self.l <= 0:
            raise InvalidStateError(f"cell count l must be positive, got {self.l}")

    @property
    def d_phi_cell(self) -> float:
        return 2.0 * math.pi / self.l

    def centers(self) -> np.ndarray:
        return np.arange(self.l) * self.d_phi_cell


@dataclass(frozen=True)
class Grid3D:
    """Uniform periodic grid on the unit square times the circle.

    N x M spatial cells (dx = 1/N, dy = 1/M) and L angular cells
    (dphi = 2pi/L). All three indices wrap periodically.
    """

    n: int
    m: int
    l: int

    def __post_init__(self) -> None:
        for name in ("n", "m", "l"):
            if getattr(self, name) <= 0:
                raise InvalidStateError(
                    f"cell count {name} must be positive, got {getattr(self, name)}"
                )

    @property
    def dx(self) -> float:
        return 1.0 / self.n

    @property
    def dy(self) -> float:
        return 1.0 / self.m

    @property
    def d_phi_cell(self) -> float:
        return 2.0 * math.pi / self.l

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.d_phi_cell

    def x_centers(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    def y_centers(self) -> np.ndarray:
        return np.arange(self.m) * self.dy

    def phi_centers(self) -> np.ndarray:
        return np.arange(self.l) * self.d_phi_cell


@dataclass
class Field1D:
    """Cell averages f_k on a Grid1D."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.l,):
            raise InvalidStateError(
                f"values shape {self.values.shape} does not match grid ({self.grid.l},)"
            )

    def copy(self) -> "Field1D":
        return Field1D(self.grid, self.values.copy())


@dataclass
class Field3D:
    """Cell averages f_{i,j,k} on a Grid3D, stored (n, m, l) with k fastest."""

    grid: Grid3D
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        shape = (self.grid.n, self.grid.m, self.grid.l)
        if self.values.shape != shape:
            raise InvalidStateError(
                f"values shape {self.values.shape} does not match grid {shape}"
            )

    def copy(self) -> "Field3D":
        return Field3D(self.grid, self.values.copy())


def wrap(index: int, extent: int) -> int:
    """Periodic index wrap: the representative of ``index`` in [0, extent)."""
    if extent <= 0:
        raise InvalidStateError(f"extent must be positive, got {extent}")
    return index % extent


def total_mass(field: Field1D | Field3D) -> float:
    """Total mass sum(f) * cell volume of a field."""
    if isinstance(field, Field1D):
        return float(np.sum(field.values) * field.grid.d_phi_cell)
    return float(np.sum(field.values) * field.grid.cell_volume)


def periodic_center_distance_sq(i: int, j: int, l: int, m: int, grid: Grid3D) -> float:
    """Squared minimal-image distance between spatial cell centers (i,j) and (l,m)."""
    ddx = abs(i - l) % grid.n * grid.dx
    ddy = abs(j - m) % grid.m * grid.dy
    ddx = min(ddx, 1.0 - ddx)
    ddy = min(ddy, 1.0 - ddy)
    return ddx * ddx + ddy * ddy


def require_valid_density(values: np.ndarray, context: str) -> None:
    """Reject fields containing negative or non-finite entries.

    A NaN in the state typically indicates an upstream CFL violation, so it is
    a hard error rather than something to clamp silently.
    """
    if not np.all(np.isfinite(values)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
        raise InvalidStateError(f"{context}: non-finite value at cell {bad}")
    if np.any(values < 0.0):
        bad = tuple(int(i) for i in np.argwhere(values < 0.0)[0])
        raise InvalidStateError(
            f"{context}: negative value {float(values[bad])} at cell {bad}"
        )
