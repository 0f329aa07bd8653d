"""Diagnostics: polar order, spatial localization, projections, line profiles,
spatial deviation, and the zero-lag free energy.

All angular moments use the exact per-cell trig integrals (the same
sin(dphi/2)/(dphi/2) weighting as the potential discretization) rather than
midpoint values, so diagnostics and solver share one quadrature convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Field1D, Field3D, InvalidStateError, ModelParams
from .homogeneous import LN_FLOOR, cell_trig_weights
from .kinetic import NeighborStencil
from .reconstruction import limited_slopes


@dataclass(frozen=True)
class OrderParameter:
    magnitude: float
    phase: float


@dataclass
class PolarOrderField:
    """Nonlocal polar order (R(r), Theta(r)) per spatial cell."""

    magnitude: np.ndarray
    phase: np.ndarray


@dataclass
class LineProfile:
    """Spatial-density samples along the line through the density maximum."""

    s: np.ndarray
    values: np.ndarray
    r_max: tuple[float, float]
    phi_max: float


def polar_order(field: Field1D | Field3D) -> OrderParameter:
    """Global polar order parameter (R, Theta): first angular Fourier moment."""
    if isinstance(field, Field1D):
        grid = field.grid
        w_avg, _ = cell_trig_weights(grid.d_phi_cell)
        phi = grid.centers()
        scale = grid.d_phi_cell * w_avg
        z = complex(
            scale * float(field.values @ np.cos(phi)),
            scale * float(field.values @ np.sin(phi)),
        )
    else:
        grid = field.grid
        w_avg, _ = cell_trig_weights(grid.d_phi_cell)
        phi = grid.phi_centers()
        f_cos = float(np.sum(field.values @ np.cos(phi)))
        f_sin = float(np.sum(field.values @ np.sin(phi)))
        scale = grid.cell_volume * w_avg
        z = complex(scale * f_cos, scale * f_sin)
    return OrderParameter(abs(z), math.atan2(z.imag, z.real))


def nonlocal_polar_field(field: Field3D, stencil: NeighborStencil) -> PolarOrderField:
    """Per-cell polar order over the interaction disc, normalized by its mass."""
    grid = field.grid
    w_avg, _ = cell_trig_weights(grid.d_phi_cell)
    phi = grid.phi_centers()
    f_cos = stencil.aggregate(field.values @ np.cos(phi))
    f_sin = stencil.aggregate(field.values @ np.sin(phi))
    total = stencil.aggregate(field.values.sum(axis=2))
    if np.any(total <= 0.0):
        raise InvalidStateError("nonlocal polar order requires positive neighborhood mass")
    # the dphi and dx dy factors cancel between moment and mass
    re = w_avg * f_cos / total
    im = w_avg * f_sin / total
    return PolarOrderField(np.hypot(re, im), np.arctan2(im, re))


def localization_order(field: Field3D) -> OrderParameter:
    """Localization order parameter (P, Psi): the (1,1) spatial Fourier mode."""
    grid = field.grid
    sd = spatial_density(field)
    x = grid.x_centers()
    y = grid.y_centers()
    weight = (math.sin(math.pi * grid.dx) / math.pi) * (math.sin(math.pi * grid.dy) / math.pi)
    z = weight * np.sum(sd * np.exp(2j * math.pi * x)[:, None] * np.exp(2j * math.pi * y)[None, :])
    return OrderParameter(abs(z), math.atan2(z.imag, z.real))


def spatial_density(field: Field3D) -> np.ndarray:
    """Projection onto space: integral of f over the angle, per spatial cell."""
    return field.values.sum(axis=2) * field.grid.d_phi_cell


def momentum_field(field: Field3D) -> np.ndarray:
    """Momentum u(r) = int e(phi) f dphi, shape (n, m, 2), exact trig weights."""
    grid = field.grid
    w_avg, _ = cell_trig_weights(grid.d_phi_cell)
    phi = grid.phi_centers()
    scale = grid.d_phi_cell * w_avg
    return np.stack(
        (scale * (field.values @ np.cos(phi)), scale * (field.values @ np.sin(phi))),
        axis=-1,
    )


def max_spatial_deviation(field: Field3D) -> float:
    """delta_r: max over cells of |f_{i,j,k} - spatial mean of f at angle k|."""
    mean_k = field.values.mean(axis=(0, 1))
    return float(np.max(np.abs(field.values - mean_k[None, None, :])))


def line_profile(field: Field3D, samples: int, theta: float = 2.0,
                 momentum_rtol: float = 1e-10) -> LineProfile:
    """Spatial-density profile along r(s) = r_max + e(phi_max) s, s in [-1/2, 1/2].

    r_max is the density argmax (lexicographic first on ties, which makes
    near-homogeneous fields deterministic but still ill-conditioned — they
    error out via the momentum check instead). phi_max is the momentum
    direction there; values come from the limited piecewise-linear
    reconstruction of the 2D projection.
    """
    if samples < 2:
        raise InvalidStateError(f"line profile needs at least 2 samples, got {samples}")
    grid = field.grid
    sd = spatial_density(field)
    flat_idx = int(np.argmax(sd))
    i_max, j_max = divmod(flat_idx, grid.m)
    u = momentum_field(field)[i_max, j_max]
    speed = math.hypot(float(u[0]), float(u[1]))
    if speed <= momentum_rtol * max(float(np.max(sd)), 1e-300):
        raise InvalidStateError(
            "line direction undefined: momentum vanishes at the density maximum"
        )
    phi_max = math.atan2(float(u[1]), float(u[0]))
    slope_x = limited_slopes(sd, 0, grid.dx, theta)
    slope_y = limited_slopes(sd, 1, grid.dy, theta)

    s = np.linspace(-0.5, 0.5, samples)
    x0 = i_max * grid.dx
    y0 = j_max * grid.dy
    xs = np.mod(x0 + math.cos(phi_max) * s, 1.0)
    ys = np.mod(y0 + math.sin(phi_max) * s, 1.0)
    ii = np.mod(np.floor(xs / grid.dx + 0.5).astype(int), grid.n)
    jj = np.mod(np.floor(ys / grid.dy + 0.5).astype(int), grid.m)
    off_x = xs - ii * grid.dx
    off_x -= np.round(off_x)
    off_y = ys - jj * grid.dy
    off_y -= np.round(off_y)
    values = sd[ii, jj] + slope_x[ii, jj] * off_x + slope_y[ii, jj] * off_y
    return LineProfile(s, values, (x0, y0), phi_max)


def free_energy(field: Field1D, params: ModelParams, ln_floor: float = LN_FLOOR) -> float:
    """Zero-lag free energy: interaction term plus d_phi * entropy.

    Only defined for alpha = 0; the chiral interaction admits no Liapunov
    functional. Interaction uses the exact double-cell trig integral, which
    collapses to the squared first trig moment.
    """
    if params.alpha != 0.0:
        raise InvalidStateError("free energy is only defined for alpha = 0")
    grid = field.grid
    f = field.values
    two_sin = 2.0 * math.sin(0.5 * grid.d_phi_cell)
    phi = grid.centers()
    moment_sq = float(f @ np.cos(phi)) ** 2 + float(f @ np.sin(phi)) ** 2
    interaction = -0.5 * params.sigma * two_sin**2 * moment_sq
    entropy = float(np.sum(f * np.log(np.maximum(f, ln_floor)))) * grid.d_phi_cell
    return interaction + params.d_phi * entropy
