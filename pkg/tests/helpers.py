"""Shared oracle helpers: exact cell averaging and reference field builders."""

import numpy as np

from chiralfv.core import Field1D, Field3D, Grid1D, Grid3D


def cell_averages_1d(grid: Grid1D, fn, n_nodes: int = 16) -> Field1D:
    """Gauss-Legendre cell averages of a smooth angular profile (oracle grade)."""
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    half = 0.5 * grid.d_phi_cell
    nodes = grid.centers()[:, None] + half * x[None, :]
    return Field1D(grid, 0.5 * (np.asarray(fn(nodes)) @ w))


def lift_3d(grid3: Grid3D, profile: Field1D) -> Field3D:
    """Spatially homogeneous 3D field with the given angular profile."""
    assert grid3.l == profile.grid.l
    return Field3D(grid3, np.broadcast_to(profile.values, (grid3.n, grid3.m, grid3.l)).copy())


def random_density_1d(grid: Grid1D, seed: int, floor: float = 0.0) -> Field1D:
    rng = np.random.default_rng(seed)
    return Field1D(grid, rng.random(grid.l) + floor)


def random_density_3d(grid: Grid3D, seed: int, floor: float = 0.02) -> Field3D:
    rng = np.random.default_rng(seed)
    return Field3D(grid, rng.random((grid.n, grid.m, grid.l)) + floor)
