"""Figure builders: convergence, profiles, sce-heatmap, sweep, snapshot.

Every builder is a pure function of its input files and returns a small dict
of computed artifacts (fitted slopes, branch counts, ...) so tests and callers
can assert on the numbers that were drawn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .dataio import SchemaError, read_checkpoint, read_table

KINDS = ("convergence", "profiles", "sce-heatmap", "sweep", "snapshot")


@dataclass
class FigureSpec:
    kind: str
    inputs: list[str]
    output: str
    style: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise SchemaError("figure needs at least one input file")


def _save(fig, output: str) -> None:
    fig.savefig(output, dpi=150, metadata={"Software": None})
    plt.close(fig)


def plot_convergence(spec: FigureSpec) -> dict:
    """Log-log error norms against resolution with fitted-order annotations."""
    table = read_table(spec.inputs[0])
    table.require("l", "e_l1", "e_l2", "e_linf")
    resolution = table.columns["l"]
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    slopes = {}
    for name, label, marker in (("e_l1", "$L^1$", "o"),
                                ("e_l2", "$L^2$", "s"),
                                ("e_linf", "$L^\\infty$", "^")):
        err = table.columns[name]
        slope = float(np.polyfit(np.log(1.0 / resolution), np.log(err), 1)[0])
        slopes[name] = slope
        ax.loglog(resolution, err, marker=marker, label=f"{label} (order {slope:.2f})")
    ref = table.columns["e_l1"][0] * (resolution / resolution[0]) ** -2.0
    ax.loglog(resolution, ref, "k--", linewidth=0.8, label="slope $-2$")
    ax.set_xlabel("cells")
    ax.set_ylabel("error")
    ax.set_title(spec.style.get("title", "grid convergence"))
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, spec.output)
    return {"slopes": slopes}


def plot_profiles(spec: FigureSpec) -> dict:
    """Overlay angular density profiles from 1D checkpoints."""
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    count = 0
    for path in spec.inputs:
        ckpt = read_checkpoint(path)
        if ckpt.mode != 1:
            raise SchemaError(f"{path}: profiles figure needs 1D checkpoints")
        l = ckpt.values.shape[0]
        phi = np.arange(l) * (2.0 * math.pi / l)
        label = f"$D_\\varphi$={ckpt.params['d_phi']:g}, $\\alpha$={ckpt.params['alpha']:g}"
        ax.plot(phi, ckpt.values, label=label)
        count += 1
    ax.set_xlabel("$\\varphi$")
    ax.set_ylabel("$f(\\varphi)$")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, spec.output)
    return {"profiles": count}


def plot_sce_heatmap(spec: FigureSpec) -> dict:
    """Heatmaps of the self-consistent R and v over the (alpha, d_phi) plane."""
    table = read_table(spec.inputs[0])
    table.require("alpha", "d_phi", "r_mag", "v_wave")
    alphas = np.unique(table.columns["alpha"])
    d_phis = np.unique(table.columns["d_phi"])
    shape = (alphas.size, d_phis.size)
    if shape[0] * shape[1] != table.columns["alpha"].size:
        raise SchemaError("sce table is not a full (alpha, d_phi) grid")
    r_grid = np.full(shape, np.nan)
    v_grid = np.full(shape, np.nan)
    a_index = {a: i for i, a in enumerate(alphas)}
    d_index = {d: j for j, d in enumerate(d_phis)}
    for a, d, r, v in zip(table.columns["alpha"], table.columns["d_phi"],
                          table.columns["r_mag"], table.columns["v_wave"]):
        r_grid[a_index[a], d_index[d]] = r
        v_grid[a_index[a], d_index[d]] = v
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    extent = (d_phis.min(), d_phis.max(), alphas.min(), alphas.max())
    for ax, grid, title in ((axes[0], r_grid, "order parameter $R$"),
                            (axes[1], v_grid, "wave speed $v$")):
        image = ax.imshow(grid, origin="lower", aspect="auto", extent=extent)
        line_d = 0.5 * np.cos(alphas)
        ax.plot(line_d, alphas, "w-", linewidth=1.0)
        ax.set_xlabel("$D_\\varphi$")
        ax.set_ylabel("$\\alpha$")
        ax.set_title(title)
        fig.colorbar(image, ax=ax)
    fig.tight_layout()
    _save(fig, spec.output)
    return {"grid_shape": shape}


def plot_sweep(spec: FigureSpec) -> dict:
    """Order parameters along continuation branches, direction-coded markers."""
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    branches = 0
    directions = []
    markers = {"forward": ("o", "-"), "backward": ("s", "--")}
    for path in spec.inputs:
        table = read_table(path)
        table.require("alpha", "d_phi", "direction", "P", "R", "v_est", "converged")
        dirs = table.raw["direction"]
        for direction in sorted(set(dirs)):
            rows = [i for i, d in enumerate(dirs) if d == direction]
            swept = spec.style.get("swept", "")
            if not swept:
                # the swept parameter is the one that actually varies
                swept = "d_phi" if np.ptp(table.columns["d_phi"][rows]) \
                    >= np.ptp(table.columns["alpha"][rows]) else "alpha"
            x = table.columns[swept][rows]
            marker, line = markers.get(direction, ("x", ":"))
            axes[0].plot(x, table.columns["P"][rows], marker=marker,
                         linestyle=line, label=f"P {direction}")
            axes[1].plot(x, table.columns["R"][rows], marker=marker,
                         linestyle=line, label=f"R {direction}")
            branches += 1
            directions.append(direction)
    for ax, name in ((axes[0], "$P$"), (axes[1], "$R$")):
        ax.set_xlabel(spec.style.get("swept", "parameter"))
        ax.set_ylabel(name)
        ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, spec.output)
    return {"branches": branches, "directions": directions}


def plot_snapshot(spec: FigureSpec) -> dict:
    """Spatial density heatmap with momentum arrows and the through-maximum line."""
    ckpt = read_checkpoint(spec.inputs[0])
    if ckpt.mode != 3:
        raise SchemaError(f"{spec.inputs[0]}: snapshot needs a 3D checkpoint")
    n, m, l = ckpt.values.shape
    d_phi_cell = 2.0 * math.pi / l
    phi = np.arange(l) * d_phi_cell
    density = ckpt.values.sum(axis=2) * d_phi_cell
    ux = (ckpt.values @ np.cos(phi)) * d_phi_cell
    uy = (ckpt.values @ np.sin(phi)) * d_phi_cell
    x = np.arange(n) / n
    y = np.arange(m) / m

    fig, ax = plt.subplots(figsize=(5.2, 4.6))
    image = ax.imshow(density.T, origin="lower", extent=(0, 1, 0, 1))
    fig.colorbar(image, ax=ax, label="spatial density")
    stride = max(1, n // 16)
    ax.quiver(x[::stride], y[::stride],
              ux[::stride, ::stride].T, uy[::stride, ::stride].T,
              color="white", width=0.004)
    i_max, j_max = np.unravel_index(int(np.argmax(density)), density.shape)
    speed = math.hypot(ux[i_max, j_max], uy[i_max, j_max])
    drew_line = False
    if speed > 1e-12 * max(density.max(), 1e-300):
        angle = math.atan2(uy[i_max, j_max], ux[i_max, j_max])
        s = np.linspace(-0.5, 0.5, 200)
        ax.plot(np.mod(x[i_max] + s * math.cos(angle), 1.0),
                np.mod(y[j_max] + s * math.sin(angle), 1.0),
                "w.", markersize=0.8)
        drew_line = True
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(spec.style.get("title", f"t = {ckpt.time:g}"))
    fig.tight_layout()
    _save(fig, spec.output)
    return {
        "density_range": (float(density.min()), float(density.max())),
        "max_speed": float(np.hypot(ux, uy).max()),
        "line_drawn": drew_line,
    }


_BUILDERS = {
    "convergence": plot_convergence,
    "profiles": plot_profiles,
    "sce-heatmap": plot_sce_heatmap,
    "sweep": plot_sweep,
    "snapshot": plot_snapshot,
}


def plot(spec: FigureSpec) -> dict:
    """Render the figure for a validated spec; returns computed artifacts."""
    return _BUILDERS[spec.kind](spec)
