"""Acceptance-style tests for the figure tool.

Inputs are synthesized directly in the documented external formats (CSV
dialect and the binary checkpoint layout); the solver package is deliberately
not imported.
"""

import math
import struct

import numpy as np
import pytest

from fvfig import FigureSpec, SchemaError, plot, read_checkpoint
from fvfig.cli import main

MAGIC = b"CHFVCKPT"


def write_checkpoint(path, values, mode, params=(0.25, 1.0, 1.45, 0.0075, 0.3),
                     time=100.0):
    values = np.asarray(values, dtype="<f8")
    if mode == 1:
        sizes = (0, 0, values.shape[0])
    else:
        sizes = values.shape
    header = MAGIC + struct.pack("<II3Q6d", 1, mode, *sizes, *params, time)
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(values.tobytes())


def write_csv(path, columns, rows, metadata=()):
    with open(path, "w", encoding="utf-8") as handle:
        for key, value in metadata:
            handle.write(f"# {key}={value}\n")
        handle.write(",".join(columns) + "\n")
        for row in rows:
            handle.write(",".join(str(cell) for cell in row) + "\n")


@pytest.fixture
def slope_two_csv(tmp_path):
    path = tmp_path / "norms.csv"
    ls = [32, 64, 128, 256, 512]
    rows = [(l, 2.0 * l**-2.0, 1.5 * l**-2.0, 0.9 * l**-2.0) for l in ls]
    write_csv(path, ("l", "e_l1", "e_l2", "e_linf"), rows, metadata=[("sigma", 1.0)])
    return path


@pytest.fixture
def sweep_csv(tmp_path):
    path = tmp_path / "sweep.csv"
    columns = ("time", "R", "Theta", "P", "Psi", "delta_r", "mass", "dt",
               "alpha", "d_phi", "direction", "v_est", "converged")
    rows = []
    alphas = np.linspace(1.3, 1.45, 7)
    for a in alphas:
        rows.append((100.0, 0.8, 0.0, 0.4 - (a - 1.3), 0.0, 1e-3, 1.0, 5e-3,
                     a, 0.0075, "forward", -0.5, "true"))
    for a in alphas[::-1]:
        rows.append((100.0, 0.8, 0.0, 0.05 if a > 1.38 else 0.4 - (a - 1.3), 0.0,
                     1e-3, 1.0, 5e-3, a, 0.0075, "backward", -0.5, "true"))
    write_csv(path, columns, rows)
    return path


@pytest.fixture
def snapshot_checkpoint(tmp_path):
    path = tmp_path / "state.bin"
    n, m, l = 24, 24, 16
    x = np.arange(n) / n
    y = np.arange(m) / m
    blob = 0.02 + np.exp(-(((x[:, None] - 0.4) ** 2 + (y[None, :] - 0.6) ** 2)
                           / (2 * 0.05**2)))
    h = np.zeros(l)
    h[3] = 1.0
    values = blob[:, :, None] * h[None, None, :]
    write_checkpoint(path, values, mode=3)
    return path


class TestConvergenceFigure:
    def test_annotated_slope_matches_synthetic_data(self, slope_two_csv, tmp_path):
        out = tmp_path / "conv.png"
        artifacts = plot(FigureSpec("convergence", [str(slope_two_csv)], str(out)))
        assert out.exists() and out.stat().st_size > 0
        for name in ("e_l1", "e_l2", "e_linf"):
            assert artifacts["slopes"][name] == pytest.approx(2.0, abs=0.01)

    def test_missing_column_is_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        write_csv(path, ("l", "e_l1", "e_l2"), [(32, 1.0, 1.0)])
        with pytest.raises(SchemaError, match="e_linf"):
            plot(FigureSpec("convergence", [str(path)], str(tmp_path / "x.png")))


class TestSweepFigure:
    def test_two_branch_hysteresis(self, sweep_csv, tmp_path):
        out = tmp_path / "sweep.png"
        artifacts = plot(FigureSpec("sweep", [str(sweep_csv)], str(out),
                                    {"swept": "alpha"}))
        assert out.exists() and out.stat().st_size > 0
        assert artifacts["branches"] == 2
        assert sorted(artifacts["directions"]) == ["backward", "forward"]

    def test_schema_validation(self, tmp_path):
        path = tmp_path / "bad.csv"
        write_csv(path, ("alpha", "d_phi"), [(1.0, 0.1)])
        with pytest.raises(SchemaError, match="direction"):
            plot(FigureSpec("sweep", [str(path)], str(tmp_path / "x.png")))


class TestSnapshotFigure:
    def test_heatmap_with_arrows_and_line(self, snapshot_checkpoint, tmp_path):
        out = tmp_path / "snap.png"
        artifacts = plot(FigureSpec("snapshot", [str(snapshot_checkpoint)], str(out)))
        assert out.exists() and out.stat().st_size > 0
        assert artifacts["max_speed"] > 0.0
        assert artifacts["line_drawn"]

    def test_flat_field_has_near_zero_arrows(self, tmp_path):
        path = tmp_path / "flat.bin"
        values = np.full((8, 8, 12), 1.0 / (2.0 * math.pi))
        write_checkpoint(path, values, mode=3)
        out = tmp_path / "flat.png"
        artifacts = plot(FigureSpec("snapshot", [str(path)], str(out)))
        assert artifacts["max_speed"] < 1e-12
        lo, hi = artifacts["density_range"]
        assert hi - lo < 1e-12

    def test_rejects_1d_checkpoint(self, tmp_path):
        path = tmp_path / "prof.bin"
        write_checkpoint(path, np.full(32, 0.1), mode=1)
        with pytest.raises(SchemaError, match="3D"):
            plot(FigureSpec("snapshot", [str(path)], str(tmp_path / "x.png")))


class TestOtherKinds:
    def test_profiles_overlay(self, tmp_path):
        paths = []
        for i, kappa in enumerate((2.0, 8.0)):
            phi = np.arange(64) * (2 * math.pi / 64)
            prof = np.exp(kappa * np.cos(phi))
            prof /= prof.sum() * (2 * math.pi / 64)
            path = tmp_path / f"p{i}.bin"
            write_checkpoint(path, prof, mode=1)
            paths.append(str(path))
        out = tmp_path / "profiles.png"
        artifacts = plot(FigureSpec("profiles", paths, str(out)))
        assert artifacts["profiles"] == 2
        assert out.exists()

    def test_sce_heatmap_grid(self, tmp_path):
        path = tmp_path / "sce.csv"
        rows = []
        for a in (0.0, 0.5, 1.0):
            for d in (0.1, 0.2):
                rows.append((a, d, max(0.0, 1 - a - d), -0.5 * math.sin(a)))
        write_csv(path, ("alpha", "d_phi", "r_mag", "v_wave"), rows)
        out = tmp_path / "sce.png"
        artifacts = plot(FigureSpec("sce-heatmap", [str(path)], str(out)))
        assert artifacts["grid_shape"] == (3, 2)

    def test_checkpoint_reader_round_trip(self, tmp_path):
        path = tmp_path / "f.bin"
        values = np.linspace(0.0, 1.0, 24).reshape(2, 3, 4)
        write_checkpoint(path, values, mode=3, time=7.5)
        ckpt = read_checkpoint(path)
        assert ckpt.time == 7.5
        np.testing.assert_array_equal(ckpt.values, values)
        assert ckpt.params["rho"] == 0.3


class TestCLI:
    def test_end_to_end(self, slope_two_csv, tmp_path, capsys):
        out = tmp_path / "cli.png"
        assert main(["convergence", str(slope_two_csv), "-o", str(out)]) == 0
        assert out.exists()
        assert "slopes" in capsys.readouterr().out

    def test_error_single_line(self, tmp_path, capsys):
        missing = tmp_path / "nope.csv"
        assert main(["convergence", str(missing), "-o", str(tmp_path / "x.png")]) == 2
        err = capsys.readouterr().err.strip()
        assert err.startswith("error:") and "\n" not in err

    def test_deterministic_output(self, slope_two_csv, tmp_path):
        out1 = tmp_path / "a.png"
        out2 = tmp_path / "b.png"
        plot(FigureSpec("convergence", [str(slope_two_csv)], str(out1)))
        plot(FigureSpec("convergence", [str(slope_two_csv)], str(out2)))
        assert out1.read_bytes() == out2.read_bytes()
