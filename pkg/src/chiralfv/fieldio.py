"""Binary checkpoints and CSV output.

Checkpoint layout (all little-endian):

    bytes 0..8    magic "CHFVCKPT"
    bytes 8..12   u32 format version (1)
    bytes 12..16  u32 mode: 1 (angular only) or 3 (space x angle)
    bytes 16..40  3 x u64 grid sizes n, m, l  (n = m = 0 for 1D)
    bytes 40..80  5 x f64 params: v0, sigma, alpha, d_phi, rho
    bytes 80..88  f64 simulation time
    bytes 88..    n*m*l (or l) f64 cell averages, C order, angular index fastest

Reads validate magic, version, mode, and payload size, and restore values
bit-exactly. CSV floats print with 17 significant digits so text round-trips
64-bit values; '#' comment lines carry the run's parameters.
"""

from __future__ import annotations

import math
import struct
from typing import Mapping, Sequence

import numpy as np

from .core import Field1D, Field3D, Grid1D, Grid3D, ModelParams

MAGIC = b"CHFVCKPT"
VERSION = 1

OBSERVABLE_COLUMNS = ("time", "R", "Theta", "P", "Psi", "delta_r", "mass", "dt")
SWEEP_COLUMNS = OBSERVABLE_COLUMNS + ("alpha", "d_phi", "direction", "v_est", "converged")


class CheckpointError(ValueError):
    """Malformed, truncated, or mismatched checkpoint file."""


def write_field(path, field: Field1D | Field3D, params: ModelParams, time: float) -> None:
    if isinstance(field, Field1D):
        mode, sizes = 1, (0, 0, field.grid.l)
    else:
        mode, sizes = 3, (field.grid.n, field.grid.m, field.grid.l)
    header = MAGIC + struct.pack(
        "<II3Q6d", VERSION, mode, *sizes,
        params.v0, params.sigma, params.alpha, params.d_phi, params.rho, time,
    )
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(payload)


def read_field(path) -> tuple[Field1D | Field3D, ModelParams, float]:
    with open(path, "rb") as handle:
        raw = handle.read()
    header_size = len(MAGIC) + struct.calcsize("<II3Q6d")
    if len(raw) < header_size or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a field checkpoint (bad magic)")
    version, mode, n, m, l, v0, sigma, alpha, d_phi, rho, time = struct.unpack(
        "<II3Q6d", raw[len(MAGIC):header_size]
    )
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    if mode not in (1, 3):
        raise CheckpointError(f"{path}: unknown mode {mode}")
    count = l if mode == 1 else n * m * l
    expected = header_size + 8 * count
    if len(raw) != expected:
        raise CheckpointError(
            f"{path}: truncated payload ({len(raw)} bytes, expected {expected})"
        )
    values = np.frombuffer(raw, dtype="<f8", offset=header_size, count=count).astype(
        np.float64
    )
    params = ModelParams(v0=v0, sigma=sigma, alpha=alpha, d_phi=d_phi, rho=rho)
    if mode == 1:
        field: Field1D | Field3D = Field1D(Grid1D(int(l)), values)
    else:
        field = Field3D(Grid3D(int(n), int(m), int(l)), values.reshape(int(n), int(m), int(l)))
    return field, params, float(time)


def require_mode(field: Field1D | Field3D, mode: str, path="<checkpoint>") -> None:
    """Shape guard when loading a checkpoint into a configured run."""
    if mode == "1d" and not isinstance(field, Field1D):
        raise CheckpointError(f"{path}: 3D checkpoint cannot start a 1D run")
    if mode == "3d" and not isinstance(field, Field3D):
        raise CheckpointError(f"{path}: 1D checkpoint cannot start a 3D run")


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_observables(stream, records: Sequence[Mapping], metadata: Mapping | None = None,
                      sweep: bool = False) -> None:
    """Write observer records as CSV with '#' metadata lines and a fixed schema.

    Missing fields print as nan (e.g. P for 1D runs).
    """
    own = isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__")
    handle = open(stream, "w", encoding="utf-8") if own else stream
    try:
        if metadata:
            for key, value in metadata.items():
                handle.write(f"# {key}={_format(value)}\n")
        columns = SWEEP_COLUMNS if sweep else OBSERVABLE_COLUMNS
        handle.write(",".join(columns) + "\n")
        for record in records:
            cells = []
            for column in columns:
                value = record.get(column, math.nan)
                cells.append(_format(value))
            handle.write(",".join(cells) + "\n")
    finally:
        if own:
            handle.close()


def write_table(stream, columns: Sequence[str], rows: Sequence[Sequence],
                metadata: Mapping | None = None) -> None:
    """Generic CSV table with the same metadata/format conventions."""
    own = isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__")
    handle = open(stream, "w", encoding="utf-8") if own else stream
    try:
        if metadata:
            for key, value in metadata.items():
                handle.write(f"# {key}={_format(value)}\n")
        handle.write(",".join(columns) + "\n")
        for row in rows:
            handle.write(",".join(_format(cell) for cell in row) + "\n")
    finally:
        if own:
            handle.close()


def read_csv(path) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Read the package CSV dialect: '#' metadata, header, string rows."""
    metadata: dict[str, str] = {}
    header: list[str] = []
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    metadata[key.strip()] = value.strip()
                continue
            if not header:
                header = line.split(",")
                continue
            rows.append(line.split(","))
    return metadata, header, rows
