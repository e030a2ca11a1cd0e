"""
Delimited-text exchange format shared by every experiment.

A table file is ``#``-prefixed ``key: value`` metadata lines, one
comma-separated header line, then rows written with 17 significant digits.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np

from .brownian import TrajectoryEnsemble
from .core import SpatialGrid
from .quantum import DensityMatrixXY, WaveFunction
from .semiclassical import SignedEnsemble
from .utils import UsageError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
Metadata = Mapping[str, object]


def write_table(path: PathLike, columns: Mapping[str, np.ndarray], metadata: Optional[Metadata] = None) -> Path:
    """
    Write equal-length columns as CSV with metadata comments.

    Args:
        path: Output file
        columns: Column name -> values, in output order
        metadata: Extra ``# key: value`` lines (config hash, seed, ...)

    Returns:
        Path: The written file
    """
    path = Path(path)
    names = list(columns)
    if not names:
        raise UsageError("A table needs at least one column")
    data = [np.asarray(columns[name], dtype=float).ravel() for name in names]
    if len({column.size for column in data}) > 1:
        raise UsageError(f"Columns of {path.name} have different lengths")
    lines = [f"# {key}: {value}" for key, value in (metadata or {}).items()]
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for line in lines:
            handle.write(line + "\n")
        handle.write(",".join(names) + "\n")
        if data[0].size:
            np.savetxt(handle, np.column_stack(data), fmt="%.17g", delimiter=",")
    logger.debug("Wrote %s (%d rows)", path, data[0].size)
    return path


def read_table(path: PathLike) -> Tuple[Dict[str, str], Dict[str, np.ndarray]]:
    """Read a table written by :func:`write_table`: (metadata, columns)."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"No such file: {path}")
    metadata: Dict[str, str] = {}
    header: Optional[list] = None
    rows = []
    with path.open(encoding="utf-8") as handle:
        for raw in handle:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                metadata[key.strip()] = value.strip()
            elif header is None:
                header = [name.strip() for name in line.split(",")]
            else:
                rows.append([float(v) for v in line.split(",")])
    if header is None:
        raise UsageError(f"{path} has no header line")
    table = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return metadata, {name: table[:, k] for k, name in enumerate(header)}


def write_density(path: PathLike, grid: SpatialGrid, density: np.ndarray, metadata: Optional[Metadata] = None) -> Path:
    meta = {"grid": f"{grid.x_min!r} {grid.x_max!r} {grid.n_points}"}
    meta.update(metadata or {})
    return write_table(path, {"x": grid.points, "density": density}, meta)


def read_density(path: PathLike, column: Optional[str] = None) -> Tuple[SpatialGrid, np.ndarray, Dict[str, str]]:
    """
    Read one density column of a table and rebuild its grid from the x column.

    Without ``column`` the ``density`` column is used, or the only column
    besides ``x``. Experiment tables with several densities need ``column``.

    Raises:
        UsageError: If the column is missing or ambiguous, or x is not uniform
    """
    metadata, columns = read_table(path)
    if "x" not in columns:
        raise UsageError(f"{path} has no x column")
    others = [name for name in columns if name != "x"]
    if column is None:
        if "density" in columns:
            column = "density"
        elif len(others) == 1:
            column = others[0]
        else:
            raise UsageError(f"{path} holds several columns ({', '.join(others)}); pick one")
    if column not in others:
        raise UsageError(f"{path} has no column '{column}' (has {', '.join(others) or 'none'})")
    x = columns["x"]
    if x.size < 2:
        raise UsageError(f"{path} has too few grid points")
    grid = SpatialGrid(float(x[0]), float(x[-1]), int(x.size))
    if not np.allclose(x, grid.points, rtol=0, atol=1e-9 * max(1.0, grid.span)):
        raise UsageError(f"{path} is not on a uniform grid")
    return grid, columns[column], metadata


def write_wavefunction(path: PathLike, psi: WaveFunction, metadata: Optional[Metadata] = None) -> Path:
    meta = {"hbar": repr(psi.hbar)}
    meta.update(metadata or {})
    return write_table(path, {"x": psi.grid.points, "re": psi.amplitudes.real, "im": psi.amplitudes.imag}, meta)


def write_density_matrix(path: PathLike, rho: DensityMatrixXY, metadata: Optional[Metadata] = None) -> Path:
    """rho(x, xi) in long format, one (x, xi) pair per row."""
    x, xi = np.meshgrid(rho.x_grid.points, rho.xi_grid.points, indexing="ij")
    meta = {"hbar": repr(rho.hbar), "trace_drift": repr(rho.trace_drift)}
    meta.update(metadata or {})
    return write_table(path, {"x": x, "xi": xi, "re": rho.values.real, "im": rho.values.imag}, meta)


def write_ensemble(path: PathLike, ens: TrajectoryEnsemble, metadata: Optional[Metadata] = None) -> Path:
    columns = {"trajectory": np.arange(ens.n_traj)}
    if ens.initial is not None:
        columns["x_initial"] = ens.initial
    columns["x_terminal"] = ens.terminal
    meta = {"provenance": ens.provenance}
    meta.update(metadata or {})
    return write_table(path, columns, meta)


def write_signed_ensemble(path: PathLike, ens: SignedEnsemble, metadata: Optional[Metadata] = None) -> Path:
    """Per-trajectory summary: id, terminal x, sign, log-magnitude."""
    meta = {"provenance": ens.provenance, "slices": ens.n_slices}
    meta.update(metadata or {})
    return write_table(
        path,
        {
            "trajectory": np.arange(ens.n_traj),
            "x_terminal": ens.terminal,
            "sign": ens.signs,
            "log_magnitude": ens.log_magnitudes,
        },
        meta,
    )


@dataclass(frozen=True)
class DensityComparison:
    l1: float
    linf: float
    ks: float
    difference: np.ndarray


def density_distances(a: np.ndarray, b: np.ndarray, grid: SpatialGrid) -> DensityComparison:
    """L1 = sum |a - b| dx, Linf = max |a - b|, KS = max |CDF_a - CDF_b|."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != (grid.n_points,) or b.shape != (grid.n_points,):
        raise UsageError(f"Densities of shape {a.shape} and {b.shape} do not match a {grid.n_points}-point grid")
    difference = a - b
    cdf_gap = np.cumsum(difference) * grid.dx
    return DensityComparison(
        l1=float(grid.integrate(np.abs(difference))),
        linf=float(np.max(np.abs(difference))),
        ks=float(np.max(np.abs(cdf_gap))),
        difference=difference,
    )


def compare_densities(
    file_a: PathLike,
    file_b: PathLike,
    dump: Optional[PathLike] = None,
    column_a: Optional[str] = None,
    column_b: Optional[str] = None,
) -> DensityComparison:
    """
    Distances between two density files on the same grid.

    Args:
        file_a: First density file
        file_b: Second density file
        dump: Optional path for the per-bin difference table
        column_a: Density column of ``file_a`` (see :func:`read_density`)
        column_b: Density column of ``file_b``

    Raises:
        UsageError: If the grids differ or a column cannot be picked
    """
    grid_a, density_a, _ = read_density(file_a, column_a)
    grid_b, density_b, _ = read_density(file_b, column_b)
    if not grid_a.same_as(grid_b, rtol=1e-9):
        raise UsageError(
            f"Grid mismatch: [{grid_a.x_min}, {grid_a.x_max}]x{grid_a.n_points} vs "
            f"[{grid_b.x_min}, {grid_b.x_max}]x{grid_b.n_points}"
        )
    result = density_distances(density_a, density_b, grid_a)
    if dump is not None:
        write_table(
            dump,
            {"x": grid_a.points, "a": density_a, "b": density_b, "difference": result.difference},
            {"l1": repr(result.l1), "linf": repr(result.linf), "ks": repr(result.ks)},
        )
    return result
