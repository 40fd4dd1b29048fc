"""Ingestion of ray-tracer coverage maps into a site-specific alpha matrix.

A map directory holds one ``gw_<p>.csv`` per candidate (1-based ``p``) with
header ``x_m,y_m,gain_db`` and one row per cell center, plus an optional
``meta.json`` with ``cell_size_m`` and ``origin``. Cells absent from a file
hold ``-inf`` (no ray reached them).
"""

import json
import logging
import math
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from lorawan_gateway_planner.channel_models import link_path_loss
from lorawan_gateway_planner.config import ChannelConfig
from lorawan_gateway_planner.errors import BoundsError, GainMapError, format_validation_errors
from lorawan_gateway_planner.models import GainMap, GainMatrix, MapMeta, Position, Scenario
from lorawan_gateway_planner.storage import write_frame_atomic, write_text_atomic

logger = logging.getLogger(__name__)

GAIN_MAP_HEADER = ["x_m", "y_m", "gain_db"]
META_FILE = "meta.json"
_LATTICE_TOL = 1e-6


def gain_map_path(directory: Path, p: int) -> Path:
    """File holding candidate ``p``'s map."""
    return Path(directory) / f"gw_{p}.csv"


def load_map_meta(directory: Path) -> Optional[MapMeta]:
    """Read ``meta.json`` from a map directory, if present.

    Raises:
        GainMapError: If the file exists but is malformed.
    """
    path = Path(directory) / META_FILE
    if not path.exists():
        return None
    try:
        return MapMeta.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as e:
        raise GainMapError(f"Invalid JSON in {path}: {e}")
    except ValidationError as e:
        raise GainMapError(f"Invalid map metadata {path}: {format_validation_errors(e)}")


def _infer_cell_size(xs: np.ndarray, ys: np.ndarray, path: Path) -> float:
    steps = [np.diff(np.unique(v)) for v in (xs, ys)]
    positive = np.concatenate(steps)
    if positive.size == 0:
        raise GainMapError(f"{path}: cannot infer cell size from a single cell; provide {META_FILE}")
    return float(positive.min())


def load_gain_map(path: Path, gw_index: int, meta: Optional[MapMeta] = None) -> GainMap:
    """Parse one coverage-map CSV into a complete raster.

    Args:
        path: CSV with header ``x_m,y_m,gain_db``.
        gw_index: 1-based candidate index the map belongs to.
        meta: Optional ``{cell_size_m, origin}``; inferred from coordinates if absent.

    Returns:
        GainMap with missing cells set to ``-inf``.

    Raises:
        GainMapError: On a wrong header, non-numeric or NaN values, off-lattice or
            duplicate cells; messages carry the CSV line number.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip", keep_default_na=False)
    except FileNotFoundError:
        raise GainMapError(f"Gain map not found: {path}")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise GainMapError(f"{path}: {e}")

    if list(frame.columns) != GAIN_MAP_HEADER:
        raise GainMapError(f"{path}: expected header '{','.join(GAIN_MAP_HEADER)}', got '{','.join(map(str, frame.columns))}'")
    if frame.empty:
        raise GainMapError(f"{path}: no cells")

    for column in GAIN_MAP_HEADER:
        if not pd.api.types.is_numeric_dtype(frame[column]):
            numeric = pd.to_numeric(frame[column], errors="coerce")
            bad = int(np.flatnonzero(numeric.isna().to_numpy())[0])
            raise GainMapError(f"{path}: line {bad + 2}: non-numeric {column} '{frame[column].iloc[bad]}'")
        nan_rows = np.flatnonzero(frame[column].isna().to_numpy())
        if nan_rows.size:
            raise GainMapError(f"{path}: line {int(nan_rows[0]) + 2}: NaN {column}")

    xs = frame["x_m"].to_numpy(dtype=float)
    ys = frame["y_m"].to_numpy(dtype=float)
    gains = frame["gain_db"].to_numpy(dtype=float)
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        bad = int(np.flatnonzero(~(np.isfinite(xs) & np.isfinite(ys)))[0])
        raise GainMapError(f"{path}: line {bad + 2}: coordinates must be finite")
    if np.isposinf(gains).any():
        raise GainMapError(f"{path}: line {int(np.flatnonzero(np.isposinf(gains))[0]) + 2}: gain_db is +inf")

    if meta is not None:
        cell = meta.cell_size_m
        origin = meta.origin
    else:
        cell = _infer_cell_size(xs, ys, path)
        origin = (float(xs.min()), float(ys.min()))

    fx = (xs - origin[0]) / cell
    fy = (ys - origin[1]) / cell
    ix = np.rint(fx).astype(int)
    iy = np.rint(fy).astype(int)
    off_lattice = (np.abs(fx - ix) > _LATTICE_TOL) | (np.abs(fy - iy) > _LATTICE_TOL) | (ix < 0) | (iy < 0)
    if off_lattice.any():
        bad = int(np.flatnonzero(off_lattice)[0])
        raise GainMapError(
            f"{path}: line {bad + 2}: cell ({xs[bad]}, {ys[bad]}) is not on the {cell} m raster from {origin}"
        )

    nx, ny = int(ix.max()) + 1, int(iy.max()) + 1
    values = np.full((ny, nx), -np.inf)
    seen = np.zeros((ny, nx), dtype=bool)
    for row, (i, j) in enumerate(zip(ix, iy)):
        if seen[j, i]:
            raise GainMapError(f"{path}: line {row + 2}: duplicate cell ({xs[row]}, {ys[row]})")
        seen[j, i] = True
        values[j, i] = gains[row]

    missing = int((~seen).sum())
    if missing:
        logger.debug("%s: %d cells missing, set to -inf", path, missing)
    return GainMap(origin=origin, cell_size_m=cell, nx=nx, ny=ny, values=values, gw_index=gw_index)


def sample_gain(gain_map: GainMap, pos: Position) -> float:
    """Value of the cell whose center is nearest to ``pos``.

    Ties go to the lower x, then the lower y cell.

    Raises:
        BoundsError: If ``pos`` is more than half a cell outside the raster.
    """
    fx = (pos.x_m - gain_map.origin[0]) / gain_map.cell_size_m
    fy = (pos.y_m - gain_map.origin[1]) / gain_map.cell_size_m
    half = 0.5 + 1e-9
    if not (-half <= fx <= gain_map.nx - 1 + half and -half <= fy <= gain_map.ny - 1 + half):
        x_min, x_max, y_min, y_max = gain_map.extents()
        raise BoundsError(
            f"position ({pos.x_m}, {pos.y_m}) outside map {gain_map.gw_index} "
            f"x in [{x_min}, {x_max}], y in [{y_min}, {y_max}] (cell {gain_map.cell_size_m} m)"
        )
    ix = min(max(math.ceil(fx - 0.5), 0), gain_map.nx - 1)
    iy = min(max(math.ceil(fy - 0.5), 0), gain_map.ny - 1)
    return float(gain_map.values[iy, ix])


def build_alpha_from_maps(directory: Path, scenario: Scenario, tx_power_dbm: float = 0.0) -> GainMatrix:
    """Assemble alpha from one coverage map per candidate.

    Args:
        directory: Folder with ``gw_1.csv`` .. ``gw_P.csv`` and optional ``meta.json``.
        scenario: Geometry whose EDs are sampled.
        tx_power_dbm: Added to every path gain.

    Returns:
        D x P GainMatrix; cells never reached give ``-inf``.

    Raises:
        GainMapError: If any candidate's file is missing or malformed.
        BoundsError: If an ED lies outside a map, naming (d, p).
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise GainMapError(f"Map directory not found: {directory}")
    absent = [p for p in range(1, scenario.n_candidates + 1) if not gain_map_path(directory, p).is_file()]
    if absent:
        raise GainMapError(f"{directory}: missing gain maps for candidates {absent}")

    meta = load_map_meta(directory)
    alpha = np.empty((scenario.n_eds, scenario.n_candidates), dtype=float)
    for p in range(1, scenario.n_candidates + 1):
        gain_map = load_gain_map(gain_map_path(directory, p), p, meta)
        for d, ed in enumerate(scenario.eds, start=1):
            try:
                alpha[d - 1, p - 1] = tx_power_dbm + sample_gain(gain_map, ed)
            except BoundsError as e:
                raise BoundsError(f"ED {d} / candidate {p}: {e}")

    logger.info("Ingested %d gain maps from %s", scenario.n_candidates, directory)
    return GainMatrix(alpha_dbm=alpha, tx_power_dbm=tx_power_dbm, source=f"rt:{directory.name}")


def save_gain_map(gain_map: GainMap, path: Path) -> None:
    """Write a map CSV; ``-inf`` cells are omitted."""
    rows = []
    x0, y0 = gain_map.origin
    for j in range(gain_map.ny):
        for i in range(gain_map.nx):
            value = gain_map.values[j, i]
            if np.isneginf(value):
                continue
            rows.append((x0 + i * gain_map.cell_size_m, y0 + j * gain_map.cell_size_m, value))
    write_frame_atomic(path, pd.DataFrame(rows, columns=GAIN_MAP_HEADER))


def _raster_for(scenario: Scenario, cell_size_m: float) -> Tuple[Tuple[float, float], int, int]:
    points = scenario.gw_candidates + scenario.eds
    x0 = math.floor(min(p.x_m for p in points) / cell_size_m) * cell_size_m
    y0 = math.floor(min(p.y_m for p in points) / cell_size_m) * cell_size_m
    nx = math.ceil((max(p.x_m for p in points) - x0) / cell_size_m) + 1
    ny = math.ceil((max(p.y_m for p in points) - y0) / cell_size_m) + 1
    return (x0, y0), nx, ny


def synthesize_gain_maps(
    scenario: Scenario,
    cfg: ChannelConfig,
    out_dir: Path,
    cell_size_m: float,
    rx_height_m: Optional[float] = None,
    perturbation_sigma_db: float = 0.0,
    seed: int = 0,
) -> List[Path]:
    """Export a site-independent model as per-candidate coverage maps.

    The raster covers every candidate and ED; cell values are path gains at
    ``rx_height_m`` (default: the first ED's height). A non-zero
    ``perturbation_sigma_db`` adds seeded Gaussian noise per cell, drawn
    independently per candidate.

    Args:
        scenario: Geometry to cover.
        cfg: Channel model evaluated at every cell center.
        out_dir: Directory receiving ``gw_<p>.csv`` and ``meta.json``.
        cell_size_m: Raster resolution.
        rx_height_m: Receiver height for the cells.
        perturbation_sigma_db: Spatial perturbation standard deviation.
        seed: Perturbation seed.

    Returns:
        Paths of the written map files in candidate order.
    """
    if not cell_size_m > 0:
        raise GainMapError(f"cell_size_m must be > 0, got {cell_size_m}")
    if cfg.shadowing_sigma_db > 0:
        logger.warning("Per-link shadowing is not written into synthesized maps")

    out_dir = Path(out_dir)
    rx_height = rx_height_m if rx_height_m is not None else scenario.eds[0].z_m
    origin, nx, ny = _raster_for(scenario, cell_size_m)
    cells = [
        Position(x_m=origin[0] + i * cell_size_m, y_m=origin[1] + j * cell_size_m, z_m=rx_height)
        for j in range(ny)
        for i in range(nx)
    ]

    paths = []
    for p, gw in enumerate(scenario.gw_candidates, start=1):
        values = np.array([-link_path_loss(cfg, gw, cell, 0, p) for cell in cells]).reshape(ny, nx)
        if perturbation_sigma_db > 0:
            values = values + np.random.default_rng([seed, p]).normal(0.0, perturbation_sigma_db, size=(ny, nx))
        gain_map = GainMap(origin=origin, cell_size_m=cell_size_m, nx=nx, ny=ny, values=values, gw_index=p)
        path = gain_map_path(out_dir, p)
        save_gain_map(gain_map, path)
        paths.append(path)

    write_text_atomic(
        out_dir / META_FILE,
        json.dumps(MapMeta(cell_size_m=cell_size_m, origin=origin).model_dump(mode="json"), indent=2) + "\n",
    )
    logger.info("Synthesized %d %s gain maps (%dx%d cells) in %s", len(paths), cfg.model, nx, ny, out_dir)
    return paths
