"""Network geometry: candidate gateway grid, ED layout and scenario files."""

import json
import logging
import math
from pathlib import Path
from typing import Any, List

from pydantic import ValidationError

from lorawan_gateway_planner.errors import ScenarioError, format_validation_errors
from lorawan_gateway_planner.models import GridMeta, Position, Scenario, ScenarioFile
from lorawan_gateway_planner.storage import write_text_atomic

logger = logging.getLogger(__name__)

REPLICATION_GW_HEIGHT_M = 30.0
REPLICATION_ED_HEIGHT_M = 1.4


def build_grid(
    origin: Position,
    nx: int,
    ny: int,
    spacing_m: float,
    gw_height_m: float,
    ed_layout: List[Position],
) -> Scenario:
    """Build a scenario with a row-major grid of gateway candidates.

    Candidate ``p`` (1-based) sits at column ``i = (p - 1) % nx`` and row
    ``j = (p - 1) // nx``, i.e. x varies fastest.

    Args:
        origin: Grid corner; its height is ignored.
        nx: Columns along x.
        ny: Rows along y.
        spacing_m: Distance between neighbouring candidates.
        gw_height_m: Height of every candidate.
        ed_layout: End-device positions, copied verbatim.

    Returns:
        Scenario with ``nx * ny`` candidates.

    Raises:
        ScenarioError: On non-positive counts, spacing or height, or an invalid ED layout.
    """
    if nx < 1 or ny < 1:
        raise ScenarioError(f"grid needs nx, ny >= 1, got nx={nx}, ny={ny}")
    if not spacing_m > 0:
        raise ScenarioError(f"spacing_m must be > 0, got {spacing_m}")
    if not gw_height_m > 0:
        raise ScenarioError(f"gw_height_m must be > 0, got {gw_height_m}")

    candidates = [
        Position(x_m=origin.x_m + i * spacing_m, y_m=origin.y_m + j * spacing_m, z_m=gw_height_m)
        for j in range(ny)
        for i in range(nx)
    ]
    try:
        return Scenario(
            gw_candidates=candidates,
            eds=list(ed_layout),
            grid_meta=GridMeta(origin=origin, nx=nx, ny=ny, spacing_m=spacing_m),
        )
    except ValidationError as e:
        raise ScenarioError(f"Invalid scenario: {format_validation_errors(e)}")


def replication_ed_layout() -> List[Position]:
    """54 ED positions inside the 450 m x 450 m candidate hull at 1.4 m.

    A staggered 9 x 6 lattice: x = 25 + 50 i, y = 25 + 75 j, odd columns
    shifted by 25 m in y. Every coordinate is a multiple of 25 m, so the
    layout sits on cell centers of any 25 m or 12.5 m raster anchored at 0.
    """
    return [
        Position(x_m=25.0 + 50.0 * i, y_m=25.0 + 75.0 * j + 25.0 * (i % 2), z_m=REPLICATION_ED_HEIGHT_M)
        for i in range(9)
        for j in range(6)
    ]


def replication_scenario() -> Scenario:
    """10 x 10 grid at 50 m spacing and 30 m height serving the 54-ED layout."""
    return build_grid(
        origin=Position(x_m=0.0, y_m=0.0, z_m=REPLICATION_GW_HEIGHT_M),
        nx=10,
        ny=10,
        spacing_m=50.0,
        gw_height_m=REPLICATION_GW_HEIGHT_M,
        ed_layout=replication_ed_layout(),
    )


def distance_3d(a: Position, b: Position) -> float:
    """Euclidean distance in meters."""
    return math.dist((a.x_m, a.y_m, a.z_m), (b.x_m, b.y_m, b.z_m))


def distance_2d(a: Position, b: Position) -> float:
    """Horizontal distance in meters, ignoring height."""
    return math.dist((a.x_m, a.y_m), (b.x_m, b.y_m))


def load_scenario(path: Path) -> Scenario:
    """Load a scenario JSON file.

    Args:
        path: File with ``gw_candidates``, ``eds`` and optional ``grid_meta``.

    Returns:
        Validated Scenario.

    Raises:
        ScenarioError: If the file is missing, malformed or violates the schema.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ScenarioError(f"Scenario file not found: {path}")
    except json.JSONDecodeError as e:
        raise ScenarioError(f"Invalid JSON in {path}: {e}")

    try:
        scenario = ScenarioFile.model_validate(data).to_scenario()
    except ValidationError as e:
        raise ScenarioError(f"Invalid scenario {path}: {format_validation_errors(e)}")

    logger.debug("Loaded scenario %s: P=%d, D=%d", path, scenario.n_candidates, scenario.n_eds)
    return scenario


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    """Scenario in its file representation."""
    return ScenarioFile.from_scenario(scenario).model_dump(mode="json", exclude_none=True)


def save_scenario(scenario: Scenario, path: Path) -> None:
    """Write a scenario file that ``load_scenario`` reads back unchanged."""
    write_text_atomic(Path(path), json.dumps(scenario_to_dict(scenario), indent=2) + "\n")
