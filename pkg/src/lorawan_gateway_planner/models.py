"""LoRaWAN Gateway Planner data models.

Indices exposed by these models are 1-based: candidate ``p`` in ``1..P`` and
ED ``d`` in ``1..D``, matching list order. Matrices are stored 0-based.
"""

import math
import sys
from enum import Enum
from typing import Annotated, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from lorawan_gateway_planner.config import ChannelConfig

if sys.version_info >= (3, 11):
    from enum import StrEnum
else:  # pragma: no cover - Python 3.10 shim matching enum.StrEnum semantics

    class StrEnum(str, Enum):
        """Backport of ``enum.StrEnum``: str() and format() yield the value."""

        __str__ = str.__str__
        __format__ = str.__format__

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()

# 1-based candidate or ED index
Index = Annotated[int, Field(ge=1)]


class Position(BaseModel):
    """Cartesian point in meters; ``z_m`` is height above ground."""

    model_config = ConfigDict(frozen=True)

    x_m: float
    y_m: float
    z_m: float

    @field_validator("x_m", "y_m", "z_m")
    @classmethod
    def coordinate_must_be_finite(cls, v: float) -> float:
        """Reject NaN and infinite coordinates."""
        if not math.isfinite(v):
            raise ValueError("coordinate must be finite")
        return v

    def as_list(self) -> List[float]:
        """Coordinates as ``[x, y, z]`` for file formats."""
        return [self.x_m, self.y_m, self.z_m]


class GridMeta(BaseModel):
    """Geometry of a row-major candidate grid."""

    origin: Position
    nx: int = Field(ge=1)
    ny: int = Field(ge=1)
    spacing_m: float = Field(gt=0)


class Scenario(BaseModel):
    """Candidate gateway positions and end-device layout."""

    model_config = ConfigDict(frozen=True)

    gw_candidates: List[Position]
    eds: List[Position]
    grid_meta: Optional[GridMeta] = None

    @field_validator("gw_candidates")
    @classmethod
    def candidates_must_be_valid(cls, v: List[Position]) -> List[Position]:
        """Require at least one candidate, positive heights and distinct (x, y)."""
        if not v:
            raise ValueError("gw_candidates must be non-empty")
        seen: dict[Tuple[float, float], int] = {}
        for p, pos in enumerate(v, start=1):
            if pos.z_m <= 0:
                raise ValueError(f"candidate {p} height must be > 0")
            key = (pos.x_m, pos.y_m)
            if key in seen:
                raise ValueError(
                    f"duplicate candidate coordinates ({pos.x_m}, {pos.y_m}) at candidates {seen[key]} and {p}"
                )
            seen[key] = p
        return v

    @field_validator("eds")
    @classmethod
    def eds_must_be_valid(cls, v: List[Position]) -> List[Position]:
        """Require at least one ED with positive height."""
        if not v:
            raise ValueError("eds must be non-empty")
        for d, pos in enumerate(v, start=1):
            if pos.z_m <= 0:
                raise ValueError(f"ED {d} height must be > 0")
        return v

    @property
    def n_candidates(self) -> int:
        """Number of candidate positions P."""
        return len(self.gw_candidates)

    @property
    def n_eds(self) -> int:
        """Number of end devices D."""
        return len(self.eds)


Triple = Tuple[float, float, float]


class GridMetaFile(BaseModel):
    """``grid_meta`` block of a scenario file."""

    origin: Triple = (0.0, 0.0, 0.0)
    nx: int = Field(ge=1)
    ny: int = Field(ge=1)
    spacing_m: float = Field(gt=0)


class ScenarioFile(BaseModel):
    """Scenario file schema: positions as ``[x, y, z]`` triples in meters."""

    gw_candidates: List[Triple]
    eds: List[Triple]
    grid_meta: Optional[GridMetaFile] = None

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "ScenarioFile":
        """File representation of a scenario."""
        meta = scenario.grid_meta
        return cls(
            gw_candidates=[tuple(pos.as_list()) for pos in scenario.gw_candidates],
            eds=[tuple(pos.as_list()) for pos in scenario.eds],
            grid_meta=None
            if meta is None
            else GridMetaFile(origin=tuple(meta.origin.as_list()), nx=meta.nx, ny=meta.ny, spacing_m=meta.spacing_m),
        )

    def to_scenario(self) -> Scenario:
        """Validated Scenario.

        Raises:
            ValidationError: If a position or the grid metadata breaks an invariant.
        """
        grid_meta = None
        if self.grid_meta is not None:
            x, y, z = self.grid_meta.origin
            grid_meta = GridMeta(
                origin=Position(x_m=x, y_m=y, z_m=z),
                nx=self.grid_meta.nx,
                ny=self.grid_meta.ny,
                spacing_m=self.grid_meta.spacing_m,
            )
        return Scenario(
            gw_candidates=[Position(x_m=x, y_m=y, z_m=z) for x, y, z in self.gw_candidates],
            eds=[Position(x_m=x, y_m=y, z_m=z) for x, y, z in self.eds],
            grid_meta=grid_meta,
        )


class GainMap(BaseModel):
    """Path-gain raster exported for one gateway candidate.

    ``values`` has shape ``(ny, nx)``; row ``j`` holds cells at
    ``y = origin_y + j * cell_size_m``. ``-inf`` marks cells no ray reached.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    origin: Tuple[float, float]
    cell_size_m: float = Field(gt=0)
    nx: int = Field(ge=1)
    ny: int = Field(ge=1)
    values: np.ndarray
    gw_index: int = Field(ge=1)

    @model_validator(mode="after")
    def raster_must_match(self) -> "GainMap":
        """Check raster shape and reject NaN / +inf cells."""
        if self.values.shape != (self.ny, self.nx):
            raise ValueError(f"values shape {self.values.shape} != (ny, nx) = ({self.ny}, {self.nx})")
        if np.isnan(self.values).any():
            raise ValueError("values must not contain NaN")
        if np.isposinf(self.values).any():
            raise ValueError("values must not contain +inf")
        return self

    def extents(self) -> Tuple[float, float, float, float]:
        """Cell-center bounding box ``(x_min, x_max, y_min, y_max)``."""
        x0, y0 = self.origin
        return (x0, x0 + (self.nx - 1) * self.cell_size_m, y0, y0 + (self.ny - 1) * self.cell_size_m)


class MapMeta(BaseModel):
    """``meta.json`` of a coverage-map directory."""

    cell_size_m: float = Field(gt=0)
    origin: Tuple[float, float]


class GainMatrix(BaseModel):
    """Received power alpha[d][p] in dBm for every (ED, candidate) pair."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    alpha_dbm: np.ndarray
    tx_power_dbm: float = 0.0
    source: str

    @field_validator("alpha_dbm")
    @classmethod
    def alpha_must_be_finite_or_sentinel(cls, v: np.ndarray) -> np.ndarray:
        """Entries are finite or -inf."""
        v = np.asarray(v, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"alpha must be a non-empty D x P matrix, got shape {v.shape}")
        if np.isnan(v).any() or np.isposinf(v).any():
            raise ValueError("alpha entries must be finite or -inf")
        return v

    @property
    def n_eds(self) -> int:
        """Number of rows D."""
        return int(self.alpha_dbm.shape[0])

    @property
    def n_candidates(self) -> int:
        """Number of columns P."""
        return int(self.alpha_dbm.shape[1])


class CoverageMatrix(BaseModel):
    """Binary coverage indicators beta[d][p] at threshold ``rho_dbm``."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    beta: np.ndarray
    rho_dbm: float

    @field_validator("beta")
    @classmethod
    def beta_must_be_binary_matrix(cls, v: np.ndarray) -> np.ndarray:
        """Coerce to a non-empty boolean matrix."""
        v = np.asarray(v)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"beta must be a non-empty D x P matrix, got shape {v.shape}")
        if not np.isin(v, (0, 1)).all():
            raise ValueError("beta must be binary")
        return v.astype(bool)


class PlacementStatus(StrEnum):
    """Outcome of a placement solve."""

    OPTIMAL = "optimal"
    FEASIBLE_HEURISTIC = "feasible_heuristic"
    INFEASIBLE = "infeasible"


class SolverStats(BaseModel):
    """Search statistics; runtime stays out of serialized output."""

    nodes_explored: int = 0
    runtime_s: float = Field(default=0.0, exclude=True)


class PlacementSolution(BaseModel):
    """Selected candidate indices (1-based) and solve status."""

    selected: List[Index] = []
    objective: int = 0
    status: PlacementStatus
    uncovered: List[Index] = []
    stats: SolverStats = SolverStats()

    @model_validator(mode="after")
    def objective_must_match_selection(self) -> "PlacementSolution":
        """Keep selection sorted and objective equal to its size."""
        self.selected = sorted(self.selected)
        if self.objective != len(self.selected):
            raise ValueError(f"objective {self.objective} != |selected| {len(self.selected)}")
        if self.status == PlacementStatus.INFEASIBLE and self.selected:
            raise ValueError("infeasible solutions carry no selection")
        return self

    @property
    def is_feasible(self) -> bool:
        """True for optimal and heuristic solutions."""
        return self.status != PlacementStatus.INFEASIBLE


class SweepEntry(BaseModel):
    """One threshold of a sweep."""

    rho_dbm: float
    status: PlacementStatus
    objective: int
    selected: List[Index]
    avg_ed_best_power_dbm: Optional[float] = None


class SweepReport(BaseModel):
    """Placement results over ascending thresholds."""

    entries: List[SweepEntry]

    @field_validator("entries")
    @classmethod
    def entries_must_be_sorted(cls, v: List[SweepEntry]) -> List[SweepEntry]:
        """Entries ascend by threshold."""
        rhos = [e.rho_dbm for e in v]
        if rhos != sorted(rhos):
            raise ValueError("sweep entries must be sorted by rho ascending")
        return v


class PlanRecord(BaseModel):
    """Plan file contents: one solved placement plus how alpha was produced."""

    rho_dbm: float
    channel_source: str
    selected: List[Index]
    objective: int
    status: PlacementStatus
    uncovered: List[Index]
    stats: SolverStats
    scenario: str
    tx_power_dbm: float
    channel: Optional[ChannelConfig] = None
    rt_dir: Optional[str] = None
    # SHA-256 of the alpha.csv written with the plan
    alpha_sha256: Optional[str] = None

    def to_solution(self) -> PlacementSolution:
        """Placement part of the record."""
        return PlacementSolution(
            selected=self.selected,
            objective=self.objective,
            status=self.status,
            uncovered=self.uncovered,
            stats=self.stats,
        )


class EdPdr(BaseModel):
    """Packet counts for one ED."""

    ed: int = Field(ge=1)
    sent: int = Field(ge=0)
    delivered: int = Field(ge=0)

    @model_validator(mode="after")
    def delivered_must_not_exceed_sent(self) -> "EdPdr":
        """Delivered packets are a subset of sent packets."""
        if self.delivered > self.sent:
            raise ValueError(f"ED {self.ed}: delivered {self.delivered} > sent {self.sent}")
        return self

    @property
    def pdr(self) -> float:
        """Delivery ratio for this ED (0 when nothing was sent)."""
        return self.delivered / self.sent if self.sent else 0.0


class PdrReport(BaseModel):
    """Outcome of one uplink simulation."""

    pdr_overall: float
    per_ed: List[EdPdr]
    pdr_per_ed: List[float]
    collisions: int = 0
    below_sensitivity_drops: int = 0
    demod_blocked_drops: int = 0
    seed: int

    @model_validator(mode="after")
    def overall_must_match_counts(self) -> "PdrReport":
        """pdr_overall is total delivered over total sent."""
        sent = sum(e.sent for e in self.per_ed)
        delivered = sum(e.delivered for e in self.per_ed)
        expected = delivered / sent if sent else 0.0
        if not math.isclose(self.pdr_overall, expected, rel_tol=0, abs_tol=1e-12):
            raise ValueError(f"pdr_overall {self.pdr_overall} != {expected}")
        return self
