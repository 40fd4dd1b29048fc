"""LoRaWAN Gateway Planner configuration management."""

import copy
import json
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from lorawan_gateway_planner.errors import ConfigError, format_validation_errors

ChannelModelName = Literal["log_distance", "okumura_hata", "cost231", "uma_3gpp"]
SITE_INDEPENDENT_MODELS: tuple[str, ...] = ("log_distance", "okumura_hata", "cost231", "uma_3gpp")

DEFAULT_OUT_DIR = Path("planner-output")
SUPPORTED_BANDWIDTHS_HZ = (125_000, 250_000, 500_000)


class ChannelConfig(BaseModel):
    """Site-independent channel model selection and parameters.

    ``ref_loss_db`` left unset means free-space loss at ``d0_m``.
    """

    model: ChannelModelName = "log_distance"
    fc_hz: float = Field(default=1e9, gt=0)
    exponent: float = Field(default=3.76, gt=0)
    d0_m: float = Field(default=32.0, gt=0)
    ref_loss_db: Optional[float] = None
    environment: Literal["urban_small_medium", "urban_large", "suburban"] = "urban_small_medium"
    city_correction_db: float = 0.0
    los_mode: Literal["always_los", "always_nlos", "probabilistic"] = "always_nlos"
    los_seed: int = Field(default=0, ge=0)
    shadowing_sigma_db: float = Field(default=0.0, ge=0)
    shadowing_seed: int = Field(default=0, ge=0)
    min_distance_m: float = Field(default=1.0, gt=0)


class TrafficConfig(BaseModel):
    """Uplink traffic and receiver parameters for the packet simulation."""

    packets_per_ed: int = Field(default=1000, ge=1)
    sf: int = Field(default=7, ge=7, le=12)
    bandwidth_hz: int = 125_000
    coding_rate: str = "4/5"
    payload_bytes: int = Field(default=23, ge=0, le=255)
    preamble_symbols: int = Field(default=8, ge=0)
    duration_s: float = Field(default=600.0, gt=0)
    n_channels: int = Field(default=1, ge=1)
    capture_threshold_db: float = 6.0
    gw_demod_paths: int = Field(default=8, ge=1)
    duty_cycle_limit: Optional[float] = Field(default=None, gt=0, le=1)
    random_start: bool = True
    sensitivity_overrides: Dict[int, Dict[int, float]] = {}
    seed: int = Field(default=0, ge=0)

    @field_validator("coding_rate")
    @classmethod
    def coding_rate_must_be_lora(cls, v: str) -> str:
        """Accept 4/5 through 4/8."""
        if v.strip() not in {"4/5", "4/6", "4/7", "4/8"}:
            raise ValueError(f"coding_rate must be one of 4/5..4/8, got '{v}'")
        return v.strip()

    @property
    def cr_denominator(self) -> int:
        """Coding-rate denominator (5 for 4/5)."""
        return int(self.coding_rate.split("/")[1])


class SweepRange(BaseModel):
    """Inclusive threshold sweep range in dBm."""

    start: float = -120.0
    end: float = -80.0
    step: float = 5.0

    @model_validator(mode="after")
    def range_must_be_ordered(self) -> "SweepRange":
        """Ensure start <= end and a positive step."""
        if self.step <= 0:
            raise ValueError("sweep step must be > 0")
        if self.start > self.end:
            raise ValueError("sweep start must be <= end")
        return self

    def values(self) -> List[float]:
        """Threshold values from start to end inclusive."""
        count = int(round((self.end - self.start) / self.step)) + 1
        values = [self.start + i * self.step for i in range(count)]
        return [v for v in values if v <= self.end + 1e-9]


class RunConfig(BaseModel):
    """Everything one CLI invocation needs."""

    scenario: Optional[Path] = None
    channel: Optional[ChannelConfig] = None
    rt_dir: Optional[Path] = None
    rho_dbm: float = -90.0
    sweep: SweepRange = SweepRange()
    solver: Literal["exact", "greedy"] = "exact"
    tx_power_dbm: float = 0.0
    traffic: TrafficConfig = TrafficConfig()
    out_dir: Path = DEFAULT_OUT_DIR

    @model_validator(mode="after")
    def channel_sources_exclusive(self) -> "RunConfig":
        """A run reads its gains from a channel model or a map directory, not both."""
        if self.channel is not None and self.rt_dir is not None:
            raise ConfigError("--channel and --rt-dir are mutually exclusive")
        return self

    def require_channel_source(self) -> None:
        """Raise unless exactly one gain source is configured.

        Raises:
            ConfigError: If neither a channel model nor an RT directory is set.
        """
        if self.channel is None and self.rt_dir is None:
            raise ConfigError("one of --channel or --rt-dir is required")

    def scenario_path(self) -> Path:
        """Configured scenario file, or the shipped replication fixture."""
        return self.scenario if self.scenario is not None else default_scenario_path()


def default_scenario_path() -> Path:
    """Path of the shipped replication scenario (100 candidates, 54 EDs)."""
    return Path(str(resources.files("lorawan_gateway_planner") / "data" / "replication_scenario.json"))


def get_sensitivity_table() -> Dict[int, Dict[int, float]]:
    """Get default receiver sensitivity per bandwidth and spreading factor.

    Returns:
        Mapping ``bandwidth_hz -> {sf: dBm}``. Returns a copy to prevent
        accidental modification.
    """
    table = {
        125_000: {7: -130.0, 8: -132.5, 9: -135.0, 10: -137.5, 11: -140.0, 12: -142.5},
    }
    return copy.deepcopy(table)


def _drop_none(values: Dict[str, Any]) -> Dict[str, Any]:
    return {k: v for k, v in values.items() if v is not None}


def get_run_config(
    config_path: Optional[Path] = None,
    *,
    scenario: Optional[Path] = None,
    channel: Optional[str] = None,
    rt_dir: Optional[Path] = None,
    rho_dbm: Optional[float] = None,
    rho_start: Optional[float] = None,
    rho_end: Optional[float] = None,
    rho_step: Optional[float] = None,
    solver: Optional[str] = None,
    tx_power_dbm: Optional[float] = None,
    packets: Optional[int] = None,
    sf: Optional[int] = None,
    duration_s: Optional[float] = None,
    seed: Optional[int] = None,
    out_dir: Optional[Path] = None,
) -> RunConfig:
    """Build the run configuration from an optional JSON file and CLI values.

    Values given on the command line (not ``None``) win over the file.

    Args:
        config_path: Optional JSON file shaped like ``RunConfig``.
        scenario: Scenario file path.
        channel: Channel model name; other model parameters come from the file.
        rt_dir: Directory of per-candidate gain maps.
        rho_dbm: Coverage threshold for ``plan``.
        rho_start: Sweep start.
        rho_end: Sweep end.
        rho_step: Sweep step.
        solver: ``exact`` or ``greedy``.
        tx_power_dbm: Transmit power added to path gains.
        packets: Packets per ED.
        sf: Spreading factor.
        duration_s: Simulated duration.
        seed: Seed for simulation, shadowing and LOS draws.
        out_dir: Output directory.

    Returns:
        Validated RunConfig.

    Raises:
        ConfigError: If the file is unreadable or the merged values are invalid.
    """
    data: Dict[str, Any] = {}
    if config_path is not None:
        try:
            data = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {config_path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in {config_path}: {e}")
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {config_path} must hold a JSON object")

    # A source chosen on the command line replaces the file's source
    if channel is not None and rt_dir is None:
        data.pop("rt_dir", None)
    if rt_dir is not None and channel is None:
        data.pop("channel", None)

    if channel is not None:
        channel_data = data.get("channel") or {}
        data["channel"] = {**channel_data, "model": channel}
    if seed is not None and isinstance(data.get("channel"), dict):
        data["channel"] = {**data["channel"], "shadowing_seed": seed, "los_seed": seed}

    data.update(_drop_none({
        "scenario": scenario,
        "rt_dir": rt_dir,
        "rho_dbm": rho_dbm,
        "solver": solver,
        "tx_power_dbm": tx_power_dbm,
        "out_dir": out_dir,
    }))
    data["sweep"] = {
        **(data.get("sweep") or {}),
        **_drop_none({"start": rho_start, "end": rho_end, "step": rho_step}),
    }
    data["traffic"] = {
        **(data.get("traffic") or {}),
        **_drop_none({"packets_per_ed": packets, "sf": sf, "duration_s": duration_s, "seed": seed}),
    }

    try:
        return RunConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {format_validation_errors(e)}")
