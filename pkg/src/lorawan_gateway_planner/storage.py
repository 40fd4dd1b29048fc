"""LoRaWAN Gateway Planner run-directory storage."""

import hashlib
import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from lorawan_gateway_planner.errors import format_validation_errors
from lorawan_gateway_planner.models import GainMatrix, PdrReport, PlanRecord, SweepReport

logger = logging.getLogger(__name__)


def write_text_atomic(path: Path, text: str) -> None:
    """Write text through a temporary file and an atomic rename.

    Args:
        path: Destination file; parent directories are created.
        text: Content to write.

    Raises:
        PermissionError: If the file cannot be written due to permissions.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_file = path.with_suffix(path.suffix + ".tmp")
    try:
        with open(temp_file, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        temp_file.replace(path)
    except PermissionError:
        if temp_file.exists():
            temp_file.unlink()
        raise PermissionError(f"Permission denied writing to {path}")
    except Exception:
        if temp_file.exists():
            temp_file.unlink()
        raise


def write_frame_atomic(path: Path, frame: pd.DataFrame) -> None:
    """Write a DataFrame as CSV without index, atomically."""
    write_text_atomic(path, frame.to_csv(index=False, lineterminator="\n"))


def file_sha256(path: Path) -> str:
    """Hex SHA-256 of a file's bytes."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def alpha_to_frame(alpha: GainMatrix) -> pd.DataFrame:
    """Alpha matrix as ``ed_index,p_1,...,p_P`` rows."""
    columns = [f"p_{p}" for p in range(1, alpha.n_candidates + 1)]
    frame = pd.DataFrame(alpha.alpha_dbm, columns=columns)
    frame.insert(0, "ed_index", np.arange(1, alpha.n_eds + 1))
    return frame


def save_alpha_csv(alpha: GainMatrix, path: Path) -> None:
    """Export alpha; ``-inf`` is written literally."""
    write_frame_atomic(path, alpha_to_frame(alpha))


def load_alpha_csv(path: Path, tx_power_dbm: float = 0.0, source: str = "") -> GainMatrix:
    """Import an alpha CSV written by ``save_alpha_csv``.

    Args:
        path: CSV with header ``ed_index,p_1,...,p_P``.
        tx_power_dbm: Transmit power the matrix was computed with.
        source: Label recorded on the matrix; defaults to the file name.

    Returns:
        GainMatrix with rows ordered by ``ed_index``.

    Raises:
        ValueError: If the header or values are malformed.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError:
        raise ValueError(f"Alpha file not found: {path}")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ValueError(f"Invalid alpha CSV {path}: {e}")

    expected = ["ed_index"] + [f"p_{p}" for p in range(1, len(frame.columns))]
    if list(frame.columns) != expected or len(frame.columns) < 2:
        raise ValueError(f"Alpha CSV {path} must have header 'ed_index,p_1,...,p_P'")
    if list(frame["ed_index"]) != list(range(1, len(frame) + 1)):
        raise ValueError(f"Alpha CSV {path} must list ed_index 1..D in order")

    values = frame[expected[1:]].to_numpy(dtype=float)
    if np.isnan(values).any():
        bad_row = int(np.argwhere(np.isnan(values))[0][0]) + 2
        raise ValueError(f"Alpha CSV {path} has a missing or non-numeric value on line {bad_row}")
    return GainMatrix(alpha_dbm=values, tx_power_dbm=tx_power_dbm, source=source or path.stem)


class RunStore:
    """Files belonging to one run directory.

    Every write is atomic and deterministic, so identical runs produce
    identical bytes.
    """

    def __init__(self, run_dir: Path):
        """Initialize the store and create the directory.

        Args:
            run_dir: Directory holding plan, alpha, sweep and report files.
        """
        self.run_dir = Path(run_dir).resolve()
        self.plan_file = self.run_dir / "plan.json"
        self.alpha_file = self.run_dir / "alpha.csv"
        self.sweep_file = self.run_dir / "sweep.csv"
        self.pdr_file = self.run_dir / "pdr.json"
        self.summary_file = self.run_dir / "summary.csv"

        self.run_dir.mkdir(parents=True, exist_ok=True)

    def cdf_file(self, label: str, number: Optional[int] = None) -> Path:
        """CDF output path for one label, ``cdf_<number>_<label>.csv`` when numbered."""
        safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in label)
        prefix = "cdf" if number is None else f"cdf_{number}"
        return self.run_dir / f"{prefix}_{safe}.csv"

    def _write_json(self, path: Path, payload: dict) -> None:
        write_text_atomic(path, json.dumps(payload, indent=2) + "\n")
        logger.debug("Wrote %s", path)

    def save_plan(self, record: PlanRecord) -> Path:
        """Persist a plan record."""
        self._write_json(self.plan_file, record.model_dump(mode="json"))
        return self.plan_file

    def save_alpha(self, alpha: GainMatrix) -> Path:
        """Persist the alpha matrix next to the plan."""
        save_alpha_csv(alpha, self.alpha_file)
        return self.alpha_file

    def save_sweep(self, report: SweepReport) -> Path:
        """Persist a sweep as ``rho_dbm,status,objective,selected``."""
        frame = pd.DataFrame(
            {
                "rho_dbm": [e.rho_dbm for e in report.entries],
                "status": [e.status.value for e in report.entries],
                "objective": [e.objective for e in report.entries],
                "selected": [";".join(str(p) for p in e.selected) for e in report.entries],
            }
        )
        write_frame_atomic(self.sweep_file, frame)
        return self.sweep_file

    def save_pdr(self, report: PdrReport) -> Path:
        """Persist a simulation report."""
        self._write_json(self.pdr_file, report.model_dump(mode="json"))
        return self.pdr_file

    def save_frame(self, path: Path, frame: pd.DataFrame) -> Path:
        """Persist any report table inside the run directory."""
        write_frame_atomic(path, frame)
        return path


def load_plan(path: Path) -> PlanRecord:
    """Load a plan file.

    Raises:
        ValueError: If the file is missing or malformed.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return PlanRecord(**data)
    except FileNotFoundError:
        raise ValueError(f"Plan file not found: {path}")
    except json.JSONDecodeError as e:
        raise ValueError(f"Invalid JSON in {path}: {e}")
    except ValidationError as e:
        raise ValueError(f"Invalid plan file {path}: {format_validation_errors(e)}")


def load_pdr(path: Path) -> PdrReport:
    """Load a simulation report file.

    Raises:
        ValueError: If the file is missing or malformed.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return PdrReport(**data)
    except FileNotFoundError:
        raise ValueError(f"Report file not found: {path}")
    except json.JSONDecodeError as e:
        raise ValueError(f"Invalid JSON in {path}: {e}")
    except ValidationError as e:
        raise ValueError(f"Invalid report file {path}: {format_validation_errors(e)}")

