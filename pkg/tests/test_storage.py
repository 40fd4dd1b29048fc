"""Test LoRaWAN Gateway Planner run-directory storage."""

import json

import numpy as np
import pytest

from lorawan_gateway_planner.models import (
    EdPdr,
    GainMatrix,
    PdrReport,
    PlacementStatus,
    PlanRecord,
    SolverStats,
    SweepEntry,
    SweepReport,
)
from lorawan_gateway_planner.storage import (
    RunStore,
    file_sha256,
    load_alpha_csv,
    load_pdr,
    load_plan,
    save_alpha_csv,
    write_text_atomic,
)


def make_record(**overrides):
    """Feasible plan record with sensible defaults."""
    values = {
        "rho_dbm": -90.0,
        "channel_source": "log_distance",
        "selected": [2, 5],
        "objective": 2,
        "status": PlacementStatus.OPTIMAL,
        "uncovered": [],
        "stats": SolverStats(nodes_explored=12, runtime_s=0.25),
        "scenario": "scenario.json",
        "tx_power_dbm": 0.0,
    }
    values.update(overrides)
    return PlanRecord(**values)


class TestRunStore:
    """Test run directory setup."""

    def test_creates_directory(self, tmp_path):
        """Creates the run directory if missing."""
        run_dir = tmp_path / "run" / "nested"

        store = RunStore(run_dir)

        assert run_dir.is_dir()
        assert store.plan_file == run_dir.resolve() / "plan.json"
        assert store.alpha_file.name == "alpha.csv"

    def test_cdf_file_sanitizes_label(self, tmp_path):
        """Channel labels become safe file names."""
        store = RunStore(tmp_path)

        assert store.cdf_file("rt:maps dir").name == "cdf_rt_maps_dir.csv"

    def test_cdf_file_numbered(self, tmp_path):
        """Numbered CDFs keep repeated labels apart."""
        store = RunStore(tmp_path)

        assert store.cdf_file("okumura_hata", 1).name == "cdf_1_okumura_hata.csv"
        assert store.cdf_file("okumura_hata", 2) != store.cdf_file("okumura_hata", 1)

    def test_file_sha256(self, tmp_path):
        """Digest follows the bytes on disk."""
        path = tmp_path / "alpha.csv"
        path.write_text("ed_index,p_1\n1,-90.0\n")
        before = file_sha256(path)
        path.write_text("ed_index,p_1\n1,-91.0\n")

        assert len(before) == 64
        assert file_sha256(path) != before


class TestWriteTextAtomic:
    """Test atomic writes."""

    def test_writes_and_cleans_up(self, tmp_path):
        """No temporary file is left behind."""
        path = tmp_path / "out.txt"

        write_text_atomic(path, "hello\n")

        assert path.read_text() == "hello\n"
        assert not (tmp_path / "out.txt.tmp").exists()

    def test_overwrites(self, tmp_path):
        """Existing files are replaced."""
        path = tmp_path / "out.txt"
        path.write_text("old")

        write_text_atomic(path, "new")

        assert path.read_text() == "new"


class TestAlphaCsv:
    """Test alpha import and export."""

    def test_round_trip_with_neg_inf(self, tmp_path):
        """-inf survives the round trip; values are exact."""
        alpha = GainMatrix(alpha_dbm=np.array([[-90.123456789, -np.inf], [-100.0, -75.5]]), source="x")
        path = tmp_path / "alpha.csv"

        save_alpha_csv(alpha, path)
        loaded = load_alpha_csv(path)

        assert path.read_text().splitlines()[0] == "ed_index,p_1,p_2"
        assert np.array_equal(loaded.alpha_dbm, alpha.alpha_dbm)
        assert loaded.source == "alpha"

    def test_bad_header(self, tmp_path):
        """Header must be ed_index,p_1,...,p_P."""
        path = tmp_path / "alpha.csv"
        path.write_text("ed,p_1\n1,-90\n")

        with pytest.raises(ValueError, match="header"):
            load_alpha_csv(path)

    def test_rows_out_of_order(self, tmp_path):
        """Rows must list EDs 1..D in order."""
        path = tmp_path / "alpha.csv"
        path.write_text("ed_index,p_1\n2,-90\n1,-80\n")

        with pytest.raises(ValueError, match="in order"):
            load_alpha_csv(path)

    def test_missing_value_names_line(self, tmp_path):
        """Empty cells report their line."""
        path = tmp_path / "alpha.csv"
        path.write_text("ed_index,p_1,p_2\n1,-90,-91\n2,,-80\n")

        with pytest.raises(ValueError, match="line 3"):
            load_alpha_csv(path)

    def test_missing_file(self, tmp_path):
        """Missing files are reported."""
        with pytest.raises(ValueError, match="not found"):
            load_alpha_csv(tmp_path / "nope.csv")


class TestPlanFiles:
    """Test plan persistence."""

    def test_runtime_not_serialized(self, tmp_path):
        """Plan files stay deterministic: no runtime."""
        store = RunStore(tmp_path)

        store.save_plan(make_record())
        data = json.loads(store.plan_file.read_text())

        assert data["stats"] == {"nodes_explored": 12}
        assert data["selected"] == [2, 5]
        assert data["status"] == "optimal"

    def test_round_trip(self, tmp_path):
        """Saved plans load back."""
        store = RunStore(tmp_path)
        record = make_record()

        loaded = load_plan(store.save_plan(record))

        assert loaded.selected == record.selected
        assert loaded.to_solution().is_feasible

    def test_missing_plan(self, tmp_path):
        """Missing plan files are reported."""
        with pytest.raises(ValueError, match="not found"):
            load_plan(tmp_path / "plan.json")

    def test_invalid_json(self, tmp_path):
        """Broken JSON is reported."""
        path = tmp_path / "plan.json"
        path.write_text("{broken")

        with pytest.raises(ValueError, match="Invalid JSON"):
            load_plan(path)

    def test_invalid_fields(self, tmp_path):
        """Schema violations are reported."""
        path = tmp_path / "plan.json"
        path.write_text(json.dumps({"rho_dbm": -90}))

        with pytest.raises(ValueError, match="Invalid plan file"):
            load_plan(path)

    def test_zero_index_rejected(self, tmp_path):
        """Candidate indices in plan files are 1-based."""
        path = RunStore(tmp_path).save_plan(make_record())
        data = json.loads(path.read_text())
        data["selected"] = [0, 5]
        path.write_text(json.dumps(data))

        with pytest.raises(ValueError, match=r"selected\.0"):
            load_plan(path)


class TestSweepAndPdrFiles:
    """Test sweep CSV and PDR report files."""

    def test_sweep_csv(self, tmp_path):
        """Selections join with semicolons; infeasible rows stay empty."""
        store = RunStore(tmp_path)
        report = SweepReport(entries=[
            SweepEntry(rho_dbm=-100.0, status=PlacementStatus.OPTIMAL, objective=2, selected=[1, 4]),
            SweepEntry(rho_dbm=-50.0, status=PlacementStatus.INFEASIBLE, objective=0, selected=[]),
        ])

        store.save_sweep(report)

        assert store.sweep_file.read_text().splitlines() == [
            "rho_dbm,status,objective,selected",
            "-100.0,optimal,2,1;4",
            "-50.0,infeasible,0,",
        ]

    def test_pdr_round_trip(self, tmp_path):
        """Reports load back unchanged."""
        store = RunStore(tmp_path)
        report = PdrReport(
            pdr_overall=0.75,
            per_ed=[EdPdr(ed=1, sent=2, delivered=2), EdPdr(ed=2, sent=2, delivered=1)],
            pdr_per_ed=[1.0, 0.5],
            collisions=1,
            seed=3,
        )

        loaded = load_pdr(store.save_pdr(report))

        assert loaded == report

    def test_missing_pdr(self, tmp_path):
        """Missing reports are reported."""
        with pytest.raises(ValueError, match="not found"):
            load_pdr(tmp_path / "pdr.json")
