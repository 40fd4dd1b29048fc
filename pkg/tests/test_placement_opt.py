"""Test gateway placement solvers."""

import math
import warnings

import numpy as np
import pytest

from lorawan_gateway_planner.config import SITE_INDEPENDENT_MODELS, ChannelConfig
from lorawan_gateway_planner.coverage import build_alpha, threshold
from lorawan_gateway_planner.errors import InfeasiblePlanError, ModelValidityWarning, SolverRefusalError
from lorawan_gateway_planner.models import (
    CoverageMatrix,
    GainMatrix,
    PlacementSolution,
    PlacementStatus,
)
from lorawan_gateway_planner.placement_opt import (
    avg_ed_best_power,
    brute_force,
    shared_positions,
    solve,
    solve_exact,
    solve_greedy,
    sweep_rho,
)
from lorawan_gateway_planner.scenario import replication_scenario


def cover(matrix) -> CoverageMatrix:
    """CoverageMatrix from a nested list or array."""
    return CoverageMatrix(beta=np.asarray(matrix), rho_dbm=-90.0)


def random_instance(seed: int, max_eds: int = 30, max_candidates: int = 16) -> CoverageMatrix:
    """Seeded random coverage matrix."""
    rng = np.random.default_rng(seed)
    n_eds = int(rng.integers(1, max_eds + 1))
    n_candidates = int(rng.integers(1, max_candidates + 1))
    density = rng.uniform(0.1, 0.5)
    return cover(rng.random((n_eds, n_candidates)) < density)


def is_cover(beta: CoverageMatrix, selected) -> bool:
    """True if the selected columns cover every row."""
    return bool(beta.beta[:, [p - 1 for p in selected]].any(axis=1).all())


class TestSolveExact:
    """Test the exact branch-and-bound solver."""

    def test_identity(self):
        """Each ED has a unique coverer."""
        solution = solve_exact(cover(np.eye(3)))

        assert solution.selected == [1, 2, 3]
        assert solution.objective == 3
        assert solution.status == PlacementStatus.OPTIMAL

    def test_dominating_column(self):
        """A single all-ones column is the whole answer."""
        beta = np.zeros((4, 3))
        beta[:, 1] = 1

        assert solve_exact(cover(beta)).selected == [2]

    def test_small_instance(self):
        """p1 = {1, 2}, p2 = {3, 4}, p3 = {2, 3} needs {1, 2}."""
        beta = [[1, 0, 0], [1, 0, 1], [0, 1, 1], [0, 1, 0]]

        solution = solve_exact(cover(beta))

        assert solution.objective == 2
        assert solution.selected == [1, 2]

    def test_lexicographic_tie_break(self):
        """All-ones matrix picks candidate 1."""
        assert solve_exact(cover(np.ones((6, 5)))).selected == [1]

    def test_infeasible(self):
        """An uncoverable ED yields infeasible with no selection."""
        beta = [[1, 0], [0, 0], [0, 1]]

        solution = solve_exact(cover(beta))

        assert solution.status == PlacementStatus.INFEASIBLE
        assert solution.uncovered == [2]
        assert solution.selected == []
        assert solution.objective == 0

    def test_matches_brute_force(self):
        """Same optimum and same tie-break as exhaustive search on 200 random instances."""
        for seed in range(200):
            beta = random_instance(seed)
            exact = solve_exact(beta)
            oracle = brute_force(beta)

            assert exact.status == oracle.status
            assert exact.objective == oracle.objective
            assert exact.selected == oracle.selected
            if exact.is_feasible:
                assert is_cover(beta, exact.selected)

    def test_deterministic(self):
        """Identical input gives identical selection."""
        beta = random_instance(42)

        assert solve_exact(beta).selected == solve_exact(beta).selected

    def test_column_permutation(self):
        """Permuting columns keeps the optimum size."""
        for seed in range(30):
            beta = random_instance(seed, max_eds=20, max_candidates=12)
            perm = np.random.default_rng(seed + 1000).permutation(beta.beta.shape[1])
            permuted = cover(beta.beta[:, perm])

            assert solve_exact(permuted).objective == solve_exact(beta).objective

    def test_unique_optimum_permutes(self):
        """With a unique optimum the selection follows the permutation."""
        beta = np.array([[1, 0, 0, 0], [1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 1, 1]])
        perm = np.array([2, 0, 3, 1])

        original = solve_exact(cover(beta)).selected
        permuted = solve_exact(cover(beta[:, perm])).selected

        assert original == [1, 3]
        assert sorted(int(perm[p - 1]) + 1 for p in permuted) == original

    def test_all_ones_column_makes_optimum_one(self):
        """Adding a full column drops the optimum to 1."""
        for seed in range(20):
            beta = random_instance(seed).beta
            extended = np.hstack([beta, np.ones((beta.shape[0], 1), dtype=bool)])

            assert solve_exact(cover(extended)).objective == 1

    def test_counts_nodes(self):
        """Search statistics are recorded."""
        solution = solve_exact(random_instance(7))

        assert solution.stats.nodes_explored >= 0
        assert solution.stats.runtime_s >= 0.0


class TestSolveGreedy:
    """Test the greedy heuristic."""

    def test_single_full_column(self):
        """A column covering everything is taken alone."""
        beta = np.zeros((3, 4))
        beta[:, 2] = 1

        solution = solve_greedy(cover(beta))

        assert solution.selected == [3]
        assert solution.status == PlacementStatus.FEASIBLE_HEURISTIC

    def test_identity(self):
        """Identity forces every column."""
        assert solve_greedy(cover(np.eye(4))).objective == 4

    def test_bounded_by_exact(self):
        """exact <= greedy <= exact * (ln D + 1) on 100 random 20 x 12 instances."""
        for seed in range(100):
            rng = np.random.default_rng(seed)
            beta = cover(rng.random((20, 12)) < 0.3)
            exact = solve_exact(beta)
            greedy = solve_greedy(beta)
            if not exact.is_feasible:
                assert not greedy.is_feasible
                continue

            assert exact.objective <= greedy.objective <= exact.objective * (math.log(20) + 1)
            assert is_cover(beta, greedy.selected)

    def test_infeasible(self):
        """Uncoverable EDs are reported."""
        assert solve_greedy(cover([[0, 0], [1, 0]])).uncovered == [1]


class TestBruteForce:
    """Test the exhaustive oracle."""

    def test_all_ones(self):
        """Lowest index wins ties."""
        solution = brute_force(cover(np.ones((4, 5))))

        assert solution.selected == [1]
        assert solution.objective == 1

    def test_infeasible(self):
        """Uncoverable ED gives infeasible."""
        assert brute_force(cover([[1, 0], [0, 0]])).status == PlacementStatus.INFEASIBLE

    def test_refuses_large_instances(self):
        """More than 24 candidates is refused."""
        with pytest.raises(SolverRefusalError):
            brute_force(cover(np.ones((2, 25))))


class TestSolveDispatch:
    """Test solver selection by name."""

    def test_unknown_solver(self):
        """Unknown names are rejected."""
        with pytest.raises(ValueError, match="Unknown solver"):
            solve(cover(np.eye(2)), "simplex")

    def test_greedy_by_name(self):
        """Greedy is selectable by name."""
        assert solve(cover(np.eye(2)), "greedy").status == PlacementStatus.FEASIBLE_HEURISTIC


class TestAvgEdBestPower:
    """Test the average ED received power."""

    def test_single_gateway_mean(self):
        """One gateway: mean of its column."""
        alpha = GainMatrix(alpha_dbm=np.array([[-80.0], [-90.0]]), source="test")
        solution = PlacementSolution(selected=[1], objective=1, status=PlacementStatus.OPTIMAL)

        assert avg_ed_best_power(alpha, solution) == -85.0

    def test_more_gateways_never_lower(self):
        """Adding a gateway never decreases the average."""
        rng = np.random.default_rng(3)
        alpha = GainMatrix(alpha_dbm=rng.uniform(-120, -70, size=(10, 5)), source="test")
        one = PlacementSolution(selected=[2], objective=1, status=PlacementStatus.OPTIMAL)
        two = PlacementSolution(selected=[2, 4], objective=2, status=PlacementStatus.OPTIMAL)

        assert avg_ed_best_power(alpha, two) >= avg_ed_best_power(alpha, one)

    def test_infeasible_refused(self):
        """Infeasible placements have no average power."""
        alpha = GainMatrix(alpha_dbm=np.array([[-80.0]]), source="test")
        solution = PlacementSolution(status=PlacementStatus.INFEASIBLE, uncovered=[1])

        with pytest.raises(InfeasiblePlanError):
            avg_ed_best_power(alpha, solution)


class TestSweepRho:
    """Test threshold sweeps."""

    def test_very_low_threshold(self):
        """Below every value a single candidate suffices."""
        rng = np.random.default_rng(5)
        alpha = GainMatrix(alpha_dbm=rng.uniform(-130, -70, size=(15, 8)), source="test")

        entry = sweep_rho(alpha, [-200.0]).entries[0]

        assert entry.objective == 1
        assert entry.selected == [1]

    def test_above_max_is_infeasible(self):
        """Above the strongest link nothing is coverable."""
        alpha = GainMatrix(alpha_dbm=np.array([[-80.0, -85.0]]), source="test")

        entry = sweep_rho(alpha, [-79.0]).entries[0]

        assert entry.status == PlacementStatus.INFEASIBLE
        assert entry.avg_ed_best_power_dbm is None

    def test_objective_monotone(self):
        """Objectives never decrease as rho rises, and entries come sorted."""
        for seed in range(10):
            rng = np.random.default_rng(seed)
            alpha = GainMatrix(alpha_dbm=rng.uniform(-130, -70, size=(20, 10)), source="test")
            report = sweep_rho(alpha, [-80.0, -120.0, -100.0, -110.0, -90.0])

            rhos = [e.rho_dbm for e in report.entries]
            assert rhos == sorted(rhos)
            feasible = [e.objective for e in report.entries if e.status != PlacementStatus.INFEASIBLE]
            assert feasible == sorted(feasible)

    def test_records_average_power(self):
        """Feasible entries carry the average best-server power."""
        alpha = GainMatrix(alpha_dbm=np.array([[-80.0, -95.0], [-90.0, -70.0]]), source="test")
        entry = sweep_rho(alpha, [-100.0]).entries[0]
        solution = solve_exact(threshold(alpha, -100.0))

        assert entry.avg_ed_best_power_dbm == avg_ed_best_power(alpha, solution)

    def test_empty_list(self):
        """Needs at least one threshold."""
        alpha = GainMatrix(alpha_dbm=np.array([[-80.0]]), source="test")

        with pytest.raises(ValueError):
            sweep_rho(alpha, [])

    def test_replication_sweep_per_model(self):
        """On the shipped scenario every model gives a non-decreasing count and stays infeasible once infeasible."""
        scenario = replication_scenario()
        rhos = [-120.0 + 5 * i for i in range(9)]
        for model in SITE_INDEPENDENT_MODELS:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ModelValidityWarning)
                alpha = build_alpha(scenario, ChannelConfig(model=model))

            report = sweep_rho(alpha, rhos)

            statuses = [e.status for e in report.entries]
            feasible = [e.objective for e in report.entries if e.status != PlacementStatus.INFEASIBLE]
            assert feasible == sorted(feasible), model
            if PlacementStatus.INFEASIBLE in statuses:
                first = statuses.index(PlacementStatus.INFEASIBLE)
                assert all(s == PlacementStatus.INFEASIBLE for s in statuses[first:]), model
            for entry in report.entries:
                if entry.status == PlacementStatus.INFEASIBLE:
                    assert entry.selected == [] and entry.objective == 0


class TestSharedPositions:
    """Test overlap between placements."""

    def test_shared_between_models(self):
        """Reports candidates chosen by two or more labels."""
        solutions = {
            "log_distance": PlacementSolution(selected=[3, 7, 12], objective=3, status=PlacementStatus.OPTIMAL),
            "cost231": PlacementSolution(selected=[7], objective=1, status=PlacementStatus.OPTIMAL),
            "uma_3gpp": PlacementSolution(selected=[7, 12], objective=2, status=PlacementStatus.OPTIMAL),
        }

        assert shared_positions(solutions) == {
            7: ["cost231", "log_distance", "uma_3gpp"],
            12: ["log_distance", "uma_3gpp"],
        }

    def test_nothing_shared(self):
        """Disjoint placements share nothing."""
        solutions = {
            "a": PlacementSolution(selected=[1], objective=1, status=PlacementStatus.OPTIMAL),
            "b": PlacementSolution(selected=[2], objective=1, status=PlacementStatus.OPTIMAL),
        }

        assert shared_positions(solutions) == {}
