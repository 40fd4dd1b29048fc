"""Gateway placement as minimum set cover over the coverage matrix.

Columns of beta are candidate positions, rows are EDs. A placement selects
columns so every row has a 1 in at least one selected column. Sets are
handled as Python int bitmasks throughout the search.
"""

import itertools
import logging
import time
from collections import Counter
from typing import Callable, Dict, List, Mapping, Sequence, Set, Tuple

import numpy as np

from lorawan_gateway_planner.coverage import best_server_power, threshold, uncovered_eds
from lorawan_gateway_planner.errors import InfeasiblePlanError, SolverRefusalError
from lorawan_gateway_planner.models import (
    CoverageMatrix,
    GainMatrix,
    PlacementSolution,
    PlacementStatus,
    SolverStats,
    SweepEntry,
    SweepReport,
)

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_CANDIDATES = 24


def _column_masks(beta: np.ndarray) -> List[int]:
    """Row set of every column as a bitmask (bit d = ED d + 1)."""
    return [sum(1 << int(d) for d in np.flatnonzero(beta[:, p])) for p in range(beta.shape[1])]


def _infeasible(beta: CoverageMatrix, started: float) -> PlacementSolution:
    return PlacementSolution(
        status=PlacementStatus.INFEASIBLE,
        uncovered=uncovered_eds(beta),
        stats=SolverStats(runtime_s=time.perf_counter() - started),
    )


class _CoverSearch:
    """Branch-and-bound over a presolved cover instance.

    ``cols[k]`` is the row mask of kept column ``k``; kept columns are in
    ascending original index, so position order equals index order.
    """

    def __init__(self, cols: List[int], n_rows: int):
        self.cols = cols
        self.n_rows = n_rows
        self.full = (1 << n_rows) - 1
        self.coverers = [
            sum(1 << k for k, col in enumerate(cols) if col >> r & 1) for r in range(n_rows)
        ]
        self.failed: Set[Tuple[int, int, int]] = set()
        self.nodes = 0

    def bits(self, mask: int) -> List[int]:
        rows = []
        while mask:
            low = mask & -mask
            rows.append(low.bit_length() - 1)
            mask ^= low
        return rows

    def lower_bound(self, uncovered: int, allowed: int, rows: List[int]) -> int:
        # Disjoint coverer sets each need their own column
        packed, used = 0, 0
        for r in sorted(rows, key=lambda r: (self.coverers[r] & allowed).bit_count()):
            coverers = self.coverers[r] & allowed
            if not coverers & used:
                used |= coverers
                packed += 1

        sizes = sorted(
            ((self.cols[k] & uncovered).bit_count() for k in self.bits(allowed)),
            reverse=True,
        )
        remaining, by_size = uncovered.bit_count(), 0
        for size in sizes:
            if remaining <= 0 or size == 0:
                break
            remaining -= size
            by_size += 1
        return max(packed, by_size)

    def can_cover(self, uncovered: int, budget: int, min_pos: int) -> bool:
        """True iff at most ``budget`` columns at positions >= ``min_pos`` cover ``uncovered``."""
        if uncovered == 0:
            return True
        if budget == 0:
            return False
        key = (uncovered, budget, min_pos)
        if key in self.failed:
            return False
        self.nodes += 1

        allowed = ((1 << len(self.cols)) - 1) & ~((1 << min_pos) - 1)
        rows = self.bits(uncovered)
        branch_row = min(rows, key=lambda r: ((self.coverers[r] & allowed).bit_count(), r))
        if not self.coverers[branch_row] & allowed or self.lower_bound(uncovered, allowed, rows) > budget:
            self.failed.add(key)
            return False

        options = sorted(
            self.bits(self.coverers[branch_row] & allowed),
            key=lambda k: (-(self.cols[k] & uncovered).bit_count(), k),
        )
        for k in options:
            if self.can_cover(uncovered & ~self.cols[k], budget - 1, min_pos):
                return True
        self.failed.add(key)
        return False

    def greedy_size(self) -> int:
        uncovered, picked = self.full, 0
        while uncovered:
            best = max(range(len(self.cols)), key=lambda k: ((self.cols[k] & uncovered).bit_count(), -k))
            uncovered &= ~self.cols[best]
            picked += 1
        return picked

    def smallest_cover(self, size: int) -> List[int]:
        """Lexicographically smallest set of ``size`` positions covering every row."""
        chosen: List[int] = []
        uncovered, start = self.full, 0
        while uncovered:
            remaining = size - len(chosen)
            for k in range(start, len(self.cols)):
                if self.cols[k] & uncovered and self.can_cover(uncovered & ~self.cols[k], remaining - 1, k + 1):
                    chosen.append(k)
                    uncovered &= ~self.cols[k]
                    start = k + 1
                    break
            else:
                raise RuntimeError("cover search lost its optimum")
        return chosen


def _presolve(beta: np.ndarray) -> Tuple[List[int], List[int], int]:
    """Reduce rows and columns without changing the lexicographically smallest optimum.

    Returns:
        Kept original column indices (0-based, ascending), their row masks over
        the kept rows, and the number of kept rows.
    """
    n_rows, n_cols = beta.shape
    row_coverers = [sum(1 << int(p) for p in np.flatnonzero(beta[d])) for d in range(n_rows)]

    # A row whose coverers contain another row's coverers is implied by it
    unique = sorted(set(row_coverers), key=lambda m: (m.bit_count(), m))
    kept_rows = [m for i, m in enumerate(unique) if not any(o & m == o for o in unique[:i])]

    cols = [sum(1 << r for r, m in enumerate(kept_rows) if m >> p & 1) for p in range(n_cols)]
    kept_cols = [
        p
        for p in range(n_cols)
        if cols[p] and not any(cols[i] & cols[p] == cols[p] for i in range(p))
    ]
    return kept_cols, [cols[p] for p in kept_cols], len(kept_rows)


def solve_exact(beta: CoverageMatrix) -> PlacementSolution:
    """Minimum-cardinality cover; ties go to the lexicographically smallest set.

    Args:
        beta: Coverage matrix.

    Returns:
        PlacementSolution with status ``optimal``, or ``infeasible`` with the
        uncovered EDs and no selection.
    """
    started = time.perf_counter()
    if uncovered_eds(beta):
        return _infeasible(beta, started)

    kept, cols, n_rows = _presolve(beta.beta)
    search = _CoverSearch(cols, n_rows)
    upper = search.greedy_size()
    root_bound = search.lower_bound(search.full, (1 << len(cols)) - 1, search.bits(search.full))

    optimum = upper
    for size in range(max(root_bound, 1), upper):
        if search.can_cover(search.full, size, 0):
            optimum = size
            break
    selected = [kept[k] + 1 for k in search.smallest_cover(optimum)]

    runtime = time.perf_counter() - started
    logger.debug(
        "Exact cover: %d/%d rows and %d/%d columns after presolve, objective %d, %d nodes, %.3f s",
        n_rows,
        beta.beta.shape[0],
        len(kept),
        beta.beta.shape[1],
        optimum,
        search.nodes,
        runtime,
    )
    return PlacementSolution(
        selected=selected,
        objective=len(selected),
        status=PlacementStatus.OPTIMAL,
        stats=SolverStats(nodes_explored=search.nodes, runtime_s=runtime),
    )


def solve_greedy(beta: CoverageMatrix) -> PlacementSolution:
    """Classic greedy cover: most newly covered EDs first, lowest index on ties."""
    started = time.perf_counter()
    if uncovered_eds(beta):
        return _infeasible(beta, started)

    cols = _column_masks(beta.beta)
    uncovered = (1 << beta.beta.shape[0]) - 1
    selected: List[int] = []
    steps = 0
    while uncovered:
        best = max(range(len(cols)), key=lambda p: ((cols[p] & uncovered).bit_count(), -p))
        selected.append(best + 1)
        uncovered &= ~cols[best]
        steps += 1

    return PlacementSolution(
        selected=selected,
        objective=len(selected),
        status=PlacementStatus.FEASIBLE_HEURISTIC,
        stats=SolverStats(nodes_explored=steps, runtime_s=time.perf_counter() - started),
    )


def brute_force(beta: CoverageMatrix) -> PlacementSolution:
    """Exhaustive minimum cover, subsets tried in lexicographic order.

    Raises:
        SolverRefusalError: If there are more than 24 candidates.
    """
    n_eds, n_candidates = beta.beta.shape
    if n_candidates > BRUTE_FORCE_MAX_CANDIDATES:
        raise SolverRefusalError(
            f"brute force supports at most {BRUTE_FORCE_MAX_CANDIDATES} candidates, got {n_candidates}"
        )
    started = time.perf_counter()
    if uncovered_eds(beta):
        return _infeasible(beta, started)

    cols = _column_masks(beta.beta)
    full = (1 << n_eds) - 1
    tried = 0
    for size in range(1, n_candidates + 1):
        for subset in itertools.combinations(range(n_candidates), size):
            tried += 1
            covered = 0
            for p in subset:
                covered |= cols[p]
            if covered == full:
                return PlacementSolution(
                    selected=[p + 1 for p in subset],
                    objective=size,
                    status=PlacementStatus.OPTIMAL,
                    stats=SolverStats(nodes_explored=tried, runtime_s=time.perf_counter() - started),
                )
    raise RuntimeError("feasible instance without a cover")


SOLVERS: Dict[str, Callable[[CoverageMatrix], PlacementSolution]] = {
    "exact": solve_exact,
    "greedy": solve_greedy,
}


def solve(beta: CoverageMatrix, solver: str = "exact") -> PlacementSolution:
    """Run the named solver (``exact`` or ``greedy``)."""
    try:
        return SOLVERS[solver](beta)
    except KeyError:
        raise ValueError(f"Unknown solver '{solver}'. Valid solvers: {', '.join(SOLVERS)}")


def avg_ed_best_power(alpha: GainMatrix, solution: PlacementSolution) -> float:
    """Mean over EDs of the best received power among the selected gateways.

    Raises:
        InfeasiblePlanError: If the solution is infeasible.
    """
    if not solution.is_feasible:
        raise InfeasiblePlanError("average ED received power needs a feasible placement")
    return float(np.mean(best_server_power(alpha, solution.selected)))


def sweep_rho(alpha: GainMatrix, rho_list: Sequence[float], solver: str = "exact") -> SweepReport:
    """Solve the placement at every threshold, ascending.

    Args:
        alpha: Received-power matrix.
        rho_list: Thresholds in dBm.
        solver: ``exact`` or ``greedy``.

    Returns:
        SweepReport with one entry per threshold; infeasible entries carry no
        selection and no average power.

    Raises:
        ValueError: If ``rho_list`` is empty.
    """
    if not rho_list:
        raise ValueError("sweep needs at least one threshold")

    entries = []
    for rho in sorted(rho_list):
        solution = solve(threshold(alpha, rho), solver)
        entries.append(
            SweepEntry(
                rho_dbm=rho,
                status=solution.status,
                objective=solution.objective,
                selected=solution.selected,
                avg_ed_best_power_dbm=avg_ed_best_power(alpha, solution) if solution.is_feasible else None,
            )
        )
        logger.info("rho %.1f dBm: %s, %d gateways", rho, solution.status.value, solution.objective)
    return SweepReport(entries=entries)


def shared_positions(solutions: Mapping[str, PlacementSolution]) -> Dict[int, List[str]]:
    """Candidates selected by more than one labelled solution.

    Args:
        solutions: Placement per label (e.g. channel model name).

    Returns:
        Candidate index -> sorted labels selecting it, for indices chosen at least twice.
    """
    counts = Counter(p for solution in solutions.values() for p in solution.selected)
    return {
        p: sorted(label for label, solution in solutions.items() if p in solution.selected)
        for p in sorted(counts)
        if counts[p] > 1
    }
