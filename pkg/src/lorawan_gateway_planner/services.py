"""LoRaWAN Gateway Planner application services."""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from lorawan_gateway_planner.config import SITE_INDEPENDENT_MODELS, ChannelConfig, RunConfig, TrafficConfig
from lorawan_gateway_planner.coverage import best_server_power, build_alpha, threshold
from lorawan_gateway_planner.errors import ConfigError, InfeasiblePlanError
from lorawan_gateway_planner.lorawan_sim import avg_pdr, run_sim
from lorawan_gateway_planner.models import GainMatrix, PdrReport, PlanRecord, Scenario, SweepReport
from lorawan_gateway_planner.placement_opt import avg_ed_best_power, shared_positions, solve, sweep_rho
from lorawan_gateway_planner.reports import SummaryRow, cdf_frame, summary_frame
from lorawan_gateway_planner.rt_ingest import build_alpha_from_maps, synthesize_gain_maps
from lorawan_gateway_planner.scenario import load_scenario
from lorawan_gateway_planner.storage import RunStore, file_sha256, load_alpha_csv, load_pdr, load_plan

logger = logging.getLogger(__name__)


class PlanningService:
    """High-level service running the planning pipeline.

    Orchestrates scenario loading, alpha construction, placement,
    simulation and reporting, and persists every result in one run
    directory.
    """

    def __init__(self, run_dir: Path):
        """Initialize the service.

        Args:
            run_dir: Directory receiving this run's output files.
        """
        self.store = RunStore(run_dir)

    def build_gain_matrix(
        self,
        scenario: Scenario,
        channel: Optional[ChannelConfig],
        rt_dir: Optional[Path],
        tx_power_dbm: float,
    ) -> GainMatrix:
        """Alpha from a channel model or from a coverage-map directory.

        Raises:
            ConfigError: If neither or both sources are given.
        """
        if (channel is None) == (rt_dir is None):
            raise ConfigError("exactly one of --channel or --rt-dir is required")
        if channel is not None:
            return build_alpha(scenario, channel, tx_power_dbm)
        return build_alpha_from_maps(Path(rt_dir), scenario, tx_power_dbm)

    def _load_inputs(self, config: RunConfig) -> Tuple[Scenario, GainMatrix]:
        config.require_channel_source()
        scenario = load_scenario(config.scenario_path())
        alpha = self.build_gain_matrix(scenario, config.channel, config.rt_dir, config.tx_power_dbm)
        return scenario, alpha

    def plan(self, config: RunConfig) -> PlanRecord:
        """Solve one placement at ``config.rho_dbm`` and write plan and alpha files.

        Args:
            config: Run configuration with exactly one gain source.

        Returns:
            The saved plan record; infeasible plans are saved too.
        """
        _, alpha = self._load_inputs(config)
        alpha_path = self.store.save_alpha(alpha)
        solution = solve(threshold(alpha, config.rho_dbm), config.solver)
        logger.info(
            "Placement at %.1f dBm: %s, %d gateways (%d nodes, %.3f s)",
            config.rho_dbm,
            solution.status.value,
            solution.objective,
            solution.stats.nodes_explored,
            solution.stats.runtime_s,
        )

        record = PlanRecord(
            rho_dbm=config.rho_dbm,
            channel_source=alpha.source,
            selected=solution.selected,
            objective=solution.objective,
            status=solution.status,
            uncovered=solution.uncovered,
            stats=solution.stats,
            scenario=str(config.scenario_path().resolve()),
            tx_power_dbm=config.tx_power_dbm,
            channel=config.channel,
            rt_dir=str(Path(config.rt_dir).resolve()) if config.rt_dir is not None else None,
            alpha_sha256=file_sha256(alpha_path),
        )
        self.store.save_plan(record)
        return record

    def sweep(self, config: RunConfig) -> SweepReport:
        """Solve the placement over the configured threshold range and write the sweep CSV."""
        _, alpha = self._load_inputs(config)
        report = sweep_rho(alpha, config.sweep.values(), config.solver)
        self.store.save_sweep(report)
        return report

    def alpha_for_plan(self, plan_path: Path, record: PlanRecord) -> GainMatrix:
        """Alpha a plan was solved on.

        The ``alpha.csv`` saved next to the plan is used while its digest
        matches the one recorded in the plan; otherwise alpha is rebuilt from
        the recorded source.
        """
        sibling = Path(plan_path).parent / "alpha.csv"
        if sibling.exists():
            if record.alpha_sha256 is not None and file_sha256(sibling) == record.alpha_sha256:
                return load_alpha_csv(sibling, record.tx_power_dbm, record.channel_source)
            logger.warning(
                "%s does not match plan %s; rebuilding alpha from %s", sibling, plan_path, record.channel_source
            )
        scenario = load_scenario(Path(record.scenario))
        rt_dir = Path(record.rt_dir) if record.rt_dir is not None else None
        return self.build_gain_matrix(scenario, record.channel, rt_dir, record.tx_power_dbm)

    def simulate(self, plan_path: Path, traffic: TrafficConfig) -> PdrReport:
        """Run the uplink simulation on a saved plan and write the PDR report.

        Raises:
            InfeasiblePlanError: If the plan is infeasible.
        """
        record = load_plan(plan_path)
        if not record.to_solution().is_feasible:
            raise InfeasiblePlanError(f"plan {plan_path} is infeasible (uncovered EDs {record.uncovered})")
        scenario = load_scenario(Path(record.scenario))
        alpha = self.alpha_for_plan(plan_path, record)
        report = run_sim(scenario, record.to_solution(), alpha, traffic)
        self.store.save_pdr(report)
        return report

    def ingest_rt(self, rt_dir: Path, scenario_path: Path, tx_power_dbm: float = 0.0) -> GainMatrix:
        """Turn a coverage-map directory into ``alpha.csv``."""
        alpha = build_alpha_from_maps(rt_dir, load_scenario(scenario_path), tx_power_dbm)
        self.store.save_alpha(alpha)
        return alpha

    def synthesize_maps(
        self,
        config: RunConfig,
        cell_size_m: float,
        perturbation_sigma_db: float = 0.0,
    ) -> List[Path]:
        """Write per-candidate coverage maps from the configured channel model.

        Raises:
            ConfigError: If no channel model is configured.
        """
        if config.channel is None:
            raise ConfigError("synthesizing coverage maps needs --channel")
        scenario = load_scenario(config.scenario_path())
        return synthesize_gain_maps(
            scenario,
            config.channel,
            self.store.run_dir,
            cell_size_m,
            perturbation_sigma_db=perturbation_sigma_db,
            seed=config.traffic.seed,
        )

    def _summary_row(self, plan_path: Path, pdr_path: Optional[Path], cdf_path: Path) -> SummaryRow:
        """Summary line for one plan; also writes its best-server power CDF to ``cdf_path``."""
        record = load_plan(plan_path)
        pdr = avg_pdr([load_pdr(pdr_path)]) if pdr_path is not None else None
        if not record.to_solution().is_feasible:
            return SummaryRow(channel=record.channel_source, objective=0, avg_pdr=pdr)
        alpha = self.alpha_for_plan(plan_path, record)
        self.store.save_frame(cdf_path, cdf_frame(best_server_power(alpha, record.selected)))
        return SummaryRow(
            channel=record.channel_source,
            objective=record.objective,
            avg_ed_best_power_dbm=avg_ed_best_power(alpha, record.to_solution()),
            avg_pdr=pdr,
        )

    def report(
        self,
        plan_paths: Sequence[Path],
        pdr_paths: Sequence[Path] = (),
        alpha_paths: Sequence[Path] = (),
    ) -> List[SummaryRow]:
        """Write per-plan CDFs and the summary table.

        Plans and PDR reports pair up by position; plans without a report get
        an empty ``avg_pdr``. Extra alpha files get a CDF over all their entries.
        CDFs are numbered in input order, plans first, as
        ``cdf_<k>_<label>.csv`` so repeated channels never overwrite each other.

        Args:
            plan_paths: Plan files, one summary row each.
            pdr_paths: PDR reports for the first ``len(pdr_paths)`` plans.
            alpha_paths: Alpha CSV files for raw received-power CDFs.

        Returns:
            The summary rows written to ``summary.csv``.

        Raises:
            ValueError: On unreadable inputs or more reports than plans.
        """
        if len(pdr_paths) > len(plan_paths):
            raise ValueError(f"{len(pdr_paths)} PDR reports given for {len(plan_paths)} plans")

        rows = []
        for k, plan_path in enumerate(plan_paths):
            record = load_plan(plan_path)
            pdr_path = pdr_paths[k] if k < len(pdr_paths) else None
            cdf_path = self.store.cdf_file(record.channel_source, k + 1)
            rows.append(self._summary_row(plan_path, pdr_path, cdf_path))

        for k, alpha_path in enumerate(alpha_paths, start=len(plan_paths) + 1):
            alpha = load_alpha_csv(Path(alpha_path))
            label = f"{Path(alpha_path).parent.name}_{alpha.source}"
            self.store.save_frame(self.store.cdf_file(label, k), cdf_frame(alpha.alpha_dbm.ravel()))

        self.store.save_frame(self.store.summary_file, summary_frame(rows))
        return rows

    def compare_models(
        self,
        config: RunConfig,
        models: Sequence[str] = SITE_INDEPENDENT_MODELS,
        simulate: bool = False,
    ) -> Tuple[List[SummaryRow], Dict[int, List[str]]]:
        """Plan with every site-independent model on one scenario and threshold.

        Each model gets its own run directory under this one; the summary and
        the per-model CDFs land here.

        Args:
            config: Base configuration; its channel parameters apply to every model.
            models: Channel model names to compare.
            simulate: Also run the uplink simulation per feasible plan.

        Returns:
            Summary rows and the candidates selected by more than one model.
        """
        base = config.channel or ChannelConfig()
        plan_paths: List[Path] = []
        pdr_paths: List[Optional[Path]] = []
        solutions = {}
        for model in models:
            channel = ChannelConfig(**{**base.model_dump(), "model": model})
            model_config = config.model_copy(
                update={"channel": channel, "rt_dir": None, "out_dir": self.store.run_dir / model}
            )
            model_service = PlanningService(model_config.out_dir)
            record = model_service.plan(model_config)
            solutions[model] = record.to_solution()
            plan_paths.append(model_service.store.plan_file)
            if simulate and record.to_solution().is_feasible:
                model_service.simulate(model_service.store.plan_file, config.traffic)
                pdr_paths.append(model_service.store.pdr_file)
            else:
                pdr_paths.append(None)

        rows = [
            self._summary_row(plan, pdr, self.store.cdf_file(model))
            for model, plan, pdr in zip(models, plan_paths, pdr_paths)
        ]
        self.store.save_frame(self.store.summary_file, summary_frame(rows))
        shared = shared_positions(solutions)
        logger.info("Candidates shared between models: %s", shared or "none")
        return rows, shared
