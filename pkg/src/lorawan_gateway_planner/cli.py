"""LoRaWAN Gateway Planner CLI application."""

import logging
from functools import wraps
from pathlib import Path
from typing import List, Optional

import typer
from rich import print as rprint
from rich.console import Console
from rich.logging import RichHandler
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from lorawan_gateway_planner.config import RunConfig, get_run_config
from lorawan_gateway_planner.errors import InfeasiblePlanError
from lorawan_gateway_planner.models import PlacementStatus
from lorawan_gateway_planner.reports import SummaryRow
from lorawan_gateway_planner.services import PlanningService

# Create the main Typer app
app = typer.Typer(
    name="lorawan-gateway-planner",
    help="📡 LoRaWAN Gateway Planner - Place the fewest gateways that cover every end device",
    add_completion=False,
    rich_markup_mode="rich",
)

console = Console()

EXIT_ERROR = 1
EXIT_INFEASIBLE = 2

SCENARIO_OPTION = typer.Option(None, "--scenario", help="Scenario JSON (default: shipped replication fixture)")
CHANNEL_OPTION = typer.Option(None, "--channel", help="log_distance | okumura_hata | cost231 | uma_3gpp")
RT_DIR_OPTION = typer.Option(None, "--rt-dir", help="Directory of per-candidate coverage maps")
SOLVER_OPTION = typer.Option(None, "--solver", help="exact | greedy")
TX_POWER_OPTION = typer.Option(None, "--tx-power", help="Transmit power in dBm (default 0)")
SEED_OPTION = typer.Option(None, "--seed", help="Seed for simulation, shadowing and LOS draws")
OUT_OPTION = typer.Option(None, "--out", help="Output directory (default ./planner-output)")
CONFIG_OPTION = typer.Option(None, "--config", help="JSON run configuration; command-line values win")


def handle_cli_errors(func):
    """Decorator for consistent CLI error handling across commands."""

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except typer.Exit:
            # Re-raise typer.Exit without modification - it's intentional
            raise
        except InfeasiblePlanError as e:
            rprint(f"⚠️  [yellow]Infeasible: {e}[/yellow]")
            raise typer.Exit(EXIT_INFEASIBLE)
        except PermissionError as e:
            rprint(f"❌ [red]Permission error: {e}[/red]")
            rprint("💡 [yellow]Check that you have write access to the output directory[/yellow]")
            raise typer.Exit(EXIT_ERROR)
        except ValueError as e:
            rprint(f"❌ [red]Validation error: {e}[/red]")
            raise typer.Exit(EXIT_ERROR)
        except Exception as e:
            rprint(f"❌ [red]Unexpected error: {e}[/red]")
            raise typer.Exit(EXIT_ERROR)

    return wrapper


def get_planning_service(config: RunConfig) -> PlanningService:
    """Get a planning service writing to the configured output directory."""
    return PlanningService(config.out_dir)


def spinner() -> Progress:
    """Transient spinner shown around long-running steps."""
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        console=console,
        transient=True,
    )


def format_selected(selected: List[int]) -> str:
    """Candidate indices as a compact comma list."""
    return ", ".join(str(p) for p in selected) if selected else "[dim]none[/dim]"


def print_summary(rows: List[SummaryRow]) -> None:
    """Render summary rows as a table."""
    table = Table(title="📋 Channel comparison", show_header=True, header_style="bold blue")
    table.add_column("Channel", style="cyan")
    table.add_column("Gateways", style="white", justify="right")
    table.add_column("Avg ED power (dBm)", style="yellow", justify="right")
    table.add_column("Avg PDR", style="green", justify="right")
    for row in rows:
        table.add_row(
            row.channel,
            str(row.objective) if row.objective else "[red]✗[/red]",
            f"{row.avg_ed_best_power_dbm:.2f}" if row.avg_ed_best_power_dbm is not None else "-",
            f"{row.avg_pdr:.4f}" if row.avg_pdr is not None else "-",
        )
    console.print(table)


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Show progress and solver details"),
) -> None:
    """Configure logging for every command."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )
    logging.captureWarnings(True)


@app.command()
@handle_cli_errors
def plan(
    scenario: Optional[Path] = SCENARIO_OPTION,
    channel: Optional[str] = CHANNEL_OPTION,
    rt_dir: Optional[Path] = RT_DIR_OPTION,
    rho: Optional[float] = typer.Option(None, "--rho", help="Coverage threshold in dBm (default -90)"),
    solver: Optional[str] = SOLVER_OPTION,
    tx_power: Optional[float] = TX_POWER_OPTION,
    seed: Optional[int] = SEED_OPTION,
    out: Optional[Path] = OUT_OPTION,
    config_file: Optional[Path] = CONFIG_OPTION,
) -> None:
    """🗺️ Place the fewest gateways covering every ED at one threshold.

    Exit code 2 when some ED cannot be covered; the plan file is still written.

    Examples:
      lorawan-gateway-planner plan --channel okumura_hata --rho -90
      lorawan-gateway-planner plan --rt-dir maps/ --scenario site.json --out runs/rt
    """
    config = get_run_config(
        config_file,
        scenario=scenario,
        channel=channel,
        rt_dir=rt_dir,
        rho_dbm=rho,
        solver=solver,
        tx_power_dbm=tx_power,
        seed=seed,
        out_dir=out,
    )
    service = get_planning_service(config)
    with spinner() as progress:
        progress.add_task("📶 Computing received power and solving placement...", total=None)
        record = service.plan(config)

    if record.status == PlacementStatus.INFEASIBLE:
        rprint(f"⚠️  [yellow]No placement covers every ED at {record.rho_dbm} dBm[/yellow]")
        rprint(f"🚫 [red]Uncovered EDs:[/red] {format_selected(record.uncovered)}")
        rprint(f"💾 [dim]Plan: {service.store.plan_file}[/dim]")
        raise typer.Exit(EXIT_INFEASIBLE)

    rprint(f"✅ [green]{record.objective} gateways ({record.status.value}) with {record.channel_source}[/green]")
    rprint(f"📍 [blue]Selected candidates:[/blue] {format_selected(record.selected)}")
    rprint(f"💾 [dim]Plan: {service.store.plan_file}[/dim]")


@app.command()
@handle_cli_errors
def sweep(
    scenario: Optional[Path] = SCENARIO_OPTION,
    channel: Optional[str] = CHANNEL_OPTION,
    rt_dir: Optional[Path] = RT_DIR_OPTION,
    rho_start: Optional[float] = typer.Option(None, "--rho-start", help="First threshold in dBm (default -120)"),
    rho_end: Optional[float] = typer.Option(None, "--rho-end", help="Last threshold in dBm (default -80)"),
    rho_step: Optional[float] = typer.Option(None, "--rho-step", help="Threshold step in dB (default 5)"),
    solver: Optional[str] = SOLVER_OPTION,
    tx_power: Optional[float] = TX_POWER_OPTION,
    seed: Optional[int] = SEED_OPTION,
    out: Optional[Path] = OUT_OPTION,
    config_file: Optional[Path] = CONFIG_OPTION,
) -> None:
    """📈 Solve the placement over a range of thresholds.

    Infeasible thresholds are recorded in the sweep file; the command still succeeds.

    Examples:
      lorawan-gateway-planner sweep --channel cost231
      lorawan-gateway-planner sweep --channel uma_3gpp --rho-start -110 --rho-end -90 --rho-step 2
    """
    config = get_run_config(
        config_file,
        scenario=scenario,
        channel=channel,
        rt_dir=rt_dir,
        rho_start=rho_start,
        rho_end=rho_end,
        rho_step=rho_step,
        solver=solver,
        tx_power_dbm=tx_power,
        seed=seed,
        out_dir=out,
    )
    service = get_planning_service(config)
    with spinner() as progress:
        progress.add_task("📈 Sweeping thresholds...", total=None)
        report = service.sweep(config)

    table = Table(title="📈 Gateways per threshold", show_header=True, header_style="bold blue")
    table.add_column("ρ (dBm)", style="cyan", justify="right")
    table.add_column("Status", style="green")
    table.add_column("Gateways", style="white", justify="right")
    table.add_column("Avg best power (dBm)", style="yellow", justify="right")
    for entry in report.entries:
        feasible = entry.status != PlacementStatus.INFEASIBLE
        table.add_row(
            f"{entry.rho_dbm:g}",
            entry.status.value if feasible else "[red]✗ infeasible[/red]",
            str(entry.objective) if feasible else "-",
            f"{entry.avg_ed_best_power_dbm:.2f}" if entry.avg_ed_best_power_dbm is not None else "-",
        )
    console.print(table)
    rprint(f"💾 [dim]Sweep: {service.store.sweep_file}[/dim]")


@app.command()
@handle_cli_errors
def simulate(
    plan_file: Path = typer.Argument(..., help="Plan file written by 'plan'"),
    packets: Optional[int] = typer.Option(None, "--packets", help="Packets per ED (default 1000)"),
    sf: Optional[int] = typer.Option(None, "--sf", help="Spreading factor 7-12 (default 7)"),
    duration: Optional[float] = typer.Option(None, "--duration", help="Simulated time in seconds (default 600)"),
    seed: Optional[int] = SEED_OPTION,
    out: Optional[Path] = OUT_OPTION,
    config_file: Optional[Path] = CONFIG_OPTION,
) -> None:
    """📨 Simulate uplink traffic to a plan's gateways and report PDR.

    Exit code 2 when the plan is infeasible.

    Examples:
      lorawan-gateway-planner simulate planner-output/plan.json
      lorawan-gateway-planner simulate runs/rt/plan.json --packets 500 --seed 7 --out runs/rt
    """
    config = get_run_config(
        config_file,
        packets=packets,
        sf=sf,
        duration_s=duration,
        seed=seed,
        out_dir=out,
    )
    service = get_planning_service(config)
    with spinner() as progress:
        progress.add_task("📨 Simulating uplinks...", total=None)
        report = service.simulate(plan_file, config.traffic)

    rprint(f"✅ [green]PDR {report.pdr_overall:.4f}[/green]")
    rprint(
        f"📊 [blue]Collisions:[/blue] {report.collisions}  "
        f"[blue]Below sensitivity:[/blue] {report.below_sensitivity_drops}  "
        f"[blue]Demod blocked:[/blue] {report.demod_blocked_drops}"
    )
    rprint(f"💾 [dim]Report: {service.store.pdr_file}[/dim]")


@app.command("ingest-rt")
@handle_cli_errors
def ingest_rt(
    rt_dir: Path = typer.Option(..., "--rt-dir", help="Directory of gw_<p>.csv coverage maps"),
    scenario: Optional[Path] = SCENARIO_OPTION,
    tx_power: Optional[float] = TX_POWER_OPTION,
    out: Optional[Path] = OUT_OPTION,
) -> None:
    """🛰️ Convert ray-tracer coverage maps into an alpha matrix.

    Examples:
      lorawan-gateway-planner ingest-rt --rt-dir maps/ --scenario site.json
    """
    config = get_run_config(scenario=scenario, rt_dir=rt_dir, tx_power_dbm=tx_power, out_dir=out)
    service = get_planning_service(config)
    with spinner() as progress:
        progress.add_task("🛰️ Sampling coverage maps...", total=None)
        alpha = service.ingest_rt(rt_dir, config.scenario_path(), config.tx_power_dbm)

    rprint(f"✅ [green]Ingested {alpha.n_candidates} maps for {alpha.n_eds} EDs[/green]")
    rprint(f"💾 [dim]Alpha: {service.store.alpha_file}[/dim]")


@app.command("synth-maps")
@handle_cli_errors
def synth_maps(
    channel: str = typer.Option(..., "--channel", help="Channel model to export"),
    cell_size: float = typer.Option(25.0, "--cell-size", help="Raster resolution in meters"),
    perturbation: float = typer.Option(0.0, "--perturbation", help="Per-cell Gaussian perturbation sigma in dB"),
    scenario: Optional[Path] = SCENARIO_OPTION,
    seed: Optional[int] = SEED_OPTION,
    out: Optional[Path] = OUT_OPTION,
    config_file: Optional[Path] = CONFIG_OPTION,
) -> None:
    """🧪 Export a channel model as per-candidate coverage maps.

    Examples:
      lorawan-gateway-planner synth-maps --channel uma_3gpp --cell-size 25 --out maps/
    """
    config = get_run_config(config_file, scenario=scenario, channel=channel, seed=seed, out_dir=out)
    service = get_planning_service(config)
    paths = service.synthesize_maps(config, cell_size, perturbation)
    rprint(f"✅ [green]Wrote {len(paths)} coverage maps to {service.store.run_dir}[/green]")


@app.command()
@handle_cli_errors
def report(
    plan_files: List[Path] = typer.Option([], "--plan", help="Plan file (repeatable)"),
    pdr_files: List[Path] = typer.Option([], "--pdr", help="PDR report paired with the plan at the same position"),
    alpha_files: List[Path] = typer.Option([], "--alpha", help="Alpha CSV for a raw received-power CDF"),
    out: Optional[Path] = OUT_OPTION,
) -> None:
    """📋 Write received-power CDFs and the per-channel summary table.

    Examples:
      lorawan-gateway-planner report --plan runs/hata/plan.json --pdr runs/hata/pdr.json
      lorawan-gateway-planner report --alpha runs/rt/alpha.csv
    """
    if not plan_files and not alpha_files:
        rprint("❌ [red]Give at least one --plan or --alpha[/red]")
        raise typer.Exit(EXIT_ERROR)

    config = get_run_config(out_dir=out)
    service = get_planning_service(config)
    rows = service.report(plan_files, pdr_files, alpha_files)
    print_summary(rows)
    rprint(f"💾 [dim]Summary: {service.store.summary_file}[/dim]")


@app.command()
@handle_cli_errors
def compare(
    scenario: Optional[Path] = SCENARIO_OPTION,
    rho: Optional[float] = typer.Option(None, "--rho", help="Coverage threshold in dBm (default -90)"),
    solver: Optional[str] = SOLVER_OPTION,
    tx_power: Optional[float] = TX_POWER_OPTION,
    run_simulation: bool = typer.Option(False, "--simulate", help="Also simulate each feasible plan"),
    packets: Optional[int] = typer.Option(None, "--packets", help="Packets per ED (default 1000)"),
    seed: Optional[int] = SEED_OPTION,
    out: Optional[Path] = OUT_OPTION,
    config_file: Optional[Path] = CONFIG_OPTION,
) -> None:
    """⚖️ Plan with every site-independent channel model and compare.

    Examples:
      lorawan-gateway-planner compare --rho -90
      lorawan-gateway-planner compare --simulate --packets 200 --out runs/compare
    """
    config = get_run_config(
        config_file,
        scenario=scenario,
        rho_dbm=rho,
        solver=solver,
        tx_power_dbm=tx_power,
        packets=packets,
        seed=seed,
        out_dir=out,
    )
    service = get_planning_service(config)
    with spinner() as progress:
        progress.add_task("⚖️ Planning with every channel model...", total=None)
        rows, shared = service.compare_models(config, simulate=run_simulation)

    print_summary(rows)
    if shared:
        for p, models in shared.items():
            rprint(f"🔁 [blue]Candidate {p}[/blue] chosen by {', '.join(models)}")
    else:
        rprint("🔁 [dim]No candidate chosen by more than one model[/dim]")
    rprint(f"💾 [dim]Summary: {service.store.summary_file}[/dim]")


if __name__ == "__main__":
    app()
