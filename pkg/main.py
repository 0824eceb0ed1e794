#!/usr/bin/env python3
"""
TxOP Sharing Simulator - Main Entry Point

Analytic channel-access sweeps, single scenario simulations, the batch
scenario matrix and trace inspection.

Exit codes: 0 ok, 1 unexpected error, 2 invalid flags/config/trace,
3 analytic convergence failure, 4 simulator invariant violation.
"""

import os
import sys
import json
import logging
from dataclasses import replace
from typing import List, Optional

import click
from dotenv import load_dotenv

# Add src directory to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "src"))

from src.analytic_model import (
    ALL_PROTOCOLS,
    AnalyticParams,
    MIN_VALID_DISTANCE_M,
    ConvergenceError,
    ModelOptions,
    ProtocolKind,
    grid,
    sweep_distance,
    sweep_participation,
)
from src.batch_processor import BatchProcessor, simulate_to_files
from src.config import get_batch_plan, get_setting, parse_seeds
from src.sim_engine import SimulationError
from src.trace_analysis import (
    TraceFormatError,
    load_trace,
    node_timeline,
    obss_gap_analysis,
    postponement_summary,
    trace_report,
    trigger_postponements,
)
from src.traffic_scenarios import load_scenario, scenario_by_name

# Load environment variables
load_dotenv()

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INVALID = 2
EXIT_CONVERGENCE = 3
EXIT_INVARIANT = 4

logger = logging.getLogger(__name__)


def setup_logging(log_level: str = "INFO") -> None:
    """Configure logging for the application"""
    log_dir = "logs"
    os.makedirs(log_dir, exist_ok=True)

    log_file = os.path.join(log_dir, "txop_sim.log")

    # Logs go to stderr so CSV and JSON on stdout stay clean
    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.FileHandler(log_file), logging.StreamHandler(sys.stderr)],
    )

    # Reduce noise from external libraries
    logging.getLogger("concurrent.futures").setLevel(logging.WARNING)


def fail(code: int, message: str) -> None:
    logger.error(message)
    click.echo(f"Error: {message}", err=True)
    sys.exit(code)


def parse_protocols(raw: Optional[str]) -> List[ProtocolKind]:
    if not raw:
        return list(ALL_PROTOCOLS)
    return [ProtocolKind.parse(part.strip()) for part in raw.split(",") if part.strip()]


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default=lambda: os.getenv("LOG_LEVEL", "INFO"),
    help="Set logging level",
)
def cli(log_level: str):
    """TxOP Sharing Simulator - analytic model and MAC simulations"""
    setup_logging(log_level)


def _run_sweep(kind: str, out_dir: str, protocols: Optional[str], build) -> None:
    try:
        table = build(parse_protocols(protocols))
    except ConvergenceError as e:
        fail(EXIT_CONVERGENCE, f"Series did not converge: {e}")
    except ValueError as e:
        fail(EXIT_INVALID, str(e))

    os.makedirs(out_dir, exist_ok=True)
    table.write_csv(os.path.join(out_dir, f"analytic_{kind}.csv"))
    click.echo(table.to_csv(), nl=False)


@cli.command("analytic-sweep-distance")
@click.option("--d-max", type=float, default=lambda: get_setting("d_max_m"), help="Largest BSS distance in metres")
@click.option("--step", type=float, default=lambda: get_setting("d_step_m"), help="Distance grid step in metres")
@click.option("--rho", type=float, default=0.5, help="Participating STA ratio")
@click.option("--protocols", default=None, help="Comma-separated subset of edca,trigger,sharing")
@click.option("--lens-formula", type=click.Choice(["printed", "exact"]), default="printed")
@click.option("--out-dir", default=lambda: get_setting("output_dir"), help="Output directory")
def analytic_sweep_distance(d_max, step, rho, protocols, lens_formula, out_dir):
    """Success probability against the distance between the BSSs"""
    if d_max >= 0:
        # The grid always starts at 0 m
        click.echo(
            f"Note: points below {MIN_VALID_DISTANCE_M:g} m are outside the model's valid range; "
            "p_success returns to 1 as d goes to 0",
            err=True,
        )

    def build(kinds):
        params = AnalyticParams(rho_share=rho, rho_trigger=rho)
        options = ModelOptions(tolerance=float(get_setting("series_tolerance")), lens_formula=lens_formula)
        return sweep_distance(kinds, params, grid(d_max, step), options)

    _run_sweep("distance", out_dir, protocols, build)


@cli.command("analytic-sweep-share-ratio")
@click.option("--d", "distance", type=float, default=15.0, help="Distance between the BSSs in metres")
@click.option("--step", type=float, default=lambda: get_setting("rho_step"), help="Ratio grid step")
@click.option("--protocols", default=None, help="Comma-separated subset of edca,trigger,sharing")
@click.option("--lens-formula", type=click.Choice(["printed", "exact"]), default="printed")
@click.option("--out-dir", default=lambda: get_setting("output_dir"), help="Output directory")
def analytic_sweep_share_ratio(distance, step, protocols, lens_formula, out_dir):
    """Success probability against the ratio of participating STAs"""

    def build(kinds):
        params = AnalyticParams(d=distance)
        options = ModelOptions(tolerance=float(get_setting("series_tolerance")), lens_formula=lens_formula)
        return sweep_participation(kinds, params, grid(1.0, step), options)

    _run_sweep("share_ratio", out_dir, protocols, build)


@cli.command("simulate")
@click.option("--scenario", default=None, help="Preset name such as sharing/obss-large/ac3")
@click.option("--config", "config_path", default=None, help="JSON scenario file")
@click.option("--seed", type=int, default=None, help="Random seed (default: the scenario's)")
@click.option("--duration-s", type=float, default=None, help="Simulated seconds")
@click.option("--warmup-s", type=float, default=None, help="Seconds excluded from the metrics")
@click.option("--out-dir", default=lambda: get_setting("output_dir"), help="Output directory")
@click.option("--trace", is_flag=True, help="Also write the event trace")
def simulate(scenario, config_path, seed, duration_s, warmup_s, out_dir, trace):
    """Run one scenario and write its CDF and summary"""
    if bool(scenario) == bool(config_path):
        fail(EXIT_INVALID, "Give exactly one of --scenario or --config")

    try:
        if config_path:
            config = load_scenario(config_path)
        else:
            config = scenario_by_name(scenario)
            config = replace(
                config,
                sim_duration_s=float(get_setting("sim_duration_s")),
                warmup_s=config.warmup_s if config.warmup_s == 0 else float(get_setting("warmup_s")),
            )

        overrides = {}
        if seed is not None:
            overrides["seed"] = seed
        if duration_s is not None:
            overrides["sim_duration_s"] = duration_s
        if warmup_s is not None:
            overrides["warmup_s"] = warmup_s
        if overrides:
            config = replace(config, **overrides)
    except ValueError as e:
        fail(EXIT_INVALID, str(e))

    logger.info(f"Simulating {config.name} seed {config.seed} for {config.sim_duration_s} s")
    try:
        files = simulate_to_files(config, out_dir, write_trace=trace)
    except SimulationError as e:
        fail(EXIT_INVARIANT, f"Simulation aborted: {e}")
    except ValueError as e:
        fail(EXIT_INVALID, str(e))

    click.echo(json.dumps(files, indent=2, sort_keys=True))


@cli.command("batch")
@click.option("--protocols", default=None, help="Comma-separated subset of edca,trigger,sharing")
@click.option("--seeds", default=lambda: get_setting("seeds"), help='Seed list such as "1,2,3" or "1-5"')
@click.option("--workers", type=int, default=lambda: get_setting("workers"), help="Worker processes")
@click.option("--duration-s", type=float, default=lambda: get_setting("sim_duration_s"), help="Simulated seconds per run")
@click.option("--out-dir", default=lambda: get_setting("output_dir"), help="Output directory")
@click.option("--resume/--no-resume", default=True, help="Skip runs completed by an earlier batch")
@click.option("--trace-stats", is_flag=True, help="Analyse each run's trace for gaps and trigger postponements")
@click.option("--status", is_flag=True, help="Show progress of this batch and exit")
def batch(protocols, seeds, workers, duration_s, out_dir, resume, trace_stats, status):
    """Run the scenario matrix across seeds and write the comparison report"""
    try:
        kinds = parse_protocols(protocols)
        seed_list = parse_seeds(seeds)
    except ValueError as e:
        fail(EXIT_INVALID, str(e))
    if workers < 1:
        fail(EXIT_INVALID, f"--workers must be >= 1, got {workers}")

    plan = get_batch_plan([k.value for k in kinds], seed_list, workers)
    logger.info(f"Batch plan: {plan['total_runs']} runs in {plan['worker_waves']} waves")

    processor = BatchProcessor(out_dir=out_dir, workers=workers, sim_duration_s=duration_s)
    if status:
        state = processor.get_status(kinds, seed_list)
        stats = state["session_stats"]
        click.echo("\n=== Batch Status ===")
        click.echo(f"Output: {state['out_dir']} ({state['variant']})")
        click.echo(f"Session ID: {stats.get('session_id') or 'None'}")
        click.echo(f"Runs Planned: {state['planned_runs']}")
        click.echo(f"Runs Pending: {state['pending_runs']}")
        click.echo(f"ETA: {state['eta'] or 'unknown'}")
        click.echo(f"Errors: {stats['error_count']}")
        return

    try:
        result = processor.run_batch(kinds, seed_list, resume=resume, trace_stats=trace_stats)
    except KeyboardInterrupt:
        logger.info("Process interrupted by user")
        click.echo("\nProcess interrupted. Progress has been saved.", err=True)
        sys.exit(EXIT_UNEXPECTED)

    click.echo(json.dumps(result, indent=2, sort_keys=True))
    if not result["success"]:
        sys.exit(EXIT_UNEXPECTED)


@cli.command("trace")
@click.argument("trace_file")
@click.option(
    "--query",
    type=click.Choice(["report", "timeline", "gaps", "trigger"]),
    default="report",
    help="What to extract from the trace",
)
@click.option("--node", type=int, default=None, help="Node id for the timeline query")
@click.option("--reference-bss", type=int, default=1)
@click.option("--other-bss", type=int, default=2)
def trace_cmd(trace_file, query, node, reference_bss, other_bss):
    """Inspect an event trace written by simulate --trace"""
    if not os.path.exists(trace_file):
        fail(EXIT_INVALID, f"Trace file not found: {trace_file}")
    try:
        trace = load_trace(trace_file)
    except TraceFormatError as e:
        fail(EXIT_INVALID, f"Malformed trace: {e}")

    if query == "timeline":
        if node is None:
            fail(EXIT_INVALID, "--node is required for the timeline query")
        for event in node_timeline(trace, node):
            detail = " ".join(f"{k}={v}" for k, v in event.fields.items())
            click.echo(f"{event.time},{event.node},{event.kind},{detail}")
        return

    if query == "gaps":
        output = obss_gap_analysis(trace, reference_bss, other_bss).to_dict() if len(trace) else {}
    elif query == "trigger":
        output = postponement_summary(trigger_postponements(trace)) if len(trace) else {}
    else:
        output = trace_report(trace, reference_bss, other_bss)
    click.echo(json.dumps(output, indent=2, sort_keys=True))


def main():
    """Main entry point"""
    try:
        cli(standalone_mode=False)
    except click.exceptions.Exit as e:
        sys.exit(e.exit_code)
    except click.ClickException as e:
        e.show()
        sys.exit(EXIT_INVALID)
    except click.exceptions.Abort:
        sys.exit(EXIT_UNEXPECTED)
    except Exception as e:
        logger.error(f"Unexpected error: {str(e)}")
        click.echo(f"Unexpected error: {str(e)}", err=True)
        sys.exit(EXIT_UNEXPECTED)


if __name__ == "__main__":
    main()
