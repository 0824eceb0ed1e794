import os
import json
import time
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from tqdm import tqdm
from dotenv import load_dotenv

from .analytic_model import ALL_PROTOCOLS, ProtocolKind
from .config import get_setting
from .mac_protocols import MacNetwork
from .metrics_reporting import (
    PERCENTILE_GRID,
    DominanceReport,
    MetricsCollector,
    PercentileComparison,
    result_stem,
    write_run_results,
    write_summary,
)
from .progress_tracker import ProgressTracker
from .sim_engine import RunStatistics, Simulator, TraceRecorder, seconds
from .trace_analysis import obss_gap_analysis, parse_trace, postponement_summary, trigger_postponements
from .traffic_scenarios import ObssLoad, ScenarioConfig, build_network, measured_nodes, scenario_matrix

load_dotenv()

logger = logging.getLogger(__name__)

# Pairs (a, b) reported as "a against b" in the comparison report
COMPARISONS = (
    (ProtocolKind.SHARING_BASED, ProtocolKind.TRIGGER_BASED),
    (ProtocolKind.SHARING_BASED, ProtocolKind.EDCA),
)


@dataclass
class RunResult:
    config: ScenarioConfig
    collector: MetricsCollector
    network: MacNetwork
    statistics: RunStatistics
    trace: TraceRecorder
    trace_stats: Dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.config.name

    def extra(self) -> Dict:
        data = {
            "protocol": self.config.protocol_bss1.value,
            "events_processed": self.statistics.processed,
            "config": self.config.to_dict(),
        }
        if self.trace_stats:
            data["trace"] = self.trace_stats
        return data


def run_scenario(config: ScenarioConfig, trace: bool = False, strict: bool = True) -> RunResult:
    """Simulate one scenario for its configured duration"""
    recorder = TraceRecorder(enabled=trace)
    simulator = Simulator(seed=config.seed, livelock_cap=int(get_setting("livelock_cap")), trace=recorder)
    collector = MetricsCollector(
        warmup=seconds(config.warmup_s),
        nodes=measured_nodes(config),
        run=f"{config.name}#{config.seed}",
    )
    network, _ = build_network(config, simulator, sink=collector, strict=strict)

    statistics = simulator.run_until(seconds(config.sim_duration_s))
    network.finish()

    result = RunResult(config, collector, network, statistics, recorder)
    if trace:
        parsed = parse_trace(recorder.lines)
        result.trace_stats = {
            "gaps": obss_gap_analysis(parsed).to_dict(),
            "trigger": postponement_summary(trigger_postponements(parsed)),
        }
    logger.info(
        f"Finished {config.name} seed {config.seed}: {collector.sample_count} delivered, "
        f"{collector.drop_count} dropped, {statistics.processed:,} events"
    )
    return result


def simulate_to_files(
    config: ScenarioConfig, out_dir: str, trace: bool = False, write_trace: bool = False
) -> Dict[str, str]:
    """Run one scenario and write its CDF, summary and optional trace"""
    result = run_scenario(config, trace=trace or write_trace)
    files = write_run_results(result.collector, out_dir, config.name, config.seed, result.extra())
    if write_trace:
        path = os.path.join(out_dir, result_stem(config.name, config.seed) + ".trace")
        result.trace.save(path)
        files["trace"] = path
    return files


def _run_worker(config_data: Dict, out_dir: str, trace_stats: bool) -> Tuple[str, int, Dict[str, str]]:
    # Module-level so the process pool can pickle it
    config = ScenarioConfig.from_dict(config_data)
    files = simulate_to_files(config, out_dir, trace=trace_stats)
    return config.name, config.seed, files


def _read_summary(files: Dict[str, str]) -> Optional[Dict]:
    try:
        with open(files["summary"], "r") as f:
            return json.load(f)
    except (OSError, KeyError, json.JSONDecodeError) as e:
        logger.warning(f"Could not read run summary {files.get('summary')}: {e}")
        return None


def _dominance(a: Dict, b: Dict, grid: Sequence[int] = PERCENTILE_GRID) -> DominanceReport:
    report = DominanceReport()
    for pct in grid:
        key = f"p{pct}"
        report.points.append(
            PercentileComparison(pct, a["percentiles_us"][key], b["percentiles_us"][key])
        )
    return report


def comparison_report(summaries: Dict[Tuple[str, int], Dict], seeds: Sequence[int]) -> Dict:
    """
    Per OBSS access category and load: per-seed dominance of sharing over
    trigger and over EDCA, the AC3-versus-AC0 tail trend and, when traces
    were analysed, idle-gap utilisation and trigger postponements.
    """
    report: Dict = {"comparisons": [], "obss_ac_trend": [], "gap_utilisation": []}

    def summary(protocol: ProtocolKind, load: ObssLoad, ac: str, seed: int) -> Optional[Dict]:
        name = ScenarioConfig(protocol_bss1=protocol, obss_load=load, obss_ac=ac).name
        return summaries.get((name, seed))

    for ac in ("ac0", "ac3"):
        for load in ObssLoad:
            for a, b in COMPARISONS:
                for seed in seeds:
                    sa, sb = summary(a, load, ac, seed), summary(b, load, ac, seed)
                    if sa is None or sb is None:
                        continue
                    entry = {
                        "obss_ac": ac,
                        "obss_load": load.value,
                        "a": a.value,
                        "b": b.value,
                        "seed": seed,
                        **_dominance(sa, sb).to_dict(),
                    }
                    report["comparisons"].append(entry)

    for protocol in ALL_PROTOCOLS:
        for load in ObssLoad:
            for seed in seeds:
                s0, s3 = summary(protocol, load, "ac0", seed), summary(protocol, load, "ac3", seed)
                if s0 is None or s3 is None:
                    continue
                p90_ac0 = s0["percentiles_us"]["p90"]
                p90_ac3 = s3["percentiles_us"]["p90"]
                report["obss_ac_trend"].append(
                    {
                        "protocol": protocol.value,
                        "obss_load": load.value,
                        "seed": seed,
                        "p90_ac0_us": p90_ac0,
                        "p90_ac3_us": p90_ac3,
                        "ac3_not_lower": p90_ac3 >= p90_ac0,
                    }
                )

    for (name, seed), data in sorted(summaries.items()):
        if "trace" in data:
            report["gap_utilisation"].append(
                {
                    "scenario": name,
                    "seed": seed,
                    "utilisation": data["trace"]["gaps"]["utilisation"],
                    "postponed_triggers": data["trace"]["trigger"]["postponed"],
                }
            )

    comparisons = report["comparisons"]
    report["totals"] = {
        "comparisons": len(comparisons),
        "a_dominates": sum(1 for c in comparisons if c["a_dominates"]),
        "trend_holds": sum(1 for t in report["obss_ac_trend"] if t["ac3_not_lower"]),
        "trend_checks": len(report["obss_ac_trend"]),
    }
    return report


class BatchProcessor:
    """Runs the scenario matrix across seeds on a bounded worker pool"""

    def __init__(
        self,
        out_dir: Optional[str] = None,
        workers: Optional[int] = None,
        sim_duration_s: Optional[float] = None,
        warmup_s: Optional[float] = None,
    ):
        self.out_dir = out_dir or str(get_setting("output_dir"))
        self.workers = workers or int(get_setting("workers"))
        self.sim_duration_s = sim_duration_s or float(get_setting("sim_duration_s"))
        self.warmup_s = warmup_s if warmup_s is not None else float(get_setting("warmup_s"))
        # Runs of another length or warm-up are distinct runs for resume
        self.variant = f"{self.sim_duration_s:g}s-warmup{self.warmup_s:g}s"
        self.runs_dir = os.path.join(self.out_dir, self.variant)

        self.progress_tracker = ProgressTracker(os.path.join(self.out_dir, "progress.json"))

        self.logger = logging.getLogger(__name__)

    def plan(self, protocols: Sequence[ProtocolKind], seeds: Sequence[int]) -> List[ScenarioConfig]:
        """Scenario x seed product, in matrix order"""
        wanted = set(protocols)
        configs = [
            c
            for c in scenario_matrix(self.sim_duration_s, warmup_s=self.warmup_s)
            if c.protocol_bss1 in wanted
        ]
        return [c.with_seed(seed) for c in configs for seed in seeds]

    def run_batch(
        self,
        protocols: Sequence[ProtocolKind] = ALL_PROTOCOLS,
        seeds: Sequence[int] = (1, 2, 3, 4, 5),
        resume: bool = True,
        trace_stats: bool = False,
    ) -> Dict:
        """Run every pending (scenario, seed) pair and write the comparison report"""
        start_time = time.time()
        if not resume:
            self.progress_tracker.reset_progress()
        session_id = self.progress_tracker.start_session()

        runs = self.plan(protocols, seeds)
        pending_keys = set(self.progress_tracker.pending_runs([(c.name, c.seed) for c in runs], self.variant))
        pending = [c for c in runs if (c.name, c.seed) in pending_keys]
        self.logger.info(
            f"Starting batch (Session: {session_id}): {len(runs)} runs, "
            f"{len(runs) - len(pending)} already completed, {self.workers} workers"
        )

        failed: List[Dict] = []
        with tqdm(desc="Batch Progress", total=len(pending)) as pbar:
            with ProcessPoolExecutor(max_workers=self.workers) as executor:
                futures = {
                    executor.submit(_run_worker, c.to_dict(), self.runs_dir, trace_stats): c
                    for c in pending
                }
                for future in as_completed(futures):
                    config = futures[future]
                    try:
                        name, seed, files = future.result()
                        self.progress_tracker.mark_completed(name, seed, files, self.variant)
                    except Exception as e:
                        # Record and continue with the remaining runs
                        self.logger.error(f"Run {config.name} seed {config.seed} failed: {e}")
                        self.progress_tracker.log_error(str(e), config.name, config.seed)
                        failed.append({"scenario": config.name, "seed": config.seed, "error": str(e)})
                    pbar.update(1)
                    pbar.set_postfix({"Failed": len(failed)})

        summaries = {}
        for config in runs:
            files = self.progress_tracker.completed_result(config.name, config.seed, self.variant)
            data = _read_summary(files) if files else None
            if data is not None:
                summaries[(config.name, config.seed)] = data

        report = comparison_report(summaries, seeds)
        report["failed_runs"] = failed
        report_path = os.path.join(self.out_dir, "comparison_report.json")
        write_summary(report, report_path)

        result = {
            "success": not failed,
            "session_id": session_id,
            "total_runs": len(runs),
            "runs_executed": len(pending) - len(failed),
            "runs_failed": len(failed),
            "report": report_path,
            "duration_seconds": round(time.time() - start_time, 2),
        }
        self.logger.info(f"Batch completed: {result}")
        return result

    def get_status(
        self, protocols: Sequence[ProtocolKind] = ALL_PROTOCOLS, seeds: Sequence[int] = (1, 2, 3, 4, 5)
    ) -> Dict:
        """Get current status and statistics for one planned batch"""
        runs = [(c.name, c.seed) for c in self.plan(protocols, seeds)]
        pending = self.progress_tracker.pending_runs(runs, self.variant)
        return {
            "out_dir": self.out_dir,
            "variant": self.variant,
            "planned_runs": len(runs),
            "pending_runs": len(pending),
            "eta": self.progress_tracker.calculate_eta(len(pending)),
            "session_stats": self.progress_tracker.get_statistics(),
        }
