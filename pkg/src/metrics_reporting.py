"""
Per-packet delay collection, empirical CDFs and result files
"""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from functools import reduce
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .mac_protocols import Packet
from .sim_engine import NS_PER_US, SimTime

logger = logging.getLogger(__name__)

PERCENTILE_GRID = (10, 25, 50, 75, 90, 99)


class MetricsError(ValueError):
    """Raised for invalid metric input such as duplicate or empty records"""


@dataclass(frozen=True)
class DelayRecord:
    packet_id: str
    source: int
    generated_at: SimTime
    delivered_at: Optional[SimTime] = None
    retries: int = 0
    run: str = ""

    def __post_init__(self):
        if self.delivered_at is not None and self.delivered_at < self.generated_at:
            raise MetricsError(f"Packet {self.packet_id} delivered before it was generated")

    @property
    def key(self) -> Tuple[str, str]:
        return (self.run, self.packet_id)

    @property
    def dropped(self) -> bool:
        return self.delivered_at is None

    @property
    def delay(self) -> SimTime:
        if self.delivered_at is None:
            raise MetricsError(f"Packet {self.packet_id} was dropped and has no delay")
        return self.delivered_at - self.generated_at


@dataclass(frozen=True)
class EcdfTable:
    """Distinct delays in microseconds with the fraction of samples at or below each"""

    values: np.ndarray
    counts: np.ndarray
    sample_count: int
    drop_count: int = 0

    @property
    def fractions(self) -> np.ndarray:
        return self.counts / self.sample_count

    def at(self, delay_us: float) -> float:
        """F(x): fraction of samples with delay <= x"""
        index = int(np.searchsorted(self.values, delay_us, side="right"))
        return 0.0 if index == 0 else float(self.counts[index - 1]) / self.sample_count

    def mean(self) -> float:
        per_value = np.diff(np.concatenate(([0], self.counts)))
        return float(np.dot(self.values, per_value) / self.sample_count)

    def to_csv(self) -> str:
        lines = ["delay_us,cum_fraction"]
        for value, fraction in zip(self.values, self.fractions):
            lines.append(f"{value:.3f},{fraction:.9g}")
        return "\n".join(lines) + "\n"


@dataclass
class PercentileComparison:
    percentile: int
    a_value: float
    b_value: float

    @property
    def a_not_worse(self) -> bool:
        return self.a_value <= self.b_value


@dataclass
class DominanceReport:
    points: List[PercentileComparison] = field(default_factory=list)

    @property
    def a_dominates(self) -> bool:
        return all(p.a_value <= p.b_value for p in self.points)

    @property
    def b_dominates(self) -> bool:
        return all(p.b_value <= p.a_value for p in self.points)

    def to_dict(self) -> Dict:
        return {
            "points": [
                {
                    "percentile": p.percentile,
                    "a_us": round(p.a_value, 3),
                    "b_us": round(p.b_value, 3),
                    "a_not_worse": p.a_not_worse,
                }
                for p in self.points
            ],
            "a_dominates": self.a_dominates,
            "b_dominates": self.b_dominates,
        }


def ecdf(records: Iterable[DelayRecord]) -> EcdfTable:
    """Standard empirical CDF over delivered records; drops are counted, not plotted"""
    delays = []
    drops = 0
    for record in records:
        if record.dropped:
            drops += 1
        else:
            delays.append(record.delay / NS_PER_US)
    if not delays:
        raise MetricsError("Cannot build a CDF without delivered records")

    values, counts = np.unique(np.asarray(delays, dtype=float), return_counts=True)
    return EcdfTable(
        values=values,
        counts=np.cumsum(counts),
        sample_count=len(delays),
        drop_count=drops,
    )


def percentile(table: EcdfTable, p: float) -> float:
    """Nearest-rank percentile: the ceil(p*n)-th smallest delay"""
    if table.sample_count == 0:
        raise MetricsError("Empty CDF table")
    if not 0 < p <= 1:
        raise MetricsError(f"Percentile fraction must lie in (0, 1], got {p}")
    # Rounding first keeps 0.1 * 10 at rank 1
    rank = max(1, math.ceil(round(p * table.sample_count, 9)))
    index = int(np.searchsorted(table.counts, rank, side="left"))
    return float(table.values[index])


def compare_runs(
    a: EcdfTable, b: EcdfTable, grid: Sequence[int] = PERCENTILE_GRID
) -> DominanceReport:
    report = DominanceReport()
    for pct in grid:
        report.points.append(
            PercentileComparison(pct, percentile(a, pct / 100), percentile(b, pct / 100))
        )
    return report


def summarize(table: EcdfTable, grid: Sequence[int] = PERCENTILE_GRID) -> Dict:
    return {
        "count": table.sample_count,
        "drops": table.drop_count,
        "mean_us": round(table.mean(), 3),
        "percentiles_us": {f"p{pct}": round(percentile(table, pct / 100), 3) for pct in grid},
    }


class MetricsCollector:
    """Collects delay records of the measured nodes after the warm-up"""

    def __init__(
        self,
        warmup: SimTime = 0,
        nodes: Optional[Iterable[int]] = None,
        run: str = "",
    ):
        self.warmup = warmup
        self.nodes = None if nodes is None else frozenset(nodes)
        self.run = run
        self.records: Dict[Tuple[str, str], DelayRecord] = {}
        self.generated_count: Dict[int, int] = {}
        self.logger = logging.getLogger(__name__)

    def _measured(self, packet: Packet) -> bool:
        if self.nodes is not None and packet.source not in self.nodes:
            return False
        return packet.generated_at >= self.warmup

    def generated(self, packet: Packet) -> None:
        if self._measured(packet):
            self.generated_count[packet.source] = self.generated_count.get(packet.source, 0) + 1

    def delivered(self, packet: Packet, at: SimTime) -> None:
        if self._measured(packet):
            self.record_delivery(
                DelayRecord(packet.packet_id, packet.source, packet.generated_at, at, packet.retries, self.run)
            )

    def dropped(self, packet: Packet, at: SimTime) -> None:
        if self._measured(packet):
            self.record_delivery(
                DelayRecord(packet.packet_id, packet.source, packet.generated_at, None, packet.retries, self.run)
            )

    def record_delivery(self, record: DelayRecord) -> None:
        if record.generated_at < self.warmup:
            return
        if record.key in self.records:
            raise MetricsError(f"Duplicate record for packet {record.packet_id}")
        self.records[record.key] = record

    @property
    def sample_count(self) -> int:
        return sum(1 for r in self.records.values() if not r.dropped)

    @property
    def drop_count(self) -> int:
        return sum(1 for r in self.records.values() if r.dropped)

    def table(self, nodes: Optional[Iterable[int]] = None) -> EcdfTable:
        wanted = None if nodes is None else set(nodes)
        return ecdf(
            r for r in self.sorted_records() if wanted is None or r.source in wanted
        )

    def sorted_records(self) -> List[DelayRecord]:
        return sorted(self.records.values(), key=lambda r: (r.run, r.source, r.generated_at, r.packet_id))

    def conservation(self) -> Dict[int, Dict[str, int]]:
        """Per node: generated = delivered + dropped + still pending at the end"""
        report = {}
        for node in sorted(set(self.generated_count) | {r.source for r in self.records.values()}):
            delivered = sum(1 for r in self.records.values() if r.source == node and not r.dropped)
            dropped = sum(1 for r in self.records.values() if r.source == node and r.dropped)
            generated = self.generated_count.get(node, 0)
            report[node] = {
                "generated": generated,
                "delivered": delivered,
                "dropped": dropped,
                "pending": generated - delivered - dropped,
            }
        return report

    def merge(self, other: "MetricsCollector") -> "MetricsCollector":
        merged = MetricsCollector(
            warmup=min(self.warmup, other.warmup),
            nodes=None if self.nodes is None or other.nodes is None else self.nodes | other.nodes,
            run=self.run if self.run == other.run else "",
        )
        for record in list(self.records.values()) + list(other.records.values()):
            merged.record_delivery(record)
        for source in (self, other):
            for node, count in source.generated_count.items():
                merged.generated_count[node] = merged.generated_count.get(node, 0) + count
        return merged


def pooled(collectors: Sequence[MetricsCollector]) -> MetricsCollector:
    if not collectors:
        raise MetricsError("Nothing to pool")
    return reduce(lambda a, b: a.merge(b), collectors)


def result_stem(scenario_name: str, seed: int) -> str:
    return f"{scenario_name.replace('/', '_')}_seed{seed}"


def write_cdf_csv(table: EcdfTable, path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(table.to_csv())


def write_summary(summary: Dict, path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")


def write_run_results(
    collector: MetricsCollector, out_dir: str, scenario_name: str, seed: int, extra: Optional[Dict] = None
) -> Dict[str, str]:
    """Write "<scenario>_seed<N>.csv" and ".json" and return their paths"""
    stem = os.path.join(out_dir, result_stem(scenario_name, seed))
    table = collector.table()
    summary = {"scenario": scenario_name, "seed": seed, **summarize(table)}
    summary["conservation"] = {str(k): v for k, v in collector.conservation().items()}
    if extra:
        summary.update(extra)

    write_cdf_csv(table, f"{stem}.csv")
    write_summary(summary, f"{stem}.json")
    logger.info(f"Wrote {table.sample_count} samples for {scenario_name} seed {seed} to {stem}.csv")
    return {"cdf": f"{stem}.csv", "summary": f"{stem}.json"}
