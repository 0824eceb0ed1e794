"""
Queries over event traces: node timelines, idle gaps between OBSS TxOPs
and trigger postponements
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .mac_protocols import AC3, MacTiming
from .sim_engine import NS_PER_US, SimTime, us

logger = logging.getLogger(__name__)

# AIFS of AC3 plus a full cw_max backoff: the longest an AC3 access waits on an idle medium
IDLE_ACCESS_BOUND = MacTiming().aifs(AC3) + AC3.cw_max * MacTiming().slot


class TraceFormatError(ValueError):
    """Raised for trace lines that are not "time_ns,node,event_kind,detail" """


@dataclass(frozen=True)
class TraceEvent:
    time: SimTime
    node: int
    kind: str
    fields: Dict[str, str] = field(default_factory=dict)

    def get_int(self, key: str, default: int = 0) -> int:
        value = self.fields.get(key)
        if value is None or value == "None":
            return default
        return int(value)


@dataclass
class Trace:
    events: List[TraceEvent] = field(default_factory=list)
    nodes: Dict[int, Dict[str, str]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.events)

    def bss_of(self, node: int) -> Optional[int]:
        info = self.nodes.get(node)
        return None if info is None or "bss" not in info else int(info["bss"])

    def nodes_in(self, bss: int) -> List[int]:
        return sorted(n for n in self.nodes if self.bss_of(n) == bss)


@dataclass
class GapReport:
    gap_count: int = 0
    used_gaps: int = 0
    idle_time: SimTime = 0
    gaps: List[Tuple[SimTime, SimTime, bool]] = field(default_factory=list)

    @property
    def utilisation(self) -> float:
        return self.used_gaps / self.gap_count if self.gap_count else 0.0

    def to_dict(self) -> Dict:
        return {
            "gap_count": self.gap_count,
            "used_gaps": self.used_gaps,
            "utilisation": round(self.utilisation, 6),
            "idle_time_us": self.idle_time / NS_PER_US,
        }


@dataclass(frozen=True)
class Postponement:
    node: int
    due: SimTime
    bsrp_start: SimTime
    skipped: int = 0

    @property
    def delay(self) -> SimTime:
        return self.bsrp_start - self.due


def _parse_detail(detail: str, line_number: int) -> Dict[str, str]:
    fields = {}
    for token in detail.split():
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise TraceFormatError(f"Line {line_number}: malformed detail token {token!r}")
        fields[key] = value
    return fields


def parse_trace(lines: Iterable[str]) -> Trace:
    """Parse trace lines in firing order; blank lines are skipped"""
    trace = Trace()
    last_time = 0
    for line_number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",", 3)
        if len(parts) < 3:
            raise TraceFormatError(f"Line {line_number}: expected time_ns,node,event_kind,detail")
        try:
            time = int(parts[0])
            node = int(parts[1])
        except ValueError:
            raise TraceFormatError(f"Line {line_number}: time and node must be integers")
        if time < last_time:
            raise TraceFormatError(f"Line {line_number}: time {time} runs backwards")
        last_time = time

        event = TraceEvent(time, node, parts[2], _parse_detail(parts[3] if len(parts) > 3 else "", line_number))
        if event.kind == "join":
            trace.nodes[node] = dict(event.fields)
        trace.events.append(event)
    return trace


def load_trace(path: str) -> Trace:
    with open(path, "r") as f:
        return parse_trace(f)


def node_timeline(trace: Trace, node: int) -> List[TraceEvent]:
    return [e for e in trace.events if e.node == node]


def frame_sequence(trace: Trace, node: int) -> List[str]:
    """Kinds of the frames a node transmitted, in order"""
    return [e.fields.get("kind", "") for e in node_timeline(trace, node) if e.kind == "tx_start"]


def txop_spans(trace: Trace, bss: int) -> List[Tuple[SimTime, SimTime]]:
    """Merged [open, close] intervals of the TxOPs held by nodes of one BSS"""
    members = set(trace.nodes_in(bss))
    spans = []
    opened: Dict[int, SimTime] = {}
    for event in trace.events:
        if event.node not in members:
            continue
        if event.kind == "txop_open":
            opened[event.node] = event.time
        elif event.kind == "txop_close":
            # An AP may close the TxOP it shared on behalf of the holder
            owner = event.get_int("owner", event.node)
            if owner in opened:
                spans.append((opened.pop(owner), event.time))

    merged: List[Tuple[SimTime, SimTime]] = []
    for start, end in sorted(spans):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def obss_gap_analysis(
    trace: Trace, reference_bss: int = 1, other_bss: int = 2, min_gap: SimTime = us(34)
) -> GapReport:
    """
    Idle intervals between consecutive OBSS TxOPs that are at least min_gap
    long; a gap counts as used when a reference-BSS node starts a
    transmission inside it.
    """
    spans = txop_spans(trace, other_bss)
    members = set(trace.nodes_in(reference_bss))
    starts = [e.time for e in trace.events if e.kind == "tx_start" and e.node in members]

    report = GapReport()
    for (_, previous_end), (next_start, _) in zip(spans, spans[1:]):
        if next_start - previous_end < min_gap:
            continue
        used = any(previous_end <= t < next_start for t in starts)
        report.gap_count += 1
        report.used_gaps += int(used)
        report.idle_time += next_start - previous_end
        report.gaps.append((previous_end, next_start, used))
    return report


def trigger_postponements(trace: Trace) -> List[Postponement]:
    """Pairs the latest due time of each trigger cycle with the BSRP that served it"""
    results = []
    due: Dict[int, SimTime] = {}
    skipped: Dict[int, int] = {}
    for event in trace.events:
        if event.kind == "trigger_due":
            if event.node in due:
                skipped[event.node] = skipped.get(event.node, 0) + 1
            due[event.node] = event.time
        elif event.kind == "tx_start" and event.fields.get("kind") == "Bsrp" and event.node in due:
            results.append(
                Postponement(event.node, due.pop(event.node), event.time, skipped.pop(event.node, 0))
            )
    return results


def postponement_summary(
    postponements: List[Postponement], idle_bound: SimTime = IDLE_ACCESS_BOUND
) -> Dict:
    """Cycles whose BSRP started later than an idle medium allows count as postponed"""
    delays = [p.delay for p in postponements]
    postponed = [d for d in delays if d > idle_bound]
    return {
        "cycles": len(postponements),
        "postponed": len(postponed),
        "skipped_cycles": sum(p.skipped for p in postponements),
        "mean_delay_us": round(sum(delays) / len(delays) / NS_PER_US, 3) if delays else 0.0,
        "max_delay_us": max(delays) / NS_PER_US if delays else 0.0,
    }


def trace_report(trace: Trace, reference_bss: int = 1, other_bss: int = 2) -> Dict:
    """Gap and postponement statistics for a whole trace; empty for an empty trace"""
    if not trace.events:
        return {}
    return {
        "events": len(trace),
        "gaps": obss_gap_analysis(trace, reference_bss, other_bss).to_dict(),
        "trigger": postponement_summary(trigger_postponements(trace)),
    }
