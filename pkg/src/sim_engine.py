"""
Discrete-event core shared by the medium and MAC models

Time is integer nanoseconds. Events with the same fire time run in the order
they were scheduled. Randomness comes from per-node substreams of one seed,
so adding a node never changes the draws of another.
"""

import heapq
import itertools
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterator, List, Optional, TextIO

import numpy as np

logger = logging.getLogger(__name__)

SimTime = int

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000

# Simulations never run past this horizon
MAX_HORIZON = 1_000 * NS_PER_S


def us(value: float) -> SimTime:
    return int(round(value * NS_PER_US))


def ms(value: float) -> SimTime:
    return int(round(value * NS_PER_MS))


def seconds(value: float) -> SimTime:
    return int(round(value * NS_PER_S))


class SimulationError(RuntimeError):
    """Base class for simulator failures"""


class ScheduleError(SimulationError):
    """Raised for events scheduled in the past or beyond the horizon"""


class LiveLockError(SimulationError):
    """Raised when too many events fire without the clock advancing"""


class EventKind(str, Enum):
    ARRIVAL = "arrival"
    BACKOFF = "backoff"
    TX_START = "tx_start"
    TX_END = "tx_end"
    TIMER = "timer"
    TRIGGER_PERIOD = "trigger_period"


@dataclass(order=True)
class Event:
    fire_time: SimTime
    sequence: int
    kind: EventKind = field(compare=False)
    target: int = field(compare=False)
    callback: Callable[[], Any] = field(compare=False, repr=False)
    state: str = field(default="pending", compare=False)


class EventHandle:
    """Lets the scheduler of an event cancel it before it fires"""

    __slots__ = ("_event", "_simulator")

    def __init__(self, event: Event, simulator: "Simulator"):
        self._event = event
        self._simulator = simulator

    @property
    def fire_time(self) -> SimTime:
        return self._event.fire_time

    @property
    def pending(self) -> bool:
        return self._event.state == "pending"

    def cancel(self) -> bool:
        return self._simulator.cancel(self)


@dataclass
class RunStatistics:
    processed: int = 0
    cancelled: int = 0
    by_kind: Counter = field(default_factory=Counter)
    end_time: SimTime = 0

    def merge(self, other: "RunStatistics") -> "RunStatistics":
        return RunStatistics(
            processed=self.processed + other.processed,
            cancelled=self.cancelled + other.cancelled,
            by_kind=self.by_kind + other.by_kind,
            end_time=max(self.end_time, other.end_time),
        )


class RngStream:
    """Independent per-node random substream derived from one 64-bit seed"""

    def __init__(self, seed: int, substream: int = 0):
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.substream = substream
        sequence = np.random.SeedSequence(entropy=seed, spawn_key=(substream,))
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    def draw_uniform_int(self, lo: int, hi: int) -> int:
        """Uniform integer on [lo, hi], both ends inclusive"""
        if lo > hi:
            raise ValueError(f"lo must be <= hi, got {lo} > {hi}")
        if lo == hi:
            return lo
        return int(self._generator.integers(lo, hi, endpoint=True))

    def uniform(self, lo: float, hi: float) -> float:
        return float(self._generator.uniform(lo, hi))


def draw_uniform_int(stream: RngStream, lo: int, hi: int) -> int:
    return stream.draw_uniform_int(lo, hi)


class TraceRecorder:
    """Collects "time_ns,node,event_kind,detail" lines in firing order"""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.lines: List[str] = []

    def record(self, time_ns: SimTime, node: int, event_kind: str, detail: str = "") -> None:
        if self.enabled:
            self.lines.append(f"{time_ns},{node},{event_kind},{detail}")

    def write(self, stream: TextIO) -> None:
        for line in self.lines:
            stream.write(line + "\n")

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            self.write(f)
        logger.info(f"Wrote {len(self.lines)} trace records to {path}")

    def __iter__(self) -> Iterator[str]:
        return iter(self.lines)

    def __len__(self) -> int:
        return len(self.lines)


class Simulator:
    """Single-threaded event loop over an ordered event queue"""

    def __init__(
        self,
        seed: int = 0,
        livelock_cap: int = 1_000_000,
        trace: Optional[TraceRecorder] = None,
    ):
        self.seed = seed
        self.now: SimTime = 0
        self.livelock_cap = livelock_cap
        self.trace = trace or TraceRecorder(enabled=False)
        self._queue: List[Event] = []
        self._sequence = itertools.count()
        self._streams: Dict[int, RngStream] = {}
        self._pending_cancelled = 0
        self._same_time_run = 0
        self.statistics = RunStatistics()

    def stream(self, substream: int) -> RngStream:
        """The random substream owned by one node"""
        if substream not in self._streams:
            self._streams[substream] = RngStream(self.seed, substream)
        return self._streams[substream]

    def schedule(
        self,
        fire_time: SimTime,
        callback: Callable[[], Any],
        kind: EventKind = EventKind.TIMER,
        target: int = -1,
    ) -> EventHandle:
        if fire_time < self.now:
            raise ScheduleError(f"Event at {fire_time} ns is before now ({self.now} ns)")
        if fire_time > MAX_HORIZON:
            raise ScheduleError(f"Event at {fire_time} ns is beyond the {MAX_HORIZON} ns horizon")
        event = Event(int(fire_time), next(self._sequence), kind, target, callback)
        heapq.heappush(self._queue, event)
        return EventHandle(event, self)

    def schedule_in(
        self,
        delay: SimTime,
        callback: Callable[[], Any],
        kind: EventKind = EventKind.TIMER,
        target: int = -1,
    ) -> EventHandle:
        return self.schedule(self.now + delay, callback, kind, target)

    def cancel(self, handle: Optional[EventHandle]) -> bool:
        if handle is None:
            return False
        event = handle._event
        if event.state != "pending":
            return False
        event.state = "cancelled"
        self._pending_cancelled += 1
        return True

    def pending(self) -> int:
        return len(self._queue) - self._pending_cancelled

    def run_until(self, t_end: SimTime) -> RunStatistics:
        """Fire every event with fire_time <= t_end, then park the clock at t_end"""
        if t_end < self.now:
            raise ScheduleError(f"run_until({t_end}) is before now ({self.now})")

        run = RunStatistics()
        while self._queue and self._queue[0].fire_time <= t_end:
            event = heapq.heappop(self._queue)
            if event.state == "cancelled":
                self._pending_cancelled -= 1
                run.cancelled += 1
                continue

            if event.fire_time == self.now:
                self._same_time_run += 1
                if self._same_time_run > self.livelock_cap:
                    raise LiveLockError(
                        f"{self._same_time_run} events fired at {self.now} ns without time advancing"
                    )
            else:
                self._same_time_run = 1
            self.now = event.fire_time

            event.state = "fired"
            event.callback()

            run.processed += 1
            run.by_kind[event.kind.value] += 1

        self.now = t_end
        run.end_time = t_end
        self.statistics = self.statistics.merge(run)
        return run
