"""
Shared wireless medium: audibility, airtime and collision outcomes

Collisions are protocol-level: any overlap with another audible
transmission loses the frame at that receiver, there is no capture.
Transmissions solicited by one trigger frame share a multi-user group and
do not collide with each other.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Deque, Dict, Iterable, List, Optional, Protocol

from .sim_engine import SimTime, Simulator, us

logger = logging.getLogger(__name__)

BROADCAST = -1


class Role(str, Enum):
    AP = "ap"
    STA = "sta"


class AudibilityMode(str, Enum):
    DISK = "disk"
    LOG_DISTANCE = "log_distance"


class FrameKind(str, Enum):
    DATA = "Data"
    ACK = "Ack"
    BLOCK_ACK = "BlockAck"
    RTS_SHARE = "RtsShare"
    CTS_SHARE = "CtsShare"
    CTS_REJECT = "CtsReject"
    CF_END = "CfEnd"
    BSRP = "Bsrp"
    BSR = "Bsr"
    BASIC_TRIGGER = "BasicTrigger"


class Outcome(str, Enum):
    DELIVERED = "Delivered"
    COLLIDED = "Collided"
    INAUDIBLE = "Inaudible"


DEFAULT_CONTROL_AIRTIME_US = {
    FrameKind.ACK: 32,
    FrameKind.BLOCK_ACK: 32,
    FrameKind.RTS_SHARE: 36,
    FrameKind.CTS_SHARE: 36,
    FrameKind.CTS_REJECT: 32,
    FrameKind.CF_END: 32,
    FrameKind.BSRP: 48,
    FrameKind.BSR: 32,
    FrameKind.BASIC_TRIGGER: 48,
}


@dataclass(frozen=True)
class NodePosition:
    node: int
    x: float
    y: float
    tx_power: float
    role: Role

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Node {self.node} has non-finite coordinates")
        if not -10.0 <= self.tx_power <= 30.0:
            raise ValueError(f"Node {self.node} tx_power {self.tx_power} dBm outside [-10, 30]")

    def distance_to(self, other: "NodePosition") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class PhyProfile:
    """
    80 MHz, 64-QAM rate 3/4: 980 data subcarriers x 6 bits x 3/4 = 4410 data
    bits per 13.6 us symbol. Durations are SimTime nanoseconds.
    """

    bandwidth: float = 80e6
    data_bits_per_symbol: int = 4410
    symbol_duration: SimTime = us(13.6)
    preamble_duration: SimTime = us(40)
    legacy_control_rate: float = 24e6
    mac_header_bytes: int = 40
    cs_threshold: float = -82.0
    audibility_mode: AudibilityMode = AudibilityMode.DISK
    disk_radius: float = 10.0
    pathloss_exponent: float = 3.5
    reference_loss_db: float = 46.7
    control_airtime_us: Dict[FrameKind, float] = field(
        default_factory=lambda: dict(DEFAULT_CONTROL_AIRTIME_US)
    )

    def __post_init__(self):
        if self.data_bits_per_symbol <= 0:
            raise ValueError("data_bits_per_symbol must be > 0")
        if self.symbol_duration <= 0 or self.preamble_duration <= 0:
            raise ValueError("symbol and preamble durations must be > 0")

    def with_control_airtime(self, kind: FrameKind, value_us: float) -> "PhyProfile":
        table = dict(self.control_airtime_us)
        table[kind] = value_us
        return replace(self, control_airtime_us=table)


def audible(a: NodePosition, b: NodePosition, profile: PhyProfile) -> bool:
    """True when b senses a's transmissions"""
    distance = a.distance_to(b)
    if distance == 0:
        return True
    if profile.audibility_mode is AudibilityMode.DISK:
        return distance <= profile.disk_radius
    received = a.tx_power - profile.reference_loss_db - 10 * profile.pathloss_exponent * math.log10(distance)
    return received >= profile.cs_threshold


def airtime_data(payload_bytes: int, profile: PhyProfile, ru_fraction: float = 1.0) -> SimTime:
    """Preamble plus whole OFDM symbols for SERVICE + MAC frame + tail bits"""
    if payload_bytes < 1:
        raise ValueError(f"payload_bytes must be >= 1, got {payload_bytes}")
    if not 0 < ru_fraction <= 1:
        raise ValueError(f"ru_fraction must lie in (0, 1], got {ru_fraction}")
    bits = 16 + 8 * (profile.mac_header_bytes + payload_bytes) + 6
    bits_per_symbol = max(1, int(profile.data_bits_per_symbol * ru_fraction))
    symbols = -(-bits // bits_per_symbol)
    return profile.preamble_duration + symbols * profile.symbol_duration


def airtime_control(kind: FrameKind, profile: PhyProfile) -> SimTime:
    if kind is FrameKind.DATA or kind not in profile.control_airtime_us:
        raise ValueError(f"No control airtime configured for {kind}")
    return us(profile.control_airtime_us[kind])


@dataclass
class TransmissionRecord:
    frame: object
    transmitter: int
    start: SimTime
    end: SimTime
    mu_group: Optional[int] = None

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError(f"Transmission end {self.end} must follow start {self.start}")

    def overlaps(self, other: "TransmissionRecord") -> bool:
        return other.start < self.end and other.end > self.start


class MediumListener(Protocol):
    nav_until: SimTime

    def on_carrier_change(self, now: SimTime, busy: bool) -> None:
        ...

    def on_frame(self, record: TransmissionRecord, outcome: Outcome) -> None:
        ...


class Medium:
    """Physical carrier sense and per-receiver reception outcomes"""

    # Finished transmissions are kept this long for overlap checks
    HISTORY_NS = 10_000_000

    def __init__(self, simulator: Simulator, profile: PhyProfile):
        self.simulator = simulator
        self.profile = profile
        self.positions: Dict[int, NodePosition] = {}
        self.listeners: Dict[int, MediumListener] = {}
        self._hears: Dict[int, List[int]] = {}
        self._active: Dict[int, TransmissionRecord] = {}
        self._history: Deque[TransmissionRecord] = deque()
        self._busy_count: Dict[int, int] = {}
        self._last_delivered: Dict[int, TransmissionRecord] = {}
        self.overlap_violations: List[str] = []

    def register(self, position: NodePosition, listener: MediumListener) -> None:
        if position.node in self.positions:
            raise ValueError(f"Node {position.node} is already registered")
        self.positions[position.node] = position
        self.listeners[position.node] = listener
        self._busy_count[position.node] = 0
        self._rebuild_audibility()

    def _rebuild_audibility(self) -> None:
        # _hears[tx] lists every node that senses tx, the transmitter included
        self._hears = {
            tx: [
                rx
                for rx, rx_pos in self.positions.items()
                if rx == tx or audible(tx_pos, rx_pos, self.profile)
            ]
            for tx, tx_pos in self.positions.items()
        }

    def hears(self, receiver: int, transmitter: int) -> bool:
        return receiver in self._hears.get(transmitter, ())

    def neighbours(self, transmitter: int) -> List[int]:
        return [rx for rx in self._hears[transmitter] if rx != transmitter]

    def carrier_busy(
        self, observer: int, at: Optional[SimTime] = None, ignore_group: Optional[int] = None
    ) -> bool:
        """Physical carrier sense only, optionally blind to one multi-user group"""
        if ignore_group is None and (at is None or at == self.simulator.now):
            return self._busy_count.get(observer, 0) > 0
        when = self.simulator.now if at is None else at
        return any(
            record.start <= when < record.end
            and self.hears(observer, record.transmitter)
            and (ignore_group is None or record.mu_group != ignore_group)
            for record in self._active.values()
        )

    def medium_busy(self, observer: int, at: Optional[SimTime] = None) -> bool:
        if observer not in self.positions:
            raise ValueError(f"Node {observer} is not registered")
        when = self.simulator.now if at is None else at
        listener = self.listeners[observer]
        return self.carrier_busy(observer, at) or listener.nav_until > when

    def is_transmitting(self, node: int) -> bool:
        return node in self._active

    def start_transmission(
        self, transmitter: int, frame: object, duration: SimTime, mu_group: Optional[int] = None
    ) -> TransmissionRecord:
        if transmitter in self._active:
            raise RuntimeError(f"Node {transmitter} is already transmitting")
        now = self.simulator.now
        record = TransmissionRecord(frame, transmitter, now, now + duration, mu_group)
        self._active[transmitter] = record
        self._history.append(record)

        for rx in self._hears[transmitter]:
            self._busy_count[rx] += 1
            if self._busy_count[rx] == 1:
                self.listeners[rx].on_carrier_change(now, True)

        self.simulator.schedule(record.end, lambda: self._finish(record), target=transmitter)
        return record

    def reception_outcome(self, record: TransmissionRecord, receiver: int) -> Outcome:
        if receiver == record.transmitter or not self.hears(receiver, record.transmitter):
            return Outcome.INAUDIBLE
        for other in self._history:
            if other is record or not record.overlaps(other):
                continue
            if record.mu_group is not None and other.mu_group == record.mu_group:
                continue
            # Half duplex: a receiver that transmits itself loses the frame
            if other.transmitter == receiver or self.hears(receiver, other.transmitter):
                return Outcome.COLLIDED
        return Outcome.DELIVERED

    def _finish(self, record: TransmissionRecord) -> None:
        now = self.simulator.now
        del self._active[record.transmitter]

        sensed = self._hears[record.transmitter]
        idle_now = []
        for rx in sensed:
            self._busy_count[rx] -= 1
            if self._busy_count[rx] == 0:
                idle_now.append(rx)

        # Receptions first so NAV updates land before idle notifications
        for rx in sensed:
            if rx == record.transmitter:
                continue
            outcome = self.reception_outcome(record, rx)
            if outcome is Outcome.DELIVERED:
                self._check_delivered_overlap(record, rx)
            self.listeners[rx].on_frame(record, outcome)

        self.listeners[record.transmitter].on_frame(record, Outcome.INAUDIBLE)

        for rx in idle_now:
            self.listeners[rx].on_carrier_change(now, False)

        self._prune(now)

    def _check_delivered_overlap(self, record: TransmissionRecord, receiver: int) -> None:
        previous = self._last_delivered.get(receiver)
        if previous is not None and previous.end > record.start:
            same_group = record.mu_group is not None and previous.mu_group == record.mu_group
            if not same_group:
                self.overlap_violations.append(
                    f"node {receiver}: delivered frames from {previous.transmitter} and "
                    f"{record.transmitter} overlap at {record.start} ns"
                )
        self._last_delivered[receiver] = record

    def _prune(self, now: SimTime) -> None:
        while self._history and self._history[0].end < now - self.HISTORY_NS:
            self._history.popleft()

    def active_records(self) -> Iterable[TransmissionRecord]:
        return list(self._active.values())
