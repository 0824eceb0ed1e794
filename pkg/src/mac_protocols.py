"""
Channel access engines: EDCA contention, trigger-based uplink and
sharing-based TxOP coordination

Every node is a state machine driven by the medium's carrier and reception
callbacks. Contention itself is a pure step function over NodeState so it
can be exercised without a medium.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Deque, Dict, List, Optional, Protocol, Sequence, Tuple

from .phy_medium import (
    BROADCAST,
    FrameKind,
    Medium,
    NodePosition,
    Outcome,
    PhyProfile,
    Role,
    TransmissionRecord,
    airtime_control,
    airtime_data,
)
from .sim_engine import EventHandle, EventKind, RngStream, SimTime, SimulationError, Simulator, ms, us

logger = logging.getLogger(__name__)


class InvariantViolation(SimulationError):
    """Raised when a MAC rule is broken during a run"""


@dataclass(frozen=True)
class AccessCategory:
    index: int
    cw_min: int
    cw_max: int
    aifsn: int

    def __post_init__(self):
        if not 0 <= self.index <= 3:
            raise ValueError(f"AC index must be 0..3, got {self.index}")
        if self.cw_min > self.cw_max:
            raise ValueError(f"cw_min {self.cw_min} exceeds cw_max {self.cw_max}")
        for cw in (self.cw_min, self.cw_max):
            if cw < 1 or (cw + 1) & cw:
                raise ValueError(f"Contention window {cw} is not of the form 2^k - 1")

    @property
    def name(self) -> str:
        return f"ac{self.index}"


AC0 = AccessCategory(0, 15, 1023, 7)
AC1 = AccessCategory(1, 15, 1023, 3)
AC2 = AccessCategory(2, 7, 15, 2)
AC3 = AccessCategory(3, 3, 7, 2)
ACCESS_CATEGORIES = (AC0, AC1, AC2, AC3)


def access_category(name) -> AccessCategory:
    """Look up an access category by index or by name such as "ac3" """
    text = str(name).strip().lower()
    index = int(text[2:]) if text.startswith("ac") else int(text)
    if not 0 <= index <= 3:
        raise ValueError(f"Unknown access category: {name}")
    return ACCESS_CATEGORIES[index]


@dataclass(frozen=True)
class MacTiming:
    slot: SimTime = us(9)
    sifs: SimTime = us(16)
    txop_limit: SimTime = ms(5)
    retry_limit: int = 7
    trigger_period: SimTime = ms(5)
    trigger_phase: SimTime = ms(2.5)
    max_poll_rounds: int = 1
    cs_required: bool = True
    ap_downlink_in_share: bool = False

    def __post_init__(self):
        if self.trigger_period <= 0:
            raise ValueError("trigger_period must be > 0")
        if self.txop_limit <= 0:
            raise ValueError("txop_limit must be > 0")
        if self.max_poll_rounds < 1:
            raise ValueError("max_poll_rounds must be >= 1")

    def aifs(self, ac: AccessCategory) -> SimTime:
        return self.sifs + ac.aifsn * self.slot


@dataclass
class Packet:
    packet_id: str
    source: int
    destination: int
    payload_bytes: int
    generated_at: SimTime
    retries: int = 0


@dataclass(frozen=True)
class ShareInfo:
    """Sharing descriptor carried by RtsShare and CtsShare"""

    holder: int
    shared_stas: Tuple[int, ...]
    allocations: Tuple[Tuple[int, SimTime], ...]
    priority: int = 0
    holder_duration: SimTime = 0


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    src: int
    dst: int
    payload_bytes: int = 0
    share_info: Optional[ShareInfo] = None
    nav_duration: SimTime = 0
    more_data: bool = False
    packet: Optional[Packet] = field(default=None, compare=False)
    ack_kind: Optional[FrameKind] = None
    txop_owner: int = -1
    targets: Tuple[int, ...] = ()
    acked: Tuple[int, ...] = ()
    acked_packets: Tuple[str, ...] = ()
    buffered: int = 0
    ru_fraction: float = 1.0
    ul_duration: SimTime = 0
    mu_group: Optional[int] = None

    def __post_init__(self):
        carries_share = self.kind in (FrameKind.RTS_SHARE, FrameKind.CTS_SHARE)
        if carries_share != (self.share_info is not None):
            raise ValueError(f"{self.kind.value} frame share_info mismatch")
        if self.nav_duration < 0:
            raise ValueError(f"nav_duration must be >= 0, got {self.nav_duration}")

    def addressed_to(self, node: int) -> bool:
        if self.dst == node:
            return True
        return self.dst == BROADCAST and (not self.targets or node in self.targets)


class ProtocolRole(str, Enum):
    CONTENDER = "contender"
    TXOP_HOLDER = "txop_holder"
    SHARED_STA = "shared_sta"
    POLLING_AP = "polling_ap"
    TRIGGERING_AP = "triggering_ap"
    TRIGGERED_STA = "triggered_sta"


@dataclass
class NodeState:
    node: int
    ac: AccessCategory
    queue: Deque[Packet] = field(default_factory=deque)
    backoff_slots: Optional[int] = None
    retry_count: int = 0
    cw_current: int = -1
    nav_until: SimTime = 0
    protocol_role: ProtocolRole = ProtocolRole.CONTENDER
    txop_deadline: SimTime = 0
    contending: bool = False
    medium_idle: bool = True
    idle_since: SimTime = 0
    countdown_origin: SimTime = 0
    expiry: Optional[SimTime] = None

    def __post_init__(self):
        if self.cw_current < 0:
            self.cw_current = self.ac.cw_min


@dataclass(frozen=True)
class TxopGrant:
    holder: int
    start: SimTime
    limit: SimTime = ms(5)
    shared_allocations: Tuple[Tuple[int, SimTime], ...] = ()
    holder_frames: int = 0
    holder_duration: SimTime = 0

    def __post_init__(self):
        if any(allocated <= 0 for _, allocated in self.shared_allocations):
            raise ValueError("Shared allocations must be positive")
        if self.holder_duration + self.allocated > self.limit:
            raise ValueError("Grant allocations exceed the TxOP limit")

    @property
    def end(self) -> SimTime:
        return self.start + self.limit

    @property
    def allocated(self) -> SimTime:
        return sum(allocated for _, allocated in self.shared_allocations)


def contention_window(ac: AccessCategory, retry_count: int) -> int:
    return min(ac.cw_max, (ac.cw_min + 1) * 2**retry_count - 1)


def edca_draw_backoff(ac: AccessCategory, retry_count: int, rng: RngStream) -> int:
    if retry_count < 0:
        raise ValueError(f"retry_count must be >= 0, got {retry_count}")
    return rng.draw_uniform_int(0, contention_window(ac, retry_count))


class EdcaSignal(str, Enum):
    REQUEST = "request"
    BUSY = "busy"
    IDLE = "idle"
    EXPIRED = "expired"
    SUCCESS = "success"
    FAILURE = "failure"


class ActionKind(str, Enum):
    ARM = "arm"
    DISARM = "disarm"
    TRANSMIT = "transmit"
    DROP = "drop"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    time: SimTime = 0


def edca_engine_step(
    state: NodeState,
    signal: EdcaSignal,
    now: SimTime,
    timing: MacTiming,
    rng: RngStream,
) -> List[Action]:
    """
    Advance one node's contention state by one medium or outcome signal

    The countdown runs only while the medium is idle: AIFS first, then one
    slot per backoff unit. A busy medium pauses it, keeping the slots already
    consumed. A countdown expiring in the very instant the medium turns busy
    still transmits, which is how same-slot collisions arise.
    """
    ac = state.ac
    actions: List[Action] = []

    def arm(origin: SimTime):
        state.countdown_origin = origin
        state.expiry = origin + timing.aifs(ac) + state.backoff_slots * timing.slot
        actions.append(Action(ActionKind.ARM, state.expiry))

    if signal is EdcaSignal.REQUEST:
        state.contending = True
        if state.backoff_slots is None:
            state.cw_current = contention_window(ac, state.retry_count)
            state.backoff_slots = edca_draw_backoff(ac, state.retry_count, rng)
        if state.medium_idle and state.expiry is None:
            arm(max(now, state.idle_since))

    elif signal is EdcaSignal.BUSY:
        state.medium_idle = False
        if state.expiry is not None and state.expiry > now:
            elapsed = now - state.countdown_origin - timing.aifs(ac)
            if elapsed > 0:
                state.backoff_slots = max(0, state.backoff_slots - elapsed // timing.slot)
            state.expiry = None
            actions.append(Action(ActionKind.DISARM))

    elif signal is EdcaSignal.IDLE:
        state.medium_idle = True
        state.idle_since = now
        if state.contending and state.expiry is None:
            arm(now)

    elif signal is EdcaSignal.EXPIRED:
        state.expiry = None
        state.contending = False
        state.backoff_slots = None
        actions.append(Action(ActionKind.TRANSMIT, now))

    elif signal is EdcaSignal.SUCCESS:
        state.retry_count = 0
        state.cw_current = ac.cw_min

    elif signal is EdcaSignal.FAILURE:
        state.retry_count += 1
        if state.retry_count > timing.retry_limit:
            state.retry_count = 0
            state.cw_current = ac.cw_min
            actions.append(Action(ActionKind.DROP, now))
        else:
            state.cw_current = contention_window(ac, state.retry_count)

    return actions


def nav_update(state: NodeState, frame: Frame, now: SimTime) -> NodeState:
    """Apply a third party's reservation; CfEnd clears the NAV"""
    if frame.kind is FrameKind.CF_END:
        state.nav_until = now
    else:
        state.nav_until = max(state.nav_until, now + frame.nav_duration)
    return state


def plan_txop_grant(
    holder: int,
    start: SimTime,
    group: Sequence[int],
    holder_payloads: Sequence[int],
    profile: PhyProfile,
    timing: MacTiming,
    shared_payload: int = 1400,
) -> TxopGrant:
    """
    Split the TxOP left after the holder's own exchanges equally across the
    sharing group. Members that cannot fit one full exchange are cut from the
    tail of the group.
    """
    sifs = timing.sifs
    limit = timing.txop_limit
    ack = airtime_control(FrameKind.ACK, profile)
    cts = airtime_control(FrameKind.CTS_SHARE, profile)
    fixed = (
        airtime_control(FrameKind.RTS_SHARE, profile)
        + sifs
        + cts
        + sifs
        + airtime_control(FrameKind.CF_END, profile)
    )

    holder_duration = 0
    holder_frames = 0
    for payload in holder_payloads:
        exchange = sifs + airtime_data(payload, profile) + sifs + ack
        if fixed + holder_duration + exchange > limit:
            break
        holder_duration += exchange
        holder_frames += 1

    min_allocation = (
        sifs
        + airtime_data(shared_payload, profile)
        + sifs
        + airtime_control(FrameKind.BLOCK_ACK, profile)
        + sifs
        + airtime_control(FrameKind.CTS_REJECT, profile)
    )
    members = list(group)
    allocation = 0
    while members:
        residual = limit - fixed - holder_duration - len(members) * (sifs + cts)
        allocation = residual // len(members)
        if allocation >= min_allocation:
            break
        members.pop()

    return TxopGrant(
        holder=holder,
        start=start,
        limit=limit,
        shared_allocations=tuple((sta, allocation) for sta in members),
        holder_frames=holder_frames,
        holder_duration=holder_duration,
    )


class PacketSink(Protocol):
    def generated(self, packet: Packet) -> None:
        ...

    def delivered(self, packet: Packet, at: SimTime) -> None:
        ...

    def dropped(self, packet: Packet, at: SimTime) -> None:
        ...


class NullSink:
    def generated(self, packet: Packet) -> None:
        pass

    def delivered(self, packet: Packet, at: SimTime) -> None:
        pass

    def dropped(self, packet: Packet, at: SimTime) -> None:
        pass


class InvariantMonitor:
    """Checks TxOP cap, NAV honour, shared-STA silence and delivery overlap"""

    def __init__(self, txop_limit: SimTime, strict: bool = True):
        self.txop_limit = txop_limit
        self.strict = strict
        self.violations: List[str] = []
        self._txops: Dict[int, SimTime] = {}

    def violation(self, now: SimTime, message: str) -> None:
        text = f"t={now}: {message}"
        self.violations.append(text)
        logger.error(f"Invariant violation {text}")
        if self.strict:
            raise InvariantViolation(text)

    def open_txop(self, owner: int, start: SimTime) -> None:
        self._txops[owner] = start

    def close_txop(self, owner: int) -> None:
        self._txops.pop(owner, None)

    def check_transmission(
        self, state: NodeState, frame: Frame, start: SimTime, end: SimTime, contention: bool
    ) -> None:
        if contention and state.nav_until > start:
            self.violation(
                start, f"node {state.node} contended with NAV set until {state.nav_until}"
            )
        if contention and state.protocol_role is ProtocolRole.SHARED_STA:
            self.violation(start, f"shared node {state.node} won contention")
        opened = self._txops.get(frame.txop_owner)
        if opened is not None and end > opened + self.txop_limit:
            self.violation(
                start,
                f"{frame.kind.value} from {state.node} ends {end - opened} ns into "
                f"the TxOP of {frame.txop_owner}",
            )

    def check_contention(self, state: NodeState, now: SimTime) -> None:
        if state.protocol_role is ProtocolRole.SHARED_STA:
            self.violation(now, f"shared node {state.node} ran a backoff countdown")

    def check_medium(self, medium: Medium) -> None:
        for message in medium.overlap_violations:
            self.violation(medium.simulator.now, message)


class MacNetwork:
    """Nodes of all BSSs attached to one medium"""

    def __init__(
        self,
        simulator: Simulator,
        medium: Medium,
        timing: MacTiming = MacTiming(),
        sink: Optional[PacketSink] = None,
        monitor: Optional[InvariantMonitor] = None,
    ):
        self.simulator = simulator
        self.medium = medium
        self.profile = medium.profile
        self.timing = timing
        self.sink = sink or NullSink()
        self.monitor = monitor or InvariantMonitor(timing.txop_limit)
        self.nodes: Dict[int, "MacNode"] = {}

    def add(self, node: "MacNode") -> "MacNode":
        self.medium.register(node.position, node)
        self.nodes[node.node] = node
        self.trace(
            node.node,
            "join",
            bss=node.bss,
            role=node.position.role.value,
            x=node.position.x,
            y=node.position.y,
            protocol=node.protocol_name,
        )
        return node

    def start(self) -> None:
        for node in self.nodes.values():
            node.start()

    def finish(self) -> None:
        self.monitor.check_medium(self.medium)

    def access_point(self, bss: int) -> int:
        for node in self.nodes.values():
            if node.bss == bss and node.position.role is Role.AP:
                return node.node
        raise ValueError(f"BSS {bss} has no access point")

    def stations(self, bss: int) -> List[int]:
        return sorted(
            n.node for n in self.nodes.values() if n.bss == bss and n.position.role is Role.STA
        )

    def data_airtime(self, payload_bytes: int, ru_fraction: float = 1.0) -> SimTime:
        return airtime_data(payload_bytes, self.profile, ru_fraction)

    def control_airtime(self, kind: FrameKind) -> SimTime:
        return airtime_control(kind, self.profile)

    def trace(self, node: int, event: str, **fields) -> None:
        recorder = self.simulator.trace
        if recorder.enabled:
            detail = " ".join(f"{key}={value}" for key, value in fields.items())
            recorder.record(self.simulator.now, node, event, detail)


@dataclass
class _Expectation:
    kind: FrameKind
    src: int
    handle: EventHandle
    on_success: Callable[[Frame], None]
    on_failure: Callable[[], None]


class MacNode:
    """EDCA contender: the base every protocol role builds on"""

    protocol_name = "edca"

    def __init__(self, network: MacNetwork, position: NodePosition, bss: int, ac: AccessCategory):
        self.network = network
        self.position = position
        self.node = position.node
        self.bss = bss
        self.state = NodeState(node=self.node, ac=ac)
        self.rng = network.simulator.stream(self.node)
        self.destinations: List[int] = []
        self.has_traffic = False
        self.on_dequeue: Optional[Callable[["MacNode"], None]] = None
        self._next_packet = 0
        self._next_destination = 0
        self._expiry_handle: Optional[EventHandle] = None
        self._nav_handle: Optional[EventHandle] = None
        self._expecting: Optional[_Expectation] = None
        self._after_tx: Optional[Callable[[TransmissionRecord], None]] = None
        self._txop_start: SimTime = 0
        self._last_busy_start: SimTime = -1

    @property
    def sim(self) -> Simulator:
        return self.network.simulator

    @property
    def timing(self) -> MacTiming:
        return self.network.timing

    @property
    def nav_until(self) -> SimTime:
        return self.state.nav_until

    @property
    def queue(self) -> Deque[Packet]:
        return self.state.queue

    def start(self) -> None:
        pass

    # Traffic

    def generate(self, payload_bytes: int) -> Packet:
        if not self.destinations:
            raise ValueError(f"Node {self.node} has no destination for its traffic")
        destination = self.destinations[self._next_destination % len(self.destinations)]
        self._next_destination += 1
        self._next_packet += 1
        packet = Packet(
            packet_id=f"{self.node}:{self._next_packet}",
            source=self.node,
            destination=destination,
            payload_bytes=payload_bytes,
            generated_at=self.sim.now,
        )
        self.network.sink.generated(packet)
        return packet

    def enqueue(self, packet: Packet) -> None:
        self.queue.append(packet)
        self.request_access()

    def _dequeue(self, packet: Optional[Packet] = None) -> Packet:
        if packet is None:
            packet = self.queue.popleft()
        else:
            self.queue.remove(packet)
        if self.on_dequeue is not None:
            self.on_dequeue(self)
        return packet

    def _delivered(self, packet: Packet) -> None:
        self.network.sink.delivered(packet, self.sim.now)
        self.network.trace(self.node, "delivered", packet=packet.packet_id, retries=packet.retries)

    def _dropped(self, packet: Packet) -> None:
        self.network.sink.dropped(packet, self.sim.now)
        self.network.trace(self.node, "dropped", packet=packet.packet_id, retries=packet.retries)
        logger.debug(f"Node {self.node} dropped {packet.packet_id} after {packet.retries} retries")

    # Contention

    def has_work(self) -> bool:
        return bool(self.queue)

    def request_access(self) -> None:
        if (
            self.state.protocol_role is not ProtocolRole.CONTENDER
            or self.state.contending
            or self._expecting is not None
            or self.network.medium.is_transmitting(self.node)
            or not self.has_work()
        ):
            return
        self._step(EdcaSignal.REQUEST)

    def suspend_contention(self) -> None:
        if self.state.expiry is not None:
            self._step(EdcaSignal.BUSY)
        self.state.contending = False

    def _step(self, signal: EdcaSignal) -> List[Action]:
        actions = edca_engine_step(self.state, signal, self.sim.now, self.timing, self.rng)
        for action in actions:
            if action.kind is ActionKind.ARM:
                self.network.monitor.check_contention(self.state, self.sim.now)
                self.sim.cancel(self._expiry_handle)
                self._expiry_handle = self.sim.schedule(
                    action.time, self._on_backoff_expired, EventKind.BACKOFF, self.node
                )
            elif action.kind is ActionKind.DISARM:
                self.sim.cancel(self._expiry_handle)
                self._expiry_handle = None
        return actions

    def _on_backoff_expired(self) -> None:
        self._expiry_handle = None
        if self.state.nav_until > self.sim.now:
            # Reserved in the same instant: wait for the NAV with nothing left to count
            self.state.backoff_slots = 0
            self.state.expiry = None
            self.state.medium_idle = False
            return
        self._step(EdcaSignal.EXPIRED)
        self._access_won()

    def _refresh_medium(self) -> None:
        busy = self.network.medium.medium_busy(self.node)
        if busy and self.state.medium_idle:
            self._step(EdcaSignal.BUSY)
        elif not busy and not self.state.medium_idle:
            self._step(EdcaSignal.IDLE)

    def _watch_nav(self) -> None:
        if self.state.nav_until <= self.sim.now:
            return
        if self._nav_handle is not None and self._nav_handle.pending:
            if self._nav_handle.fire_time == self.state.nav_until:
                return
            self.sim.cancel(self._nav_handle)
        self._nav_handle = self.sim.schedule(
            self.state.nav_until, self._refresh_medium, EventKind.TIMER, self.node
        )

    def _fail_head(self) -> None:
        """Count a failed attempt for the head packet; drop it past the retry limit"""
        if not self.queue:
            return
        packet = self.queue[0]
        packet.retries += 1
        actions = self._step(EdcaSignal.FAILURE)
        if any(a.kind is ActionKind.DROP for a in actions):
            self._dequeue()
            self._dropped(packet)

    # Transmission

    def send(
        self,
        frame: Frame,
        duration: SimTime,
        contention: bool = False,
        mu_group: Optional[int] = None,
        after: Optional[Callable[[TransmissionRecord], None]] = None,
    ) -> bool:
        medium = self.network.medium
        if medium.is_transmitting(self.node):
            logger.debug(f"Node {self.node} skipped {frame.kind.value}: already transmitting")
            return False
        now = self.sim.now
        self.network.monitor.check_transmission(self.state, frame, now, now + duration, contention)
        self._after_tx = after
        self.network.trace(
            self.node,
            "tx_start",
            kind=frame.kind.value,
            dst=frame.dst,
            dur=duration,
            owner=frame.txop_owner,
        )
        medium.start_transmission(self.node, frame, duration, mu_group)
        return True

    def send_in(self, delay: SimTime, build: Callable[[], None]) -> None:
        self.sim.schedule_in(delay, build, EventKind.TX_START, self.node)

    def expect(
        self,
        kind: FrameKind,
        src: int,
        timeout_at: SimTime,
        on_success: Callable[[Frame], None],
        on_failure: Callable[[], None],
    ) -> None:
        if self._expecting is not None:
            self.sim.cancel(self._expecting.handle)
        handle = self.sim.schedule(timeout_at, self._expect_timeout, EventKind.TIMER, self.node)
        self._expecting = _Expectation(kind, src, handle, on_success, on_failure)

    def _expect_timeout(self) -> None:
        expectation = self._expecting
        self._expecting = None
        if expectation is not None:
            expectation.on_failure()

    def _open_txop(self) -> None:
        self._txop_start = self.sim.now
        self.network.monitor.open_txop(self.node, self._txop_start)
        self.network.trace(self.node, "txop_open", bss=self.bss)

    def _close_txop(self, owner: Optional[int] = None) -> None:
        owner = self.node if owner is None else owner
        self.network.monitor.close_txop(owner)
        self.network.trace(self.node, "txop_close", bss=self.bss, owner=owner)

    # EDCA TxOP

    def _access_won(self) -> None:
        if not self.queue:
            return
        self.state.protocol_role = ProtocolRole.TXOP_HOLDER
        self._open_txop()
        self.state.txop_deadline = self._txop_start + self.timing.txop_limit
        self._send_head_data(contention=True)

    def _send_head_data(self, contention: bool = False) -> None:
        packet = self.queue[0]
        ack = self.network.control_airtime(FrameKind.ACK)
        frame = Frame(
            FrameKind.DATA,
            self.node,
            packet.destination,
            payload_bytes=packet.payload_bytes,
            nav_duration=self.timing.sifs + ack,
            more_data=len(self.queue) > 1,
            packet=packet,
            ack_kind=FrameKind.ACK,
            txop_owner=self.node,
        )

        def await_ack(record: TransmissionRecord):
            self.expect(
                FrameKind.ACK,
                packet.destination,
                record.end + self.timing.sifs + ack + self.timing.slot,
                self._edca_success,
                self._edca_failure,
            )

        if not self.send(frame, self.network.data_airtime(packet.payload_bytes), contention, after=await_ack):
            self._end_txop()

    def _exchange_fits(self, packet: Packet) -> bool:
        sifs = self.timing.sifs
        needed = (
            sifs
            + self.network.data_airtime(packet.payload_bytes)
            + sifs
            + self.network.control_airtime(FrameKind.ACK)
        )
        return self.sim.now + needed <= self.state.txop_deadline

    def _edca_success(self, frame: Frame) -> None:
        self._delivered(self._dequeue())
        self._step(EdcaSignal.SUCCESS)
        if self.queue and self._exchange_fits(self.queue[0]):
            self.send_in(self.timing.sifs, self._send_head_data)
        else:
            self._end_txop()

    def _edca_failure(self) -> None:
        self._fail_head()
        self._end_txop()

    def _end_txop(self) -> None:
        self._close_txop()
        self.state.protocol_role = ProtocolRole.CONTENDER
        self.request_access()

    # Medium callbacks

    def on_carrier_change(self, now: SimTime, busy: bool) -> None:
        if busy:
            self._last_busy_start = now
        self._refresh_medium()

    def on_frame(self, record: TransmissionRecord, outcome: Outcome) -> None:
        frame: Frame = record.frame
        if record.transmitter == self.node:
            after, self._after_tx = self._after_tx, None
            if after is not None:
                after(record)
            return

        self.network.trace(
            self.node, "rx", kind=frame.kind.value, src=frame.src, outcome=outcome.value
        )
        if outcome is not Outcome.DELIVERED:
            self.on_lost_frame(record)
            return

        expectation = self._expecting
        if (
            expectation is not None
            and frame.kind is expectation.kind
            and frame.src == expectation.src
            and frame.addressed_to(self.node)
        ):
            self._expecting = None
            self.sim.cancel(expectation.handle)
            expectation.on_success(frame)
        elif frame.kind is FrameKind.CF_END:
            nav_update(self.state, frame, self.sim.now)
            self.on_txop_cleared(frame)
        elif frame.addressed_to(self.node):
            self.on_addressed(record)
        else:
            self.on_overheard(record)
        self._refresh_medium()

    def on_overheard(self, record: TransmissionRecord) -> None:
        if record.frame.kind is FrameKind.RTS_SHARE:
            self._arm_rts_reset(record.frame)
        nav_update(self.state, record.frame, self.sim.now)
        self._watch_nav()

    def _arm_rts_reset(self, frame: Frame) -> None:
        """Drop an RtsShare reservation that no CtsShare followed"""
        before = self.state.nav_until
        heard_at = self.sim.now
        timing = self.timing
        wait = 2 * timing.sifs + self.network.control_airtime(FrameKind.CTS_SHARE) + 2 * timing.slot

        def reset():
            if self._last_busy_start > heard_at:
                return
            self.state.nav_until = max(before, self.sim.now)
            self.network.trace(self.node, "nav_reset", src=frame.src)
            self._refresh_medium()

        self.sim.schedule_in(wait, reset, EventKind.TIMER, self.node)

    def on_addressed(self, record: TransmissionRecord) -> None:
        frame: Frame = record.frame
        if frame.kind is FrameKind.DATA and frame.ack_kind is not None:
            self.send_in(self.timing.sifs, lambda: self._respond(frame, frame.ack_kind))

    def _respond(self, frame: Frame, kind: FrameKind) -> None:
        response = Frame(kind, self.node, frame.src, txop_owner=frame.txop_owner)
        self.send(response, self.network.control_airtime(kind))

    def on_lost_frame(self, record: TransmissionRecord) -> None:
        pass

    def on_txop_cleared(self, frame: Frame) -> None:
        pass


class SharingStation(MacNode):
    """Contends with EDCA and, on winning, shares the TxOP through its AP"""

    protocol_name = "sharing"

    def __init__(self, network: MacNetwork, position: NodePosition, bss: int, ac: AccessCategory):
        super().__init__(network, position, bss, ac)
        self.sharing_group: Optional[List[int]] = None
        self._grant: Optional[TxopGrant] = None
        self._holder_frames_left = 0
        self._slot_end: SimTime = 0
        self._share_owner = -1
        self._ap = -1

    def start(self) -> None:
        self._ap = self.network.access_point(self.bss)

    def group(self) -> List[int]:
        if self.sharing_group is not None:
            return [sta for sta in self.sharing_group if sta != self.node]
        return [
            sta
            for sta in self.network.stations(self.bss)
            if sta != self.node and self.network.nodes[sta].has_traffic
        ]

    def _access_won(self) -> None:
        if not self.queue:
            return
        grant = plan_txop_grant(
            self.node,
            self.sim.now,
            self.group(),
            [packet.payload_bytes for packet in self.queue],
            self.network.profile,
            self.timing,
            shared_payload=self.queue[0].payload_bytes,
        )
        if not grant.shared_allocations:
            super()._access_won()
            return
        self.sharing_initiate(grant)

    def sharing_initiate(self, grant: TxopGrant) -> None:
        self.state.protocol_role = ProtocolRole.TXOP_HOLDER
        self._grant = grant
        self._open_txop()
        self.state.txop_deadline = grant.end

        rts = self.network.control_airtime(FrameKind.RTS_SHARE)
        cts = self.network.control_airtime(FrameKind.CTS_SHARE)
        share = ShareInfo(
            holder=self.node,
            shared_stas=tuple(sta for sta, _ in grant.shared_allocations),
            allocations=grant.shared_allocations,
            priority=self.state.ac.index,
            holder_duration=grant.holder_duration,
        )
        frame = Frame(
            FrameKind.RTS_SHARE,
            self.node,
            self._ap,
            share_info=share,
            nav_duration=grant.limit - rts,
            txop_owner=self.node,
        )

        def await_grant(record: TransmissionRecord):
            self.expect(
                FrameKind.CTS_SHARE,
                self._ap,
                record.end + self.timing.sifs + cts + self.timing.slot,
                self._on_share_granted,
                self._on_share_refused,
            )

        if not self.send(frame, rts, contention=True, after=await_grant):
            self._grant = None
            self._end_txop()

    def _on_share_granted(self, frame: Frame) -> None:
        self._holder_frames_left = self._grant.holder_frames
        if self._holder_frames_left and self.queue:
            self.send_in(self.timing.sifs, self._send_holder_data)
        else:
            self._holder_done()

    def _on_share_refused(self) -> None:
        self._grant = None
        self._fail_head()
        self._end_txop()

    def _send_holder_data(self) -> None:
        grant = self._grant
        packet = self.queue[0]
        duration = self.network.data_airtime(packet.payload_bytes)
        ack = self.network.control_airtime(FrameKind.ACK)
        frame = Frame(
            FrameKind.DATA,
            self.node,
            self._ap,
            payload_bytes=packet.payload_bytes,
            nav_duration=max(0, grant.end - self.sim.now - duration),
            more_data=self._holder_frames_left > 1,
            packet=packet,
            ack_kind=FrameKind.ACK,
            txop_owner=self.node,
        )

        def await_ack(record: TransmissionRecord):
            self.expect(
                FrameKind.ACK,
                self._ap,
                record.end + self.timing.sifs + ack + self.timing.slot,
                self._holder_success,
                self._holder_failure,
            )

        if not self.send(frame, duration, after=await_ack):
            self._holder_done()

    def _holder_success(self, frame: Frame) -> None:
        self._delivered(self._dequeue())
        self._step(EdcaSignal.SUCCESS)
        self._holder_frames_left -= 1
        if self._holder_frames_left > 0 and self.queue:
            self.send_in(self.timing.sifs, self._send_holder_data)
        else:
            self._holder_done()

    def _holder_failure(self) -> None:
        self._fail_head()
        self._holder_done()

    def _holder_done(self) -> None:
        # The holder defers to the rest of its own TxOP until CfEnd
        self.state.nav_until = max(self.state.nav_until, self._grant.end)
        self._watch_nav()
        self.state.protocol_role = ProtocolRole.CONTENDER
        self._refresh_medium()
        self.request_access()

    def on_addressed(self, record: TransmissionRecord) -> None:
        frame: Frame = record.frame
        if frame.kind is FrameKind.CTS_SHARE and frame.share_info.holder != self.node:
            self._on_polled(frame)
            return
        super().on_addressed(record)

    def _on_polled(self, frame: Frame) -> None:
        if self.state.protocol_role is not ProtocolRole.CONTENDER or self._expecting is not None:
            logger.debug(f"Node {self.node} ignored a poll while busy as {self.state.protocol_role.value}")
            return
        _, allocated = frame.share_info.allocations[0]
        self.suspend_contention()
        self.state.protocol_role = ProtocolRole.SHARED_STA
        self._slot_end = self.sim.now + allocated
        self._share_owner = frame.share_info.holder
        self.send_in(self.timing.sifs, self._shared_transmit)

    def _shared_transmit(self) -> None:
        sifs = self.timing.sifs
        ba = self.network.control_airtime(FrameKind.BLOCK_ACK)
        reject = self.network.control_airtime(FrameKind.CTS_REJECT)
        if self.queue:
            packet = self.queue[0]
            duration = self.network.data_airtime(packet.payload_bytes)
            # Release the slot when the next exchange would run past its end
            if self.sim.now + duration + sifs + ba + sifs + reject <= self._slot_end:
                frame = Frame(
                    FrameKind.DATA,
                    self.node,
                    self._ap,
                    payload_bytes=packet.payload_bytes,
                    nav_duration=sifs + ba,
                    more_data=len(self.queue) > 1,
                    packet=packet,
                    ack_kind=FrameKind.BLOCK_ACK,
                    txop_owner=self._share_owner,
                )

                def await_ba(record: TransmissionRecord):
                    self.expect(
                        FrameKind.BLOCK_ACK,
                        self._ap,
                        record.end + sifs + ba + self.timing.slot,
                        self._shared_success,
                        self._shared_failure,
                    )

                if self.send(frame, duration, after=await_ba):
                    return
        self._release_slot()

    def _shared_success(self, frame: Frame) -> None:
        self._delivered(self._dequeue())
        self._step(EdcaSignal.SUCCESS)
        self.send_in(self.timing.sifs, self._shared_transmit)

    def _shared_failure(self) -> None:
        self._fail_head()
        self._release_slot()

    def _release_slot(self) -> None:
        frame = Frame(FrameKind.CTS_REJECT, self.node, self._ap, txop_owner=self._share_owner)

        def resume(record: TransmissionRecord):
            self.state.protocol_role = ProtocolRole.CONTENDER
            self.request_access()

        if not self.send(frame, self.network.control_airtime(FrameKind.CTS_REJECT), after=resume):
            self.state.protocol_role = ProtocolRole.CONTENDER
            self.request_access()

    def on_txop_cleared(self, frame: Frame) -> None:
        if self._grant is not None and frame.txop_owner == self.node:
            self._grant = None
        self.request_access()


class SharingAccessPoint(MacNode):
    """Grants shared TxOPs and polls the shared stations in turn"""

    protocol_name = "sharing"

    def __init__(self, network: MacNetwork, position: NodePosition, bss: int, ac: AccessCategory):
        super().__init__(network, position, bss, ac)
        self._grant: Optional[TxopGrant] = None
        self._share: Optional[ShareInfo] = None
        self._polls: Deque[Tuple[int, SimTime]] = deque()
        self._members: List[int] = []
        self._poll_target = -1
        self._round = 0
        self._data_seen = False
        self._watchdog: Optional[EventHandle] = None

    def has_work(self) -> bool:
        return bool(self.queue) and self._grant is None

    def on_addressed(self, record: TransmissionRecord) -> None:
        frame: Frame = record.frame
        if frame.kind is FrameKind.RTS_SHARE:
            self._on_share_request(record)
        elif frame.kind is FrameKind.CTS_REJECT and frame.src == self._poll_target:
            self._cancel_watchdog()
            self._poll_target = -1
            self.send_in(self.timing.sifs, self._poll_next)
        elif frame.kind is FrameKind.DATA and self._grant is not None and frame.src == self._poll_target:
            self._cancel_watchdog()
            self._data_seen = True
            super().on_addressed(record)
        else:
            super().on_addressed(record)

    def _on_share_request(self, record: TransmissionRecord) -> None:
        frame: Frame = record.frame
        now = self.sim.now
        if self._grant is not None or self._expecting is not None or self.state.nav_until > now:
            logger.debug(f"AP {self.node} declined RtsShare from {frame.src}")
            return
        share = frame.share_info
        grant = TxopGrant(
            holder=share.holder,
            start=record.start,
            limit=self.timing.txop_limit,
            shared_allocations=share.allocations,
            holder_duration=share.holder_duration,
        )
        self._grant = grant
        self._share = share
        self.suspend_contention()
        self.state.protocol_role = ProtocolRole.POLLING_AP
        self.send_in(self.timing.sifs, self._grant_share)

    def _grant_share(self) -> None:
        grant = self._grant
        cts = self.network.control_airtime(FrameKind.CTS_SHARE)
        frame = Frame(
            FrameKind.CTS_SHARE,
            self.node,
            grant.holder,
            share_info=self._share,
            nav_duration=max(0, grant.end - self.sim.now - cts),
            txop_owner=grant.holder,
        )

        def schedule_polls(record: TransmissionRecord):
            self.sim.schedule(
                record.end + grant.holder_duration + self.timing.sifs,
                lambda: self.sharing_ap_poll_loop(grant),
                EventKind.TX_START,
                self.node,
            )

        if not self.send(frame, cts, after=schedule_polls):
            self._finish_share()

    def sharing_ap_poll_loop(self, grant: TxopGrant) -> None:
        self._polls = deque(grant.shared_allocations)
        self._members = [sta for sta, _ in grant.shared_allocations]
        self._round = 1
        self._data_seen = False
        self._poll_next()

    def _poll_next(self) -> None:
        grant = self._grant
        if grant is None:
            return
        timing = self.timing
        cts = self.network.control_airtime(FrameKind.CTS_SHARE)
        cf_end = self.network.control_airtime(FrameKind.CF_END)
        reject = self.network.control_airtime(FrameKind.CTS_REJECT)

        if not self._polls and self._data_seen and self._round < timing.max_poll_rounds:
            self._start_next_round()
        if not self._polls:
            self._finish_share(delay=0)
            return

        sta, allocated = self._polls.popleft()
        poll_end = self.sim.now + cts
        allocated = min(allocated, grant.end - timing.sifs - cf_end - poll_end)
        if allocated < timing.sifs + reject:
            self._polls.clear()
            self._finish_share(delay=0)
            return

        frame = Frame(
            FrameKind.CTS_SHARE,
            self.node,
            sta,
            share_info=ShareInfo(
                holder=grant.holder,
                shared_stas=(sta,),
                allocations=((sta, allocated),),
                priority=self._share.priority,
            ),
            nav_duration=grant.end - poll_end,
            txop_owner=grant.holder,
        )
        self._poll_target = sta
        self.network.trace(self.node, "poll", sta=sta, allocated=allocated, round=self._round)
        if not self.send(frame, cts, after=lambda record: self._arm_watchdog(record.end + timing.sifs + timing.slot)):
            self._finish_share()

    def _start_next_round(self) -> None:
        timing = self.timing
        cts = self.network.control_airtime(FrameKind.CTS_SHARE)
        cf_end = self.network.control_airtime(FrameKind.CF_END)
        residual = self._grant.end - self.sim.now - timing.sifs - cf_end
        residual -= len(self._members) * (timing.sifs + cts)
        if residual <= 0:
            return
        allocated = residual // len(self._members)
        self._polls = deque((sta, allocated) for sta in self._members)
        self._round += 1
        self._data_seen = False

    def _arm_watchdog(self, at: SimTime) -> None:
        self._cancel_watchdog()
        self._watchdog = self.sim.schedule(at, self._on_watchdog, EventKind.TIMER, self.node)

    def _cancel_watchdog(self) -> None:
        self.sim.cancel(self._watchdog)
        self._watchdog = None

    def _on_watchdog(self) -> None:
        self._watchdog = None
        if self._grant is None or self._poll_target < 0:
            return
        if self.network.medium.carrier_busy(self.node):
            return
        logger.debug(f"AP {self.node} got no answer from {self._poll_target}, moving on")
        self._poll_target = -1
        self._poll_next()

    def on_lost_frame(self, record: TransmissionRecord) -> None:
        if self._grant is not None and self._poll_target >= 0:
            timing = self.timing
            ba = self.network.control_airtime(FrameKind.BLOCK_ACK)
            self._arm_watchdog(self.sim.now + timing.sifs + ba + timing.slot + timing.sifs)

    def on_overheard(self, record: TransmissionRecord) -> None:
        if self._grant is not None and self._poll_target >= 0:
            self._arm_watchdog(self.sim.now + self.timing.sifs + self.timing.slot)
            return
        super().on_overheard(record)

    def _respond(self, frame: Frame, kind: FrameKind) -> None:
        response = Frame(kind, self.node, frame.src, txop_owner=frame.txop_owner)

        def await_next(record: TransmissionRecord):
            if self._grant is not None and frame.src == self._poll_target:
                self._arm_watchdog(record.end + self.timing.sifs + self.timing.slot)

        self.send(response, self.network.control_airtime(kind), after=await_next)

    def _finish_share(self, delay: Optional[SimTime] = None) -> None:
        """Optional downlink, then CfEnd if it still fits; delay is the gap before either"""
        grant = self._grant
        timing = self.timing
        delay = timing.sifs if delay is None else delay
        cf_end = self.network.control_airtime(FrameKind.CF_END)
        self._poll_target = -1
        if timing.ap_downlink_in_share and self.queue and self._downlink_fits(delay):
            self.send_in(delay, self._send_downlink)
        elif self.sim.now + delay + cf_end <= grant.end:
            self.send_in(delay, self._send_cf_end)
        else:
            self._end_share()

    def _downlink_fits(self, delay: SimTime) -> bool:
        timing = self.timing
        needed = (
            delay
            + self.network.data_airtime(self.queue[0].payload_bytes)
            + timing.sifs
            + self.network.control_airtime(FrameKind.ACK)
            + timing.sifs
            + self.network.control_airtime(FrameKind.CF_END)
        )
        return self.sim.now + needed <= self._grant.end

    def _send_downlink(self) -> None:
        packet = self.queue[0]
        ack = self.network.control_airtime(FrameKind.ACK)
        frame = Frame(
            FrameKind.DATA,
            self.node,
            packet.destination,
            payload_bytes=packet.payload_bytes,
            nav_duration=self.timing.sifs + ack,
            packet=packet,
            ack_kind=FrameKind.ACK,
            txop_owner=self._grant.holder,
        )

        def success(response: Frame):
            self._delivered(self._dequeue())
            self._step(EdcaSignal.SUCCESS)
            self._finish_share()

        def failure():
            self._fail_head()
            self._finish_share()

        def await_ack(record: TransmissionRecord):
            self.expect(
                FrameKind.ACK,
                packet.destination,
                record.end + self.timing.sifs + ack + self.timing.slot,
                success,
                failure,
            )

        if not self.send(frame, self.network.data_airtime(packet.payload_bytes), after=await_ack):
            self._end_share()

    def _send_cf_end(self) -> None:
        frame = Frame(FrameKind.CF_END, self.node, BROADCAST, txop_owner=self._grant.holder)
        if not self.send(
            frame, self.network.control_airtime(FrameKind.CF_END), after=lambda record: self._end_share()
        ):
            self._end_share()

    def _end_share(self) -> None:
        grant = self._grant
        self._grant = None
        self._share = None
        self._polls.clear()
        self._cancel_watchdog()
        self._close_txop(grant.holder)
        self.state.protocol_role = ProtocolRole.CONTENDER
        self._refresh_medium()
        self.request_access()


class TriggerAccessPoint(MacNode):
    """Solicits uplink data from its stations once per trigger period"""

    protocol_name = "trigger"

    def __init__(self, network: MacNetwork, position: NodePosition, bss: int, ac: AccessCategory = AC3):
        super().__init__(network, position, bss, ac)
        self.pending_cycle: Optional[SimTime] = None
        self.cycles_run = 0
        self._in_exchange = False
        self._group = 0
        self._targets: Tuple[int, ...] = ()
        self._reports: Dict[int, Tuple[int, int]] = {}
        self._received: List[int] = []
        self._received_packets: List[str] = []
        self._post_backoff_slots = 0
        self._cycle_ended_at: SimTime = 0

    def start(self) -> None:
        self.sim.schedule(self.timing.trigger_phase, self._cycle_due, EventKind.TRIGGER_PERIOD, self.node)

    def has_work(self) -> bool:
        return self.pending_cycle is not None and not self._in_exchange

    def _cycle_due(self) -> None:
        now = self.sim.now
        if self.pending_cycle is not None:
            logger.debug(f"AP {self.node} replaced the cycle due at {self.pending_cycle} ns")
        self.pending_cycle = now
        self.network.trace(self.node, "trigger_due", period=self.timing.trigger_period)
        self.sim.schedule(now + self.timing.trigger_period, self._cycle_due, EventKind.TRIGGER_PERIOD, self.node)
        if self._post_backoff_done(now):
            self.state.backoff_slots = 0
        self.request_access()

    def _post_backoff_done(self, now: SimTime) -> bool:
        """Whether the backoff drawn when the last cycle ended has run out on an idle medium"""
        state = self.state
        if self._in_exchange or state.contending or state.backoff_slots is not None:
            return False
        if not state.medium_idle or state.nav_until > now:
            return False
        idle_from = max(state.idle_since, self._cycle_ended_at)
        return now - idle_from >= self.timing.aifs(state.ac) + self._post_backoff_slots * self.timing.slot

    def _access_won(self) -> None:
        if self.pending_cycle is None or self._in_exchange:
            return
        self.trigger_cycle()

    def trigger_cycle(self) -> None:
        """BSRP, buffer reports, Basic Trigger, multi-user data and a multi-STA BlockAck"""
        self.pending_cycle = None
        self._in_exchange = True
        self.cycles_run += 1
        self._group = self.node * 1_000_000 + self.cycles_run
        self._targets = tuple(self.network.stations(self.bss))
        self._reports = {}
        self._received = []
        self._received_packets = []
        self.state.protocol_role = ProtocolRole.TRIGGERING_AP
        self._open_txop()
        self.state.txop_deadline = self._txop_start + self.timing.txop_limit

        sifs = self.timing.sifs
        bsr = self.network.control_airtime(FrameKind.BSR)
        frame = Frame(
            FrameKind.BSRP,
            self.node,
            BROADCAST,
            nav_duration=sifs + bsr,
            txop_owner=self.node,
            targets=self._targets,
            mu_group=self._group,
        )

        def await_reports(record: TransmissionRecord):
            self.sim.schedule(record.end + sifs + bsr + sifs, self._after_reports, EventKind.TX_START, self.node)

        if not self.send(frame, self.network.control_airtime(FrameKind.BSRP), contention=True, after=await_reports):
            self._end_cycle()

    def on_addressed(self, record: TransmissionRecord) -> None:
        frame: Frame = record.frame
        if not self._in_exchange or record.mu_group != self._group:
            super().on_addressed(record)
        elif frame.kind is FrameKind.BSR:
            self._reports[frame.src] = (frame.buffered, frame.payload_bytes)
        elif frame.kind is FrameKind.DATA:
            self._received.append(frame.src)
            if frame.packet is not None:
                self._received_packets.append(frame.packet.packet_id)

    def _backlog_airtime(self, sta: int, ru_fraction: float, limit: Optional[int] = None) -> SimTime:
        """Airtime of a SIFS-separated Data burst covering a station's reported backlog"""
        buffered, total_bytes = self._reports[sta]
        count = buffered if limit is None else min(limit, buffered)
        frame_bytes = -(-total_bytes // buffered)
        return count * self.network.data_airtime(frame_bytes, ru_fraction) + (count - 1) * self.timing.sifs

    def _after_reports(self) -> None:
        reporters = [sta for sta in sorted(self._reports) if self._reports[sta][0] > 0]
        sifs = self.timing.sifs
        trigger = self.network.control_airtime(FrameKind.BASIC_TRIGGER)
        ba = self.network.control_airtime(FrameKind.BLOCK_ACK)
        window = self.state.txop_deadline - self.sim.now - trigger - sifs - sifs - ba

        # Every triggered station must fit at least one frame; the window then
        # covers the largest backlog up to what the TxOP limit leaves
        while reporters:
            ru_fraction = 1.0 / len(reporters)
            if max(self._backlog_airtime(sta, ru_fraction, limit=1) for sta in reporters) <= window:
                ul_duration = min(window, max(self._backlog_airtime(sta, ru_fraction) for sta in reporters))
                break
            reporters.pop()

        if not reporters:
            self._end_cycle()
            return

        frame = Frame(
            FrameKind.BASIC_TRIGGER,
            self.node,
            BROADCAST,
            nav_duration=sifs + ul_duration + sifs + ba,
            txop_owner=self.node,
            targets=tuple(reporters),
            ru_fraction=ru_fraction,
            ul_duration=ul_duration,
            mu_group=self._group,
        )

        def await_data(record: TransmissionRecord):
            self.sim.schedule(
                record.end + sifs + ul_duration + sifs, self._acknowledge, EventKind.TX_START, self.node
            )

        if not self.send(frame, trigger, after=await_data):
            self._end_cycle()

    def _acknowledge(self) -> None:
        frame = Frame(
            FrameKind.BLOCK_ACK,
            self.node,
            BROADCAST,
            txop_owner=self.node,
            targets=tuple(sorted(self._reports)),
            acked=tuple(sorted(set(self._received))),
            acked_packets=tuple(self._received_packets),
        )
        if not self.send(
            frame, self.network.control_airtime(FrameKind.BLOCK_ACK), after=lambda record: self._end_cycle()
        ):
            self._end_cycle()

    def _end_cycle(self) -> None:
        self._in_exchange = False
        self._close_txop()
        self.state.protocol_role = ProtocolRole.CONTENDER
        self._cycle_ended_at = self.sim.now
        self._post_backoff_slots = edca_draw_backoff(self.state.ac, 0, self.rng)
        self.request_access()


class TriggeredStation(MacNode):
    """Sends uplink data only when solicited by its AP's trigger frames"""

    protocol_name = "trigger"

    def __init__(self, network: MacNetwork, position: NodePosition, bss: int, ac: AccessCategory = AC3):
        super().__init__(network, position, bss, ac)
        self.state.protocol_role = ProtocolRole.TRIGGERED_STA
        self._burst: List[Packet] = []

    def request_access(self) -> None:
        pass

    def _may_respond(self, group: Optional[int]) -> bool:
        if not self.timing.cs_required:
            return True
        return not self.network.medium.carrier_busy(self.node, ignore_group=group)

    def on_addressed(self, record: TransmissionRecord) -> None:
        frame: Frame = record.frame
        if frame.kind is FrameKind.BSRP:
            self.send_in(self.timing.sifs, lambda: self._report(frame))
        elif frame.kind is FrameKind.BASIC_TRIGGER:
            trigger_end = self.sim.now
            self.send_in(self.timing.sifs, lambda: self._uplink(frame, trigger_end))
        else:
            super().on_addressed(record)

    def _report(self, trigger: Frame) -> None:
        group = trigger.mu_group
        if not self._may_respond(group):
            return
        frame = Frame(
            FrameKind.BSR,
            self.node,
            trigger.src,
            payload_bytes=sum(packet.payload_bytes for packet in self.queue),
            buffered=len(self.queue),
            txop_owner=trigger.txop_owner,
        )
        self.send(frame, self.network.control_airtime(FrameKind.BSR), mu_group=group)

    def _uplink(self, trigger: Frame, trigger_end: SimTime) -> None:
        if not self.queue or not self._may_respond(trigger.mu_group):
            return
        sifs = self.timing.sifs
        window_end = trigger_end + sifs + trigger.ul_duration
        burst: List[Packet] = []
        burst_end = self.sim.now
        for packet in self.queue:
            step = self.network.data_airtime(packet.payload_bytes, trigger.ru_fraction)
            if burst:
                step += sifs
            if burst_end + step > window_end:
                break
            burst.append(packet)
            burst_end += step
        if not burst:
            return
        ba = self.network.control_airtime(FrameKind.BLOCK_ACK)
        timeout = window_end + sifs + ba + self.timing.slot
        self._burst = burst
        self._send_burst(trigger, list(burst), timeout)

    def _send_burst(self, trigger: Frame, remaining: List[Packet], timeout: SimTime) -> None:
        packet = remaining.pop(0)
        frame = Frame(
            FrameKind.DATA,
            self.node,
            trigger.src,
            payload_bytes=packet.payload_bytes,
            more_data=bool(remaining),
            packet=packet,
            txop_owner=trigger.txop_owner,
            ru_fraction=trigger.ru_fraction,
        )

        def next_frame(record: Optional[TransmissionRecord]):
            if remaining:
                self.send_in(self.timing.sifs, lambda: self._send_burst(trigger, remaining, timeout))
            else:
                self.expect(FrameKind.BLOCK_ACK, trigger.src, timeout, self._on_block_ack, self._on_missing_ack)

        duration = self.network.data_airtime(packet.payload_bytes, trigger.ru_fraction)
        if not self.send(frame, duration, mu_group=trigger.mu_group, after=next_frame):
            remaining.clear()
            next_frame(None)

    def _on_block_ack(self, frame: Frame) -> None:
        burst, self._burst = self._burst, []
        for packet in burst:
            if packet.packet_id in frame.acked_packets:
                self._delivered(self._dequeue(packet))
            else:
                self._count_failure(packet)

    def _on_missing_ack(self) -> None:
        burst, self._burst = self._burst, []
        for packet in burst:
            self._count_failure(packet)

    def _count_failure(self, packet: Packet) -> None:
        packet.retries += 1
        if packet.retries > self.timing.retry_limit:
            self._dequeue(packet)
            self._dropped(packet)
