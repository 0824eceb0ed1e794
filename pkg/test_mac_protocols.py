import pytest

from src.mac_protocols import (
    AC0,
    AC2,
    AC3,
    AccessCategory,
    ActionKind,
    EdcaSignal,
    Frame,
    InvariantMonitor,
    InvariantViolation,
    MacNetwork,
    MacNode,
    MacTiming,
    NodeState,
    ShareInfo,
    SharingAccessPoint,
    SharingStation,
    TriggerAccessPoint,
    TriggeredStation,
    TxopGrant,
    access_category,
    contention_window,
    edca_engine_step,
    nav_update,
    plan_txop_grant,
)
from src.metrics_reporting import MetricsCollector
from src.phy_medium import BROADCAST, FrameKind, Medium, NodePosition, PhyProfile, Role
from src.sim_engine import RngStream, Simulator, TraceRecorder, ms, seconds, us
from src.trace_analysis import frame_sequence, parse_trace
from src.traffic_scenarios import TrafficKind, TrafficSource, attach_traffic

TIMING = MacTiming()


def build(positions, node_class=MacNode, ap_class=MacNode, ac=AC3, seed=5, trace=None):
    sim = Simulator(seed=seed, trace=trace)
    collector = MetricsCollector()
    network = MacNetwork(sim, Medium(sim, PhyProfile()), TIMING, sink=collector)
    for node, (x, y) in enumerate(positions):
        if node == 0:
            network.add(ap_class(network, NodePosition(0, x, y, 21.0, Role.AP), 1, ac))
        else:
            network.add(node_class(network, NodePosition(node, x, y, 15.0, Role.STA), 1, ac))
    for node in network.stations(1):
        network.nodes[node].destinations = [0]
    network.start()
    return sim, network, collector


def test_access_categories():
    assert access_category("ac3") is AC3
    assert access_category(2) is AC2
    assert AC0.name == "ac0"
    assert TIMING.aifs(AC3) == us(34)
    assert TIMING.aifs(AC0) == us(79)
    with pytest.raises(ValueError):
        access_category("ac7")
    with pytest.raises(ValueError):
        AccessCategory(0, 14, 1023, 7)


def test_contention_window_doubles_up_to_the_cap():
    assert [contention_window(AC0, r) for r in range(8)] == [15, 31, 63, 127, 255, 511, 1023, 1023]
    assert [contention_window(AC3, r) for r in range(3)] == [3, 7, 7]


def test_countdown_starts_after_aifs():
    state = NodeState(node=1, ac=AC3)
    actions = edca_engine_step(state, EdcaSignal.REQUEST, us(100), TIMING, RngStream(1, 1))

    assert 0 <= state.backoff_slots <= 3
    assert actions[0].kind is ActionKind.ARM
    assert actions[0].time == us(100) + us(34) + state.backoff_slots * us(9)
    assert state.contending


def test_busy_medium_pauses_the_countdown():
    state = NodeState(node=1, ac=AC3, backoff_slots=3)
    rng = RngStream(1, 1)
    edca_engine_step(state, EdcaSignal.REQUEST, 0, TIMING, rng)
    assert state.expiry == us(61)

    actions = edca_engine_step(state, EdcaSignal.BUSY, us(52.5), TIMING, rng)
    assert actions[0].kind is ActionKind.DISARM
    assert state.backoff_slots == 1
    assert state.expiry is None

    actions = edca_engine_step(state, EdcaSignal.IDLE, us(100), TIMING, rng)
    assert actions[0].time == us(100) + us(34) + us(9)


def test_busy_during_aifs_keeps_every_slot():
    state = NodeState(node=1, ac=AC3, backoff_slots=2)
    rng = RngStream(1, 1)
    edca_engine_step(state, EdcaSignal.REQUEST, 0, TIMING, rng)
    edca_engine_step(state, EdcaSignal.BUSY, us(20), TIMING, rng)
    assert state.backoff_slots == 2


def test_expiry_transmits_and_outcomes_update_the_window():
    state = NodeState(node=1, ac=AC0, backoff_slots=0)
    rng = RngStream(1, 1)
    edca_engine_step(state, EdcaSignal.REQUEST, 0, TIMING, rng)
    actions = edca_engine_step(state, EdcaSignal.EXPIRED, us(79), TIMING, rng)
    assert [action.kind for action in actions] == [ActionKind.TRANSMIT]
    assert not state.contending
    assert state.backoff_slots is None

    edca_engine_step(state, EdcaSignal.FAILURE, us(200), TIMING, rng)
    assert state.retry_count == 1
    assert state.cw_current == 31

    edca_engine_step(state, EdcaSignal.SUCCESS, us(400), TIMING, rng)
    assert state.retry_count == 0
    assert state.cw_current == 15


def test_retry_limit_drops_the_packet():
    state = NodeState(node=1, ac=AC0)
    rng = RngStream(1, 1)
    for attempt in range(TIMING.retry_limit):
        assert edca_engine_step(state, EdcaSignal.FAILURE, attempt, TIMING, rng) == []
    actions = edca_engine_step(state, EdcaSignal.FAILURE, 99, TIMING, rng)
    assert actions[0].kind is ActionKind.DROP
    assert state.retry_count == 0
    assert state.cw_current == AC0.cw_min


def test_nav_update():
    state = NodeState(node=1, ac=AC3)
    data = Frame(FrameKind.DATA, 2, 0, payload_bytes=1400, nav_duration=us(48))
    nav_update(state, data, us(10))
    assert state.nav_until == us(58)

    short = Frame(FrameKind.ACK, 0, 2, nav_duration=us(5))
    nav_update(state, short, us(20))
    assert state.nav_until == us(58)

    nav_update(state, Frame(FrameKind.CF_END, 0, BROADCAST), us(30))
    assert state.nav_until == us(30)


def test_frame_validation():
    info = ShareInfo(holder=1, shared_stas=(2,), allocations=((2, us(500)),))
    Frame(FrameKind.RTS_SHARE, 1, 0, share_info=info)
    with pytest.raises(ValueError):
        Frame(FrameKind.RTS_SHARE, 1, 0)
    with pytest.raises(ValueError):
        Frame(FrameKind.DATA, 1, 0, share_info=info)
    with pytest.raises(ValueError):
        Frame(FrameKind.ACK, 0, 1, nav_duration=-1)


def test_broadcast_addressing():
    trigger = Frame(FrameKind.BSRP, 0, BROADCAST, targets=(1, 2))
    assert trigger.addressed_to(1)
    assert not trigger.addressed_to(3)
    assert Frame(FrameKind.CF_END, 0, BROADCAST).addressed_to(7)


def test_grant_splits_the_remainder_equally():
    grant = plan_txop_grant(1, 0, [2, 3, 4], [1400], PhyProfile(), TIMING)

    assert grant.holder_frames == 1
    assert grant.holder_duration == us(144.8)
    assert [sta for sta, _ in grant.shared_allocations] == [2, 3, 4]
    assert {allocation for _, allocation in grant.shared_allocations} == {1_521_066}
    assert grant.holder_duration + grant.allocated <= grant.limit
    assert grant.end == ms(5)


def test_grant_drops_members_that_cannot_fit():
    short = MacTiming(txop_limit=us(600))
    grant = plan_txop_grant(1, 0, [2, 3, 4], [1400], PhyProfile(), short)
    assert [sta for sta, _ in grant.shared_allocations] == [2]

    full = plan_txop_grant(1, 0, [2, 3], [1400] * 100, PhyProfile(), TIMING)
    assert full.holder_frames == 33
    assert full.shared_allocations == ()


def test_grant_validation():
    with pytest.raises(ValueError):
        TxopGrant(holder=1, start=0, limit=ms(1), shared_allocations=((2, ms(2)),))
    with pytest.raises(ValueError):
        TxopGrant(holder=1, start=0, shared_allocations=((2, 0),))


def test_monitor_flags_contention_under_nav():
    state = NodeState(node=1, ac=AC3, nav_until=us(100))
    frame = Frame(FrameKind.DATA, 1, 0, payload_bytes=1400, txop_owner=1)

    lenient = InvariantMonitor(ms(5), strict=False)
    lenient.check_transmission(state, frame, us(50), us(130), contention=True)
    lenient.check_transmission(state, frame, us(50), us(130), contention=False)
    assert len(lenient.violations) == 1

    with pytest.raises(InvariantViolation):
        InvariantMonitor(ms(5)).check_transmission(state, frame, us(50), us(130), contention=True)


def test_monitor_flags_txop_overrun():
    monitor = InvariantMonitor(ms(5), strict=False)
    state = NodeState(node=1, ac=AC3)
    frame = Frame(FrameKind.DATA, 1, 0, payload_bytes=1400, txop_owner=1)
    monitor.open_txop(1, 0)
    monitor.check_transmission(state, frame, ms(4.95), ms(5), contention=False)
    assert monitor.violations == []
    monitor.check_transmission(state, frame, ms(4.95), ms(5) + 1, contention=False)
    assert len(monitor.violations) == 1


def test_single_station_exchange():
    recorder = TraceRecorder()
    sim, network, collector = build([(0, 0), (5, 0)], trace=recorder)
    sta = network.nodes[1]
    sta.enqueue(sta.generate(1400))
    sim.run_until(ms(1))

    (record,) = collector.records.values()
    allowed = {us(34 + 9 * b + 80.8 + 16 + 32) for b in range(4)}
    assert record.delay in allowed

    trace = parse_trace(recorder.lines)
    assert frame_sequence(trace, 1) == ["Data"]
    assert frame_sequence(trace, 0) == ["Ack"]
    assert network.monitor.violations == []


def test_hidden_stations_collide_and_retry():
    sim, network, collector = build([(0, 0), (-10, 0), (10, 0)])
    for node in (1, 2):
        sta = network.nodes[node]
        sta.enqueue(sta.generate(1400))
    sim.run_until(ms(10))

    records = list(collector.records.values())
    assert len(records) == 2
    assert all(record.retries >= 1 for record in records)
    assert all(record.dropped == (record.retries > TIMING.retry_limit) for record in records)


def test_shared_txop_serves_the_group():
    recorder = TraceRecorder()
    sim, network, collector = build(
        [(0, 0), (5, 0), (-5, 0), (0, 5)],
        node_class=SharingStation,
        ap_class=SharingAccessPoint,
        trace=recorder,
    )
    for node in (1, 2, 3):
        sta = network.nodes[node]
        sta.has_traffic = True
        sta.enqueue(sta.generate(1400))
    sim.run_until(ms(20))
    network.finish()

    assert collector.sample_count == 3
    assert network.monitor.violations == []
    kinds = {event.kind for event in parse_trace(recorder.lines).events}
    assert {"poll", "txop_open", "txop_close"} <= kinds


def test_trigger_cycle_serves_every_station():
    sim, network, collector = build(
        [(0, 0), (5, 0), (-5, 0)], node_class=TriggeredStation, ap_class=TriggerAccessPoint
    )
    for node in (1, 2):
        sta = network.nodes[node]
        sta.enqueue(sta.generate(1400))
    sim.run_until(ms(4))

    delays = [record.delay for record in collector.records.values()]
    assert len(delays) == 2
    assert delays[0] == delays[1]
    assert ms(2.5) < delays[0] < ms(3)
    assert network.nodes[0].cycles_run == 1
    assert network.monitor.violations == []


def test_trigger_window_carries_a_burst_per_station():
    sim, network, collector = build([(0, 0), (5, 0)], node_class=TriggeredStation, ap_class=TriggerAccessPoint)
    sta = network.nodes[1]
    for _ in range(3):
        sta.enqueue(sta.generate(1400))
    sim.run_until(ms(4.9))

    delays = [record.delay for record in collector.records.values()]
    assert len(delays) == 3
    assert len(set(delays)) == 1
    assert ms(2.5) < delays[0] < ms(3.2)
    assert not sta.queue
    assert network.nodes[0].cycles_run == 1
    assert network.monitor.violations == []


def test_trigger_burst_stops_at_the_txop_limit():
    sim, network, collector = build([(0, 0), (5, 0)], node_class=TriggeredStation, ap_class=TriggerAccessPoint)
    sta = network.nodes[1]
    for _ in range(80):
        sta.enqueue(sta.generate(1400))
    # The first cycle ends exactly 5 ms after its BSRP at 2.534 ms
    sim.run_until(ms(7.6))

    # 4776 us remain for data: 49 frames of 80.8 us with SIFS between them
    assert collector.sample_count == 49
    assert len(sta.queue) == 31
    assert network.monitor.violations == []


def test_trigger_cycles_keep_the_period_on_an_idle_medium():
    recorder = TraceRecorder()
    sim, network, _ = build(
        [(0, 0), (5, 0), (-5, 0)], node_class=TriggeredStation, ap_class=TriggerAccessPoint, trace=recorder
    )
    sim.run_until(ms(30))

    events = parse_trace(recorder.lines).events
    dues = [e.time for e in events if e.kind == "trigger_due" and e.node == 0]
    starts = [e.time for e in events if e.kind == "tx_start" and e.node == 0 and e.fields["kind"] == "Bsrp"]
    assert dues == [TIMING.trigger_phase + k * TIMING.trigger_period for k in range(6)]
    assert len(starts) == 6
    assert starts[0] == dues[0] + TIMING.aifs(AC3)
    assert all(b - a == TIMING.trigger_period for a, b in zip(starts, starts[1:]))
    assert network.monitor.violations == []


@pytest.mark.slow
def test_saturated_edca_stations_share_the_medium_fairly():
    sim, network, collector = build([(0, 0), (5, 0), (-5, 0)], ac=AC0)
    for node in (1, 2):
        attach_traffic(network.nodes[node], TrafficSource(TrafficKind.SATURATED), seconds(10))
    sim.run_until(seconds(10))

    delivered = {1: 0, 2: 0}
    for record in collector.records.values():
        if not record.dropped:
            delivered[record.source] += 1
    assert min(delivered.values()) > 10_000
    assert abs(delivered[1] - delivered[2]) <= 0.05 * max(delivered.values())
