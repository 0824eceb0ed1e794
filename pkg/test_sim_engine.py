import pytest

from src.sim_engine import (
    EventKind,
    LiveLockError,
    RngStream,
    ScheduleError,
    Simulator,
    TraceRecorder,
    ms,
    seconds,
    us,
)


def test_time_units():
    assert us(13.6) == 13_600
    assert ms(2.5) == 2_500_000
    assert seconds(1) == 1_000_000_000


def test_events_fire_in_time_then_schedule_order():
    sim = Simulator()
    fired = []
    sim.schedule(us(5), lambda: fired.append("late"))
    sim.schedule(us(1), lambda: fired.append("first"))
    sim.schedule(us(1), lambda: fired.append("second"))

    stats = sim.run_until(us(10))

    assert fired == ["first", "second", "late"]
    assert stats.processed == 3
    assert sim.now == us(10)


def test_run_until_includes_events_at_the_end_time():
    sim = Simulator()
    fired = []
    sim.schedule(us(10), lambda: fired.append(sim.now))
    sim.schedule(us(11), lambda: fired.append(sim.now))

    sim.run_until(us(10))

    assert fired == [us(10)]
    assert sim.pending() == 1


def test_cancelled_events_never_fire():
    sim = Simulator()
    fired = []
    handle = sim.schedule(us(3), lambda: fired.append("cancelled"))
    sim.schedule(us(4), lambda: fired.append("kept"))

    assert handle.cancel()
    assert not handle.pending
    assert not handle.cancel()

    stats = sim.run_until(us(5))
    assert fired == ["kept"]
    assert stats.cancelled == 1
    assert sim.pending() == 0


def test_callbacks_can_schedule_at_the_current_instant():
    sim = Simulator()
    fired = []

    def first():
        fired.append("first")
        sim.schedule_in(0, lambda: fired.append("chained"))

    sim.schedule(us(2), first)
    sim.schedule(us(2), lambda: fired.append("second"))
    sim.run_until(us(2))

    assert fired == ["first", "second", "chained"]


def test_scheduling_in_the_past_is_rejected():
    sim = Simulator()
    sim.run_until(us(10))
    with pytest.raises(ScheduleError):
        sim.schedule(us(5), lambda: None)
    with pytest.raises(ScheduleError):
        sim.run_until(us(1))


def test_livelock_is_detected():
    sim = Simulator(livelock_cap=10)

    def spin():
        sim.schedule_in(0, spin)

    sim.schedule(us(1), spin)
    with pytest.raises(LiveLockError):
        sim.run_until(us(2))


def test_statistics_count_event_kinds():
    sim = Simulator()
    sim.schedule(us(1), lambda: None, EventKind.ARRIVAL)
    sim.schedule(us(2), lambda: None, EventKind.BACKOFF)
    sim.schedule(us(3), lambda: None, EventKind.BACKOFF)

    stats = sim.run_until(us(3))

    assert stats.by_kind["arrival"] == 1
    assert stats.by_kind["backoff"] == 2
    assert stats.end_time == us(3)


def test_streams_are_reproducible_and_independent():
    first = RngStream(7, 1)
    again = RngStream(7, 1)
    other = RngStream(7, 2)

    draws = [first.draw_uniform_int(0, 1023) for _ in range(20)]
    assert draws == [again.draw_uniform_int(0, 1023) for _ in range(20)]
    assert draws != [other.draw_uniform_int(0, 1023) for _ in range(20)]
    assert all(0 <= value <= 1023 for value in draws)


def test_uniform_int_bounds():
    stream = RngStream(3)
    assert stream.draw_uniform_int(5, 5) == 5
    values = {stream.draw_uniform_int(0, 3) for _ in range(400)}
    assert values == {0, 1, 2, 3}
    with pytest.raises(ValueError):
        stream.draw_uniform_int(4, 3)
    with pytest.raises(ValueError):
        RngStream(-1)


def test_simulator_streams_follow_the_seed():
    draws_a = [Simulator(seed=11).stream(4).draw_uniform_int(0, 15) for _ in range(3)]
    draws_b = [Simulator(seed=11).stream(4).draw_uniform_int(0, 15) for _ in range(3)]
    assert draws_a == draws_b


def test_trace_recorder(tmp_path):
    recorder = TraceRecorder()
    recorder.record(1000, 3, "tx_start", "kind=Data dst=0")
    disabled = TraceRecorder(enabled=False)
    disabled.record(1000, 3, "tx_start")

    path = tmp_path / "run.trace"
    recorder.save(str(path))

    assert path.read_text() == "1000,3,tx_start,kind=Data dst=0\n"
    assert len(disabled) == 0
