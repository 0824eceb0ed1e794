import pytest

from src.phy_medium import (
    AudibilityMode,
    FrameKind,
    Medium,
    NodePosition,
    Outcome,
    PhyProfile,
    Role,
    airtime_control,
    airtime_data,
    audible,
)
from src.sim_engine import Simulator, us


class Listener:
    """Records what the medium reports to one node"""

    def __init__(self):
        self.nav_until = 0
        self.carrier = []
        self.frames = []

    def on_carrier_change(self, now, busy):
        self.carrier.append((now, busy))

    def on_frame(self, record, outcome):
        self.frames.append((record.transmitter, outcome))


def sta(node, x, y=0.0):
    return NodePosition(node, x, y, 15.0, Role.STA)


def make_medium(*positions):
    sim = Simulator()
    medium = Medium(sim, PhyProfile())
    listeners = {}
    for position in positions:
        listeners[position.node] = Listener()
        medium.register(position, listeners[position.node])
    return sim, medium, listeners


def test_data_airtime():
    profile = PhyProfile()
    assert airtime_data(1400, profile) == us(80.8)
    assert airtime_data(1, profile) == us(40 + 13.6)
    assert airtime_data(1400, profile, ru_fraction=0.25) > airtime_data(1400, profile)
    with pytest.raises(ValueError):
        airtime_data(0, profile)


def test_control_airtime():
    profile = PhyProfile()
    assert airtime_control(FrameKind.ACK, profile) == us(32)
    assert airtime_control(FrameKind.RTS_SHARE, profile) == us(36)
    assert airtime_control(FrameKind.BSRP, profile) == us(48)
    assert airtime_control(FrameKind.CTS_REJECT, profile.with_control_airtime(FrameKind.CTS_REJECT, 44)) == us(44)
    with pytest.raises(ValueError):
        airtime_control(FrameKind.DATA, profile)


def test_disk_boundary_is_inclusive():
    profile = PhyProfile()
    assert audible(sta(1, 0), sta(2, 10.0), profile)
    assert not audible(sta(1, 0), sta(2, 10.01), profile)
    assert audible(sta(1, 3), sta(2, 3), profile)


def test_log_distance_audibility():
    profile = PhyProfile(audibility_mode=AudibilityMode.LOG_DISTANCE)
    assert audible(sta(1, 0), sta(2, 10.0), profile)
    assert not audible(sta(1, 0), sta(2, 200.0), profile)


def test_node_position_validation():
    with pytest.raises(ValueError):
        NodePosition(1, float("inf"), 0.0, 15.0, Role.STA)
    with pytest.raises(ValueError):
        NodePosition(1, 0.0, 0.0, 40.0, Role.AP)


def test_lone_transmission_is_delivered():
    sim, medium, listeners = make_medium(sta(1, 0), sta(2, 5))
    medium.start_transmission(1, "frame", us(80.8))

    assert medium.carrier_busy(2)
    sim.run_until(us(100))

    assert listeners[2].frames == [(1, Outcome.DELIVERED)]
    assert listeners[2].carrier == [(0, True), (us(80.8), False)]
    assert listeners[1].frames == [(1, Outcome.INAUDIBLE)]


def test_overlapping_transmissions_collide():
    sim, medium, listeners = make_medium(sta(1, 0), sta(2, 5), sta(3, 10))
    medium.start_transmission(1, "a", us(80))
    sim.run_until(us(20))
    medium.start_transmission(3, "b", us(80))
    sim.run_until(us(200))

    assert (1, Outcome.COLLIDED) in listeners[2].frames
    assert (3, Outcome.COLLIDED) in listeners[2].frames


def test_hidden_node_is_not_heard():
    sim, medium, listeners = make_medium(sta(1, 0), sta(2, 8), sta(3, 16))
    assert not medium.hears(3, 1)
    medium.start_transmission(1, "a", us(50))
    assert not medium.carrier_busy(3)
    sim.run_until(us(60))
    assert listeners[3].frames == []


def test_same_group_transmissions_do_not_collide():
    sim, medium, listeners = make_medium(sta(0, 0), sta(1, 5), sta(2, -5))
    medium.start_transmission(1, "a", us(80), mu_group=7)
    medium.start_transmission(2, "b", us(80), mu_group=7)
    sim.run_until(us(100))

    assert sorted(listeners[0].frames) == [(1, Outcome.DELIVERED), (2, Outcome.DELIVERED)]
    assert medium.overlap_violations == []


def test_nav_makes_medium_busy():
    sim, medium, listeners = make_medium(sta(1, 0), sta(2, 5))
    listeners[2].nav_until = us(30)
    assert medium.medium_busy(2)
    assert not medium.medium_busy(2, at=us(30))
    with pytest.raises(ValueError):
        medium.medium_busy(9)


def test_double_registration_is_rejected():
    sim, medium, _ = make_medium(sta(1, 0))
    with pytest.raises(ValueError):
        medium.register(sta(1, 2), Listener())
