import pytest

from src.sim_engine import us
from src.trace_analysis import (
    IDLE_ACCESS_BOUND,
    Postponement,
    TraceFormatError,
    frame_sequence,
    load_trace,
    node_timeline,
    obss_gap_analysis,
    parse_trace,
    postponement_summary,
    trace_report,
    trigger_postponements,
    txop_spans,
)

JOINS = [
    "0,0,join,bss=1 role=ap x=0.0 y=0.0 protocol=sharing",
    "0,1,join,bss=1 role=sta x=5.0 y=0.0 protocol=sharing",
    "0,5,join,bss=2 role=ap x=15.0 y=0.0 protocol=edca",
    "0,6,join,bss=2 role=sta x=20.0 y=0.0 protocol=edca",
]

OBSS_ACTIVITY = JOINS + [
    "1000,5,txop_open,bss=2",
    "50000,5,txop_close,bss=2 owner=5",
    "60000,1,tx_start,kind=RtsShare dst=0 dur=36000 owner=1",
    "96000,0,rx,kind=RtsShare src=1 outcome=Delivered",
    "200000,6,txop_open,bss=2",
    "300000,5,txop_close,bss=2 owner=6",
    "310000,5,txop_open,bss=2",
    "400000,5,txop_close,bss=2 owner=5",
    "500000,6,txop_open,bss=2",
    "600000,6,txop_close,bss=2 owner=6",
]

TRIGGER_ACTIVITY = JOINS + [
    "2500000,0,trigger_due,period=5000000",
    "2550000,0,tx_start,kind=Bsrp dst=-1 dur=48000 owner=0",
    "7500000,0,trigger_due,period=5000000",
    "12500000,0,trigger_due,period=5000000",
    "12700000,0,tx_start,kind=Bsrp dst=-1 dur=48000 owner=0",
]


def test_parse_collects_nodes_and_fields():
    trace = parse_trace(OBSS_ACTIVITY + ["", "   "])
    assert len(trace) == len(OBSS_ACTIVITY)
    assert trace.bss_of(6) == 2
    assert trace.nodes_in(1) == [0, 1]
    assert trace.events[-1].get_int("owner") == 6


def test_parse_rejects_malformed_lines():
    with pytest.raises(TraceFormatError):
        parse_trace(["5,1"])
    with pytest.raises(TraceFormatError):
        parse_trace(["abc,1,rx,"])
    with pytest.raises(TraceFormatError):
        parse_trace(["10,1,rx,", "5,1,rx,"])
    with pytest.raises(TraceFormatError):
        parse_trace(["5,1,rx,novalue"])


def test_timeline_queries():
    trace = parse_trace(OBSS_ACTIVITY)
    assert [e.kind for e in node_timeline(trace, 1)] == ["join", "tx_start"]
    assert frame_sequence(trace, 1) == ["RtsShare"]
    assert frame_sequence(trace, 6) == []


def test_spans_pair_closes_made_on_behalf_of_the_holder():
    trace = parse_trace(OBSS_ACTIVITY)
    assert txop_spans(trace, 2) == [
        (1000, 50000),
        (200000, 300000),
        (310000, 400000),
        (500000, 600000),
    ]
    assert txop_spans(trace, 1) == []


def test_gap_analysis():
    report = obss_gap_analysis(parse_trace(OBSS_ACTIVITY))
    assert report.gap_count == 2
    assert report.used_gaps == 1
    assert report.utilisation == 0.5
    assert report.idle_time == us(250)
    assert report.gaps[0] == (50000, 200000, True)
    assert report.to_dict()["idle_time_us"] == 250.0


def test_trigger_postponements():
    postponements = trigger_postponements(parse_trace(TRIGGER_ACTIVITY))
    assert [p.delay for p in postponements] == [us(50), us(200)]
    assert [p.skipped for p in postponements] == [0, 1]

    summary = postponement_summary(postponements)
    assert summary == {
        "cycles": 2,
        "postponed": 1,
        "skipped_cycles": 1,
        "mean_delay_us": 125.0,
        "max_delay_us": 200.0,
    }


def test_report_of_empty_trace_is_empty():
    assert trace_report(parse_trace([])) == {}


def test_full_report(tmp_path):
    path = tmp_path / "run.trace"
    path.write_text("\n".join(OBSS_ACTIVITY) + "\n")
    report = trace_report(load_trace(str(path)))
    assert report["events"] == len(OBSS_ACTIVITY)
    assert report["gaps"]["gap_count"] == 2
    assert report["trigger"]["cycles"] == 0


def test_idle_access_bound_is_the_longest_ac3_wait():
    assert IDLE_ACCESS_BOUND == us(97)

    on_time = Postponement(0, us(1000), us(1000) + IDLE_ACCESS_BOUND, 0)
    late = Postponement(0, us(6000), us(6000) + IDLE_ACCESS_BOUND + 1, 0)
    assert postponement_summary([on_time])["postponed"] == 0
    assert postponement_summary([on_time, late])["postponed"] == 1
