import json

import pytest

from src.mac_protocols import Packet
from src.metrics_reporting import (
    DelayRecord,
    MetricsCollector,
    MetricsError,
    compare_runs,
    ecdf,
    percentile,
    pooled,
    result_stem,
    summarize,
    write_run_results,
)
from src.sim_engine import ms, us


def delivered(packet_id, delay_us, generated_us=0.0, source=1, run=""):
    return DelayRecord(packet_id, source, us(generated_us), us(generated_us + delay_us), run=run)


def table_of(*delays_us):
    return ecdf(delivered(f"p{i}", d) for i, d in enumerate(delays_us))


def test_ecdf_fractions():
    table = table_of(1000, 2000, 3000)
    assert table.at(2000) == pytest.approx(2 / 3)
    assert table.at(999) == 0.0
    assert table.at(5000) == 1.0
    assert table.mean() == pytest.approx(2000)


def test_ecdf_merges_equal_delays():
    table = table_of(5, 5, 7)
    assert list(table.values) == [5.0, 7.0]
    assert table.at(5) == pytest.approx(2 / 3)


def test_ecdf_counts_drops_without_plotting_them():
    records = [delivered("a", 10), DelayRecord("b", 1, 0, None, retries=8)]
    table = ecdf(records)
    assert table.sample_count == 1
    assert table.drop_count == 1
    with pytest.raises(MetricsError):
        ecdf([DelayRecord("b", 1, 0, None)])


def test_nearest_rank_percentile():
    table = table_of(5, 1, 3)
    assert percentile(table, 0.5) == 3
    assert percentile(table, 1.0) == 5
    assert percentile(table, 0.01) == 1
    assert percentile(table_of(*range(1, 11)), 0.1) == 1
    with pytest.raises(MetricsError):
        percentile(table, 0)


def test_summary_layout():
    summary = summarize(table_of(*range(1, 101)))
    assert summary["count"] == 100
    assert summary["percentiles_us"]["p90"] == 90
    assert summary["percentiles_us"]["p99"] == 99
    assert summary["mean_us"] == pytest.approx(50.5)


def test_dominance():
    fast = table_of(1, 2, 3, 4)
    slow = table_of(2, 3, 4, 5)
    report = compare_runs(fast, slow)
    assert report.a_dominates
    assert not report.b_dominates
    assert report.to_dict()["points"][0]["percentile"] == 10


def test_record_validation():
    with pytest.raises(MetricsError):
        DelayRecord("x", 1, us(10), us(5))
    with pytest.raises(MetricsError):
        DelayRecord("x", 1, us(10), None).delay


def test_collector_ignores_warmup_and_other_nodes():
    collector = MetricsCollector(warmup=ms(1), nodes=[1, 2])
    early = Packet("1:1", 1, 0, 1400, generated_at=us(500))
    late = Packet("1:2", 1, 0, 1400, generated_at=ms(2))
    neighbour = Packet("6:1", 6, 5, 1400, generated_at=ms(2))
    for packet in (early, late, neighbour):
        collector.generated(packet)
        collector.delivered(packet, packet.generated_at + us(200))

    assert collector.sample_count == 1
    assert collector.conservation() == {
        1: {"generated": 1, "delivered": 1, "dropped": 0, "pending": 0}
    }


def test_collector_rejects_duplicates():
    collector = MetricsCollector()
    collector.record_delivery(delivered("1:1", 10))
    with pytest.raises(MetricsError):
        collector.record_delivery(delivered("1:1", 12))


def test_pooling_keeps_runs_apart():
    a = MetricsCollector(run="x#1")
    b = MetricsCollector(run="x#2")
    a.record_delivery(delivered("1:1", 10, run="x#1"))
    b.record_delivery(delivered("1:1", 30, run="x#2"))

    merged = pooled([a, b])
    assert merged.sample_count == 2
    assert merged.table().mean() == pytest.approx(20)
    with pytest.raises(MetricsError):
        pooled([])


def test_write_run_results(tmp_path):
    collector = MetricsCollector()
    for i, delay in enumerate((100, 200, 300)):
        collector.record_delivery(delivered(f"1:{i}", delay, generated_us=i * 5000))

    files = write_run_results(collector, str(tmp_path), "sharing/obss-light/ac0", 3, {"protocol": "sharing"})

    assert result_stem("sharing/obss-light/ac0", 3) == "sharing_obss-light_ac0_seed3"
    assert files["cdf"].endswith("sharing_obss-light_ac0_seed3.csv")
    lines = open(files["cdf"]).read().splitlines()
    assert lines[0] == "delay_us,cum_fraction"
    assert lines[-1] == "300.000,1"

    with open(files["summary"]) as f:
        summary = json.load(f)
    assert summary["scenario"] == "sharing/obss-light/ac0"
    assert summary["seed"] == 3
    assert summary["protocol"] == "sharing"
    assert summary["percentiles_us"]["p50"] == 200
