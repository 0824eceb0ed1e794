import pytest

from src.analytic_model import ALL_PROTOCOLS, ProtocolKind
from src.batch_processor import run_scenario
from src.metrics_reporting import percentile, pooled
from src.traffic_scenarios import ObssLoad, ScenarioConfig

pytestmark = pytest.mark.slow

SEEDS = (1, 2)


def run(protocol, load=ObssLoad.LARGE, ac="ac0", seed=1, duration_s=1.5):
    config = ScenarioConfig(
        protocol_bss1=protocol, obss_load=load, obss_ac=ac, seed=seed, sim_duration_s=duration_s, warmup_s=0.2
    )
    return run_scenario(config, trace=protocol is ProtocolKind.TRIGGER_BASED)


@pytest.fixture(scope="module")
def large_obss_runs():
    return {
        (protocol, ac, seed): run(protocol, ac=ac, seed=seed)
        for protocol in ALL_PROTOCOLS
        for ac in ("ac0", "ac3")
        for seed in SEEDS
    }


@pytest.mark.parametrize("ac", ["ac0", "ac3"])
def test_sharing_beats_trigger_under_heavy_interference(large_obss_runs, ac):
    for seed in SEEDS:
        sharing = large_obss_runs[(ProtocolKind.SHARING_BASED, ac, seed)].collector.table()
        trigger = large_obss_runs[(ProtocolKind.TRIGGER_BASED, ac, seed)].collector.table()
        for p in (0.5, 0.9):
            assert percentile(sharing, p) < percentile(trigger, p), (ac, seed, p)


def test_busy_medium_postpones_trigger_cycles(large_obss_runs):
    for ac in ("ac0", "ac3"):
        for seed in SEEDS:
            stats = large_obss_runs[(ProtocolKind.TRIGGER_BASED, ac, seed)].trace_stats["trigger"]
            assert stats["cycles"] > 0
            assert stats["postponed"] > 0, (ac, seed)


@pytest.mark.parametrize("protocol", [ProtocolKind.EDCA, ProtocolKind.TRIGGER_BASED])
def test_aggressive_obss_category_lengthens_the_tail(large_obss_runs, protocol):
    def p90(ac):
        collectors = [large_obss_runs[(protocol, ac, seed)].collector for seed in SEEDS]
        return percentile(pooled(collectors).table(), 0.9)

    assert p90("ac3") >= p90("ac0")


@pytest.mark.parametrize("protocol", list(ProtocolKind))
def test_delay_grows_once_the_obss_reaches_the_ap(protocol):
    def mean_delay(load):
        return run(protocol, load=load, duration_s=1.0).collector.table().mean()

    light = mean_delay(ObssLoad.LIGHT)
    assert mean_delay(ObssLoad.MEDIUM) >= light
    assert mean_delay(ObssLoad.LARGE) >= light
