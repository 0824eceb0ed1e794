"""
Topologies, traffic sources and the named scenario presets

Two BSSs with their APs 15 m apart. BSS1 carries constant-bit-rate uplink
traffic under the protocol being evaluated; BSS2 is a saturated EDCA
neighbour whose number of active stations sets the interference level.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

from .analytic_model import ALL_PROTOCOLS, ProtocolKind
from .mac_protocols import (
    AccessCategory,
    InvariantMonitor,
    MacNetwork,
    MacNode,
    MacTiming,
    PacketSink,
    SharingAccessPoint,
    SharingStation,
    TriggerAccessPoint,
    TriggeredStation,
    access_category,
)
from .phy_medium import Medium, NodePosition, PhyProfile, Role
from .sim_engine import EventKind, SimTime, Simulator, ms, seconds, us

logger = logging.getLogger(__name__)

AP_TX_POWER_DBM = 21.0
STA_TX_POWER_DBM = 15.0

REFERENCE_BSS = 1
OBSS = 2

CALIBRATION_NAME = "calibration/edca/single-sta"


class ScenarioError(ValueError):
    """Raised for unknown scenario names and malformed scenario files"""


class ObssLoad(str, Enum):
    LIGHT = "light"
    MEDIUM = "medium"
    LARGE = "large"

    @property
    def active_stations(self) -> int:
        return {"light": 1, "medium": 2, "large": 4}[self.value]


class Layout(str, Enum):
    TWO_BSS = "two_bss"
    SINGLE_STA = "single_sta"


class TrafficKind(str, Enum):
    PERIODIC_CBR = "cbr"
    SATURATED = "saturated"


class Direction(str, Enum):
    UPLINK = "uplink"
    DOWNLINK = "downlink"


@dataclass(frozen=True)
class TrafficSource:
    kind: TrafficKind
    direction: Direction = Direction.UPLINK
    payload_bytes: int = 1400
    period: SimTime = ms(5)
    phase: SimTime = 0

    def __post_init__(self):
        if self.payload_bytes < 1:
            raise ScenarioError(f"payload must be >= 1 byte, got {self.payload_bytes}")
        if self.kind is TrafficKind.PERIODIC_CBR and self.period <= 0:
            raise ScenarioError(f"CBR period must be > 0, got {self.period}")


@dataclass(frozen=True)
class NodePlacement:
    position: NodePosition
    bss: int


@dataclass(frozen=True)
class ScenarioConfig:
    protocol_bss1: ProtocolKind = ProtocolKind.SHARING_BASED
    obss_load: ObssLoad = ObssLoad.LIGHT
    obss_ac: str = "ac0"
    sim_duration_s: float = 10.0
    seed: int = 1
    warmup_s: float = 0.5
    layout: Layout = Layout.TWO_BSS
    bss1_ac: str = "ac3"
    payload_bytes: int = 1400
    cbr_period_ms: float = 5.0
    phase_jitter_us: float = 0.0
    txop_limit_ms: float = 5.0
    trigger_period_ms: float = 5.0
    trigger_phase_ms: float = 2.5
    retry_limit: int = 7
    max_poll_rounds: int = 1
    cs_required: bool = True
    ap_downlink_in_share: bool = False
    sharing_group: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.sim_duration_s <= 0:
            raise ScenarioError(f"sim_duration_s must be > 0, got {self.sim_duration_s}")
        if not 0 <= self.warmup_s < self.sim_duration_s:
            raise ScenarioError("warmup_s must lie in [0, sim_duration_s)")
        if not 0 <= self.seed < 2**64:
            raise ScenarioError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        try:
            access_category(self.obss_ac)
            access_category(self.bss1_ac)
        except ValueError as e:
            raise ScenarioError(str(e))

    @property
    def name(self) -> str:
        if self.layout is Layout.SINGLE_STA:
            return CALIBRATION_NAME
        return f"{self.protocol_bss1.value}/obss-{self.obss_load.value}/{self.obss_ac}"

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)

    def timing(self) -> MacTiming:
        return MacTiming(
            txop_limit=ms(self.txop_limit_ms),
            retry_limit=self.retry_limit,
            trigger_period=ms(self.trigger_period_ms),
            trigger_phase=ms(self.trigger_phase_ms),
            max_poll_rounds=self.max_poll_rounds,
            cs_required=self.cs_required,
            ap_downlink_in_share=self.ap_downlink_in_share,
        )

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["protocol_bss1"] = self.protocol_bss1.value
        data["obss_load"] = self.obss_load.value
        data["layout"] = self.layout.value
        data["sharing_group"] = None if self.sharing_group is None else list(self.sharing_group)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"Unknown scenario keys: {', '.join(sorted(unknown))}")
        values = dict(data)
        try:
            if "protocol_bss1" in values:
                values["protocol_bss1"] = ProtocolKind.parse(values["protocol_bss1"])
            if "obss_load" in values:
                values["obss_load"] = ObssLoad(str(values["obss_load"]).lower())
            if "layout" in values:
                values["layout"] = Layout(values["layout"])
            if values.get("sharing_group") is not None:
                values["sharing_group"] = tuple(int(n) for n in values["sharing_group"])
        except ValueError as e:
            raise ScenarioError(str(e))
        return cls(**values)


def build_topology(config: ScenarioConfig) -> List[NodePlacement]:
    """Node ids: AP1 0, its STAs 1-4, AP2 5, its STAs 6-9"""

    def ap(node: int, x: float, bss: int) -> NodePlacement:
        return NodePlacement(NodePosition(node, x, 0.0, AP_TX_POWER_DBM, Role.AP), bss)

    def sta(node: int, x: float, y: float, bss: int) -> NodePlacement:
        return NodePlacement(NodePosition(node, x, y, STA_TX_POWER_DBM, Role.STA), bss)

    if config.layout is Layout.SINGLE_STA:
        return [ap(0, 0.0, REFERENCE_BSS), sta(1, 5.0, 0.0, REFERENCE_BSS)]

    offsets = [(5.0, 0.0), (-5.0, 0.0), (0.0, 5.0), (0.0, -5.0)]
    nodes = [ap(0, 0.0, REFERENCE_BSS)]
    nodes += [sta(1 + i, dx, dy, REFERENCE_BSS) for i, (dx, dy) in enumerate(offsets)]
    nodes.append(ap(5, 15.0, OBSS))
    nodes += [sta(6 + i, 15.0 + dx, dy, OBSS) for i, (dx, dy) in enumerate(offsets)]
    return nodes


def measured_nodes(config: ScenarioConfig) -> List[int]:
    return [
        p.position.node
        for p in build_topology(config)
        if p.bss == REFERENCE_BSS and p.position.role is Role.STA
    ]


def active_obss_stations(config: ScenarioConfig) -> List[int]:
    """First-k-by-index BSS2 stations carrying traffic"""
    if config.layout is Layout.SINGLE_STA:
        return []
    stations = [
        p.position.node
        for p in build_topology(config)
        if p.bss == OBSS and p.position.role is Role.STA
    ]
    return stations[: config.obss_load.active_stations]


def traffic_plan(config: ScenarioConfig) -> Dict[int, TrafficSource]:
    """Traffic binding per node id"""
    period = ms(config.cbr_period_ms)
    plan: Dict[int, TrafficSource] = {}
    for index, node in enumerate(measured_nodes(config)):
        # Optional spread of CBR phases; zero keeps every station aligned
        phase = us(config.phase_jitter_us) * index // max(1, len(measured_nodes(config)))
        plan[node] = TrafficSource(
            TrafficKind.PERIODIC_CBR, Direction.UPLINK, config.payload_bytes, period, phase
        )
    if config.layout is Layout.TWO_BSS:
        plan[5] = TrafficSource(TrafficKind.SATURATED, Direction.DOWNLINK, config.payload_bytes)
        for node in active_obss_stations(config):
            plan[node] = TrafficSource(TrafficKind.SATURATED, Direction.UPLINK, config.payload_bytes)
    return plan


class TrafficGenerator:
    """Feeds one node's queue from its traffic source"""

    def __init__(self, node: MacNode, source: TrafficSource, until: SimTime):
        self.node = node
        self.source = source
        self.until = until
        self.arrivals = 0

    def start(self) -> None:
        sim = self.node.sim
        if self.source.kind is TrafficKind.SATURATED:
            self.node.on_dequeue = lambda n: self._arrive(schedule_next=False)
            sim.schedule(0, lambda: self._arrive(schedule_next=False), EventKind.ARRIVAL, self.node.node)
        else:
            first = self.source.phase + self.source.period
            if first <= self.until:
                sim.schedule(first, self._arrive, EventKind.ARRIVAL, self.node.node)

    def _arrive(self, schedule_next: bool = True) -> None:
        self.arrivals += 1
        self.node.enqueue(self.node.generate(self.source.payload_bytes))
        if schedule_next:
            upcoming = self.node.sim.now + self.source.period
            if upcoming <= self.until:
                self.node.sim.schedule(upcoming, self._arrive, EventKind.ARRIVAL, self.node.node)


def attach_traffic(node: MacNode, source: TrafficSource, until: SimTime) -> TrafficGenerator:
    """CBR arrivals at phase + k*period for k >= 1; saturated queues refill on every dequeue"""
    node.has_traffic = True
    generator = TrafficGenerator(node, source, until)
    generator.start()
    return generator


def _node_class(config: ScenarioConfig, placement: NodePlacement) -> Callable[..., MacNode]:
    if placement.bss != REFERENCE_BSS or config.layout is Layout.SINGLE_STA:
        return MacNode
    is_ap = placement.position.role is Role.AP
    if config.protocol_bss1 is ProtocolKind.SHARING_BASED:
        return SharingAccessPoint if is_ap else SharingStation
    if config.protocol_bss1 is ProtocolKind.TRIGGER_BASED:
        return TriggerAccessPoint if is_ap else TriggeredStation
    return MacNode


def build_network(
    config: ScenarioConfig,
    simulator: Simulator,
    sink: Optional[PacketSink] = None,
    profile: Optional[PhyProfile] = None,
    strict: bool = True,
) -> Tuple[MacNetwork, List[TrafficGenerator]]:
    """Create the medium, every node and its traffic for one run"""
    timing = config.timing()
    medium = Medium(simulator, profile or PhyProfile())
    network = MacNetwork(simulator, medium, timing, sink, InvariantMonitor(timing.txop_limit, strict))

    bss_ac: Dict[int, AccessCategory] = {
        REFERENCE_BSS: access_category(config.bss1_ac),
        OBSS: access_category(config.obss_ac),
    }
    placements = build_topology(config)
    for placement in placements:
        node_class = _node_class(config, placement)
        node = node_class(network, placement.position, placement.bss, bss_ac[placement.bss])
        network.add(node)

    active = set(active_obss_stations(config))
    for node in network.nodes.values():
        if node.position.role is Role.STA:
            node.destinations = [network.access_point(node.bss)]
        elif node.bss == OBSS:
            node.destinations = sorted(active) or network.stations(OBSS)
        else:
            node.destinations = network.stations(node.bss)

    if config.sharing_group is not None:
        for node in network.nodes.values():
            if isinstance(node, SharingStation):
                node.sharing_group = list(config.sharing_group)

    network.start()
    until = seconds(config.sim_duration_s)
    generators = [
        attach_traffic(network.nodes[node], source, until)
        for node, source in sorted(traffic_plan(config).items())
    ]
    logger.debug(f"Built {config.name} with {len(network.nodes)} nodes and {len(generators)} sources")
    return network, generators


def scenario_matrix(
    sim_duration_s: float = 10.0, seed: int = 1, warmup_s: float = 0.5
) -> List[ScenarioConfig]:
    """Protocol x OBSS load x OBSS access category, 18 presets"""
    return [
        ScenarioConfig(
            protocol_bss1=protocol,
            obss_load=load,
            obss_ac=ac,
            sim_duration_s=sim_duration_s,
            seed=seed,
            warmup_s=warmup_s,
        )
        for protocol in ALL_PROTOCOLS
        for load in ObssLoad
        for ac in ("ac0", "ac3")
    ]


def calibration_preset(sim_duration_s: float = 10.0, seed: int = 1) -> ScenarioConfig:
    """One EDCA station and its AP, no neighbour"""
    return ScenarioConfig(
        protocol_bss1=ProtocolKind.EDCA,
        layout=Layout.SINGLE_STA,
        sim_duration_s=sim_duration_s,
        seed=seed,
        warmup_s=0.0,
    )


def presets(sim_duration_s: float = 10.0, seed: int = 1, warmup_s: float = 0.5) -> Dict[str, ScenarioConfig]:
    configs = {c.name: c for c in scenario_matrix(sim_duration_s, seed, warmup_s)}
    configs[CALIBRATION_NAME] = calibration_preset(sim_duration_s, seed)
    return configs


def scenario_by_name(name: str, **overrides) -> ScenarioConfig:
    known = presets()
    if name not in known:
        raise ScenarioError(f"Unknown scenario {name!r}. Known scenarios: {', '.join(sorted(known))}")
    return replace(known[name], **overrides) if overrides else known[name]


def load_scenario(path: str) -> ScenarioConfig:
    """Read a scenario file; a "preset" key starts from a named preset"""
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ScenarioError(f"Could not read scenario file {path}: {e}")
    if not isinstance(data, dict):
        raise ScenarioError(f"Scenario file {path} must hold an object")

    preset = data.pop("preset", None)
    if preset is None:
        return ScenarioConfig.from_dict(data)
    base = scenario_by_name(preset).to_dict()
    base.update(data)
    return ScenarioConfig.from_dict(base)


def export_presets(out_dir: str) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, config in sorted(presets().items()):
        path = os.path.join(out_dir, name.replace("/", "_") + ".json")
        with open(path, "w") as f:
            json.dump(config.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        paths.append(path)
    logger.info(f"Exported {len(paths)} scenario presets to {out_dir}")
    return paths
