"""Small-topology builder and instrumentation used across protocol tests."""

import contextlib
import math

from droughtnet.energy import EnergyParams
from droughtnet.environment import (
    Climatology,
    DroughtScenario,
    EnvironmentModel,
    EnvironmentParams,
)
from droughtnet.geometry import GeoPoint
from droughtnet.kernel import EntityId, EntityKind, Kernel
from droughtnet.stack import (
    Channel,
    LinkParams,
    MacParams,
    RegionCounters,
    RoutingMode,
    SensorNode,
)


class MiniNet:
    def __init__(self, kernel, nodes, counters, received):
        self.kernel = kernel
        self.nodes = nodes
        self.counters = counters
        self.received = received  # [(time, DataMessage)] at the sink

    @property
    def sink(self):
        return self.nodes[0]

    def run(self, horizon):
        return self.kernel.run_until(horizon)


def build_net(
    positions,
    mode=RoutingMode.TREE,
    *,
    tree_parents=None,  # {child_index: parent_index}
    link_range=10.0,
    loss=0.0,
    delay=1,
    seed=1,
    period=1800,
    sampling_horizon=0,
    staggers=None,
    queue_cap=128,
    data_cache_cap=64,
    with_samplers=False,
):
    """Region-1 network with node 0 as sink at positions[0]."""
    kernel = Kernel(seed=seed)
    channel = Channel()
    counters = RegionCounters(1)
    env = None
    if with_samplers:
        env = EnvironmentModel(
            climatology={1: Climatology()},
            scenarios={1: DroughtScenario()},
            centroids={1: GeoPoint(positions[0][0], positions[0][1])},
            period_s=period,
            horizon_s=max(sampling_horizon, 1),
            params=EnvironmentParams(),
        )
    nodes = []
    for i, (x, y) in enumerate(positions):
        eid = EntityId(EntityKind.SENSOR_NODE, i)
        pos = GeoPoint(x, y)
        sampler = None
        if with_samplers and i != 0:
            sampler = env.sampler(1, i, pos, kernel.stream(f"env:{i}"))
        node = SensorNode(
            kernel=kernel,
            entity_id=eid,
            region_id=1,
            index_in_region=i,
            position=pos,
            is_sink=(i == 0),
            routing_mode=mode,
            channel=channel,
            counters=counters,
            energy_params=EnergyParams(),
            link=LinkParams(delay_s=delay, loss_prob=loss),
            mac=MacParams(queue_cap_frames=queue_cap),
            link_range_km=link_range,
            data_cache_cap=data_cache_cap,
            sampler=sampler,
            period_s=period,
            stagger_s=staggers[i] if staggers else 0,
            sampling_horizon_s=sampling_horizon,
        )
        nodes.append(node)
        kernel.register(node)
    for n in nodes:
        n.wire_neighbors(nodes)
    if tree_parents is not None:
        children = {}
        for child, parent in tree_parents.items():
            children.setdefault(parent, []).append(child)

        def subtree_size(i):
            return 1 + sum(subtree_size(c) for c in children.get(i, []))

        for n in nodes:
            i = n.index_in_region
            parent = tree_parents.get(i)
            n.set_tree_parent(
                nodes[parent] if parent is not None else None,
                descendants=subtree_size(i) - 1,
            )
    received = []
    nodes[0].collector = lambda msg, _received=received, _k=kernel: _received.append((_k.now, msg))
    for n in nodes:
        n.start()
    return MiniNet(kernel, nodes, counters, received)


# complete-ish binary tree on 10 nodes, sink = 0
BINARY_TREE_10 = {1: 0, 2: 0, 3: 1, 4: 1, 5: 2, 6: 2, 7: 3, 8: 3, 9: 4}

# tight cluster: everyone in range of everyone
CLUSTER_10 = [(float(i % 4), float(i // 4)) for i in range(10)]

# diamond: sink - (A|B) - X, no sink-X or A-B link at range 1.5
DIAMOND = [(0.0, 0.0), (1.0, 1.0), (1.0, -1.0), (2.0, 0.0)]


@contextlib.contextmanager
def spy_enqueue(log):
    """Record every MAC enqueue as (node_index, kind, signature, dst)."""
    orig = SensorNode._enqueue

    def spy(self, pkt):
        log.append((self.node_index, pkt.kind, getattr(pkt.body, "signature", None), pkt.dst))
        orig(self, pkt)

    SensorNode._enqueue = spy
    try:
        yield
    finally:
        SensorNode._enqueue = orig


@contextlib.contextmanager
def spy_interests(log):
    """Record every interest reception as (node_index, interest_id, src)."""
    orig = SensorNode.receive_interest

    def spy(self, interest, hops_left, src):
        log.append((self.node_index, interest.interest_id, src))
        orig(self, interest, hops_left, src)

    SensorNode.receive_interest = spy
    try:
        yield
    finally:
        SensorNode.receive_interest = orig


def random_connected_positions(rng, link_range=2.0, max_nodes=12):
    """2..max_nodes positions, connected by construction: each new node
    lands within link range of some earlier one."""
    n = 2 + rng.randint(0, max_nodes - 2)
    pts = [(3.0, 3.0)]
    for _ in range(1, n):
        bx, by = pts[rng.randint(0, len(pts) - 1)]
        ang = rng.uniform(0.0, 2.0 * math.pi)
        r = rng.uniform(0.3, 0.95 * link_range)
        pts.append((bx + r * math.cos(ang), by + r * math.sin(ang)))
    return pts
