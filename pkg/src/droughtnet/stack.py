"""Per-node layered protocol stack.

Application (periodic sampling), transport (unreliable single-shot or
reliable acknowledged), network (binary-tree convergecast, directed
diffusion with interests/gradients/reinforcement, or plain flooding),
MAC (fragmentation, queue, idle-channel check with random backoff) and
a shared per-region channel with per-hop delay.

MAC model: the frames of one packet transmit as a back-to-back burst
after a single idle check, holding the channel one second per frame;
the packet is delivered whole when the last frame lands.  Link loss is
drawn once per packet per hop, so a report either arrives or is counted
lost exactly once.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

from .energy import EnergyLedger, EnergyParams
from .environment import SENSOR_FIELDS, NodeSampler, SensorReading
from .kernel import EntityId, EntityKind, Kernel, Message, RngStream

KIND_DATA = 0
KIND_INTEREST = 1
KIND_REINFORCE = 2

INTEREST_BYTES = 32
REINFORCE_BYTES = 16

REINFORCED_DATA_RATE = 2.0


class StackError(Exception):
    pass


class OrphanNode(StackError):
    """A non-sink tree node with no parent cannot report."""


class UnknownInterest(StackError):
    pass


class RoutingMode(Enum):
    TREE = "tree"
    DIFFUSION = "diffusion"
    FLOODING = "flooding"
    COMBINED = "combined"


@dataclass(frozen=True, slots=True)
class LinkParams:
    delay_s: int = 1
    loss_prob: float = 0.0


@dataclass(frozen=True, slots=True)
class MacParams:
    max_frame_bytes: int = 40
    queue_cap_frames: int = 128
    backoff_slots: int = 16


@dataclass(frozen=True, slots=True)
class Interest:
    """Directed-diffusion task description named by attribute-value pairs."""

    interest_id: int
    attributes: frozenset
    interval_s: int
    duration_s: int
    hop_limit: int
    origin: EntityId

    def __post_init__(self):
        if not self.attributes:
            raise ValueError("interest attributes must be non-empty")
        if self.interval_s <= 0 or self.duration_s <= 0 or self.hop_limit < 1:
            raise ValueError("interest interval, duration and hop limit must be positive")


@dataclass(slots=True)
class GradientEntry:
    """Direction state toward the neighbour an interest arrived from."""

    interest_id: int
    toward: EntityId
    data_rate: float
    expires_at: int
    reinforced: bool = False


class DataMessage:
    """One report flowing toward a sink; signature deduplicates copies."""

    __slots__ = (
        "signature",
        "origin",
        "origin_index",
        "region_id",
        "reading",
        "hop_count",
        "interest_id",
        "battery_mj",
        "frames_dropped",
        "route",
    )
    tag = "data"

    def __init__(self, signature, origin, origin_index, region_id, reading,
                 hop_count=0, interest_id=0, battery_mj=0.0, frames_dropped=0, route=()):
        self.signature = signature
        self.origin = origin
        self.origin_index = origin_index
        self.region_id = region_id
        self.reading = reading
        self.hop_count = hop_count
        self.interest_id = interest_id
        self.battery_mj = battery_mj
        self.frames_dropped = frames_dropped
        self.route = route

    def fork(self, interest_id=None):
        return DataMessage(
            self.signature, self.origin, self.origin_index, self.region_id,
            self.reading, self.hop_count,
            self.interest_id if interest_id is None else interest_id,
            self.battery_mj, self.frames_dropped, self.route,
        )


def report_signature(origin_index: int, timestamp: int, interest_id: int = 0) -> int:
    """Arithmetic signature of (source, reading timestamp, interest id);
    stable across processes, unlike hash() of strings."""
    return ((origin_index << 36) | timestamp) * 256 + (interest_id & 0xFF)


@dataclass(frozen=True, slots=True)
class MacFrame:
    payload_bytes: int
    fragment_index: int
    fragment_total: int
    dest: EntityId | None  # None is broadcast

    def __post_init__(self):
        if not 0 <= self.fragment_index < self.fragment_total:
            raise ValueError("fragment_index out of range")


def fragment(n_bytes: int, max_frame_bytes: int, dest: EntityId | None = None) -> list[MacFrame]:
    """Split a packet into ceil(n/max) frames: full frames plus remainder."""
    if n_bytes <= 0 or max_frame_bytes <= 0:
        raise ValueError("sizes must be positive")
    total = -(-n_bytes // max_frame_bytes)
    frames = []
    left = n_bytes
    for i in range(total):
        size = min(max_frame_bytes, left)
        frames.append(MacFrame(size, i, total, dest))
        left -= size
    return frames


class LinkPacket:
    """One network packet on the wire for one hop."""

    __slots__ = ("kind", "body", "dst", "nbytes", "nframes", "ttl")

    def __init__(self, kind, body, dst, nbytes, nframes, ttl=0):
        self.kind = kind
        self.body = body
        self.dst = dst
        self.nbytes = nbytes
        self.nframes = nframes
        self.ttl = ttl

    @property
    def tag(self):
        return ("data", "interest", "reinforce")[self.kind]


class _Wake:
    __slots__ = ()
    tag = "wake"


class _MacRetry:
    __slots__ = ()
    tag = "mac_retry"


WAKE = _Wake()
MAC_RETRY = _MacRetry()


class BroadcastFan:
    """In-flight broadcast: fans a packet to its receivers on arrival."""

    __slots__ = ("pkt", "receivers")
    tag = "broadcast"

    def __init__(self, pkt, receivers):
        self.pkt = pkt
        self.receivers = receivers


class InterestHop:
    __slots__ = ("interest", "hops_left")
    tag = "interest"

    def __init__(self, interest, hops_left):
        self.interest = interest
        self.hops_left = hops_left


class LaunchInterest:
    """Timer telling a sink to originate an interest."""

    __slots__ = ("interest",)
    tag = "launch_interest"

    def __init__(self, interest):
        self.interest = interest


class ReinforceMsg:
    """Interest re-sent at elevated rate back along a delivery path.

    path is the remaining reverse route (node indices, origin first);
    an empty tuple means this receiver is the origin, None means follow
    the receiver's own first-delivery pointer instead.
    """

    __slots__ = ("interest_id", "data_rate", "path")
    tag = "reinforce"

    def __init__(self, interest_id, data_rate, path=None):
        self.interest_id = interest_id
        self.data_rate = data_rate
        self.path = path


class Channel:
    """Shared medium for one region; busy while any burst is on the air."""

    __slots__ = ("busy_until",)

    def __init__(self):
        self.busy_until = 0

    def is_idle(self, now: int) -> bool:
        return self.busy_until <= now


class RegionCounters:
    __slots__ = (
        "region_id",
        "originated",
        "delivered",
        "rf_losses",
        "queue_losses",
        "sleep_losses",
        "duplicate_relay_drops",
    )

    def __init__(self, region_id: int):
        self.region_id = region_id
        self.originated = 0
        self.delivered = 0
        self.rf_losses = 0
        self.queue_losses = 0
        self.sleep_losses = 0
        self.duplicate_relay_drops = 0

    @property
    def losses(self) -> int:
        return self.rf_losses + self.queue_losses + self.sleep_losses

    def as_dict(self) -> dict:
        return {
            "reports_originated": self.originated,
            "reports_delivered": self.delivered,
            "rf_losses": self.rf_losses,
            "queue_losses": self.queue_losses,
            "sleep_losses": self.sleep_losses,
            "duplicate_relay_drops": self.duplicate_relay_drops,
        }


MODE_SLEEPING = 0
MODE_ACTIVE = 1

ALL_FIELDS = frozenset(SENSOR_FIELDS)


class SensorNode:
    """One mote: sensing, protocol stack, radio and energy ledger."""

    __slots__ = (
        "kernel", "entity_id", "node_index", "region_id", "index_in_region",
        "position", "is_sink", "routing_mode", "channel", "counters",
        "params", "ledger", "battery_mj",
        "link", "mac", "payload_bytes", "data_frames", "link_range_km",
        "mode", "active_since",
        "neighbors", "neighbor_dist",
        "tree_parent", "descendants_expected",
        "_cycle_forwarded", "_own_sent",
        "sampler", "period_s", "stagger_s", "sampling_horizon_s",
        "mac_queue", "_queued_frames", "mac_rng", "link_rng",
        "interest_cache", "gradients", "first_from", "_reinforce_forwarded",
        "_sink_reinforced", "data_cache", "_cache_set", "data_cache_cap",
        "sensor_fields", "collector",
        "frames_sent", "frames_dropped", "reports_originated", "reports_forwarded",
        "_tree_on", "_diff_on", "_flood_on", "_drain_sleep",
        "_e_bit_mj", "_amp_bit_mj", "_sense_mj", "_idle_mj_s",
    )

    def __init__(
        self,
        kernel: Kernel,
        entity_id: EntityId,
        region_id: int,
        index_in_region: int,
        position,
        is_sink: bool,
        routing_mode: RoutingMode,
        channel: Channel,
        counters: RegionCounters,
        energy_params: EnergyParams,
        link: LinkParams,
        mac: MacParams,
        link_range_km: float,
        payload_bytes: int = 64,
        data_cache_cap: int = 64,
        sampler: NodeSampler | None = None,
        period_s: int = 1800,
        stagger_s: int = 0,
        sampling_horizon_s: int = 0,
        sensor_fields: frozenset = ALL_FIELDS,
    ):
        self.kernel = kernel
        self.entity_id = entity_id
        self.node_index = entity_id.index
        self.region_id = region_id
        self.index_in_region = index_in_region
        self.position = position
        self.is_sink = is_sink
        self.routing_mode = routing_mode
        self.channel = channel
        self.counters = counters
        self.params = energy_params
        self.ledger = EnergyLedger()
        self.battery_mj = energy_params.battery_mj
        self.link = link
        self.mac = mac
        self.payload_bytes = payload_bytes
        self.data_frames = len(fragment(payload_bytes, mac.max_frame_bytes))
        self.link_range_km = link_range_km
        # sinks stay active: they are co-located with the powered base station
        self.mode = MODE_ACTIVE
        self.active_since = 0
        self.neighbors = []
        self.neighbor_dist = {}
        self.tree_parent = None
        self.descendants_expected = 0
        self._cycle_forwarded = 0
        self._own_sent = False
        self.sampler = sampler
        self.period_s = period_s
        self.stagger_s = stagger_s
        self.sampling_horizon_s = sampling_horizon_s
        self.mac_queue = deque()
        self._queued_frames = 0
        label = f"node:{entity_id.index}"
        self.mac_rng = kernel.stream(label + ":mac")
        self.link_rng = kernel.stream(label + ":link")
        self.interest_cache = {}
        self.gradients = {}
        self.first_from = {}
        self._reinforce_forwarded = set()
        self._sink_reinforced = set()
        self.data_cache = deque()
        self._cache_set = set()
        self.data_cache_cap = data_cache_cap
        self.sensor_fields = sensor_fields
        self.collector = None
        self.frames_sent = 0
        self.frames_dropped = 0
        self.reports_originated = 0
        self.reports_forwarded = 0
        self._tree_on = routing_mode in (RoutingMode.TREE, RoutingMode.COMBINED)
        self._diff_on = routing_mode in (RoutingMode.DIFFUSION, RoutingMode.COMBINED)
        self._flood_on = routing_mode is RoutingMode.FLOODING
        self._drain_sleep = routing_mode is RoutingMode.TREE and not is_sink
        self._e_bit_mj = energy_params.elec_mj_per_bit
        self._amp_bit_mj = energy_params.amp_mj_per_bit_km2
        self._sense_mj = energy_params.sense_mj
        self._idle_mj_s = energy_params.idle_mj_per_s

    # -- wiring -------------------------------------------------------------

    def wire_neighbors(self, nodes: list["SensorNode"]) -> None:
        """Neighbours are nodes within 2 x radio range (adjacent cells)."""
        for other in nodes:
            if other is self:
                continue
            d = self.position.distance_to(other.position)
            if d <= self.link_range_km + 1e-9:
                self.neighbors.append(other)
                self.neighbor_dist[other.entity_id] = d
        self.neighbors.sort(key=lambda n: n.node_index)

    def set_tree_parent(self, parent: "SensorNode | None", descendants: int = 0) -> None:
        if parent is None:
            if not self.is_sink:
                raise OrphanNode(f"{self.entity_id} has no tree parent")
            self.tree_parent = None
        else:
            self.tree_parent = parent.entity_id
            if parent.entity_id not in self.neighbor_dist:
                self.neighbor_dist[parent.entity_id] = self.position.distance_to(parent.position)
        self.descendants_expected = descendants

    def start(self) -> None:
        """Schedule the first sampling wake; sinks idle until traffic."""
        if not self.is_sink and self.sampler is not None:
            first = self.stagger_s
            if first < self.sampling_horizon_s:
                if self._drain_sleep:
                    self._sleep()
                self.kernel.schedule(first, self.entity_id, WAKE)
        if self._tree_on and not self.is_sink and self.tree_parent is None:
            raise OrphanNode(f"{self.entity_id} has no tree parent")

    # -- event dispatch -------------------------------------------------------

    def handle(self, payload) -> None:
        t = type(payload)
        if t is Message:
            body = payload.body
            tb = type(body)
            if tb is BroadcastFan:
                # in-flight radio waves: delivered regardless of the
                # sender's current power state
                for nb in body.receivers:
                    nb.receive_link(body.pkt, payload.src)
                return
            if tb is LinkPacket:
                self.receive_link(body, payload.src)
                return
            raise StackError(f"unexpected message body {tb}")
        if payload is WAKE:
            self._on_wake()
            return
        if payload is MAC_RETRY:
            if self.mode == MODE_SLEEPING:
                return
            self._mac_attempt()
            self._maybe_sleep()
            return
        if t is LaunchInterest:
            self.launch_interest(payload.interest)
            return
        raise StackError(f"unexpected payload {t}")

    # -- power --------------------------------------------------------------

    def _sleep(self) -> None:
        if self.mode == MODE_ACTIVE:
            self.ledger.idle_mJ += self._idle_mj_s * (self.kernel.now - self.active_since)
        self.mode = MODE_SLEEPING

    def _wake_up(self) -> None:
        if self.mode == MODE_SLEEPING:
            self.mode = MODE_ACTIVE
            self.active_since = self.kernel.now

    def finalize(self, end_time: int) -> None:
        """Charge the trailing idle span at end of run."""
        if self.mode == MODE_ACTIVE:
            self.ledger.idle_mJ += self._idle_mj_s * (end_time - self.active_since)
            self.active_since = end_time

    def _maybe_sleep(self) -> None:
        # drain-aware: own report sent, all descendant reports forwarded,
        # nothing queued
        if (
            self._drain_sleep
            and self.mode == MODE_ACTIVE
            and self._own_sent
            and self._cycle_forwarded >= self.descendants_expected
            and not self.mac_queue
        ):
            self._sleep()

    # -- application --------------------------------------------------------

    def _on_wake(self) -> None:
        now = self.kernel.now
        self._wake_up()
        self._cycle_forwarded = 0
        self._own_sent = False
        if now < self.sampling_horizon_s and self.sampler is not None:
            reading = self.sampler.sample(now)
            self.ledger.sensing_mJ += self._sense_mj
            self.reports_originated += 1
            self.counters.originated += 1
            self._emit_reading(reading)
            nxt = now + self.period_s
            if nxt < self.sampling_horizon_s:
                self.kernel.schedule(nxt, self.entity_id, WAKE)
        self._own_sent = True
        self._maybe_sleep()

    def _emit_reading(self, reading: SensorReading) -> None:
        if self._tree_on:
            msg = self._make_report(reading, interest_id=0, route=(self._parent_index(),))
            self._cache_signature(msg.signature)
            self._enqueue(LinkPacket(KIND_DATA, msg, self.tree_parent, self.payload_bytes, self.data_frames))
        if self._diff_on or self._flood_on:
            self.send_matching_data(reading)

    def _parent_index(self) -> int:
        return self.tree_parent.index if self.tree_parent is not None else -1

    def _make_report(self, reading: SensorReading, interest_id: int, route=()) -> DataMessage:
        return DataMessage(
            signature=report_signature(self.node_index, reading.timestamp, interest_id),
            origin=self.entity_id,
            origin_index=self.node_index,
            region_id=self.region_id,
            reading=reading,
            hop_count=0,
            interest_id=interest_id,
            battery_mj=self.battery_mj - self.ledger.total_mJ,
            frames_dropped=self.frames_dropped,
            route=route,
        )

    def send_matching_data(self, reading: SensorReading) -> int:
        """Emit a report for every live matching interest, exploratory along
        every gradient or only the reinforced one.  Returns the number of
        DataMessage transmissions."""
        now = self.kernel.now
        emitted = 0
        for iid, (interest, expires_at) in list(self.interest_cache.items()):
            if now >= expires_at:
                del self.interest_cache[iid]
                self.gradients.pop(iid, None)
                continue
            if not interest.attributes <= self.sensor_fields:
                continue
            msg = self._make_report(reading, interest_id=iid)
            if self.is_sink and interest.origin == self.entity_id:
                # sink doubling as source: delivered locally at zero hops
                self._cache_signature(msg.signature)
                self.counters.delivered += 1
                if self.collector is not None:
                    self.collector(msg)
                emitted += 1
                continue
            if self._flood_on:
                self._cache_signature(msg.signature)
                self._enqueue(LinkPacket(KIND_DATA, msg, None, self.payload_bytes,
                                         self.data_frames, ttl=interest.hop_limit))
                emitted += 1
                continue
            grads = self._live_gradients(iid, now)
            if not grads:
                continue
            targets = [g for g in grads if g.reinforced] or grads
            self._cache_signature(msg.signature)
            for g in targets:
                out = msg if len(targets) == 1 else msg.fork()
                self._enqueue(LinkPacket(KIND_DATA, out, g.toward, self.payload_bytes, self.data_frames))
            emitted += len(targets)
        return emitted

    # -- link reception -------------------------------------------------------

    def receive_link(self, pkt: LinkPacket, src: EntityId) -> None:
        if self.mode == MODE_SLEEPING:
            if pkt.kind == KIND_DATA:
                self.counters.sleep_losses += 1
            return
        self.ledger.rx_mJ += pkt.nbytes * 8 * self._e_bit_mj
        kind = pkt.kind
        if kind == KIND_DATA:
            self.receive_data(pkt.body, src, pkt.ttl)
        elif kind == KIND_INTEREST:
            hop = pkt.body
            self.receive_interest(hop.interest, hop.hops_left, src)
        else:
            r = pkt.body
            self.receive_reinforcement(r.interest_id, r.data_rate, src, r.path)
        self._maybe_sleep()

    # -- interests / gradients ------------------------------------------------

    def launch_interest(self, interest: Interest) -> None:
        """Sink-side: cache own interest and flood it to the neighbourhood."""
        now = self.kernel.now
        self.interest_cache[interest.interest_id] = (interest, now + interest.duration_s)
        self._enqueue(LinkPacket(KIND_INTEREST, InterestHop(interest, interest.hop_limit),
                                 None, INTEREST_BYTES, len(fragment(INTEREST_BYTES, self.mac.max_frame_bytes))))

    def receive_interest(self, interest: Interest, hops_left: int, src: EntityId) -> None:
        """Hop-by-hop diffusion: cache unseen interests, set up the gradient
        toward the sender, rebroadcast with one hop fewer.  A repeat only
        installs or refreshes the gradient; an exhausted hop count drops."""
        if hops_left <= 0:
            return
        now = self.kernel.now
        iid = interest.interest_id
        expires_at = now + interest.duration_s
        cached = self.interest_cache.get(iid)
        if cached is not None and interest.origin == self.entity_id:
            return  # own interest echoed back to the sink
        self._install_gradient(iid, src, expires_at)
        if cached is None:
            self.interest_cache[iid] = (interest, expires_at)
            self._enqueue(LinkPacket(KIND_INTEREST, InterestHop(interest, hops_left - 1),
                                     None, INTEREST_BYTES,
                                     len(fragment(INTEREST_BYTES, self.mac.max_frame_bytes))))

    def _install_gradient(self, iid: int, toward: EntityId, expires_at: int) -> None:
        entries = self.gradients.setdefault(iid, [])
        for g in entries:
            if g.toward == toward:
                g.expires_at = expires_at
                return
        entries.append(GradientEntry(iid, toward, 1.0, expires_at))

    def _live_gradients(self, iid: int, now: int) -> list[GradientEntry]:
        entries = self.gradients.get(iid)
        if not entries:
            return []
        live = [g for g in entries if g.expires_at > now]
        if len(live) != len(entries):
            self.gradients[iid] = live
        return live

    def receive_reinforcement(self, iid: int, data_rate: float, src: EntityId,
                              path: tuple | None = None) -> None:
        """Mark the gradient toward the reinforcing neighbour (keeping at
        most one reinforced gradient per interest) and pass the
        reinforcement upstream toward the data origin."""
        entries = self.gradients.get(iid)
        if entries is None:
            raise UnknownInterest(f"reinforcement for unknown interest {iid}")
        for g in entries:
            g.reinforced = g.toward == src
            if g.reinforced:
                g.data_rate = data_rate
        if path is not None:
            if path:
                nxt = EntityId(EntityKind.SENSOR_NODE, path[-1])
                self._send_reinforce(iid, data_rate, path[:-1], nxt)
            return  # empty path: this node is the origin, chain complete
        # no recorded path: follow the first-delivery pointer once
        if iid in self._reinforce_forwarded:
            return
        self._reinforce_forwarded.add(iid)
        nxt = self.first_from.get(iid)
        if nxt is not None:
            self._send_reinforce(iid, data_rate, None, nxt)

    def _send_reinforce(self, iid: int, data_rate: float, path: tuple | None, to: EntityId) -> None:
        self._enqueue(LinkPacket(KIND_REINFORCE, ReinforceMsg(iid, data_rate, path), to,
                                 REINFORCE_BYTES, len(fragment(REINFORCE_BYTES, self.mac.max_frame_bytes))))

    # -- data plane -----------------------------------------------------------

    def _cache_signature(self, sig: int) -> bool:
        """FIFO duplicate-suppression cache; True if sig was new."""
        if sig in self._cache_set:
            return False
        if len(self.data_cache) >= self.data_cache_cap:
            self._cache_set.discard(self.data_cache.popleft())
        self.data_cache.append(sig)
        self._cache_set.add(sig)
        return True

    def receive_data(self, msg: DataMessage, src: EntityId, ttl: int = 0) -> None:
        if not self._cache_signature(msg.signature):
            self.counters.duplicate_relay_drops += 1
            return
        if self.is_sink:
            self.counters.delivered += 1
            if self._diff_on and msg.interest_id:
                # new data: reinforce its reverse path once per source, so
                # exploratory fan-out collapses to single paths
                iid = msg.interest_id
                self.first_from.setdefault(iid, src)
                key = (iid, msg.origin_index)
                if key not in self._sink_reinforced and iid in self.interest_cache:
                    self._sink_reinforced.add(key)
                    full_path = (msg.origin_index, *msg.route)
                    self._send_reinforce(iid, REINFORCED_DATA_RATE, full_path[:-1], src)
            if self.collector is not None:
                self.collector(msg)
            return
        if self._flood_on:
            if ttl > 1:
                self.reports_forwarded += 1
                self._enqueue(LinkPacket(KIND_DATA, msg, None, self.payload_bytes,
                                         self.data_frames, ttl=ttl - 1))
            return
        if self._tree_on and not msg.interest_id:
            msg.hop_count += 1
            self.reports_forwarded += 1
            self._cycle_forwarded += 1
            self._enqueue(LinkPacket(KIND_DATA, msg, self.tree_parent, self.payload_bytes, self.data_frames))
            return
        # diffusion relay: forward along live gradients, never back where
        # the data came from
        now = self.kernel.now
        iid = msg.interest_id
        self.first_from.setdefault(iid, src)
        grads = [g for g in self._live_gradients(iid, now) if g.toward != src]
        if not grads:
            return
        targets = [g for g in grads if g.reinforced] or grads
        self.reports_forwarded += 1
        for g in targets:
            out = msg if len(targets) == 1 else msg.fork()
            out.hop_count = msg.hop_count + 1
            out.route = msg.route + (self.node_index,)
            self._enqueue(LinkPacket(KIND_DATA, out, g.toward, self.payload_bytes, self.data_frames))

    def reinforce(self, iid: int) -> None:
        """Sink-side positive reinforcement of the first delivering
        neighbour; intermediates follow their own first-delivery pointers."""
        nxt = self.first_from.get(iid)
        if nxt is None:
            raise UnknownInterest(f"no delivery recorded for interest {iid}")
        self._send_reinforce(iid, REINFORCED_DATA_RATE, None, nxt)

    # -- MAC ------------------------------------------------------------------

    def _enqueue(self, pkt: LinkPacket) -> None:
        if self._queued_frames + pkt.nframes > self.mac.queue_cap_frames:
            self.frames_dropped += pkt.nframes
            if pkt.kind == KIND_DATA:
                self.counters.queue_losses += 1
            return
        self.mac_queue.append(pkt)
        self._queued_frames += pkt.nframes
        if len(self.mac_queue) == 1:
            self._mac_attempt()

    def _mac_attempt(self) -> None:
        queue = self.mac_queue
        if not queue:
            return
        now = self.kernel.now
        channel = self.channel
        if channel.busy_until > now:
            self.kernel.schedule(now + self.mac_rng.randint(1, self.mac.backoff_slots),
                                 self.entity_id, MAC_RETRY)
            return
        pkt = queue.popleft()
        self._queued_frames -= pkt.nframes
        channel.busy_until = now + pkt.nframes
        self.frames_sent += pkt.nframes
        bits = pkt.nbytes * 8
        arrive = now + (pkt.nframes - 1) + self.link.delay_s
        if pkt.dst is not None:
            d = self.neighbor_dist.get(pkt.dst, self.link_range_km)
            self.ledger.tx_mJ += bits * (self._e_bit_mj + self._amp_bit_mj * d * d)
            if self.link.loss_prob and self.link_rng.random() < self.link.loss_prob:
                if pkt.kind == KIND_DATA:
                    self.counters.rf_losses += 1
            else:
                self.kernel.send_delayed(self.entity_id, pkt.dst, pkt, arrive - now)
        else:
            d = self.link_range_km
            self.ledger.tx_mJ += bits * (self._e_bit_mj + self._amp_bit_mj * d * d)
            if self.link.loss_prob:
                rnd = self.link_rng.random
                lp = self.link.loss_prob
                receivers = tuple(nb for nb in self.neighbors if rnd() >= lp)
            else:
                receivers = self.neighbors
            if receivers:
                self.kernel.send_delayed(self.entity_id, self.entity_id,
                                         BroadcastFan(pkt, receivers), arrive - now)
        if queue:
            self.kernel.schedule(channel.busy_until, self.entity_id, MAC_RETRY)

    # -- reporting -------------------------------------------------------------

    def summary_row(self) -> dict:
        return {
            "node_id": self.node_index,
            "region": self.region_id,
            "tx_mJ": self.ledger.tx_mJ,
            "rx_mJ": self.ledger.rx_mJ,
            "idle_mJ": self.ledger.idle_mJ,
            "sensing_mJ": self.ledger.sensing_mJ,
            "frames_sent": self.frames_sent,
            "frames_dropped": self.frames_dropped,
            "reports_originated": self.reports_originated,
            "reports_forwarded": self.reports_forwarded,
        }


# -- transport ----------------------------------------------------------------


class TransportMode(Enum):
    UNRELIABLE = "unreliable"
    RELIABLE = "reliable"


class DeliveryAbandoned(StackError):
    """Reliable delivery gave up after max retries."""


class _TxData:
    __slots__ = ("link", "seqno", "payload", "attempt")
    tag = "tx_data"

    def __init__(self, link, seqno, payload, attempt):
        self.link = link
        self.seqno = seqno
        self.payload = payload
        self.attempt = attempt


class _TxAck:
    __slots__ = ("link", "seqno")
    tag = "tx_ack"

    def __init__(self, link, seqno):
        self.link = link
        self.seqno = seqno


class _TxTimeout:
    __slots__ = ("link", "seqno")
    tag = "tx_timeout"

    def __init__(self, link, seqno):
        self.link = link
        self.seqno = seqno


def transport_dispatch(body, src: EntityId) -> bool:
    """Route transport bookkeeping payloads back to their link; entities
    call this from handle() for message bodies they do not own."""
    t = type(body)
    if t is _TxData:
        body.link._on_data(body)
        return True
    if t is _TxAck:
        body.link._on_ack(body)
        return True
    if t is _TxTimeout:
        body.link._on_timeout(body)
        return True
    return False


class TransportLink:
    """Point-to-point transport between two registered entities.

    Unreliable: one attempt, lost with the configured probability.
    Reliable: retransmit on timeout until acknowledged, up to max_retries,
    then the payload is recorded abandoned.  With zero loss and zero
    latency the reliable path short-circuits to a direct call.
    """

    def __init__(self, kernel: Kernel, src: EntityId, dst: EntityId, deliver,
                 rng: RngStream, loss_prob: float = 0.0, latency_s: int = 0,
                 max_retries: int = 20, ack_timeout_s: int = 2, on_acked=None):
        self.kernel = kernel
        self.src = src
        self.dst = dst
        self.deliver = deliver  # called with (payload, src) at the destination
        self.rng = rng
        self.loss_prob = loss_prob
        self.latency_s = latency_s
        self.max_retries = max_retries
        self.ack_timeout_s = max(1, ack_timeout_s)
        self.on_acked = on_acked
        self.transmissions = 0
        self.delivered = 0
        self.lost = 0
        self.abandoned = 0
        self._next_seq = 0
        self._pending: dict[int, tuple] = {}

    def send(self, payload, mode: TransportMode = TransportMode.RELIABLE) -> None:
        if mode is TransportMode.UNRELIABLE:
            self.transmissions += 1
            if self.loss_prob and self.rng.random() < self.loss_prob:
                self.lost += 1
                return
            self.kernel.send_delayed(self.src, self.dst, _TxData(self, -1, payload, 0), self.latency_s)
            return
        if self.loss_prob == 0.0 and self.latency_s == 0:
            self.transmissions += 1
            self.delivered += 1
            self.deliver(payload, self.src)
            if self.on_acked is not None:
                self.on_acked(payload)
            return
        seqno = self._next_seq
        self._next_seq += 1
        self._pending[seqno] = (payload, 0)
        self._transmit(seqno)

    def _transmit(self, seqno: int) -> None:
        payload, attempt = self._pending[seqno]
        self.transmissions += 1
        if not (self.loss_prob and self.rng.random() < self.loss_prob):
            self.kernel.send_delayed(self.src, self.dst, _TxData(self, seqno, payload, attempt), self.latency_s)
        else:
            self.lost += 1
        self.kernel.send_delayed(self.src, self.src, _TxTimeout(self, seqno),
                                 self.latency_s * 2 + self.ack_timeout_s)

    def _on_data(self, ev: _TxData) -> None:
        self.deliver(ev.payload, self.src)
        if ev.seqno >= 0:
            self.kernel.send_delayed(self.dst, self.src, _TxAck(self, ev.seqno), self.latency_s)

    def _on_ack(self, ev: _TxAck) -> None:
        item = self._pending.pop(ev.seqno, None)
        if item is None:
            return  # duplicate ack after a retransmit
        self.delivered += 1
        if self.on_acked is not None:
            self.on_acked(item[0])

    def _on_timeout(self, ev: _TxTimeout) -> None:
        item = self._pending.get(ev.seqno)
        if item is None:
            return  # already acked
        payload, attempt = item
        if attempt + 1 > self.max_retries:
            del self._pending[ev.seqno]
            self.abandoned += 1
            return
        self._pending[ev.seqno] = (payload, attempt + 1)
        self._transmit(ev.seqno)
