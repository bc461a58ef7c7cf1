"""Peer-to-peer substrate: identities, regional topology, routing, super-peers.

Node identity is self-issued: a keypair is generated from the overlay's
random stream and the node id is the SHA-256 fingerprint of the public half,
so ids are 256-bit values no registry hands out. Positions are likewise
self-describing: a node's position fingerprint hashes its sorted neighbor
ids and changes exactly when its neighborhood does.

Each region keeps a random regular graph of configurable degree among its
online members plus a configurable number of links to every other region.
Departures tear edges down; a maintenance pass (run at gossip rounds)
restores minimum degree and inter-region connectivity, and re-forms any
super-peer whose membership decayed.
"""
from __future__ import annotations

import hashlib
import heapq
import logging
from dataclasses import dataclass, field, replace

import networkx as nx

from .engine import RngStream, SimTime
from .resources import ResourceVector

logger = logging.getLogger(__name__)

ID_BITS = 256


class OverlayError(Exception):
    pass


class DuplicateJoin(OverlayError):
    pass


class UnknownNode(OverlayError):
    pass


class Unreachable(OverlayError):
    pass


class EmptyRegion(OverlayError):
    pass


class NoQuorum(OverlayError):
    pass


@dataclass(frozen=True, order=True, slots=True)
class NodeId:
    value: int

    def __post_init__(self):
        if not (0 <= self.value < 1 << ID_BITS):
            raise ValueError("node id out of range")

    @property
    def short(self) -> str:
        return f"{self.value:064x}"[:16]

    def __repr__(self) -> str:
        return f"NodeId({self.short})"


@dataclass(frozen=True, slots=True)
class Identity:
    private_key: bytes
    public_key: bytes
    node_id: NodeId


def generate_identity(rng: RngStream) -> Identity:
    """Self-issued identity: key material from the stream, id = H(public)."""
    private = rng.getrandbits(ID_BITS).to_bytes(32, "big")
    public = hashlib.sha256(b"pub:" + private).digest()
    node_id = NodeId(int.from_bytes(hashlib.sha256(public).digest(), "big"))
    return Identity(private, public, node_id)


@dataclass(slots=True)
class NodeRecord:
    node_id: NodeId
    region: str
    capacity: ResourceVector
    node_class: str = "default"
    cost_factor: float = 1.0
    mean_online: int = 0
    mean_offline: int = 0
    online: bool = False
    online_since: SimTime = 0
    fingerprint: int | None = None


@dataclass(frozen=True, slots=True)
class VirtualSuperPeer:
    region: str
    members: tuple[NodeId, ...]
    epoch: int
    formed_at: SimTime

    @property
    def quorum(self) -> int:
        return len(self.members) // 2 + 1


@dataclass(frozen=True, slots=True)
class TransactionResult:
    committed: bool
    reason: str | None = None


@dataclass(frozen=True, slots=True)
class OverlayConfig:
    degree: int = 6
    min_degree: int = 3
    inter_region_links: int = 3
    intra_latency: int = 5
    inter_latency: int = 50
    m_target: int = 5


class Overlay:
    def __init__(self, config: OverlayConfig, rng: RngStream):
        self.config = config
        self.rng = rng
        self.records: dict[NodeId, NodeRecord] = {}
        self.regions: dict[str, list[NodeId]] = {}
        self.adj: dict[NodeId, dict[NodeId, int]] = {}
        self.dvsps: dict[str, VirtualSuperPeer] = {}
        self._epochs: dict[str, int] = {}
        self._reform: set[str] = set()
        self._dist_cache: dict[NodeId, dict[NodeId, tuple[int, int]]] = {}
        self._dirty_fp: set[NodeId] = set()

    # -- membership ---------------------------------------------------------

    def add_record(self, record: NodeRecord) -> None:
        if record.node_id in self.records:
            raise DuplicateJoin(f"{record.node_id!r} already registered")
        self.records[record.node_id] = record
        self.regions.setdefault(record.region, []).append(record.node_id)
        self.regions[record.region].sort()
        self.adj[record.node_id] = {}

    def is_online(self, node_id: NodeId) -> bool:
        rec = self.records.get(node_id)
        return rec is not None and rec.online

    def online_in_region(self, region: str) -> list[NodeId]:
        return [n for n in self.regions.get(region, ()) if self.records[n].online]

    def online_nodes(self) -> list[NodeId]:
        return [n for n, r in self.records.items() if r.online]

    def join(self, node_id: NodeId, now: SimTime) -> None:
        rec = self.records.get(node_id)
        if rec is None:
            raise UnknownNode(repr(node_id))
        if rec.online:
            raise DuplicateJoin(repr(node_id))
        rec.online = True
        rec.online_since = now
        peers = [n for n in self.online_in_region(rec.region) if n != node_id]
        take = min(self.config.degree, len(peers))
        for peer in self.rng.sample(peers, take) if take else ():
            self._add_edge(node_id, peer, self.config.intra_latency)
        self._invalidate_routes()

    def leave(self, node_id: NodeId, now: SimTime) -> None:
        rec = self.records.get(node_id)
        if rec is None or not rec.online:
            raise UnknownNode(repr(node_id))
        rec.online = False
        for peer in list(self.adj[node_id]):
            self._drop_edge(node_id, peer)
        vsp = self.dvsps.get(rec.region)
        if vsp and node_id in vsp.members:
            self._reform.add(rec.region)
        self._invalidate_routes()

    # -- topology -----------------------------------------------------------

    def build(self, now: SimTime) -> None:
        """Wire the initial graph among currently-online nodes."""
        for region in sorted(self.regions):
            self._build_region(region)
        self._repair_inter_links()
        self._invalidate_routes()

    def _build_region(self, region: str) -> None:
        nodes = self.online_in_region(region)
        n, d = len(nodes), self.config.degree
        if n <= 1:
            return
        if n <= d + 1:
            for i, a in enumerate(nodes):
                for b in nodes[i + 1:]:
                    self._add_edge(a, b, self.config.intra_latency)
            return
        odd_one = None
        if (n * d) % 2:
            odd_one = nodes[-1]
            nodes = nodes[:-1]
        graph = self._regular_graph(d, len(nodes))
        for i, j in sorted(graph.edges()):
            self._add_edge(nodes[i], nodes[j], self.config.intra_latency)
        if odd_one is not None:
            for peer in self.rng.sample(nodes, d):
                self._add_edge(odd_one, peer, self.config.intra_latency)

    def _regular_graph(self, d: int, n: int) -> nx.Graph:
        for attempt in range(64):
            g = nx.random_regular_graph(d, n, seed=self.rng.randrange(1 << 32))
            if nx.is_connected(g):
                return g
        raise OverlayError(f"no connected {d}-regular graph on {n} nodes")

    def _add_edge(self, a: NodeId, b: NodeId, latency: int) -> None:
        if a == b:
            return
        self.adj[a][b] = latency
        self.adj[b][a] = latency
        self._dirty_fp.update((a, b))

    def _drop_edge(self, a: NodeId, b: NodeId) -> None:
        self.adj[a].pop(b, None)
        self.adj[b].pop(a, None)
        self._dirty_fp.update((a, b))

    def add_link(self, a: NodeId, b: NodeId, latency: int) -> None:
        """Direct link, used for vendor stars and scripted topologies."""
        self._add_edge(a, b, latency)
        self._invalidate_routes()

    def _repair_degrees(self) -> None:
        for node_id in sorted(self.online_nodes()):
            rec = self.records[node_id]
            have = len(self.adj[node_id])
            if have >= self.config.min_degree:
                continue
            pool = [
                n for n in self.online_in_region(rec.region)
                if n != node_id and n not in self.adj[node_id]
            ]
            want = min(self.config.degree - have, len(pool))
            for peer in self.rng.sample(pool, want) if want > 0 else ():
                self._add_edge(node_id, peer, self.config.intra_latency)

    def _repair_inter_links(self) -> None:
        regions = sorted(self.regions)
        for i, ra in enumerate(regions):
            for rb in regions[i + 1:]:
                a_online = self.online_in_region(ra)
                b_online = self.online_in_region(rb)
                if not a_online or not b_online:
                    continue
                live = sum(
                    1 for a in a_online for b in self.adj[a]
                    if self.records[b].region == rb
                )
                for _ in range(self.config.inter_region_links - live):
                    a = self.rng.choice(a_online)
                    b = self.rng.choice(b_online)
                    if b not in self.adj[a]:
                        self._add_edge(a, b, self.config.inter_latency)

    # -- position fingerprints ---------------------------------------------

    def fingerprint(self, node_id: NodeId) -> int:
        """Hash of the sorted neighbor set; recomputed when edges moved."""
        rec = self.records[node_id]
        if rec.fingerprint is None or node_id in self._dirty_fp:
            h = hashlib.sha256()
            for peer in sorted(self.adj[node_id]):
                h.update(peer.value.to_bytes(32, "big"))
            rec.fingerprint = int.from_bytes(h.digest(), "big")
            self._dirty_fp.discard(node_id)
        return rec.fingerprint

    # -- routing ------------------------------------------------------------

    def _invalidate_routes(self) -> None:
        self._dist_cache.clear()

    def _link_bandwidth(self, a: NodeId, b: NodeId) -> int:
        return max(1, min(self.records[a].capacity.bandwidth,
                          self.records[b].capacity.bandwidth))

    def _distances(self, src: NodeId) -> dict[NodeId, tuple[int, int]]:
        cached = self._dist_cache.get(src)
        if cached is not None:
            return cached
        dist: dict[NodeId, tuple[int, int]] = {src: (0, 1 << 62)}
        heap: list[tuple[int, NodeId]] = [(0, src)]
        settled: set[NodeId] = set()
        while heap:
            d, node = heapq.heappop(heap)
            if node in settled:
                continue
            settled.add(node)
            bw_here = dist[node][1]
            for peer, latency in self.adj[node].items():
                if not self.records[peer].online:
                    continue
                nd = d + latency
                known = dist.get(peer)
                if known is None or nd < known[0]:
                    dist[peer] = (nd, min(bw_here, self._link_bandwidth(node, peer)))
                    heapq.heappush(heap, (nd, peer))
        self._dist_cache[src] = dist
        return dist

    def route(self, frm: NodeId, to: NodeId, size: int = 0) -> int:
        """Latency of the cheapest path plus the transfer term for size."""
        if not self.is_online(frm) or not self.is_online(to):
            raise Unreachable(f"{frm!r} -> {to!r}")
        if frm == to:
            return 0
        entry = self._distances(frm).get(to)
        if entry is None:
            raise Unreachable(f"{frm!r} -> {to!r}")
        latency, bottleneck = entry
        if size > 0:
            latency += -(-size // bottleneck)
        return latency

    def reachable(self, frm: NodeId, to: NodeId) -> bool:
        if not self.is_online(frm) or not self.is_online(to):
            return False
        return frm == to or to in self._distances(frm)

    # -- super-peers ---------------------------------------------------------

    def form_dvsp(self, region: str, now: SimTime) -> VirtualSuperPeer:
        online = self.online_in_region(region)
        if not online:
            raise EmptyRegion(region)
        ranked = sorted(online, key=lambda n: (self.records[n].online_since, n))
        members = tuple(ranked[: self.config.m_target])
        epoch = self._epochs.get(region, 0) + 1
        self._epochs[region] = epoch
        vsp = VirtualSuperPeer(region, members, epoch, now)
        self.dvsps[region] = vsp
        self._reform.discard(region)
        return vsp

    def dvsp(self, region: str) -> VirtualSuperPeer | None:
        return self.dvsps.get(region)

    def dvsp_has_quorum(self, region: str) -> bool:
        vsp = self.dvsps.get(region)
        if vsp is None:
            return False
        alive = sum(1 for m in vsp.members if self.is_online(m))
        return alive >= vsp.quorum

    def maintenance(self, now: SimTime) -> list[VirtualSuperPeer]:
        """Gossip-round upkeep: degree repair, inter links, super-peer reform."""
        self._repair_degrees()
        self._repair_inter_links()
        self._invalidate_routes()
        reformed = []
        for region in sorted(self.regions):
            vsp = self.dvsps.get(region)
            online = self.online_in_region(region)
            if vsp is None and not online:
                continue
            want = min(self.config.m_target, len(online))
            stale = (
                region in self._reform
                or vsp is None
                or any(not self.is_online(m) for m in vsp.members)
                or len(vsp.members) < want
            )
            if stale and online:
                reformed.append(self.form_dvsp(region, now))
        return reformed

    # -- coordinated transactions --------------------------------------------

    def execute_transaction(self, region: str, ops, ledger, now: SimTime) -> TransactionResult:
        """Atomic batch of ledger operations under the region's super-peer.

        Prepare requires a quorum of super-peer members online and every
        participant (each NodeId appearing in an op) online; commit applies
        the whole batch or nothing.
        """
        vsp = self.dvsps.get(region)
        if vsp is None or not self.dvsp_has_quorum(region):
            raise NoQuorum(region)
        for op in ops:
            for party in (op.src, op.dst):
                if isinstance(party, NodeId) and not self.is_online(party):
                    return TransactionResult(False, f"participant-offline:{party.short}")
        try:
            ledger.apply_batch(ops, at=now)
        except Exception as exc:  # precondition failures abort, never partially apply
            return TransactionResult(False, f"{type(exc).__name__}")
        return TransactionResult(True)
