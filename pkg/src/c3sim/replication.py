"""Replicated objects with anti-entropy repair.

Every stored object carries a version vector and a last-writer stamp of
(wall tick, writer id). Merge joins the version vectors pointwise and keeps
the value with the largest stamp, which makes merge a join: commutative,
associative, idempotent. Any sequence of exchanges that touches every
replica therefore converges to the same state regardless of order.

A write applies at the nearest replica and is broadcast to the rest of the
set; gossip rounds and re-replication mop up whatever the broadcast missed
(offline hosts, replaced hosts). Objects flagged encrypted are readable by
their owner only; foreign reads are refused and counted, never served.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

from .engine import RngStream, SimTime
from .overlay import NodeId

logger = logging.getLogger(__name__)


class ReplicationError(Exception):
    pass


class UnknownKey(ReplicationError):
    pass


class NoReplica(ReplicationError):
    pass


class AccessDenied(ReplicationError):
    pass


@dataclass(frozen=True, slots=True)
class ReplicatedObject:
    key: str
    value: object
    owner: NodeId
    encrypted: bool
    vv: dict[NodeId, int]
    wall: tuple[SimTime, NodeId]

    def stamp(self) -> tuple:
        return (self.wall[0], self.wall[1], repr(self.value))

    def same_state(self, other: "ReplicatedObject") -> bool:
        return (self.value == other.value and self.vv == other.vv
                and self.wall == other.wall)


def merge(a: ReplicatedObject, b: ReplicatedObject) -> ReplicatedObject:
    """Join of two replica states; total, deterministic, order-free.

    The version vector joins pointwise and the value follows the largest
    write stamp. A state that has absorbed a writer's later put always
    carries a later stamp, so the newer-history side wins; keying the
    winner on the stamp alone (rather than vv dominance) is what makes
    the merge associative and therefore independent of gossip order.
    """
    if a.same_state(b):
        return a
    winner = a if a.stamp() >= b.stamp() else b
    joined = dict(a.vv)
    for k, v in b.vv.items():
        if v > joined.get(k, 0):
            joined[k] = v
    return ReplicatedObject(winner.key, winner.value, winner.owner,
                            winner.encrypted, joined, winner.wall)


@dataclass(frozen=True, slots=True)
class Delivery:
    host: NodeId
    obj: ReplicatedObject


class ReplicaStore:
    def __init__(self, target_r: int = 3, log=None):
        self.target_r = target_r
        self.hosts: dict[str, list[NodeId]] = {}
        self.states: dict[str, dict[NodeId, ReplicatedObject]] = {}
        self.dirty: set[str] = set()
        self.privacy_violations = 0
        self.log = log or (lambda at, key, action, node: None)

    def ensure(self, key: str, hosts: list[NodeId]) -> None:
        if key in self.hosts:
            return
        if not hosts:
            raise NoReplica(key)
        self.hosts[key] = sorted(hosts)
        self.states[key] = {}

    def replica_hosts(self, key: str) -> list[NodeId]:
        try:
            return self.hosts[key]
        except KeyError:
            raise UnknownKey(key) from None

    def put(self, key: str, value: object, writer: NodeId, at: SimTime,
            apply_at: NodeId, encrypted: bool = False) -> list[Delivery]:
        """Apply at one replica, return the broadcasts the caller delivers."""
        hosts = self.replica_hosts(key)
        if apply_at not in hosts:
            raise NoReplica(f"{key} not replicated on {apply_at!r}")
        base = self.states[key].get(apply_at)
        vv = dict(base.vv) if base else {}
        vv[writer] = vv.get(writer, 0) + 1
        owner = base.owner if base else writer
        enc = base.encrypted if base else encrypted
        obj = ReplicatedObject(key, value, owner, enc, vv, (at, writer))
        self._absorb(key, apply_at, obj, at)
        self.log(at, key, "put", apply_at.short)
        return [Delivery(h, obj) for h in hosts if h != apply_at]

    def deliver(self, key: str, host: NodeId, obj: ReplicatedObject,
                at: SimTime) -> None:
        if host in self.replica_hosts(key):
            self._absorb(key, host, obj, at)

    def get(self, key: str, host: NodeId, reader: NodeId) -> object:
        state = self.states.get(key, {}).get(host)
        if state is None:
            raise NoReplica(f"{key} has no state on {host!r}")
        if state.encrypted and reader != state.owner:
            self.privacy_violations += 1
            raise AccessDenied(f"{key} is private to its owner")
        return state.value

    def any_state(self, key: str, hosts: list[NodeId]) -> ReplicatedObject | None:
        for host in hosts:
            state = self.states.get(key, {}).get(host)
            if state is not None:
                return state
        return None

    def _absorb(self, key: str, host: NodeId, obj: ReplicatedObject,
                at: SimTime) -> None:
        current = self.states[key].get(host)
        self.states[key][host] = merge(current, obj) if current else obj
        self._track(key, at)

    def _track(self, key: str, at: SimTime) -> None:
        if not self.states[key]:
            self.dirty.discard(key)
            return
        if self.converged(key):
            if key in self.dirty:
                self.dirty.discard(key)
                self.log(at, key, "converged", "")
        else:
            self.dirty.add(key)

    def converged(self, key: str) -> bool:
        hosts = self.hosts[key]
        states = self.states[key]
        if len(states) < len(hosts):
            return False
        first = states[hosts[0]]
        return all(states[h].same_state(first) for h in hosts[1:])

    # -- maintenance -----------------------------------------------------------

    def gossip_round(self, at: SimTime, rng: RngStream, online) -> int:
        """Each online replica of each unsettled key syncs with one peer."""
        exchanges = 0
        for key in sorted(self.dirty):
            hosts = [h for h in self.hosts[key] if online(h)]
            if len(hosts) < 2:
                continue
            for host in hosts:
                peers = [h for h in hosts if h != host]
                partner = rng.choice(peers)
                a = self.states[key].get(host)
                b = self.states[key].get(partner)
                if a is None and b is None:
                    continue
                joined = merge(a, b) if (a and b) else (a or b)
                self.states[key][host] = joined
                self.states[key][partner] = joined
                exchanges += 1
            self._track(key, at)
        return exchanges

    def rereplicate(self, at: SimTime, online, pick_host) -> int:
        """Replace offline replica hosts, copying the best surviving state.

        pick_host(key, exclude) -> NodeId | None chooses the replacement
        (wired to a repository query by the caller).
        """
        replaced = 0
        for key in sorted(self.hosts):
            hosts = self.hosts[key]
            alive = [h for h in hosts if online(h)]
            if not alive or len(alive) == len(hosts):
                continue
            source = self.any_state(key, alive)
            for dead in [h for h in hosts if not online(h)]:
                new_host = pick_host(key, exclude=set(hosts))
                if new_host is None:
                    continue
                hosts.remove(dead)
                self.states[key].pop(dead, None)
                hosts.append(new_host)
                hosts.sort()
                if source is not None:
                    self._absorb(key, new_host, source, at)
                self.log(at, key, "rereplicate", new_host.short)
                replaced += 1
            self._track(key, at)
        return replaced
