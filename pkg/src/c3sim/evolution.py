"""Version forests and trust-weighted update diffusion.

Every service has a forest of versions with exogenous fitness. Nodes follow
a static directed trust graph; at each adoption tick (aligned with gossip
rounds) a node switches to a version when enough of its trusted neighbors
run it (threshold theta) and it beats the node's current version on fitness.
All decisions in a tick read the tick-start snapshot, so a wave spreads one
trust hop per tick. Every switch pushes the old version on a per-node
history stack; rollback pops it, exactly undoing adoptions step for step.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

from .engine import SimTime
from .overlay import NodeId

logger = logging.getLogger(__name__)


class EvolutionError(Exception):
    pass


class UnknownParent(EvolutionError):
    pass


class UnknownVersion(EvolutionError):
    pass


class HistoryUnderflow(EvolutionError):
    pass


@dataclass(frozen=True, slots=True)
class VersionNode:
    service_id: str
    version: str
    parent: str | None
    fitness: float
    released_at: SimTime


@dataclass(frozen=True, slots=True)
class Adoption:
    at: SimTime
    node: NodeId
    service_id: str
    from_version: str
    to_version: str
    cause: str


class UpdateDiffusion:
    def __init__(self, trust: dict[NodeId, tuple[NodeId, ...]],
                 theta: float = 0.5):
        if not 0.0 < theta <= 1.0:
            raise ValueError("theta must be in (0, 1]")
        self.trust = trust
        self.theta = theta
        self.versions: dict[str, dict[str, VersionNode]] = {}
        self.active: dict[tuple[NodeId, str], str] = {}
        self.history: dict[tuple[NodeId, str], list[str]] = {}

    # -- version forest ---------------------------------------------------------

    def register_root(self, service_id: str, version: str, fitness: float,
                      at: SimTime) -> VersionNode:
        node = VersionNode(service_id, version, None, fitness, at)
        self.versions.setdefault(service_id, {})[version] = node
        for peer in self.trust:
            self.active[(peer, service_id)] = version
            self.history[(peer, service_id)] = []
        return node

    def fitness(self, service_id: str, version: str) -> float:
        try:
            return self.versions[service_id][version].fitness
        except KeyError:
            raise UnknownVersion(f"{service_id}@{version}") from None

    def active_version(self, node: NodeId, service_id: str) -> str:
        return self.active[(node, service_id)]

    def release(self, service_id: str, version: str, parent: str,
                fitness: float, origins: list[NodeId],
                at: SimTime) -> list[Adoption]:
        forest = self.versions.setdefault(service_id, {})
        if parent not in forest:
            raise UnknownParent(f"{service_id}@{parent}")
        if version in forest:
            raise EvolutionError(f"{service_id}@{version} already released")
        forest[version] = VersionNode(service_id, version, parent, fitness, at)
        out = []
        for origin in origins:
            out.append(self._switch(origin, service_id, version, at, "release"))
        return out

    def _switch(self, node: NodeId, service_id: str, version: str,
                at: SimTime, cause: str) -> Adoption:
        key = (node, service_id)
        frm = self.active[key]
        self.history[key].append(frm)
        self.active[key] = version
        return Adoption(at, node, service_id, frm, version, cause)

    # -- diffusion ----------------------------------------------------------------

    def adoption_tick(self, at: SimTime, is_online=None) -> list[Adoption]:
        """One synchronous wave over the tick-start snapshot."""
        snapshot = dict(self.active)
        out = []
        for node in sorted(self.trust):
            if is_online is not None and not is_online(node):
                continue
            neighbors = self.trust[node]
            if not neighbors:
                continue
            for service_id in sorted(self.versions):
                current = snapshot.get((node, service_id))
                if current is None:
                    continue
                choice = self._pick(node, service_id, current, neighbors, snapshot)
                if choice is not None:
                    out.append(self._switch(node, service_id, choice, at, "adopt"))
        return out

    def _pick(self, node: NodeId, service_id: str, current: str,
              neighbors: tuple[NodeId, ...], snapshot) -> str | None:
        tally: dict[str, int] = {}
        for peer in neighbors:
            v = snapshot.get((peer, service_id))
            if v is not None and v != current:
                tally[v] = tally.get(v, 0) + 1
        current_fit = self.fitness(service_id, current)
        best = None
        for version in sorted(tally):
            if tally[version] / len(neighbors) < self.theta:
                continue
            fit = self.fitness(service_id, version)
            if fit <= current_fit:
                continue
            if best is None or (fit, version) > best:
                best = (fit, version)
        return best[1] if best else None

    # -- rollback -------------------------------------------------------------------

    def rollback(self, node: NodeId, service_id: str, steps: int,
                 at: SimTime) -> list[Adoption]:
        """Step back through the node's own adoption history."""
        key = (node, service_id)
        stack = self.history.get(key, [])
        if steps < 1 or len(stack) < steps:
            raise HistoryUnderflow(f"{len(stack)} < {steps}")
        out = []
        for _ in range(steps):
            frm = self.active[key]
            self.active[key] = stack.pop()
            out.append(Adoption(at, node, service_id, frm, self.active[key],
                                "rollback"))
        return out

    # -- audits -----------------------------------------------------------------------

    def adoption_fraction(self, service_id: str, version: str) -> float:
        holders = [k for k in self.active if k[1] == service_id]
        if not holders:
            return 0.0
        on_v = sum(1 for k in holders if self.active[k] == version)
        return on_v / len(holders)
