"""Registry of contributed capacity and score-weighted node selection.

Records age out: a record whose last heartbeat is older than the staleness
horizon (three heartbeat intervals by default) is invisible to queries, so a
silent node stops being offered work without any explicit deregistration.
Availability and task success are exponentially smoothed per heartbeat
interval. Selection is randomized but proportional: candidates are drawn
without replacement with probability proportional to a weighted score over
smoothed performance, smoothed availability, projected cost and region match.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .engine import RngStream, SimTime
from .overlay import NodeId
from .resources import ResourceVector

logger = logging.getLogger(__name__)

DEFAULT_WEIGHTS = (0.4, 0.3, 0.2, 0.1)


class RepoError(Exception):
    pass


class UnknownNode(RepoError):
    pass


@dataclass(slots=True)
class NodeResourceRecord:
    node_id: NodeId
    region: str
    free_capacity: ResourceVector
    cost_factor: float = 1.0
    projected_cost: float = 0.0
    availability: float | None = None
    perf_history: float = 1.0
    last_heartbeat: SimTime | None = None


@dataclass(frozen=True, slots=True)
class ResourceQuery:
    required: ResourceVector
    count: int = 1
    preferred_region: str | None = None
    weights: tuple[float, float, float, float] = DEFAULT_WEIGHTS


@dataclass(frozen=True, slots=True)
class QueryResult:
    nodes: tuple[NodeId, ...]
    insufficient: bool


class Repository:
    def __init__(self, beta: float = 0.1, heartbeat_interval: int = 500,
                 staleness_intervals: int = 3, region_gate=None):
        if not 0.0 < beta <= 1.0:
            raise ValueError("beta must be in (0, 1]")
        self.beta = beta
        self.heartbeat_interval = heartbeat_interval
        self.staleness = staleness_intervals * heartbeat_interval
        self.region_gate = region_gate or (lambda region: True)
        self.records: dict[NodeId, NodeResourceRecord] = {}

    def register(self, record: NodeResourceRecord) -> None:
        if record.node_id in self.records:
            raise RepoError(f"already registered: {record.node_id!r}")
        self.records[record.node_id] = record

    def heartbeat(self, node_id: NodeId, free_capacity: ResourceVector,
                  at: SimTime, projected_cost: float | None = None) -> None:
        rec = self._record(node_id)
        rec.free_capacity = free_capacity
        rec.last_heartbeat = at
        if projected_cost is not None:
            rec.projected_cost = projected_cost
        if rec.availability is None:
            rec.availability = 1.0
        else:
            rec.availability = (1 - self.beta) * rec.availability + self.beta

    def miss(self, node_id: NodeId) -> None:
        """A heartbeat interval passed with no heartbeat from the node."""
        rec = self._record(node_id)
        if rec.availability is not None:
            rec.availability = (1 - self.beta) * rec.availability

    def sweep(self, at: SimTime, online, free_capacity_of, unit_cost_of) -> None:
        """Batch heartbeat pass: online records beat, the rest decay."""
        for node_id in self.records:
            if online(node_id):
                self.heartbeat(node_id, free_capacity_of(node_id), at,
                               projected_cost=unit_cost_of(node_id))
            else:
                self.miss(node_id)

    def record_task(self, node_id: NodeId, completed: bool) -> None:
        rec = self._record(node_id)
        rec.perf_history = ((1 - self.beta) * rec.perf_history
                            + self.beta * (1.0 if completed else 0.0))

    def _record(self, node_id: NodeId) -> NodeResourceRecord:
        try:
            return self.records[node_id]
        except KeyError:
            raise UnknownNode(repr(node_id)) from None

    # -- selection -------------------------------------------------------------

    def eligible(self, query: ResourceQuery, at: SimTime) -> list[NodeResourceRecord]:
        out = []
        for node_id in sorted(self.records):
            rec = self.records[node_id]
            if rec.last_heartbeat is None or at - rec.last_heartbeat > self.staleness:
                continue
            if rec.availability is None:
                continue
            if not rec.free_capacity.covers(query.required):
                continue
            if not self.region_gate(rec.region):
                continue
            out.append(rec)
        return out

    def scores(self, candidates: list[NodeResourceRecord],
               query: ResourceQuery) -> list[float]:
        w_perf, w_avail, w_cost, w_geo = query.weights
        max_cost = max((r.projected_cost for r in candidates), default=0.0)
        out = []
        for rec in candidates:
            norm_cost = rec.projected_cost / max_cost if max_cost > 0 else 0.0
            geo = 1.0 if rec.region == query.preferred_region else 0.0
            out.append(w_perf * rec.perf_history
                       + w_avail * (rec.availability or 0.0)
                       + w_cost * (1.0 - norm_cost)
                       + w_geo * geo)
        return out

    def query(self, query: ResourceQuery, rng: RngStream,
              at: SimTime) -> QueryResult:
        candidates = self.eligible(query, at)
        if len(candidates) <= query.count:
            return QueryResult(tuple(r.node_id for r in candidates),
                               insufficient=len(candidates) < query.count)
        scores = self.scores(candidates, query)
        picked = _weighted_sample(candidates, scores, query.count, rng)
        return QueryResult(tuple(r.node_id for r in picked), insufficient=False)


def _weighted_sample(candidates: list[NodeResourceRecord], scores: list[float],
                     k: int, rng: RngStream) -> list[NodeResourceRecord]:
    """Draw k without replacement, probability proportional to score."""
    remaining = list(zip(candidates, scores))
    picked = []
    for _ in range(k):
        total = sum(s for _, s in remaining)
        if total <= 0.0:
            idx = rng.randrange(len(remaining))
        else:
            point = rng.random() * total
            acc = 0.0
            idx = len(remaining) - 1
            for i, (_, s) in enumerate(remaining):
                acc += s
                if point < acc:
                    idx = i
                    break
        picked.append(remaining.pop(idx)[0])
    return picked
