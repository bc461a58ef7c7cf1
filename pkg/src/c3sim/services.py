"""Service lifecycle: publication, invocation, budget metering, placement.

A published service is a descriptor plus code blob replicated across a small
host set, resolvable from anywhere while at least one of those hosts is up.
Invocation quotes a price from the declared budget at current unit prices,
admits only requesters who can cover it, runs on the warm instance nearest
by route latency (deploying one on demand when none exists), and meters the
actual draw against the declaration: within budget completes, strict excess
terminates the request at the exhaustion point with a pro-rata charge.

Placement is demand-following when push mode is on: each window the traffic
share per region sets a replica target (one replica per kappa of share, a
global floor of min_replicas), deficits deploy near the demand and surpluses
retire youngest-first after a cool-down. Pull-only mode keeps just the floor.
Code moves through a bounded-degree repeater tree so an origin's egress
stays at tree-degree transfers regardless of how many nodes want the blob.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .engine import RngStream, SimTime
from .ledger import Ledger
from .overlay import NodeId, Overlay, Unreachable
from .replication import ReplicaStore
from .resource_repo import Repository, ResourceQuery
from .resources import RESOURCE_KINDS, ResourceVector

logger = logging.getLogger(__name__)

COMPLETED = "completed"
TERMINATED = "terminated"
FAILED_OUTCOMES = ("unresolvable", "rejected-funds", "no-capacity",
                   "unreachable", "host-offline", "payment-failed")


class ServiceError(Exception):
    pass


class UnknownService(ServiceError):
    pass


@dataclass(frozen=True, slots=True)
class ServiceDescriptor:
    service_id: str
    developer: str
    declared: ResourceVector
    code_size: int
    min_replicas: int = 3
    subsidy: int = 0
    version: str = "1.0"
    chain_next: str | None = None


@dataclass(slots=True)
class Instance:
    service_id: str
    host: NodeId
    deployed_at: SimTime
    warm_at: SimTime
    seq: int
    region: str
    retired: bool = False


@dataclass(frozen=True, slots=True)
class Request:
    req_id: int
    service_id: str
    requester: NodeId
    issued_at: SimTime
    actual: ResourceVector
    kind: str = "request"


@dataclass(slots=True)
class InvokePlan:
    request: Request
    outcome: str
    descriptor: ServiceDescriptor | None = None
    host: NodeId | None = None
    gross: int = 0
    charged: int = 0
    subsidy_part: int = 0
    fraction: Fraction = Fraction(1)
    consumed: ResourceVector = ResourceVector()
    start: SimTime = 0
    done_at: SimTime = 0
    latency: int = 0

    @property
    def served(self) -> bool:
        return self.outcome in (COMPLETED, TERMINATED)


@dataclass(frozen=True, slots=True)
class PlacementAction:
    at: SimTime
    service_id: str
    action: str
    host: NodeId | None
    region: str


@dataclass(frozen=True, slots=True)
class ServicesConfig:
    regions: tuple[str, ...]
    dsr_r: int = 3
    cool_down: int = 3
    kappa_share: float = 0.25
    request_size: int = 0
    pull_candidates: int = 3


def budget_fraction(actual: ResourceVector, declared: ResourceVector) -> Fraction:
    """1 when within budget, else the completed fraction at exhaustion."""
    f = Fraction(1)
    for kind in RESOURCE_KINDS:
        a, d = actual.get(kind), declared.get(kind)
        if a > d:
            f = min(f, Fraction(d, a))
    return f


class ServiceRuntime:
    def __init__(self, config: ServicesConfig, overlay: Overlay,
                 repo: Repository, ledger: Ledger, store: ReplicaStore,
                 rng: RngStream):
        self.config = config
        self.overlay = overlay
        self.repo = repo
        self.ledger = ledger
        self.store = store
        self.rng = rng
        self.instances: dict[str, list[Instance]] = {}
        self.busy_until: dict[NodeId, SimTime] = {}
        self.egress: dict[NodeId, int] = {}
        self.traffic: dict[str, dict[str, int]] = {}
        self._targets: dict[str, dict[str, list[int]]] = {}
        self._seq = 0

    # -- publication -----------------------------------------------------------

    @staticmethod
    def dsr_key(service_id: str) -> str:
        return f"dsr/{service_id}"

    def publish(self, desc: ServiceDescriptor, publisher: NodeId,
                at: SimTime) -> list[NodeId]:
        """Replicate descriptor + code, then warm the initial instances.

        Publishing an already-current version changes nothing; a new
        version refreshes the descriptor on the existing replica set.
        """
        key = self.dsr_key(desc.service_id)
        if key not in self.store.hosts:
            need = ResourceVector(compute=1, storage=desc.code_size, bandwidth=1)
            result = self.repo.query(
                ResourceQuery(required=need, count=self.config.dsr_r), self.rng, at)
            if not result.nodes:
                raise ServiceError(f"no hosts for {desc.service_id}")
            self.store.ensure(key, list(result.nodes))
        else:
            current = self.resolve(desc.service_id, at)
            if current is not None and current.version == desc.version:
                return list(self.store.replica_hosts(key))
        hosts = list(self.store.replica_hosts(key))
        apply_at = self._nearest_online(publisher, hosts) or hosts[0]
        for delivery in self.store.put(key, desc, publisher, at, apply_at):
            self.store.deliver(key, delivery.host, delivery.obj, at)
        fresh = desc.service_id not in self.instances
        self.instances.setdefault(desc.service_id, [])
        self.traffic.setdefault(desc.service_id, {})
        if fresh:
            for host in self._pick_hosts(desc, count=desc.min_replicas,
                                         region=None, at=at):
                self._deploy(desc, host, publisher, at)
        return hosts

    def resolve(self, service_id: str, at: SimTime) -> ServiceDescriptor | None:
        """Descriptor if any replica of it is reachable right now."""
        key = self.dsr_key(service_id)
        if key not in self.store.hosts:
            return None
        alive = [h for h in self.store.replica_hosts(key)
                 if self.overlay.is_online(h)]
        state = self.store.any_state(key, alive)
        return state.value if state is not None else None

    def _code_sources(self, service_id: str) -> list[NodeId]:
        key = self.dsr_key(service_id)
        alive = [h for h in self.store.hosts.get(key, ())
                 if self.overlay.is_online(h)
                 and self.store.states[key].get(h) is not None]
        for inst in self.instances.get(service_id, ()):
            if not inst.retired and self.overlay.is_online(inst.host):
                alive.append(inst.host)
        return sorted(set(alive))

    # -- invocation --------------------------------------------------------------

    def warm_instances(self, service_id: str, at: SimTime) -> list[Instance]:
        return [i for i in self.instances.get(service_id, ())
                if not i.retired and i.warm_at <= at
                and self.overlay.is_online(i.host)]

    def plan_invoke(self, request: Request, at: SimTime) -> InvokePlan:
        desc = self.resolve(request.service_id, at)
        if desc is None:
            return InvokePlan(request, "unresolvable")
        plan = InvokePlan(request, "pending", descriptor=desc)
        plan.gross = self.ledger.market.value_of(desc.declared)
        quoted_part = min(desc.subsidy, plan.gross)
        if not self.ledger.can_cover(request.requester, plan.gross - quoted_part):
            plan.outcome = "rejected-funds"
            return plan
        host, ready_at = self._place_request(request, desc, at)
        if host is None:
            plan.outcome = ready_at  # failure label from placement
            return plan
        self._run_on_host(plan, desc, host, max(at, ready_at), at)
        self.traffic.setdefault(desc.service_id, {})
        region = self.overlay.records[request.requester].region
        self.traffic[desc.service_id][region] = (
            self.traffic[desc.service_id].get(region, 0) + 1)
        return plan

    def _place_request(self, request: Request, desc: ServiceDescriptor,
                       at: SimTime):
        """Nearest warm instance, else a pull deployment near the requester."""
        best = None
        for inst in self.warm_instances(desc.service_id, at):
            try:
                d = self.overlay.route(request.requester, inst.host)
            except Unreachable:
                continue
            if best is None or (d, inst.host) < (best[0], best[1]):
                best = (d, inst.host, at)
        if best is not None:
            return best[1], best[2]
        sources = self._code_sources(desc.service_id)
        sources = [s for s in sources
                   if self.overlay.reachable(request.requester, s)]
        if not sources:
            return None, "unresolvable"
        region = self.overlay.records[request.requester].region
        for host in self._pick_hosts(desc, self.config.pull_candidates,
                                     region, at):
            inst = self._deploy(desc, host, sources[0], at)
            if inst is not None:
                return host, inst.warm_at
        return None, "no-capacity"

    def _run_on_host(self, plan: InvokePlan, desc: ServiceDescriptor,
                     host: NodeId, ready_at: SimTime, issued_at: SimTime) -> None:
        try:
            to_host = self.overlay.route(plan.request.requester, host,
                                         self.config.request_size)
            back = self.overlay.route(host, plan.request.requester)
        except Unreachable:
            plan.outcome = "unreachable"
            return
        actual = plan.request.actual
        f = budget_fraction(actual, desc.declared)
        rate = max(1, self.overlay.records[host].capacity.compute)
        full = math.ceil(actual.compute / rate) if actual.compute else 0
        duration = math.ceil(f * full)
        start = max(ready_at + to_host, self.busy_until.get(host, 0))
        self.busy_until[host] = start + duration
        plan.host = host
        plan.fraction = f
        plan.start = start
        plan.done_at = start + duration
        plan.latency = plan.done_at + back - issued_at
        if f == 1:
            plan.outcome = COMPLETED
            plan.consumed = actual
            plan.charged = plan.gross
        else:
            plan.outcome = TERMINATED
            plan.consumed = ResourceVector(*(
                min(desc.declared.get(k), math.ceil(f * actual.get(k)))
                for k in RESOURCE_KINDS))
            plan.charged = math.ceil(f * plan.gross)
        plan.subsidy_part = min(desc.subsidy, plan.charged)

    def settlement_rows(self, plan: InvokePlan, at: SimTime):
        desc = plan.descriptor
        return self.ledger.settlement_rows(
            plan.request.requester, plan.host, desc.developer,
            plan.charged, plan.subsidy_part, at, tag=str(plan.request.req_id))

    # -- deployment and placement -------------------------------------------------

    def _pick_hosts(self, desc: ServiceDescriptor, count: int,
                    region: str | None, at: SimTime) -> list[NodeId]:
        need = ResourceVector(compute=1, storage=desc.code_size, bandwidth=1)
        result = self.repo.query(
            ResourceQuery(required=need, count=count, preferred_region=region),
            self.rng, at)
        hosting = {i.host for i in self.instances.get(desc.service_id, ())
                   if not i.retired}
        return [n for n in result.nodes
                if n not in hosting and self.overlay.is_online(n)]

    def _deploy(self, desc: ServiceDescriptor, host: NodeId, source: NodeId,
                at: SimTime) -> Instance | None:
        try:
            delay = (0 if source == host
                     else self.overlay.route(source, host, desc.code_size))
        except Unreachable:
            return None
        self.egress[source] = self.egress.get(source, 0) + (
            desc.code_size if source != host else 0)
        self._seq += 1
        inst = Instance(desc.service_id, host, at, at + delay, self._seq,
                        self.overlay.records[host].region)
        self.instances[desc.service_id].append(inst)
        return inst

    def host_lost(self, host: NodeId, at: SimTime) -> list[Instance]:
        """Drop every instance on a departed host."""
        lost = []
        for insts in self.instances.values():
            for inst in insts:
                if inst.host == host and not inst.retired:
                    inst.retired = True
                    lost.append(inst)
        self.busy_until.pop(host, None)
        return lost

    def placement_tick(self, at: SimTime, push_enabled: bool) -> list[PlacementAction]:
        actions: list[PlacementAction] = []
        for service_id in sorted(self.instances):
            desc = self.resolve(service_id, at)
            if desc is None:
                continue
            if push_enabled:
                actions.extend(self._rebalance(desc, at))
            else:
                actions.extend(self._keep_floor(desc, at))
            self.traffic[service_id] = {}
        return actions

    def _live_by_region(self, service_id: str, at: SimTime) -> dict[str, list[Instance]]:
        out: dict[str, list[Instance]] = {r: [] for r in self.config.regions}
        for inst in self.instances.get(service_id, ()):
            if not inst.retired and self.overlay.is_online(inst.host):
                out.setdefault(inst.region, []).append(inst)
        return out

    def _rebalance(self, desc: ServiceDescriptor, at: SimTime) -> list[PlacementAction]:
        counts = self.traffic.get(desc.service_id, {})
        total = sum(counts.values())
        history = self._targets.setdefault(desc.service_id, {})
        effective: dict[str, int] = {}
        for region in self.config.regions:
            raw = 0
            if total > 0:
                share = counts.get(region, 0) / total
                raw = math.ceil(share / self.config.kappa_share) if share > 0 else 0
            past = history.setdefault(region, [])
            past.append(raw)
            del past[:-self.config.cool_down]
            effective[region] = max(past)
        floor_order = sorted(self.config.regions,
                             key=lambda r: (-counts.get(r, 0), r))
        i = 0
        while sum(effective.values()) < desc.min_replicas:
            effective[floor_order[i % len(floor_order)]] += 1
            i += 1
        return self._apply_targets(desc, effective, at)

    def _keep_floor(self, desc: ServiceDescriptor, at: SimTime) -> list[PlacementAction]:
        live = sum(len(v) for v in self._live_by_region(desc.service_id, at).values())
        actions = []
        if live < desc.min_replicas:
            actions.extend(self._deploy_n(desc, desc.min_replicas - live, None, at))
        return actions

    def _apply_targets(self, desc: ServiceDescriptor, targets: dict[str, int],
                       at: SimTime) -> list[PlacementAction]:
        actions = []
        live = self._live_by_region(desc.service_id, at)
        for region in self.config.regions:
            have, want = len(live.get(region, ())), targets.get(region, 0)
            if have < want:
                actions.extend(self._deploy_n(desc, want - have, region, at))
            elif have > want:
                doomed = sorted(live[region], key=lambda i: -i.seq)[: have - want]
                for inst in doomed:
                    inst.retired = True
                    actions.append(PlacementAction(at, desc.service_id,
                                                   "retired", inst.host, region))
        return actions

    def _deploy_n(self, desc: ServiceDescriptor, n: int, region: str | None,
                  at: SimTime) -> list[PlacementAction]:
        actions = []
        sources = self._code_sources(desc.service_id)
        if not sources:
            return [PlacementAction(at, desc.service_id, "shortfall", None,
                                    region or "")] * n
        hosts = self._pick_hosts(desc, n, region, at)
        for host in hosts[:n]:
            source = self._nearest_online(host, sources) or sources[0]
            inst = self._deploy(desc, host, source, at)
            if inst is not None:
                actions.append(PlacementAction(at, desc.service_id, "deployed",
                                               host, inst.region))
        for _ in range(n - len(actions)):
            actions.append(PlacementAction(at, desc.service_id, "shortfall",
                                           None, region or ""))
        return actions

    def _nearest_online(self, frm: NodeId, candidates: list[NodeId]) -> NodeId | None:
        best = None
        for cand in sorted(candidates):
            if not self.overlay.is_online(cand):
                continue
            if not self.overlay.is_online(frm):
                return cand
            try:
                d = self.overlay.route(frm, cand)
            except Unreachable:
                continue
            if best is None or d < best[0]:
                best = (d, cand)
        return best[1] if best else None

    # -- content distribution ------------------------------------------------------

    def distribute(self, origin: NodeId, consumers: list[NodeId], size: int,
                   at: SimTime, repeaters: bool = True,
                   fanout: int = 2) -> dict[NodeId, SimTime]:
        """Deliver a blob to every consumer; meter each sender's egress.

        With repeaters, receivers relay onward in a degree-`fanout` tree, so
        the origin uploads at most `fanout` copies. Without, the origin
        uploads one copy per consumer.
        """
        delivered: dict[NodeId, SimTime] = {}
        pending = sorted(c for c in consumers if c != origin)
        if not repeaters:
            for consumer in pending:
                self.egress[origin] = self.egress.get(origin, 0) + size
                delivered[consumer] = at + self.overlay.route(origin, consumer, size)
            return delivered
        senders: list[tuple[SimTime, NodeId]] = [(at, origin)]
        i = 0
        while i < len(pending):
            ready_at, sender = senders.pop(0)
            for consumer in pending[i:i + fanout]:
                self.egress[sender] = self.egress.get(sender, 0) + size
                arrive = ready_at + self.overlay.route(sender, consumer, size)
                delivered[consumer] = arrive
                senders.append((arrive, consumer))
                i += 1
        return delivered
