"""Scenario assembly and execution.

One Runner owns one run: it builds the substrate from a ScenarioConfig,
subscribes handlers, pre-generates the workload, runs the clock out and
leaves behind the report plus the log tables every metric derives from.

Community mode runs the full stack. Vendor-baseline mode serves the same
pre-generated workload from a single always-on high-capacity node with no
currency, placement, replication or evolution mechanics; it exists so the
two architectures can be compared under identical demand.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

from ..engine import Event, RunSummary, SimTime, Simulator
from ..evolution import UpdateDiffusion
from ..ledger import Ledger, MarketConfig, MarketPrice, account_label
from ..overlay import (NodeId, NodeRecord, NoQuorum, Overlay, OverlayConfig,
                       Unreachable, generate_identity)
from ..replication import ReplicaStore
from ..resource_repo import NodeResourceRecord, Repository, ResourceQuery
from ..resources import ResourceVector
from ..services import (COMPLETED, InvokePlan, Request, ServiceDescriptor,
                        ServiceRuntime, ServicesConfig)
from .config import ScenarioConfig, ServiceEntry
from .failures import resolve_target, validate_target
from .metrics import COLUMNS, compute_report
from .workloads import WorkloadItem, draw_actual, generate

logger = logging.getLogger(__name__)

VENDOR_REGION = "core"
VENDOR_CLASS = "vendor-core"


@dataclass(slots=True)
class _Session:
    sid: int
    requester: NodeId
    host: NodeId
    service: ServiceEntry
    issued_at: SimTime
    start: SimTime
    duration: int
    rate: int
    gross: int
    subsidy_part: int
    startup: int
    acc: float = 0.0
    below_run: int = 0
    failed: bool = False
    end_event: Event | None = None


class Runner:
    def __init__(self, config: ScenarioConfig):
        for entry in config.failures:
            validate_target(entry, config)
        self.config = config
        self.sim = Simulator(config.seed, config.horizon)
        self.logs: dict[str, list[tuple]] = {name: [] for name in COLUMNS}
        self.report: dict | None = None
        self.summary: RunSummary | None = None
        self._req_seq = 0
        self._pending: dict[NodeId, set[Event]] = {}
        self._churn_event: dict[NodeId, Event] = {}
        self._sessions: dict[NodeId, list[_Session]] = {}
        self._session_clock: dict[NodeId, SimTime] = {}
        self._demand = ResourceVector()
        self._active_diffusions: dict[str, str] = {}
        self._key_size: dict[str, int] = {}
        self.services_by_id = {s.service_id: s for s in config.services}
        self._build()

    # -- construction ---------------------------------------------------------

    def _build(self) -> None:
        cfg = self.config
        topo = cfg.topology
        self.overlay = Overlay(OverlayConfig(
            degree=topo.degree, inter_region_links=topo.inter_region_links,
            intra_latency=topo.intra_latency, inter_latency=topo.inter_latency,
            m_target=topo.m_target), self.sim.stream("overlay"))

        ids = self.sim.stream("identity")
        self.node_list: list[NodeId] = []
        self.by_class: dict[str, list[NodeId]] = {}
        self.node_class: dict[NodeId, str] = {}
        for klass in cfg.population:
            for i in range(klass.count):
                node_id = generate_identity(ids).node_id
                region = klass.regions[i % len(klass.regions)]
                self.overlay.add_record(NodeRecord(
                    node_id, region, klass.capacity, klass.name,
                    klass.cost_factor, klass.mean_online, klass.mean_offline,
                    online=True, online_since=0))
                self.node_list.append(node_id)
                self.by_class.setdefault(klass.name, []).append(node_id)
                self.node_class[node_id] = klass.name
                self._log("nodes", node_id.short, region, klass.name,
                          klass.compute, klass.storage, klass.bandwidth,
                          klass.cost_factor, klass.credit_limit,
                          klass.initial_balance, 1)

        self.vendor_node: NodeId | None = None
        if cfg.mode == "vendor":
            self.vendor_node = generate_identity(ids).node_id
            cap = ResourceVector(10 ** 6, 10 ** 9, 10 ** 6)
            self.overlay.add_record(NodeRecord(
                self.vendor_node, VENDOR_REGION, cap, VENDOR_CLASS,
                online=True, online_since=0))
            self._log("nodes", self.vendor_node.short, VENDOR_REGION,
                      VENDOR_CLASS, cap.compute, cap.storage, cap.bandwidth,
                      1.0, 0, 0, 1)

        self.overlay.build(0)
        if self.vendor_node is not None:
            for node in self.node_list:
                self.overlay.add_link(self.vendor_node, node, topo.vendor_latency)
        for region in topo.regions:
            if self.overlay.online_in_region(region):
                self.overlay.form_dvsp(region, 0)

        market = MarketPrice(dict(cfg.market.initial), MarketConfig(
            alpha=cfg.market.alpha,
            p_min=Fraction(cfg.market.p_min),
            p_max=Fraction(cfg.market.p_max),
            minting=cfg.market.minting))
        self.ledger = Ledger(market)
        self.repo = Repository(
            heartbeat_interval=cfg.heartbeat_interval,
            region_gate=self._region_gate)
        self.store = ReplicaStore(cfg.replication_r, log=self._replication_log)
        self.services = ServiceRuntime(
            ServicesConfig(regions=topo.regions, dsr_r=cfg.dsr_r,
                           cool_down=cfg.cool_down_windows),
            self.overlay, self.repo, self.ledger, self.store,
            self.sim.stream("services"))

        trust_rng = self.sim.stream("evolution")
        trust = {}
        pool = sorted(self.node_list)
        for node in pool:
            others = [n for n in pool if n != node]
            k = min(cfg.evolution.trust_out_degree, len(others))
            trust[node] = tuple(trust_rng.sample(others, k))
        self.evolution = UpdateDiffusion(trust, cfg.evolution.theta)

        if cfg.mode == "community":
            self._build_community()
        else:
            self._build_vendor()

        self._meta()
        self._schedule_workload()
        self._schedule_churn()
        self._schedule_periodic()
        self._schedule_failures()
        self._subscribe()

    def _build_community(self) -> None:
        cfg = self.config
        for klass in cfg.population:
            for node in self.by_class[klass.name]:
                self.ledger.open_account(node, klass.initial_balance,
                                         klass.credit_limit)
                self.repo.register(NodeResourceRecord(
                    node, self.overlay.records[node].region, klass.capacity,
                    cost_factor=klass.cost_factor))
        self.repo.sweep(0, self.overlay.is_online, self._free_capacity,
                        self._unit_cost)
        publisher = min(self.node_list)
        for svc in cfg.services:
            self.ledger.open_account(f"dev:{svc.service_id}",
                                     svc.developer_balance)
            desc = ServiceDescriptor(
                svc.service_id, f"dev:{svc.service_id}", svc.declared,
                svc.code_size, svc.min_replicas, svc.subsidy,
                chain_next=svc.chain_next)
            self.services.publish(desc, publisher, 0)
            self._key_size[ServiceRuntime.dsr_key(svc.service_id)] = svc.code_size
            for inst in self.services.instances[svc.service_id]:
                self._log("placements", 0, svc.service_id, "deployed",
                          inst.host.short, inst.region)
            self.evolution.register_root(svc.service_id, "1.0", svc.fitness, 0)
            if svc.update_at is not None:
                self.sim.at(svc.update_at, "release", service_id=svc.service_id)

    def _build_vendor(self) -> None:
        for svc in self.config.services:
            self._log("placements", 0, svc.service_id, "deployed",
                      self.vendor_node.short, VENDOR_REGION)

    def _meta(self) -> None:
        cfg = self.config
        rows = [
            ("seed", cfg.seed), ("horizon", cfg.horizon), ("mode", cfg.mode),
            ("gossip_period", cfg.gossip_period),
            ("heartbeat_interval", cfg.heartbeat_interval),
            ("price_window", cfg.price_window),
            ("placement_window", cfg.placement_window),
            ("p_min", cfg.market.p_min), ("p_max", cfg.market.p_max),
            ("minting", int(cfg.market.minting)),
            ("replication_r", cfg.replication_r),
        ]
        for svc in cfg.services:
            rows.append((f"code_size.{svc.service_id}", svc.code_size))
        for key, value in rows:
            self._log("meta", key, str(value))

    def _schedule_workload(self) -> None:
        rng = self.sim.stream("workload")
        for item in generate(self.config, rng, len(self.node_list)):
            self.sim.at(item.at, "request-arrival", item=item)

    def _schedule_churn(self) -> None:
        rng = self.sim.stream("churn")
        mult = self.config.churn_multiplier
        for node in self.node_list:
            rec = self.overlay.records[node]
            if rec.mean_offline <= 0 or mult <= 0:
                continue
            delay = max(1, int(rng.expovariate(mult / rec.mean_online)))
            self._churn_event[node] = self.sim.at(delay, "node-leave",
                                                  node=node, cause="churn")

    def _schedule_periodic(self) -> None:
        cfg = self.config
        for period, kind in ((cfg.heartbeat_interval, "heartbeat-sweep"),
                             (cfg.gossip_period, "gossip-round"),
                             (cfg.price_window, "price-tick"),
                             (cfg.placement_window, "placement-tick")):
            for t in range(period, cfg.horizon + 1, period):
                self.sim.at(t, kind)

    def _schedule_failures(self) -> None:
        for entry in self.config.failures:
            self.sim.at(entry.at, "failure-injection", entry=entry)

    def _subscribe(self) -> None:
        sub = self.sim.subscribe
        sub("request-arrival", self._on_arrival)
        sub("request-complete", self._on_complete)
        sub("session-begin", self._on_session_begin)
        sub("session-end", self._on_session_end)
        sub("replica-deliver", self._on_deliver)
        sub("gossip-round", self._on_gossip)
        sub("heartbeat-sweep", self._on_sweep)
        sub("price-tick", self._on_price)
        sub("placement-tick", self._on_placement)
        sub("node-leave", self._on_leave)
        sub("node-join", self._on_join)
        sub("failure-injection", self._on_failure)
        sub("release", self._on_release)

    # -- logging helpers ---------------------------------------------------------

    def _log(self, name: str, *row) -> None:
        self.logs[name].append(row)

    def _replication_log(self, at, key, action, node) -> None:
        self._log("replication", at, key, action, node)

    # -- repo hooks ----------------------------------------------------------------

    def _free_capacity(self, node: NodeId) -> ResourceVector:
        cap = self.overlay.records[node].capacity
        used = 0
        for insts in self.services.instances.values():
            for inst in insts:
                if inst.host == node and not inst.retired:
                    used += self.services_by_id[inst.service_id].code_size
        return ResourceVector(cap.compute, max(0, cap.storage - used),
                              cap.bandwidth)

    def _unit_cost(self, node: NodeId) -> float:
        basket = float(sum(self.ledger.market.prices.values()))
        return self.overlay.records[node].cost_factor * basket

    def _region_gate(self, region: str) -> bool:
        if region not in self.config.topology.regions:
            return True
        return self.overlay.dvsp_has_quorum(region)

    # -- arrival handling ------------------------------------------------------------

    def _on_arrival(self, event: Event) -> None:
        item: WorkloadItem = event.payload["item"]
        requester = self.node_list[item.requester_index]
        if not self.overlay.is_online(requester):
            return
        at = self.sim.now
        if item.kind == "read":
            self._invoke(requester, item.service_id, item.actual, at, "request")
        elif item.kind == "write":
            self._wiki_write(requester, item.page, at)
        else:
            self._session_start(requester, item, at)

    def _next_req(self) -> int:
        self._req_seq += 1
        return self._req_seq

    def _invoke(self, requester: NodeId, service_id: str,
                actual: ResourceVector, at: SimTime, kind: str) -> None:
        req = Request(self._next_req(), service_id, requester, at, actual, kind)
        if self.config.mode == "vendor":
            self._vendor_invoke(req, at)
            return
        plan = self.services.plan_invoke(req, at)
        if plan.served:
            ev = self.sim.at(plan.done_at, "request-complete", plan=plan)
            self._pending.setdefault(plan.host, set()).add(ev)
        else:
            self._request_row(plan, declared=self._declared_of(service_id))

    def _declared_of(self, service_id: str) -> ResourceVector:
        svc = self.services_by_id.get(service_id)
        return svc.declared if svc else ResourceVector()

    def _vendor_invoke(self, req: Request, at: SimTime) -> None:
        center = self.vendor_node
        plan = InvokePlan(req, "unreachable")
        if self.overlay.is_online(center):
            to_center = self.overlay.route(req.requester, center)
            rate = self.overlay.records[center].capacity.compute
            duration = math.ceil(req.actual.compute / rate) if req.actual.compute else 0
            start = max(at + to_center, self.services.busy_until.get(center, 0))
            self.services.busy_until[center] = start + duration
            plan.outcome = COMPLETED
            plan.host = center
            plan.consumed = req.actual
            plan.done_at = start + duration
            plan.latency = plan.done_at + to_center - at
            ev = self.sim.at(plan.done_at, "request-complete", plan=plan)
            self._pending.setdefault(center, set()).add(ev)
        else:
            self._request_row(plan, declared=self._declared_of(req.service_id))

    # -- completion ---------------------------------------------------------------

    def _on_complete(self, event: Event) -> None:
        plan: InvokePlan = event.payload["plan"]
        at = self.sim.now
        if plan.host is not None:
            self._pending.get(plan.host, set()).discard(event)
        if self.config.mode == "community":
            self._settle(plan, at)
            self.repo.record_task(plan.host, plan.outcome == COMPLETED)
            self._demand = self._demand + plan.consumed
        declared = (plan.descriptor.declared if plan.descriptor
                    else self._declared_of(plan.request.service_id))
        self._request_row(plan, declared)
        if (plan.outcome == COMPLETED and plan.descriptor
                and plan.descriptor.chain_next):
            nxt = self.services_by_id[plan.descriptor.chain_next]
            actual = draw_actual(nxt, self.sim.stream("chain"))
            self._invoke(plan.request.requester, nxt.service_id, actual, at,
                         "chained")

    def _settle(self, plan: InvokePlan, at: SimTime) -> None:
        rows = self.services.settlement_rows(plan, at)
        if not rows:
            return
        region = self.overlay.records[plan.request.requester].region
        try:
            result = self.overlay.execute_transaction(region, rows,
                                                      self.ledger, at)
            committed = result.committed
        except NoQuorum:
            committed = False
        if not committed:
            plan.outcome = "payment-failed"
            plan.charged = 0
            plan.subsidy_part = 0

    def _request_row(self, plan: InvokePlan, declared: ResourceVector) -> None:
        req = plan.request
        self._log("requests", req.issued_at, req.req_id, req.kind,
                  req.service_id, req.requester.short,
                  plan.host.short if plan.host else "", plan.outcome,
                  plan.latency, plan.gross, plan.charged, plan.subsidy_part,
                  declared.compute, declared.storage, declared.bandwidth,
                  req.actual.compute, req.actual.storage,
                  req.actual.bandwidth, plan.consumed.compute,
                  plan.consumed.bandwidth)

    # -- wiki writes ------------------------------------------------------------------

    def _wiki_write(self, requester: NodeId, page: int, at: SimTime) -> None:
        if self.config.mode == "vendor":
            key = f"page/{page}"
            if self.overlay.is_online(self.vendor_node):
                self._log("replication", at, key, "put", requester.short)
                self._log("replication", at, key, "converged", "")
            return
        key = f"page/{page}"
        size = self.config.workload.write_size
        if key not in self.store.hosts:
            result = self.repo.query(ResourceQuery(
                required=ResourceVector(storage=size),
                count=self.config.replication_r),
                self.sim.stream("replication"), at)
            if not result.nodes:
                return
            self.store.ensure(key, list(result.nodes))
            self._key_size[key] = size
        alive = [h for h in self.store.replica_hosts(key)
                 if self.overlay.is_online(h)
                 and self.overlay.reachable(requester, h)]
        if not alive:
            self._log("replication", at, key, "put-dropped", requester.short)
            return
        apply_at = min(alive, key=lambda h: (self.overlay.route(requester, h), h))
        value = f"{at}:{requester.short}"
        for d in self.store.put(key, value, requester, at, apply_at):
            if not self.overlay.is_online(d.host):
                continue
            delay = self.overlay.route(apply_at, d.host, size)
            self.sim.at(at + delay, "replica-deliver", key=key, host=d.host,
                        obj=d.obj)

    def _on_deliver(self, event: Event) -> None:
        p = event.payload
        if self.overlay.is_online(p["host"]):
            self.store.deliver(p["key"], p["host"], p["obj"], self.sim.now)

    # -- video sessions ------------------------------------------------------------------

    def _session_start(self, requester: NodeId, item: WorkloadItem,
                       at: SimTime) -> None:
        sid = self._next_req()
        svc = self.services_by_id[item.service_id]
        ready = at
        if self.config.mode == "vendor":
            host = self.vendor_node
            if not self.overlay.is_online(host):
                self._session_row_failed(sid, item, requester, at, "unreachable")
                return
            gross = subsidy = 0
        else:
            desc = self.services.resolve(item.service_id, at)
            if desc is None:
                self._session_row_failed(sid, item, requester, at, "unresolvable")
                return
            gross = self.ledger.market.value_of(desc.declared)
            subsidy = min(svc.subsidy, gross)
            if not self.ledger.can_cover(requester, gross - subsidy):
                self._session_row_failed(sid, item, requester, at,
                                         "rejected-funds")
                return
            req = Request(sid, item.service_id, requester, at, item.actual,
                          "session")
            host, ready = self.services._place_request(req, desc, at)
            if host is None:
                self._session_row_failed(sid, item, requester, at, ready)
                return
        try:
            hop = self.overlay.route(requester, host)
        except Unreachable:
            self._session_row_failed(sid, item, requester, at, "unreachable")
            return
        start = max(at, ready) + hop
        session = _Session(sid, requester, host, svc, at, start,
                           item.duration, item.stream_rate, gross, subsidy,
                           start - at)
        self.sim.at(start, "session-begin", session=session)

    def _on_session_begin(self, event: Event) -> None:
        session: _Session = event.payload["session"]
        host = session.host
        if not self.overlay.is_online(host):
            self._finish_session(session, "host-offline", self.sim.now)
            return
        self._accrue(host, self.sim.now)
        self._sessions.setdefault(host, []).append(session)
        session.end_event = self.sim.at(self.sim.now + session.duration,
                                        "session-end", session=session)

    def _accrue(self, host: NodeId, now: SimTime) -> None:
        active = self._sessions.get(host, ())
        if not active:
            self._session_clock[host] = now
            return
        last = self._session_clock.get(host, now)
        span = now - last
        if span <= 0:
            return
        bw = self.overlay.records[host].capacity.bandwidth
        share = bw / len(active)
        floor = self.config.workload.floor
        for s in active:
            delivered = min(float(s.rate), share)
            s.acc += delivered * span
            if delivered < floor * s.rate:
                s.below_run += span
                if s.below_run >= self.config.workload.sustain_window:
                    s.failed = True
            else:
                s.below_run = 0
        self._session_clock[host] = now

    def _on_session_end(self, event: Event) -> None:
        session: _Session = event.payload["session"]
        at = self.sim.now
        self._accrue(session.host, at)
        self._sessions[session.host].remove(session)
        outcome = "failed-throughput" if session.failed else COMPLETED
        self._finish_session(session, outcome, at)

    def _finish_session(self, session: _Session, outcome: str,
                        at: SimTime) -> None:
        svc = session.service
        consumed = ResourceVector(bandwidth=int(session.acc))
        charged = session.gross if outcome == COMPLETED else 0
        if self.config.mode == "community":
            self._demand = self._demand + consumed
            if charged > 0:
                rows = self.ledger.settlement_rows(
                    session.requester, session.host, f"dev:{svc.service_id}",
                    charged, session.subsidy_part, at, tag=str(session.sid))
                region = self.overlay.records[session.requester].region
                try:
                    result = self.overlay.execute_transaction(
                        region, rows, self.ledger, at)
                    if not result.committed:
                        outcome, charged = "payment-failed", 0
                except NoQuorum:
                    outcome, charged = "payment-failed", 0
        self._log("requests", session.issued_at, session.sid, "session",
                  svc.service_id, session.requester.short, session.host.short,
                  outcome, session.startup, session.gross, charged,
                  session.subsidy_part if charged else 0,
                  svc.declared.compute, svc.declared.storage,
                  svc.declared.bandwidth, 0, 0,
                  session.rate * session.duration, 0, consumed.bandwidth)

    def _session_row_failed(self, sid: int, item: WorkloadItem,
                            requester: NodeId, at: SimTime,
                            outcome: str) -> None:
        svc = self.services_by_id[item.service_id]
        self._log("requests", at, sid, "session", item.service_id,
                  requester.short, "", outcome, 0, 0, 0,
                  svc.declared.compute, svc.declared.storage,
                  svc.declared.bandwidth, 0, 0,
                  item.stream_rate * item.duration, 0, 0)

    # -- periodic upkeep -------------------------------------------------------------------

    def _on_gossip(self, event: Event) -> None:
        at = self.sim.now
        self.overlay.maintenance(at)
        if self.config.mode != "community":
            return
        rng = self.sim.stream("replication")
        self.store.gossip_round(at, rng, self.overlay.is_online)
        self.store.rereplicate(at, self.overlay.is_online, self._pick_replica)
        if self._active_diffusions:
            for adopt in self.evolution.adoption_tick(at, self.overlay.is_online):
                self._log("adoptions", at, adopt.node.short, adopt.service_id,
                          adopt.from_version, adopt.to_version, adopt.cause)
            done = [s for s, v in self._active_diffusions.items()
                    if self.evolution.adoption_fraction(s, v) >= 1.0]
            for s in done:
                del self._active_diffusions[s]

    def _pick_replica(self, key: str, exclude: set[NodeId]) -> NodeId | None:
        size = self._key_size.get(key, 1)
        result = self.repo.query(ResourceQuery(
            required=ResourceVector(storage=size),
            count=len(exclude) + 1), self.sim.stream("replication"),
            self.sim.now)
        for node in result.nodes:
            if node not in exclude and self.overlay.is_online(node):
                return node
        return None

    def _on_sweep(self, event: Event) -> None:
        if self.config.mode == "community":
            self.repo.sweep(self.sim.now, self.overlay.is_online,
                            self._free_capacity, self._unit_cost)

    def _on_price(self, event: Event) -> None:
        if self.config.mode != "community":
            return
        at = self.sim.now
        window = self.config.price_window
        online = [self.overlay.records[n] for n in self.node_list
                  if self.overlay.is_online(n)]
        supply = ResourceVector(
            sum(r.capacity.compute for r in online) * window,
            sum(r.capacity.storage for r in online),
            sum(r.capacity.bandwidth for r in online) * window)
        occupied = sum(
            self.services_by_id[i.service_id].code_size
            for insts in self.services.instances.values()
            for i in insts if not i.retired and self.overlay.is_online(i.host))
        demand = ResourceVector(self._demand.compute, occupied,
                                self._demand.bandwidth)
        self.ledger.market.update(demand, supply)
        prices = self.ledger.market.prices
        self._log("prices", at, float(prices["compute"]),
                  float(prices["storage"]), float(prices["bandwidth"]))
        self._demand = ResourceVector()

    def _on_placement(self, event: Event) -> None:
        if self.config.mode != "community":
            return
        for act in self.services.placement_tick(self.sim.now,
                                                self.config.push_placement):
            self._log("placements", act.at, act.service_id, act.action,
                      act.host.short if act.host else "", act.region)

    # -- membership ------------------------------------------------------------------------

    def _do_leave(self, node: NodeId, at: SimTime, cause: str) -> None:
        if not self.overlay.is_online(node):
            return
        self.overlay.leave(node, at)
        self._log("membership", at, node.short, "leave", cause)
        for inst in self.services.host_lost(node, at):
            self._log("placements", at, inst.service_id, "host-lost",
                      node.short, inst.region)
        if node == self.vendor_node:
            for svc in self.config.services:
                self._log("placements", at, svc.service_id, "host-lost",
                          node.short, VENDOR_REGION)
        for ev in self._pending.pop(node, set()):
            if self.sim.cancel(ev):
                plan: InvokePlan = ev.payload["plan"]
                plan.outcome = "host-offline"
                plan.latency = 0
                declared = (plan.descriptor.declared if plan.descriptor
                            else self._declared_of(plan.request.service_id))
                self._request_row(plan, declared)
        self._accrue(node, at)
        for session in self._sessions.pop(node, []):
            if session.end_event is not None:
                self.sim.cancel(session.end_event)
            self._finish_session(session, "host-offline", at)

    def _do_join(self, node: NodeId, at: SimTime, cause: str) -> None:
        if self.overlay.is_online(node):
            return
        self.overlay.join(node, at)
        self._log("membership", at, node.short, "join", cause)
        if node == self.vendor_node:
            for svc in self.config.services:
                self._log("placements", at, svc.service_id, "deployed",
                          node.short, VENDOR_REGION)
        elif self.config.mode == "community":
            self.repo.heartbeat(node, self._free_capacity(node), at,
                                projected_cost=self._unit_cost(node))

    def _on_leave(self, event: Event) -> None:
        node = event.payload["node"]
        cause = event.payload["cause"]
        self._churn_event.pop(node, None)
        self._do_leave(node, self.sim.now, cause)
        if cause == "churn":
            rec = self.overlay.records[node]
            mult = self.config.churn_multiplier
            rng = self.sim.stream("churn")
            delay = max(1, int(rng.expovariate(mult / rec.mean_offline)))
            if self.sim.now + delay <= self.config.horizon:
                self._churn_event[node] = self.sim.at(
                    self.sim.now + delay, "node-join", node=node, cause="churn")

    def _on_join(self, event: Event) -> None:
        node = event.payload["node"]
        cause = event.payload["cause"]
        self._churn_event.pop(node, None)
        self._do_join(node, self.sim.now, cause)
        rec = self.overlay.records[node]
        mult = self.config.churn_multiplier
        if cause == "churn" or rec.mean_offline > 0 and mult > 0:
            rng = self.sim.stream("churn")
            delay = max(1, int(rng.expovariate(mult / rec.mean_online)))
            if self.sim.now + delay <= self.config.horizon:
                self._churn_event[node] = self.sim.at(
                    self.sim.now + delay, "node-leave", node=node, cause="churn")

    def _on_failure(self, event: Event) -> None:
        entry = event.payload["entry"]
        at = self.sim.now
        rng = self.sim.stream("failures")
        targets = resolve_target(entry, overlay=self.overlay, rng=rng,
                                 by_class=self.by_class,
                                 vendor_node=self.vendor_node,
                                 want_online=entry.action == "kill")
        for node in targets:
            pending = self._churn_event.pop(node, None)
            if pending is not None:
                self.sim.cancel(pending)
            if entry.action == "kill":
                self._do_leave(node, at, "scripted")
            else:
                self._do_join(node, at, "scripted")

    def _on_release(self, event: Event) -> None:
        service_id = event.payload["service_id"]
        svc = self.services_by_id[service_id]
        at = self.sim.now
        origins = [i.host for i in self.services.warm_instances(service_id, at)]
        if not origins:
            online = self.overlay.online_nodes()
            if not online:
                return
            origins = [min(online)]
        fitness = (svc.update_fitness if svc.update_fitness is not None
                   else svc.fitness + 1.0)
        for adopt in self.evolution.release(service_id, "2.0", "1.0", fitness,
                                            sorted(set(origins)), at):
            self._log("adoptions", at, adopt.node.short, adopt.service_id,
                      adopt.from_version, adopt.to_version, adopt.cause)
        self._active_diffusions[service_id] = "2.0"

    # -- execution ------------------------------------------------------------------------

    def run(self) -> dict:
        self.summary = self.sim.run()
        for row in self.ledger.log:
            src = row.src if isinstance(row.src, str) else row.src.short
            dst = row.dst if isinstance(row.dst, str) else row.dst.short
            self._log("transfers", row.at, src, dst, row.amount, row.reason)
        for owner in sorted(self.ledger.accounts, key=account_label):
            acct = self.ledger.accounts[owner]
            self._log("balances", account_label(owner),
                      self.ledger.opening_balances[owner], acct.balance,
                      acct.credit_limit)
        self.report = compute_report(self.logs)
        return self.report


def run_scenario(config: ScenarioConfig) -> Runner:
    runner = Runner(config)
    runner.run()
    return runner
