"""Scenario files: a line-oriented section/key format and its typed model.

A scenario is an INI-style text file. Sections and keys:

[simulation]
  seed, horizon, mode (community|vendor), gossip_period, heartbeat_interval,
  price_window, placement_window, push_placement (on|off), replication_r,
  dsr_r, cool_down_windows
[topology]
  regions (comma list), degree, inter_region_links, intra_latency,
  inter_latency, vendor_latency, m_target
[population]
  classes = a, b, ...       then per class:
  <class>.count, .compute, .storage, .bandwidth, .credit_limit,
  .initial_balance, .mean_online, .mean_offline (0 = no churn),
  .cost_factor, .regions (comma list, spread round-robin)
[market]
  alpha, p_min, p_max, initial_compute, initial_storage, initial_bandwidth,
  minting (on|off)
[services]
  catalog = s1, s2, ...     then per service:
  <svc>.declared_compute/_storage/_bandwidth, .code_size, .min_replicas,
  .subsidy, .developer_balance, .share (workload weight),
  .actual_<res>_min/_max (metered draw range), .chain_next (optional),
  .update_at / .update_fitness (optional mid-run release), .fitness
[workload]
  kind = wiki | video
  wiki: rate, read_fraction, pages, write_size
  video: session_rate, mean_duration, stream_rate, floor, sustain_window,
         service (which catalog entry the sessions hit)
[failures]
  entries = e1, e2, ...     then per entry:
  <e>.at, .action (kill|restore), .target
  targets: nodes:random:<fraction> | region:<name> | dvsp:<region>:<k>
           | vendor | class:<name>:<index>
  churn_multiplier (scales mean_online/mean_offline; 0 freezes churn)
[evolution]
  trust_out_degree, theta

Unknown keys are rejected so a typo cannot silently change a run.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from fractions import Fraction

from ..resources import ResourceVector


class ConfigError(Exception):
    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True, slots=True)
class PopulationClass:
    name: str
    count: int
    compute: int
    storage: int
    bandwidth: int
    credit_limit: int = 0
    initial_balance: int = 100_000
    mean_online: int = 0
    mean_offline: int = 0
    cost_factor: float = 1.0
    regions: tuple[str, ...] = ()

    @property
    def capacity(self) -> ResourceVector:
        return ResourceVector(self.compute, self.storage, self.bandwidth)


@dataclass(frozen=True, slots=True)
class ServiceEntry:
    service_id: str
    declared: ResourceVector
    code_size: int
    min_replicas: int = 3
    subsidy: int = 0
    developer_balance: int = 0
    share: float = 1.0
    actual_min: ResourceVector = ResourceVector()
    actual_max: ResourceVector = ResourceVector()
    chain_next: str | None = None
    update_at: int | None = None
    update_fitness: float | None = None
    fitness: float = 1.0


@dataclass(frozen=True, slots=True)
class TopologySpec:
    regions: tuple[str, ...] = ("r0", "r1")
    degree: int = 6
    inter_region_links: int = 3
    intra_latency: int = 5
    inter_latency: int = 50
    vendor_latency: int = 40
    m_target: int = 5


@dataclass(frozen=True, slots=True)
class MarketSpec:
    alpha: float = 0.5
    p_min: int = 1
    p_max: int = 1000
    initial: dict[str, Fraction] = field(default_factory=lambda: {
        "compute": Fraction(10), "storage": Fraction(2), "bandwidth": Fraction(4)})
    minting: bool = False


@dataclass(frozen=True, slots=True)
class WorkloadSpec:
    kind: str = "wiki"
    rate: float = 0.01
    read_fraction: float = 0.95
    pages: int = 50
    write_size: int = 5
    session_rate: float = 0.0005
    mean_duration: int = 20_000
    stream_rate: int = 2
    floor: float = 0.8
    sustain_window: int = 2000
    service: str = ""


@dataclass(frozen=True, slots=True)
class FailureEntry:
    name: str
    at: int
    action: str
    target: str


@dataclass(frozen=True, slots=True)
class EvolutionSpec:
    trust_out_degree: int = 3
    theta: float = 0.5


@dataclass(frozen=True, slots=True)
class ScenarioConfig:
    seed: int = 42
    horizon: int = 100_000
    mode: str = "community"
    gossip_period: int = 1000
    heartbeat_interval: int = 500
    price_window: int = 5000
    placement_window: int = 5000
    push_placement: bool = True
    replication_r: int = 3
    dsr_r: int = 3
    cool_down_windows: int = 3
    topology: TopologySpec = TopologySpec()
    population: tuple[PopulationClass, ...] = ()
    market: MarketSpec = MarketSpec()
    services: tuple[ServiceEntry, ...] = ()
    workload: WorkloadSpec = WorkloadSpec()
    failures: tuple[FailureEntry, ...] = ()
    churn_multiplier: float = 1.0
    evolution: EvolutionSpec = EvolutionSpec()


_SECTIONS = ("simulation", "topology", "population", "market", "services",
             "workload", "failures", "evolution")


class _Section:
    """Typed reads with field-qualified errors and unknown-key detection."""

    def __init__(self, name: str, raw: dict[str, str]):
        self.name = name
        self.raw = dict(raw)
        self.seen: set[str] = set()

    def _get(self, key: str, default):
        self.seen.add(key)
        if key not in self.raw:
            if default is _REQUIRED:
                raise ConfigError(f"[{self.name}] {key}", "required key missing")
            return None
        return self.raw[key]

    def text(self, key: str, default=None) -> str:
        value = self._get(key, default)
        return default if value is None else value.strip()

    def integer(self, key: str, default=None, minimum: int | None = None) -> int:
        value = self._get(key, default)
        if value is None:
            out = default
        else:
            try:
                out = int(str(value).strip())
            except ValueError:
                raise ConfigError(f"[{self.name}] {key}",
                                  f"not an integer: {value!r}") from None
        if out is None:
            return None
        if minimum is not None and out < minimum:
            raise ConfigError(f"[{self.name}] {key}", f"must be >= {minimum}")
        return out

    def number(self, key: str, default=None) -> float:
        value = self._get(key, default)
        if value is None:
            return default
        try:
            return float(str(value).strip())
        except ValueError:
            raise ConfigError(f"[{self.name}] {key}",
                              f"not a number: {value!r}") from None

    def flag(self, key: str, default: bool) -> bool:
        value = self._get(key, None)
        if value is None:
            return default
        lowered = value.strip().lower()
        if lowered in ("on", "true", "yes", "1"):
            return True
        if lowered in ("off", "false", "no", "0"):
            return False
        raise ConfigError(f"[{self.name}] {key}", f"not a flag: {value!r}")

    def names(self, key: str) -> tuple[str, ...]:
        value = self.text(key, "")
        return tuple(v.strip() for v in value.split(",") if v.strip())

    def finish(self) -> None:
        unknown = set(self.raw) - self.seen
        if unknown:
            raise ConfigError(f"[{self.name}] {sorted(unknown)[0]}",
                              "unknown key")


_REQUIRED = object()


def parse_scenario(path: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None)
    read = parser.read(path)
    if not read:
        raise ConfigError("scenario", f"cannot read {path}")
    return _from_parser(parser)


def parse_scenario_text(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(text)
    return _from_parser(parser)


def _from_parser(parser: configparser.ConfigParser) -> ScenarioConfig:
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"[{section}]", "unknown section")

    def section(name: str) -> _Section:
        return _Section(name, dict(parser[name]) if parser.has_section(name) else {})

    sim = section("simulation")
    mode = sim.text("mode", "community")
    if mode not in ("community", "vendor"):
        raise ConfigError("[simulation] mode", f"must be community or vendor, got {mode!r}")
    topo = _topology(section("topology"))
    population = _population(section("population"), topo.regions)
    market = _market(section("market"))
    services = _services(section("services"))
    workload = _workload(section("workload"), services)
    failures, churn_mult = _failures(section("failures"))
    evo = section("evolution")
    evolution = EvolutionSpec(
        trust_out_degree=evo.integer("trust_out_degree", 3, minimum=1),
        theta=evo.number("theta", 0.5),
    )
    evo.finish()
    config = ScenarioConfig(
        seed=sim.integer("seed", 42, minimum=0),
        horizon=sim.integer("horizon", 100_000, minimum=1),
        mode=mode,
        gossip_period=sim.integer("gossip_period", 1000, minimum=1),
        heartbeat_interval=sim.integer("heartbeat_interval", 500, minimum=1),
        price_window=sim.integer("price_window", 5000, minimum=1),
        placement_window=sim.integer("placement_window", 5000, minimum=1),
        push_placement=sim.flag("push_placement", True),
        replication_r=sim.integer("replication_r", 3, minimum=1),
        dsr_r=sim.integer("dsr_r", 3, minimum=1),
        cool_down_windows=sim.integer("cool_down_windows", 3, minimum=1),
        topology=topo,
        population=population,
        market=market,
        services=services,
        workload=workload,
        failures=failures,
        churn_multiplier=churn_mult,
        evolution=evolution,
    )
    sim.finish()
    _validate(config)
    return config


def _topology(sec: _Section) -> TopologySpec:
    regions = sec.names("regions") or ("r0", "r1")
    spec = TopologySpec(
        regions=regions,
        degree=sec.integer("degree", 6, minimum=2),
        inter_region_links=sec.integer("inter_region_links", 3, minimum=1),
        intra_latency=sec.integer("intra_latency", 5, minimum=1),
        inter_latency=sec.integer("inter_latency", 50, minimum=1),
        vendor_latency=sec.integer("vendor_latency", 40, minimum=1),
        m_target=sec.integer("m_target", 5, minimum=1),
    )
    sec.finish()
    return spec


def _population(sec: _Section, regions: tuple[str, ...]) -> tuple[PopulationClass, ...]:
    out = []
    for name in sec.names("classes"):
        prefix = f"{name}."
        spread = sec.names(prefix + "regions") or regions
        for region in spread:
            if region not in regions:
                raise ConfigError(f"[population] {name}.regions",
                                  f"unknown region {region!r}")
        out.append(PopulationClass(
            name=name,
            count=sec.integer(prefix + "count", _REQUIRED, minimum=1),
            compute=sec.integer(prefix + "compute", 2, minimum=1),
            storage=sec.integer(prefix + "storage", 200, minimum=1),
            bandwidth=sec.integer(prefix + "bandwidth", 10, minimum=1),
            credit_limit=sec.integer(prefix + "credit_limit", 0, minimum=0),
            initial_balance=sec.integer(prefix + "initial_balance", 100_000),
            mean_online=sec.integer(prefix + "mean_online", 0, minimum=0),
            mean_offline=sec.integer(prefix + "mean_offline", 0, minimum=0),
            cost_factor=sec.number(prefix + "cost_factor", 1.0),
            regions=spread,
        ))
    sec.finish()
    return tuple(out)


def _market(sec: _Section) -> MarketSpec:
    spec = MarketSpec(
        alpha=sec.number("alpha", 0.5),
        p_min=sec.integer("p_min", 1, minimum=0),
        p_max=sec.integer("p_max", 1000, minimum=1),
        initial={
            "compute": Fraction(sec.integer("initial_compute", 10, minimum=1)),
            "storage": Fraction(sec.integer("initial_storage", 2, minimum=1)),
            "bandwidth": Fraction(sec.integer("initial_bandwidth", 4, minimum=1)),
        },
        minting=sec.flag("minting", False),
    )
    sec.finish()
    return spec


def _services(sec: _Section) -> tuple[ServiceEntry, ...]:
    out = []
    for name in sec.names("catalog"):
        p = f"{name}."
        declared = ResourceVector(
            sec.integer(p + "declared_compute", 4, minimum=0),
            sec.integer(p + "declared_storage", 0, minimum=0),
            sec.integer(p + "declared_bandwidth", 2, minimum=0),
        )
        actual_min = ResourceVector(
            sec.integer(p + "actual_compute_min", declared.compute, minimum=0),
            sec.integer(p + "actual_storage_min", declared.storage, minimum=0),
            sec.integer(p + "actual_bandwidth_min", declared.bandwidth, minimum=0),
        )
        actual_max = ResourceVector(
            sec.integer(p + "actual_compute_max", actual_min.compute, minimum=0),
            sec.integer(p + "actual_storage_max", actual_min.storage, minimum=0),
            sec.integer(p + "actual_bandwidth_max", actual_min.bandwidth, minimum=0),
        )
        update_at = sec.integer(p + "update_at", None)
        out.append(ServiceEntry(
            service_id=name,
            declared=declared,
            code_size=sec.integer(p + "code_size", 20, minimum=1),
            min_replicas=sec.integer(p + "min_replicas", 3, minimum=1),
            subsidy=sec.integer(p + "subsidy", 0, minimum=0),
            developer_balance=sec.integer(p + "developer_balance", 0),
            share=sec.number(p + "share", 1.0),
            actual_min=actual_min,
            actual_max=actual_max,
            chain_next=sec.text(p + "chain_next", None),
            update_at=update_at,
            update_fitness=sec.number(p + "update_fitness", None),
            fitness=sec.number(p + "fitness", 1.0),
        ))
    sec.finish()
    return tuple(out)


def _workload(sec: _Section, services: tuple[ServiceEntry, ...]) -> WorkloadSpec:
    kind = sec.text("kind", "wiki")
    if kind not in ("wiki", "video"):
        raise ConfigError("[workload] kind", f"must be wiki or video, got {kind!r}")
    spec = WorkloadSpec(
        kind=kind,
        rate=sec.number("rate", 0.01),
        read_fraction=sec.number("read_fraction", 0.95),
        pages=sec.integer("pages", 50, minimum=1),
        write_size=sec.integer("write_size", 5, minimum=1),
        session_rate=sec.number("session_rate", 0.0005),
        mean_duration=sec.integer("mean_duration", 20_000, minimum=1),
        stream_rate=sec.integer("stream_rate", 2, minimum=1),
        floor=sec.number("floor", 0.8),
        sustain_window=sec.integer("sustain_window", 2000, minimum=1),
        service=sec.text("service", services[0].service_id if services else ""),
    )
    sec.finish()
    if not 0.0 <= spec.read_fraction <= 1.0:
        raise ConfigError("[workload] read_fraction", "must be in [0, 1]")
    return spec


def _failures(sec: _Section) -> tuple[tuple[FailureEntry, ...], float]:
    out = []
    for name in sec.names("entries"):
        p = f"{name}."
        action = sec.text(p + "action", "kill")
        if action not in ("kill", "restore"):
            raise ConfigError(f"[failures] {name}.action",
                              f"must be kill or restore, got {action!r}")
        out.append(FailureEntry(
            name=name,
            at=sec.integer(p + "at", _REQUIRED, minimum=0),
            action=action,
            target=sec.text(p + "target", _REQUIRED),
        ))
    churn_mult = sec.number("churn_multiplier", 1.0)
    sec.finish()
    return tuple(out), churn_mult


def _validate(config: ScenarioConfig) -> None:
    if not config.population:
        raise ConfigError("[population] classes", "at least one class required")
    if not config.services and config.workload.kind == "wiki":
        raise ConfigError("[services] catalog", "wiki workload needs services")
    names = {s.service_id for s in config.services}
    for svc in config.services:
        if svc.chain_next is not None and svc.chain_next not in names:
            raise ConfigError(f"[services] {svc.service_id}.chain_next",
                              f"unknown service {svc.chain_next!r}")
        if svc.actual_max.is_nonnegative() and not (
                svc.actual_max.covers(svc.actual_min)):
            raise ConfigError(f"[services] {svc.service_id}.actual_*",
                              "max must cover min")
        if svc.update_at is not None and svc.update_fitness is None:
            raise ConfigError(f"[services] {svc.service_id}.update_fitness",
                              "required when update_at is set")
    if config.workload.kind == "video" and config.workload.service not in names:
        raise ConfigError("[workload] service",
                          f"unknown service {config.workload.service!r}")
    if not 0.0 < config.evolution.theta <= 1.0:
        raise ConfigError("[evolution] theta", "must be in (0, 1]")


def with_overrides(config: ScenarioConfig, seed: int | None = None,
                   horizon: int | None = None,
                   mode: str | None = None) -> ScenarioConfig:
    if seed is not None:
        config = replace(config, seed=seed)
    if horizon is not None:
        config = replace(config, horizon=horizon)
    if mode is not None:
        if mode not in ("community", "vendor"):
            raise ConfigError("mode", f"must be community or vendor, got {mode!r}")
        config = replace(config, mode=mode)
    return config
