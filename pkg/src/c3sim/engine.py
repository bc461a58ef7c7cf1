"""Deterministic discrete-event core.

The clock is a virtual integer tick (one tick is one virtual millisecond).
Events fire in (fire_at, seq) order where seq is a monotone counter assigned
at scheduling time, so ties at the same tick resolve in scheduling order and
a run is a pure function of (seed, configuration).

Randomness is drawn from named streams. Each stream seeds an independent
Mersenne Twister from the first eight bytes of SHA-256("<master>:<label>"),
which keeps draw sequences identical across platforms and decouples the
modules from each other: adding draws to one stream never perturbs another.
"""
from __future__ import annotations

import hashlib
import heapq
import logging
import random
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

SimTime = int


class PastEvent(Exception):
    """Raised when an event is scheduled before the current clock."""


def derive_seed(master_seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class RngStream(random.Random):
    """Named random stream derived from the master seed."""

    # random.Random.__new__ rejects a second positional argument
    def __new__(cls, master_seed: int = 0, label: str = ""):
        return super().__new__(cls)

    def __init__(self, master_seed: int, label: str):
        self.label = label
        super().__init__(derive_seed(master_seed, label))
        self._master_seed = master_seed

    def fork(self, sublabel: str) -> "RngStream":
        return RngStream(self._master_seed, f"{self.label}/{sublabel}")


@dataclass(slots=True, eq=False)
class Event:
    fire_at: SimTime
    seq: int
    kind: str
    payload: dict = field(default_factory=dict)
    cancelled: bool = False


@dataclass(frozen=True)
class RunSummary:
    final_clock: SimTime
    total_processed: int
    counts: dict[str, int]


class Simulator:
    """Event queue, clock and stream registry for one run."""

    def __init__(self, seed: int, horizon: SimTime, record_log: bool = False):
        if horizon < 0:
            raise ValueError("horizon must be non-negative")
        self.seed = seed
        self.horizon = horizon
        self.now: SimTime = 0
        self.record_log = record_log
        self.processed_log: list[tuple[SimTime, int, str]] = []
        self._heap: list[tuple[SimTime, int, Event]] = []
        self._seq = 0
        self._streams: dict[str, RngStream] = {}
        self._handlers: dict[str, list] = {}
        self._counts: dict[str, int] = {}
        self._total = 0

    def stream(self, label: str) -> RngStream:
        try:
            return self._streams[label]
        except KeyError:
            s = self._streams[label] = RngStream(self.seed, label)
            return s

    def subscribe(self, kind: str, handler) -> None:
        self._handlers.setdefault(kind, []).append(handler)

    def schedule(self, event: Event) -> Event:
        if event.fire_at < self.now:
            raise PastEvent(f"{event.kind} at {event.fire_at} < clock {self.now}")
        event.seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, (event.fire_at, event.seq, event))
        return event

    def at(self, fire_at: SimTime, kind: str, **payload) -> Event:
        return self.schedule(Event(fire_at=fire_at, seq=0, kind=kind, payload=payload))

    def after(self, delay: SimTime, kind: str, **payload) -> Event:
        return self.at(self.now + delay, kind, **payload)

    def cancel(self, event: Event) -> bool:
        """Mark a pending event dead. Returns False if it already fired."""
        if event.cancelled or event.fire_at < self.now:
            return False
        event.cancelled = True
        return True

    def run(self, until: SimTime | None = None) -> RunSummary:
        """Process every event with fire_at <= until (capped at the horizon)."""
        if until is None:
            until = self.horizon
        until = min(until, self.horizon)
        heap = self._heap
        while heap and heap[0][0] <= until:
            fire_at, seq, event = heapq.heappop(heap)
            if event.cancelled:
                continue
            self.now = fire_at
            self._total += 1
            self._counts[event.kind] = self._counts.get(event.kind, 0) + 1
            if self.record_log:
                self.processed_log.append((fire_at, seq, event.kind))
            for handler in self._handlers.get(event.kind, ()):
                handler(event)
        if until > self.now:
            self.now = until
        return self.summary()

    def summary(self) -> RunSummary:
        return RunSummary(
            final_clock=self.now,
            total_processed=self._total,
            counts=dict(sorted(self._counts.items())),
        )
