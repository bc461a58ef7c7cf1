"""Resource amounts shared by every layer of the simulator.

Amounts are integer units: compute units (work), storage units (occupancy)
and bandwidth units (transfer volume). Rates are expressed per tick where a
rate is meant; the vector itself is unit-agnostic.
"""
from __future__ import annotations

from dataclasses import dataclass

RESOURCE_KINDS = ("compute", "storage", "bandwidth")


@dataclass(frozen=True, slots=True)
class ResourceVector:
    compute: int = 0
    storage: int = 0
    bandwidth: int = 0

    def __add__(self, other: ResourceVector) -> ResourceVector:
        return ResourceVector(
            self.compute + other.compute,
            self.storage + other.storage,
            self.bandwidth + other.bandwidth,
        )

    def __sub__(self, other: ResourceVector) -> ResourceVector:
        return ResourceVector(
            self.compute - other.compute,
            self.storage - other.storage,
            self.bandwidth - other.bandwidth,
        )

    def covers(self, required: ResourceVector) -> bool:
        """True when every component is at least the required amount."""
        return (
            self.compute >= required.compute
            and self.storage >= required.storage
            and self.bandwidth >= required.bandwidth
        )

    def exceeds(self, budget: ResourceVector) -> bool:
        """True when any component is strictly over the budget."""
        return (
            self.compute > budget.compute
            or self.storage > budget.storage
            or self.bandwidth > budget.bandwidth
        )

    def is_nonnegative(self) -> bool:
        return self.compute >= 0 and self.storage >= 0 and self.bandwidth >= 0

    def get(self, kind: str) -> int:
        if kind not in RESOURCE_KINDS:
            raise KeyError(kind)
        return getattr(self, kind)

    def as_dict(self) -> dict[str, int]:
        return {k: getattr(self, k) for k in RESOURCE_KINDS}


ZERO = ResourceVector()
