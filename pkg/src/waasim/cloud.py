"""Simulated IaaS provider: VM catalog, instance lifecycle with delays,
per-second billing and the periodic idle-termination scan."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .errors import ConfigError, IllegalState
from .units import ceil_whole_seconds, nanos, usec

PROVISIONING = "provisioning"
IDLE = "idle"
BUSY = "busy"
TERMINATED = "terminated"


@dataclass(frozen=True)
class VmType:
    """A purchasable machine class.

    A task's runtime on this type is reference_runtime / speed_factor.
    """

    name: str
    vcpus: int
    memory_mb: int
    price_per_second: float
    speed_factor: float

    def __post_init__(self) -> None:
        if self.price_per_second <= 0:
            raise ConfigError(f"vm type {self.name!r}: price must be > 0")
        if self.speed_factor <= 0:
            raise ConfigError(f"vm type {self.name!r}: speed_factor must be > 0")

    @property
    def price_nanos(self) -> int:
        return nanos(self.price_per_second)


@dataclass(frozen=True)
class VariabilityConfig:
    mode: str = "none"  # "none" or "lognormal"
    sigma: float = 0.0


# Per-second prices of the T2 worker-node family; speed factors are
# synthetic defaults preserving the faster-is-pricier total order.
def default_catalog() -> tuple[VmType, ...]:
    return (
        VmType("t2.micro", 1, 1024, 0.0000041, 1.0),
        VmType("t2.small", 1, 2048, 0.0000082, 1.2),
        VmType("t2.medium", 2, 4096, 0.0000164, 1.6),
        VmType("t2.large", 2, 8192, 0.0000382, 2.0),
    )


@dataclass
class CloudConfig:
    catalog: tuple[VmType, ...] = field(default_factory=default_catalog)
    provisioning_delay: float = 90.0
    deprovisioning_delay: float = 10.0
    idle_threshold: float = 60.0
    scan_interval: float = 10.0
    variability: VariabilityConfig = field(default_factory=VariabilityConfig)
    bill_provisioning: bool = False

    def __post_init__(self) -> None:
        if not self.catalog:
            raise ConfigError("catalog must be non-empty")
        names = [t.name for t in self.catalog]
        if len(set(names)) != len(names):
            raise ConfigError("catalog names must be unique")
        if self.provisioning_delay < 0 or self.deprovisioning_delay < 0:
            raise ConfigError("delays must be >= 0")
        if self.idle_threshold <= 0:
            raise ConfigError("idle_threshold must be > 0")
        if self.scan_interval <= 0:
            raise ConfigError("scan_interval must be > 0")
        if self.variability.mode not in ("none", "lognormal"):
            raise ConfigError(f"unknown variability mode {self.variability.mode!r}")

    @property
    def fastest_type(self) -> VmType:
        return max(self.catalog, key=lambda t: (t.speed_factor, -t.price_per_second, t.name))

    @property
    def cheapest_type(self) -> VmType:
        return min(self.catalog, key=lambda t: (t.price_per_second, -t.speed_factor, t.name))

    def vm_type(self, name: str) -> VmType:
        for t in self.catalog:
            if t.name == name:
                return t
        raise ConfigError(f"unknown vm type {name!r}")

    @property
    def provisioning_delay_us(self) -> int:
        return usec(self.provisioning_delay)

    @property
    def deprovisioning_delay_us(self) -> int:
        return usec(self.deprovisioning_delay)

    @property
    def idle_threshold_us(self) -> int:
        return usec(self.idle_threshold)

    @property
    def scan_interval_us(self) -> int:
        return usec(self.scan_interval)


def task_runtime_on(vm_type: VmType, reference_runtime: float,
                    rng: random.Random | None = None,
                    variability: VariabilityConfig | None = None) -> float:
    """Execution time of a task on a VM type, optionally perturbed by a
    multiplicative lognormal factor (one gauss draw per call)."""
    if reference_runtime <= 0:
        raise ValueError("reference_runtime must be > 0")
    base = reference_runtime / vm_type.speed_factor
    if variability is None or variability.mode == "none" or variability.sigma == 0.0:
        return base
    if rng is None:
        raise ValueError("lognormal variability requires an RNG")
    return base * math.exp(rng.gauss(0.0, variability.sigma))


def estimated_cost_nanos(vm_type: VmType, est_runtime_us: int) -> int:
    """Per-second billing estimate: whole seconds rounded up times unit price."""
    return ceil_whole_seconds(est_runtime_us) * vm_type.price_nanos


def estimated_task_cost(vm_type: VmType, est_runtime: float) -> float:
    if est_runtime <= 0:
        raise ValueError("est_runtime must be > 0")
    return estimated_cost_nanos(vm_type, usec(est_runtime)) / 1e9


@dataclass
class VmInstance:
    """A leased machine with lease, idle and billing accounting."""

    id: str
    vm_type: VmType
    state: str
    lease_start_us: int
    available_at_us: int
    billing_start_us: int
    idle_since_us: int | None = None
    busy_until_us: int | None = None
    bound_task: tuple[str, str] | None = None  # (workflow id, task id)
    busy_usec: int = 0
    billed_seconds: int = 0
    bill_nanos: int = 0
    terminated_at_us: int | None = None
    release_at_us: int | None = None

    def idle_duration(self, now_us: int) -> int:
        return now_us - self.idle_since_us if self.idle_since_us is not None else 0


def finalize_billing(vm: VmInstance, termination_time_us: int) -> int:
    """Close out a lease: ceil of active seconds times the unit price.

    Active lease time starts at the instance's billing start (by default
    its availability instant, excluding the provisioning delay).
    """
    if vm.state == TERMINATED:
        raise IllegalState(f"{vm.id} is already terminated")
    active_us = max(0, termination_time_us - vm.billing_start_us)
    vm.billed_seconds = ceil_whole_seconds(active_us)
    vm.bill_nanos = vm.billed_seconds * vm.vm_type.price_nanos
    return vm.bill_nanos


class Fleet:
    """All instances ever leased by one simulation, live and terminated."""

    def __init__(self, config: CloudConfig):
        self.config = config
        self.instances: dict[str, VmInstance] = {}
        self._seq = 0

    def provision(self, vm_type: VmType, now_us: int) -> VmInstance:
        self._seq += 1
        available = now_us + self.config.provisioning_delay_us
        vm = VmInstance(
            id=f"vm-{self._seq:04d}",
            vm_type=vm_type,
            state=PROVISIONING,
            lease_start_us=now_us,
            available_at_us=available,
            billing_start_us=now_us if self.config.bill_provisioning else available,
        )
        self.instances[vm.id] = vm
        return vm

    def mark_available(self, vm: VmInstance, now_us: int) -> None:
        if vm.state != PROVISIONING:
            raise IllegalState(f"{vm.id}: available while {vm.state}")
        vm.state = IDLE
        vm.idle_since_us = now_us

    def start_task(self, vm: VmInstance, now_us: int, runtime_us: int) -> None:
        if vm.state != IDLE:
            raise IllegalState(f"{vm.id}: cannot start task while {vm.state}")
        vm.state = BUSY
        vm.idle_since_us = None
        vm.busy_until_us = now_us + runtime_us
        vm.busy_usec += runtime_us

    def finish_task(self, vm: VmInstance, now_us: int) -> None:
        if vm.state != BUSY:
            raise IllegalState(f"{vm.id}: cannot finish task while {vm.state}")
        vm.state = IDLE
        vm.busy_until_us = None
        vm.bound_task = None
        vm.idle_since_us = now_us

    def terminate(self, vm: VmInstance, now_us: int) -> int:
        bill = finalize_billing(vm, now_us)
        vm.state = TERMINATED
        vm.idle_since_us = None
        vm.busy_until_us = None
        vm.terminated_at_us = now_us
        vm.release_at_us = now_us + self.config.deprovisioning_delay_us
        return bill

    def idle_scan(self, now_us: int) -> list[VmInstance]:
        """Terminate every idle instance whose idle time reached the
        threshold; busy and provisioning instances are untouched."""
        expired = [
            vm for vm in self.instances.values()
            if vm.state == IDLE and vm.idle_duration(now_us) >= self.config.idle_threshold_us
        ]
        for vm in expired:
            self.terminate(vm, now_us)
        return expired

    def idle_instances(self) -> list[VmInstance]:
        return [vm for vm in self.instances.values() if vm.state == IDLE]

    def live_count(self) -> int:
        return sum(1 for vm in self.instances.values() if vm.state != TERMINATED)

    def unreleased(self, now_us: int) -> list[VmInstance]:
        """Instances still held: live, or terminated but not yet past the
        deprovisioning delay."""
        return [
            vm for vm in self.instances.values()
            if vm.state != TERMINATED or vm.release_at_us > now_us
        ]

    def total_bill_nanos(self) -> int:
        return sum(vm.bill_nanos for vm in self.instances.values())

    def counts_by_type(self) -> dict[str, int]:
        counts = {t.name: 0 for t in self.config.catalog}
        for vm in self.instances.values():
            counts[vm.vm_type.name] += 1
        return counts
