"""Routing-update pipeline, VLAN allocation and batch configuration latency.

A routing update goes cache -> search -> select -> plan. The plan is the set
of switch ports that must carry the tenant's VLAN tag. Switch configuration
time is modeled per switch as ``t_base + epsilon * (tasks - 1)``, with
different switches configured in parallel.
"""

from __future__ import annotations

import heapq
import json
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

from .cache import RoutingCache
from .errors import InvalidParameterError, NoCandidateError, VlanExhaustedError
from .objective import DEFAULT_CONFIG, NetworkSnapshot, ObjectiveConfig, VirtualLink, select_best
from .search import RoutingCandidate, VmPlacement, _as_placement, search_candidates
from .topology import Topology

VLAN_MIN = 1
VLAN_MAX = 4094


class Trigger(str, Enum):
    NEW_TENANT = "new_tenant"
    CONGESTION = "congestion"
    FAILURE = "failure"
    DEPARTURE = "departure"
    REBALANCE = "rebalance"


@dataclass(frozen=True)
class UpdateRequest:
    """Re-route one tenant.

    ``vlinks`` defaults to one virtual link per pair of placement
    hypervisors, which scores every host pair once.
    """

    tenant: int
    placement: VmPlacement
    objective: ObjectiveConfig = DEFAULT_CONFIG
    trigger: Trigger = Trigger.NEW_TENANT
    vlinks: tuple[VirtualLink, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "placement", _as_placement(self.placement))
        object.__setattr__(self, "trigger", Trigger(self.trigger))

    def virtual_links(self) -> list[VirtualLink]:
        if self.vlinks is not None:
            return list(self.vlinks)
        hosts = self.placement.hypervisors
        return [
            VirtualLink(self.tenant, i, j, hosts[i], hosts[j])
            for i in range(len(hosts))
            for j in range(i + 1, len(hosts))
        ]


@dataclass(frozen=True, order=True)
class ConfigTask:
    switch: int
    port: int
    vlan: int

    def __post_init__(self):
        if not VLAN_MIN <= self.vlan <= VLAN_MAX:
            raise InvalidParameterError(f"vlan {self.vlan} outside {VLAN_MIN}..{VLAN_MAX}")

    def to_dict(self) -> dict:
        return {"switch": self.switch, "port": self.port, "vlan": self.vlan}


def plan_config(topology: Topology, candidate: RoutingCandidate, vlan: int) -> list[ConfigTask]:
    """One task per (switch, incident candidate link), sorted by switch then port."""
    tasks = []
    for lid in candidate.links:
        link = topology.links[lid]
        for node in (link.a, link.b):
            if not topology.is_hypervisor(node):
                tasks.append(ConfigTask(node, lid, vlan))
    return sorted(tasks)


def dump_plan(tasks: Sequence[ConfigTask]) -> str:
    return json.dumps([t.to_dict() for t in tasks])


class VlanAllocator:
    """Lowest-free VLAN tag allocation over 1..4094."""

    def __init__(self, low: int = VLAN_MIN, high: int = VLAN_MAX):
        if not VLAN_MIN <= low <= high <= VLAN_MAX:
            raise InvalidParameterError("vlan range must lie within 1..4094")
        self._free = list(range(low, high + 1))
        self._live: set[int] = set()
        self._lock = threading.Lock()

    def allocate(self) -> int:
        with self._lock:
            if not self._free:
                raise VlanExhaustedError("no free VLAN tags left")
            tag = heapq.heappop(self._free)
            self._live.add(tag)
            return tag

    def release(self, tag: int) -> None:
        with self._lock:
            if tag not in self._live:
                raise InvalidParameterError(f"vlan {tag} is not allocated")
            self._live.remove(tag)
            heapq.heappush(self._free, tag)

    @property
    def live(self) -> frozenset[int]:
        return frozenset(self._live)

    def __len__(self) -> int:
        return len(self._live)


@dataclass(frozen=True)
class LatencyModel:
    t_base: float = 10.0
    epsilon: float = 0.005

    def __post_init__(self):
        if not self.t_base > 0:
            raise InvalidParameterError("t_base must be positive")
        if self.epsilon < 0:
            raise InvalidParameterError("epsilon must be non-negative")

    @classmethod
    def from_dict(cls, data: dict | None) -> "LatencyModel":
        if not data:
            return cls()
        return cls(float(data.get("t_base", 10.0)), float(data.get("epsilon", 0.005)))


def batch_latency(tasks: Iterable[ConfigTask], model: LatencyModel = LatencyModel()) -> float:
    """Seconds to apply ``tasks``: switches run in parallel, each batching its own tasks."""
    per_switch: dict[int, int] = {}
    for t in tasks:
        per_switch[t.switch] = per_switch.get(t.switch, 0) + 1
    if not per_switch:
        return 0.0
    return max(model.t_base + model.epsilon * (n - 1) for n in per_switch.values())


@dataclass
class UpdateResult:
    routing: RoutingCandidate
    plan: list[ConfigTask]
    was_cache_hit: bool
    score: float
    vlan: int | None
    released: RoutingCandidate | None = None


@dataclass
class _TenantState:
    vlan: int | None = None
    routing: RoutingCandidate | None = None
    plan: list[ConfigTask] = field(default_factory=list)


class RoutingPipeline:
    """Serial routing-update pipeline over one topology, cache and VLAN pool.

    ``search_calls`` counts invocations of the search function, so a cache
    hit can be checked to do no search work. The new routing is planned
    before the old one is released.
    """

    def __init__(
        self,
        topology: Topology,
        cache: RoutingCache | None = None,
        search_fn: Callable[[VmPlacement], Sequence[RoutingCandidate]] | None = None,
        vlans: VlanAllocator | None = None,
    ):
        self.topology = topology
        self.cache = cache if cache is not None else RoutingCache()
        self._search = search_fn or (lambda p: search_candidates(topology, p))
        self.vlans = vlans or VlanAllocator()
        self.search_calls = 0
        self.tenants: dict[int, _TenantState] = {}

    def _counted_search(self, placement: VmPlacement) -> Sequence[RoutingCandidate]:
        self.search_calls += 1
        return self._search(placement)

    def handle_update(self, request: UpdateRequest, snapshot: NetworkSnapshot, now: float = 0.0) -> UpdateResult:
        state = self.tenants.get(request.tenant)
        if request.trigger is Trigger.DEPARTURE:
            if state is None:
                raise InvalidParameterError(f"tenant {request.tenant} is not embedded")
            released = state.routing
            if state.vlan is not None:
                self.vlans.release(state.vlan)
            del self.tenants[request.tenant]
            return UpdateResult(released, [], False, float("nan"), None, released)

        candidates, hit = self.cache.get_or_search(request.placement, self._counted_search, now)
        if not candidates:
            raise NoCandidateError(f"no desired routing for placement {request.placement.hypervisors}")
        vlinks = request.virtual_links()
        if vlinks:
            routing, score = select_best(self.topology, candidates, vlinks, snapshot, request.objective)
        else:
            routing, score = min(candidates, key=lambda c: c.sort_key), 0.0

        if request.trigger is Trigger.NEW_TENANT and (state is None or state.vlan is None):
            vlan = self.vlans.allocate()
            state = state or _TenantState()
            state.vlan = vlan
        elif state is None or state.vlan is None:
            raise InvalidParameterError(
                f"tenant {request.tenant} has no VLAN; its first update must be new_tenant"
            )
        plan = plan_config(self.topology, routing, state.vlan)
        released = state.routing
        state.routing, state.plan = routing, plan
        self.tenants[request.tenant] = state
        return UpdateResult(routing, plan, hit, score, state.vlan, released)


def handle_update(
    request: UpdateRequest,
    topology: Topology,
    snapshot: NetworkSnapshot,
    cache: RoutingCache,
    pipeline: RoutingPipeline | None = None,
) -> tuple[RoutingCandidate, list[ConfigTask], bool]:
    """Functional wrapper; a throwaway pipeline is used when none is given."""
    pipeline = pipeline or RoutingPipeline(topology, cache)
    res = pipeline.handle_update(request, snapshot)
    return res.routing, res.plan, res.was_cache_hit
