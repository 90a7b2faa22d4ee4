"""Background tenant load, workload sampling, and flow completion times.

Background model: every VM offers ``rate_unit`` of its hypervisor's NIC
capacity (scaled by a per-tenant intensity), split evenly across its
inter-hypervisor peers. The default of 1/7 makes a 7:1 load degree offer
one full NIC per hypervisor. A virtual link therefore carries the mean of its two
endpoints' per-peer rates, and adds that rate, divided by link capacity, to
every link on its tree path. The resulting utilization is clamped to
``[0, max_utilization]`` so a flow is never fully starved by background.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import fluid
from .cache import RoutingCache
from .errors import InvalidParameterError
from .objective import (
    DEFAULT_CONFIG,
    NetworkSnapshot,
    ObjectiveConfig,
    path_for_virtual_link,
    select_best,
    virtual_links_for,
)
from .search import RoutingCandidate, VmPlacement, search_candidates, _TreeIndex
from .topology import Topology

BUILTIN_WORKLOADS = ("enterprise", "datamining")
DEFAULT_RATE_UNIT = 1.0 / 7.0
DEFAULT_ARRIVAL_LOAD = 0.1


@dataclass(frozen=True)
class FlowSizeDistribution:
    """Piecewise CDF over flow sizes in bytes.

    Mass below the first point sits at the first size; between points the
    log of the size is interpolated linearly in probability.
    """

    name: str
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(s), float(p)) for s, p in self.points)
        if not pts:
            raise InvalidParameterError("a CDF needs at least one point")
        for (s0, p0), (s1, p1) in zip(pts, pts[1:]):
            if not (s1 > s0 and p1 > p0):
                raise InvalidParameterError("CDF points must be strictly increasing in size and probability")
        if pts[0][0] <= 0 or pts[0][1] <= 0:
            raise InvalidParameterError("CDF sizes and probabilities must be positive")
        if not math.isclose(pts[-1][1], 1.0, rel_tol=0, abs_tol=1e-12):
            raise InvalidParameterError("CDF must end at probability 1")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_json(cls, name: str, text: str) -> "FlowSizeDistribution":
        return cls(name, tuple(tuple(p) for p in json.loads(text)))

    @classmethod
    def load(cls, ref: str) -> "FlowSizeDistribution":
        """Load a builtin workload by name or a JSON file of ``[size_bytes, cum_prob]`` pairs."""
        if ref in BUILTIN_WORKLOADS:
            text = resources.files("vtnroute.workloads").joinpath(f"{ref}.json").read_text()
            return cls.from_json(ref, text)
        path = Path(ref)
        if not path.exists():
            raise InvalidParameterError(f"unknown workload {ref!r}")
        return cls.from_json(path.stem, path.read_text())

    def to_json(self) -> str:
        return json.dumps([list(p) for p in self.points])

    def sample(self, rng: np.random.Generator, n: int | None = None):
        sizes = np.array([p[0] for p in self.points])
        probs = np.array([p[1] for p in self.points])
        u = rng.random(1 if n is None else n)
        out = np.rint(np.exp(np.interp(u, probs, np.log(sizes))))
        return int(out[0]) if n is None else out.astype(np.int64)


def sample_flow_size(dist: FlowSizeDistribution, rng: np.random.Generator) -> int:
    return dist.sample(rng)


@dataclass
class Flow:
    id: int
    src_host: int
    dst_host: int
    size: int  # bytes
    start: float = 0.0
    path: tuple[int, ...] = ()
    fct: float | None = None

    @property
    def starved(self) -> bool:
        return self.fct is not None and math.isinf(self.fct)


@dataclass
class Tenant:
    id: int
    vm_hosts: dict[int, int]
    placement: VmPlacement
    routing: RoutingCandidate | None = None
    vlan: int | None = None
    intensity: float = 1.0
    load: np.ndarray | None = field(default=None, repr=False)

    @property
    def vm_count(self) -> int:
        return len(self.vm_hosts)


@dataclass(frozen=True)
class BackgroundConfig:
    n_tenants: int
    vms_per_tenant: int = 20
    vtn_scale: int = 4
    target_load_degree: float | None = None
    rate_unit: float = DEFAULT_RATE_UNIT
    intensity_sigma: float = 0.0
    max_utilization: float = 0.95

    @classmethod
    def for_load(
        cls, load_degree: float, hypervisors: int, vms_per_tenant: int = 20, vtn_scale: int = 4, **kw
    ) -> "BackgroundConfig":
        """Pick the tenant count whose VMs come closest to ``load_degree`` VMs per hypervisor."""
        if load_degree < 0:
            raise InvalidParameterError("load degree must be non-negative")
        total = round(load_degree * hypervisors)
        n = max(1, round(total / vms_per_tenant)) if total else 0
        return cls(n, vms_per_tenant, vtn_scale, load_degree, **kw)

    def vm_counts(self, hypervisors: int) -> list[int]:
        """Per-tenant VM counts; spread evenly so the total hits the target load exactly."""
        if self.target_load_degree is None or self.n_tenants == 0:
            return [self.vms_per_tenant] * self.n_tenants
        total = round(self.target_load_degree * hypervisors)
        base, extra = divmod(total, self.n_tenants)
        return [base + (1 if i < extra else 0) for i in range(self.n_tenants)]


def load_degree(tenants: Sequence[Tenant], topology: Topology) -> float:
    return sum(t.vm_count for t in tenants) / len(topology.hypervisors)


def _validate_background(topology: Topology, cfg: BackgroundConfig) -> None:
    hv = len(topology.hypervisors)
    if cfg.n_tenants < 0:
        raise InvalidParameterError("tenant count must be non-negative")
    if cfg.vtn_scale < 1 or cfg.vtn_scale > hv:
        raise InvalidParameterError(f"vtn_scale must lie in 1..{hv}")
    if cfg.target_load_degree is not None and cfg.target_load_degree < 0:
        raise InvalidParameterError("load degree must be non-negative")
    if cfg.n_tenants and min(cfg.vm_counts(hv)) < cfg.vtn_scale:
        raise InvalidParameterError("each tenant needs at least vtn_scale VMs")
    if not 0 < cfg.max_utilization <= 1:
        raise InvalidParameterError("max_utilization must lie in (0, 1]")
    if cfg.target_load_degree:
        achieved = sum(cfg.vm_counts(hv)) / hv
        if abs(achieved - cfg.target_load_degree) > 0.05 * cfg.target_load_degree:
            raise InvalidParameterError(
                f"load degree {cfg.target_load_degree} is not reachable (best {achieved:.3f})"
            )


def place_tenant(
    tenant_id: int, first_vm: int, n_vms: int, hosts: Sequence[int], vtn_scale: int, rng: np.random.Generator
) -> Tenant:
    """Spread ``n_vms`` VMs over ``vtn_scale`` random hypervisors, at least one VM each."""
    chosen = rng.choice(np.asarray(hosts), size=vtn_scale, replace=False)
    assign = list(chosen) + list(rng.choice(chosen, size=n_vms - vtn_scale))
    vm_hosts = {first_vm + i: int(h) for i, h in enumerate(assign)}
    return Tenant(tenant_id, vm_hosts, VmPlacement.of(vm_hosts.values()))


def pair_rates(tenant: Tenant, rate_bps: float) -> dict[tuple[int, int], float]:
    """Aggregate offered rate (bits/s) per hypervisor pair for one tenant."""
    hosts = tenant.vm_hosts
    per_host = defaultdict(int)
    for h in hosts.values():
        per_host[h] += 1
    n = len(hosts)
    out: dict[tuple[int, int], float] = defaultdict(float)
    vm_rate = rate_bps * tenant.intensity
    # each VM's peers off its own hypervisor
    hl = sorted(per_host)
    for i, a in enumerate(hl):
        for b in hl[i + 1:]:
            da = n - per_host[a]
            db = n - per_host[b]
            per_vlink = 0.5 * (vm_rate / da + vm_rate / db)
            out[(a, b)] += per_vlink * per_host[a] * per_host[b]
    return dict(out)


def tenant_load(topology: Topology, tenant: Tenant, routing: RoutingCandidate, rate_bps: float) -> np.ndarray:
    """Per-link utilization added by ``tenant`` routed on ``routing``."""
    load = np.zeros(topology.link_count)
    if not routing.links:
        return load
    caps = np.array(topology.capacities())
    tree = _TreeIndex(topology, routing.links)
    for (a, b), rate in pair_rates(tenant, rate_bps).items():
        path = tree.node_path(a, b)[1]
        load[path] += rate / caps[path]
    return load


def _nic_rate(topology: Topology) -> float:
    caps = topology.capacities()
    return float(np.median(caps)) if caps else 0.0


def snapshot_of(tenants: Iterable[Tenant], topology: Topology, max_utilization: float = 0.95, exclude: int | None = None) -> NetworkSnapshot:
    total = np.zeros(topology.link_count)
    for t in tenants:
        if t.id != exclude and t.load is not None:
            total += t.load
    return NetworkSnapshot(np.minimum(total, max_utilization))


def generate_background(
    topology: Topology,
    cfg: BackgroundConfig,
    seed: int,
    search_fn: Callable[[VmPlacement], Sequence[RoutingCandidate]] | None = None,
    cache: RoutingCache | None = None,
    objective: ObjectiveConfig = DEFAULT_CONFIG,
) -> tuple[list[Tenant], NetworkSnapshot]:
    """Embed tenants one at a time, each on the best candidate for the evolving snapshot."""
    _validate_background(topology, cfg)
    rng = np.random.default_rng(seed)
    if search_fn is None:
        search_fn = lambda p: search_candidates(topology, p)
    cache = cache if cache is not None else RoutingCache()
    rate_bps = cfg.rate_unit * _nic_rate(topology)
    hosts = topology.hypervisors
    total = np.zeros(topology.link_count)
    tenants: list[Tenant] = []
    vm = 0
    for tid, n_vms in enumerate(cfg.vm_counts(len(hosts))):
        tenant = place_tenant(tid, vm, n_vms, hosts, cfg.vtn_scale, rng)
        vm += n_vms
        if cfg.intensity_sigma > 0:
            sig = cfg.intensity_sigma
            tenant.intensity = float(rng.lognormal(-0.5 * sig * sig, sig))
        snapshot = NetworkSnapshot(np.minimum(total, cfg.max_utilization))
        candidates, _ = cache.get_or_search(tenant.placement, search_fn)
        vlinks = virtual_links_for(tid, tenant.vm_hosts, objective.include_same_host)
        if vlinks:
            routing, _ = select_best(topology, candidates, vlinks, snapshot, objective)
        else:
            routing = candidates[0]
        tenant.routing = routing
        tenant.load = tenant_load(topology, tenant, routing, rate_bps)
        total += tenant.load
        tenants.append(tenant)
    return tenants, NetworkSnapshot(np.minimum(total, cfg.max_utilization))


# -- flows ---------------------------------------------------------------------------------


def tenant_flows(
    tenant: Tenant,
    dist: FlowSizeDistribution,
    rng: np.random.Generator,
    first_id: int = 0,
    arrival_load: float | None = None,
    nic_bps: float = 1e9,
) -> list[Flow]:
    """One flow per inter-hypervisor VM pair, sizes drawn from ``dist``.

    With ``arrival_load`` unset every flow starts at 0. Otherwise flows
    arrive in random order as a Poisson process whose offered rate is
    ``arrival_load * nic_bps`` per hypervisor of the placement.
    """
    vlinks = virtual_links_for(tenant.id, tenant.vm_hosts)
    if not vlinks:
        return []
    sizes = dist.sample(rng, len(vlinks))
    starts = np.zeros(len(vlinks))
    if arrival_load:
        order = rng.permutation(len(vlinks))
        rate = arrival_load * nic_bps * len(tenant.placement)
        gaps = rng.exponential(8.0 * sizes.mean() / rate, len(vlinks))
        starts[order] = np.cumsum(gaps) - gaps[0]
    return [
        Flow(first_id + i, v.host_a, v.host_b, int(s), float(t0))
        for i, (v, s, t0) in enumerate(zip(vlinks, sizes, starts))
    ]


def route_on_tree(topology: Topology, flows: Sequence[Flow], routing: RoutingCandidate) -> list[Flow]:
    memo: dict[tuple[int, int], tuple[int, ...]] = {}
    out = []
    for f in flows:
        key = (f.src_host, f.dst_host)
        if key not in memo:
            memo[key] = tuple(path_for_virtual_link(topology, routing, *key))
        out.append(replace(f, path=memo[key], fct=None))
    return out


def route_on_paths(flows: Sequence[Flow], paths: dict[int, Sequence[int]]) -> list[Flow]:
    return [replace(f, path=tuple(paths[f.id]), fct=None) for f in flows]


def simulate_fct(
    topology: Topology, flows: Sequence[Flow], background: NetworkSnapshot | None = None
) -> list[Flow]:
    """Max-min fair fluid simulation; each link shares ``capacity * (1 - utilization)``."""
    util = background.utilization if background is not None else np.zeros(topology.link_count)
    used = sorted({l for f in flows for l in f.path})
    local = {l: i for i, l in enumerate(used)}
    caps = np.array([topology.links[l].capacity * (1.0 - util[l]) for l in used], dtype=float)
    for f in flows:
        for a, b in zip(f.path, f.path[1:]):
            la, lb = topology.links[a], topology.links[b]
            if not ({la.a, la.b} & {lb.a, lb.b}):
                raise InvalidParameterError(f"flow {f.id} path is not contiguous")
    paths = [[local[l] for l in f.path] for f in flows]
    sizes = [8.0 * f.size for f in flows]
    starts = [f.start for f in flows]
    finish, _ = fluid.simulate(caps, paths, sizes, starts)
    return [replace(f, fct=float(fin - f.start)) for f, fin in zip(flows, finish)]


def fct_summary(flows: Sequence[Flow]) -> tuple[float, int]:
    """``(mean fct over non-starved flows, starved count)``."""
    if not flows:
        raise InvalidParameterError("no flows to average")
    done = [f.fct for f in flows if f.fct is not None and not math.isinf(f.fct)]
    starved = sum(1 for f in flows if f.fct is not None and math.isinf(f.fct))
    if not done:
        raise InvalidParameterError("every flow is starved")
    return float(sum(done) / len(done)), starved


def average_fct(flows: Sequence[Flow]) -> float:
    return fct_summary(flows)[0]


FLOW_TRACE_FIELDS = ("flow_id", "src", "dst", "size", "start", "fct", "algorithm", "seed")


def write_flow_trace(flows: Sequence[Flow], algorithm: str, seed: int, out: io.TextIOBase | None = None) -> str:
    buf = out if out is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FLOW_TRACE_FIELDS)
    for f in flows:
        w.writerow([f.id, f.src_host, f.dst_host, f.size, repr(f.start), repr(f.fct), algorithm, seed])
    return buf.getvalue() if out is None else ""
