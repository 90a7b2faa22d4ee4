"""Congestion objective for ranking routing candidates.

A candidate's score is the mean over the tenant's virtual links of
``weight * F(path)``, where ``F`` is the congestion experienced along the
virtual link's tree path. The divisor is the number of virtual links, not
the weight sum, so non-uniform weights do not renormalize.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidParameterError, NoCandidateError
from .search import RoutingCandidate, _TreeIndex
from .topology import Topology


class FVariant(str, Enum):
    MAX_UTIL = "max_util"
    SUM_UTIL = "sum_util"
    HOPS = "hops"


@dataclass(frozen=True)
class VirtualLink:
    tenant: int
    vm_a: int
    vm_b: int
    host_a: int
    host_b: int
    weight: float = 1.0

    def __post_init__(self):
        if self.weight < 0:
            raise InvalidParameterError("virtual link weight must be non-negative")


@dataclass(frozen=True)
class ObjectiveConfig:
    f_variant: FVariant = FVariant.MAX_UTIL
    weights: str | tuple[float, ...] = "uniform"
    include_same_host: bool = False

    @classmethod
    def from_dict(cls, data: Mapping | None) -> "ObjectiveConfig":
        if not data:
            return cls()
        f = data.get("f", "max_util")
        lam = data.get("lambda", "uniform")
        if lam != "uniform":
            lam = tuple(float(x) for x in lam)
        return cls(FVariant(f), lam, bool(data.get("include_same_host", False)))

    def to_dict(self) -> dict:
        lam = self.weights if isinstance(self.weights, str) else list(self.weights)
        return {"f": self.f_variant.value, "lambda": lam, "include_same_host": self.include_same_host}

    def apply_weights(self, vlinks: Sequence[VirtualLink]) -> list[VirtualLink]:
        if self.weights == "uniform":
            return list(vlinks)
        if len(self.weights) != len(vlinks):
            raise InvalidParameterError("per-link weights must match the virtual-link count")
        return [
            VirtualLink(v.tenant, v.vm_a, v.vm_b, v.host_a, v.host_b, w)
            for v, w in zip(vlinks, self.weights)
        ]


DEFAULT_CONFIG = ObjectiveConfig()


@dataclass
class NetworkSnapshot:
    """Average utilization of every physical link, clamped to [0, 1]."""

    utilization: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.utilization = np.clip(np.asarray(self.utilization, dtype=float), 0.0, 1.0)

    @classmethod
    def zeros(cls, topology: Topology) -> "NetworkSnapshot":
        return cls(np.zeros(topology.link_count))

    @classmethod
    def from_mapping(cls, topology: Topology, values: Mapping[int, float]) -> "NetworkSnapshot":
        u = np.zeros(topology.link_count)
        for lid, v in values.items():
            u[lid] = v
        return cls(u)

    def __getitem__(self, lid: int) -> float:
        return float(self.utilization[lid])

    def to_dict(self) -> dict:
        return {"utilization": self.utilization.tolist()}


def virtual_links_for(
    tenant: int,
    vm_hosts: Mapping[int, int],
    include_same_host: bool = False,
    weight: float = 1.0,
) -> list[VirtualLink]:
    """One virtual link per VM pair, ordered by (vm_a, vm_b)."""
    out = []
    for a, b in combinations(sorted(vm_hosts), 2):
        ha, hb = vm_hosts[a], vm_hosts[b]
        if ha == hb and not include_same_host:
            continue
        out.append(VirtualLink(tenant, a, b, ha, hb, weight))
    return out


def path_for_virtual_link(
    topology: Topology, candidate: RoutingCandidate, host_a: int, host_b: int
) -> list[int]:
    """The unique tree path between two spanned hypervisors, as ordered link ids."""
    spanned = candidate.placement.hypervisors
    for h in (host_a, host_b):
        if h not in spanned:
            raise InvalidParameterError(f"hypervisor {h} is not spanned by the candidate")
    if host_a == host_b:
        return []
    res = _TreeIndex(topology, candidate.links).node_path(host_a, host_b)
    if res is None:
        raise InvalidParameterError("candidate does not connect the two hypervisors")
    return res[1]


def _f_of_path(path: Sequence[int], snapshot: NetworkSnapshot, variant: FVariant) -> float:
    if not path:
        return 0.0
    if variant is FVariant.MAX_UTIL:
        return float(max(snapshot.utilization[lid] for lid in path))
    if variant is FVariant.SUM_UTIL:
        return float(sum(snapshot.utilization[lid] for lid in path))
    return float(len(path))


def congestion_of_virtual_link(
    topology: Topology,
    candidate: RoutingCandidate,
    vlink: VirtualLink,
    snapshot: NetworkSnapshot,
    config: ObjectiveConfig = DEFAULT_CONFIG,
) -> float:
    path = path_for_virtual_link(topology, candidate, vlink.host_a, vlink.host_b)
    return _f_of_path(path, snapshot, config.f_variant)


class _Scorer:
    """Scores many candidates for one vlink set, grouping vlinks by host pair."""

    def __init__(self, vlinks: Sequence[VirtualLink], config: ObjectiveConfig):
        if not vlinks:
            raise InvalidParameterError("score needs at least one virtual link")
        vlinks = config.apply_weights(vlinks)
        self.n = len(vlinks)
        self.variant = config.f_variant
        pairs: dict[tuple[int, int], float] = defaultdict(float)
        for v in vlinks:
            if v.host_a != v.host_b:
                pairs[(min(v.host_a, v.host_b), max(v.host_a, v.host_b))] += v.weight
        self.pairs = sorted(pairs.items())

    def score(self, topology: Topology, candidate: RoutingCandidate, snapshot: NetworkSnapshot) -> float:
        if not self.pairs:
            return 0.0
        spanned = set(candidate.placement.hypervisors)
        tree = _TreeIndex(topology, candidate.links)
        total = 0.0
        for (a, b), w in self.pairs:
            if a not in spanned or b not in spanned:
                raise InvalidParameterError(f"virtual link hosts {a},{b} are not spanned")
            res = tree.node_path(a, b)
            if res is None:
                raise InvalidParameterError("candidate does not connect the two hypervisors")
            total += w * _f_of_path(res[1], snapshot, self.variant)
        return total / self.n


def score(
    topology: Topology,
    candidate: RoutingCandidate,
    vlinks: Sequence[VirtualLink],
    snapshot: NetworkSnapshot,
    config: ObjectiveConfig = DEFAULT_CONFIG,
) -> float:
    return _Scorer(vlinks, config).score(topology, candidate, snapshot)


def select_best(
    topology: Topology,
    candidates: Iterable[RoutingCandidate],
    vlinks: Sequence[VirtualLink],
    snapshot: NetworkSnapshot,
    config: ObjectiveConfig = DEFAULT_CONFIG,
) -> tuple[RoutingCandidate, float]:
    """Lowest-scoring candidate; ties go to the canonical (common node, links) order."""
    ordered = sorted(candidates, key=lambda c: c.sort_key)
    if not ordered:
        raise NoCandidateError("no routing candidates to select from")
    scorer = _Scorer(vlinks, config)
    best, best_score = None, float("inf")
    for cand in ordered:
        s = scorer.score(topology, cand, snapshot)
        if s < best_score:
            best, best_score = cand, s
    if best is None:  # every score was inf/nan
        best = ordered[0]
        best_score = scorer.score(topology, best, snapshot)
    return best, best_score


def score_all(
    topology: Topology,
    candidates: Sequence[RoutingCandidate],
    vlinks: Sequence[VirtualLink],
    snapshot: NetworkSnapshot,
    config: ObjectiveConfig = DEFAULT_CONFIG,
) -> list[float]:
    scorer = _Scorer(vlinks, config)
    return [scorer.score(topology, c, snapshot) for c in candidates]
