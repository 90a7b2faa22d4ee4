"""Comparison routings: utilization-weighted Prim tree, flow-level ECMP, random pick."""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import InvalidParameterError, NoCandidateError
from .objective import NetworkSnapshot
from .search import RoutingCandidate, VmPlacement, _apex, _as_placement
from .topology import Topology, equal_cost_shortest_paths

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class BaselineResult:
    algorithm: str
    routing: RoutingCandidate | None = None
    paths: Mapping[int, tuple[int, ...]] | None = None


def prim_tree(topology: Topology, start: int, weights: Sequence[float]) -> list[int]:
    """Prim's spanning tree of ``start``'s component; ties go to the lower link id."""
    in_tree = [False] * topology.node_count
    in_tree[start] = True
    heap: list[tuple[float, int, int]] = []
    for v, lid in topology.adjacency[start]:
        heapq.heappush(heap, (float(weights[lid]), lid, v))
    tree: list[int] = []
    while heap:
        w, lid, v = heapq.heappop(heap)
        if in_tree[v]:
            continue
        in_tree[v] = True
        tree.append(lid)
        for x, l2 in topology.adjacency[v]:
            if not in_tree[x]:
                heapq.heappush(heap, (float(weights[l2]), l2, x))
    return tree


def prune_to(topology: Topology, links: Iterable[int], keep: set[int]) -> set[int]:
    """Repeatedly drop leaves that are not in ``keep``."""
    links = set(links)
    incident: dict[int, set[int]] = {}
    for lid in links:
        link = topology.links[lid]
        incident.setdefault(link.a, set()).add(lid)
        incident.setdefault(link.b, set()).add(lid)
    stack = [n for n, ls in incident.items() if len(ls) == 1 and n not in keep]
    while stack:
        n = stack.pop()
        if len(incident[n]) != 1:
            continue
        (lid,) = incident[n]
        other = topology.links[lid].other(n)
        links.discard(lid)
        incident[n].clear()
        incident[other].discard(lid)
        if len(incident[other]) == 1 and other not in keep:
            stack.append(other)
    return links


def local_mst(
    topology: Topology, placement: VmPlacement | Iterable[int], snapshot: NetworkSnapshot
) -> RoutingCandidate:
    """Search-and-optimize-coupled baseline.

    Prim's algorithm over the whole topology with link utilization as the
    edge weight, started from the lowest placement hypervisor, then pruned
    until every leaf is a placement hypervisor. The recorded common node is
    the lowest-height node of the pruned tree.
    """
    placement = _as_placement(placement)
    hosts = placement.hypervisors
    if len(hosts) == 1:
        return RoutingCandidate((), hosts[0], placement)
    tree = prim_tree(topology, hosts[0], snapshot.utilization)
    reached = topology.nodes_of(tree) | {hosts[0]}
    missing = [h for h in hosts if h not in reached]
    if missing:
        raise InvalidParameterError(f"placement is disconnected (unreachable: {missing})")
    kept = prune_to(topology, tree, set(hosts))
    return RoutingCandidate(tuple(sorted(kept)), _apex(topology, topology.nodes_of(kept)), placement)


def mix64(x: int) -> int:
    """SplitMix64 finalizer."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def ecmp_index(flow_id: int, seed: int, n_paths: int) -> int:
    return mix64((flow_id & MASK64) ^ mix64(seed & MASK64)) % n_paths


def ecmp_assign(topology: Topology, flows: Sequence, seed: int) -> dict[int, tuple[int, ...]]:
    """Hash every flow onto one of its equal-cost shortest paths.

    ``flows`` need ``id``, ``src_host`` and ``dst_host`` attributes.
    Same-host flows get an empty path.
    """
    memo: dict[tuple[int, int], list[list[int]]] = {}
    out: dict[int, tuple[int, ...]] = {}
    for f in flows:
        a, b = f.src_host, f.dst_host
        if a == b:
            out[f.id] = ()
            continue
        key = (a, b)
        if key not in memo:
            memo[key] = equal_cost_shortest_paths(topology, a, b)
        paths = memo[key]
        if not paths:
            raise InvalidParameterError(f"hypervisors {a} and {b} are disconnected")
        out[f.id] = tuple(paths[ecmp_index(f.id, seed, len(paths))])
    return out


def bottomline(candidates: Sequence[RoutingCandidate], seed: int) -> RoutingCandidate:
    """Uniformly random candidate, reproducible per seed."""
    if not candidates:
        raise NoCandidateError("no routing candidates to choose from")
    return candidates[random.Random(seed).randrange(len(candidates))]
