"""Exhaustive enumeration of desired routings for a VM placement.

A routing is *desired* when the tree path between any two hypervisors of the
placement climbs strictly upward (decreasing height) to a single apex and then
descends strictly. Every such tree hangs off one *common node*: a node with a
strictly height-increasing path to every hypervisor in the placement.

:func:`search_candidates` builds the upward graph of every hypervisor,
intersects their node sets to get the common nodes, and for each common node
combines one downward straight path per hypervisor. :func:`brute_force_candidates`
is an exponential oracle that checks the same definition directly on subtrees.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from itertools import combinations, product
from typing import Iterable, Sequence

from .errors import InvalidParameterError
from .topology import Topology


@dataclass(frozen=True)
class VmPlacement:
    """Strictly sorted tuple of hypervisor ids; the cache key material."""

    hypervisors: tuple[int, ...]

    def __post_init__(self):
        hv = tuple(self.hypervisors)
        if not hv:
            raise InvalidParameterError("a placement needs at least one hypervisor")
        if any(b <= a for a, b in zip(hv, hv[1:])):
            raise InvalidParameterError("placement must be strictly sorted without duplicates")
        object.__setattr__(self, "hypervisors", hv)

    @classmethod
    def of(cls, hosts: Iterable[int]) -> "VmPlacement":
        return cls(tuple(sorted(set(int(h) for h in hosts))))

    def __len__(self) -> int:
        return len(self.hypervisors)

    def __iter__(self):
        return iter(self.hypervisors)


@dataclass(frozen=True)
class RoutingCandidate:
    links: tuple[int, ...]
    common_node: int
    placement: VmPlacement

    @property
    def sort_key(self) -> tuple[int, tuple[int, ...]]:
        return (self.common_node, self.links)

    def to_dict(self) -> dict:
        return {"common_node": self.common_node, "links": list(self.links)}


@dataclass(frozen=True)
class UpwardGraph:
    root: int
    nodes: frozenset[int]
    links: frozenset[int]


def _as_placement(placement: VmPlacement | Iterable[int]) -> VmPlacement:
    return placement if isinstance(placement, VmPlacement) else VmPlacement.of(placement)


def _check_hosts(topology: Topology, placement: VmPlacement) -> None:
    for h in placement:
        if not topology.is_hypervisor(h):
            raise InvalidParameterError(f"node {h} is not a hypervisor")


def _singleton(placement: VmPlacement) -> list[RoutingCandidate]:
    return [RoutingCandidate((), placement.hypervisors[0], placement)]


# -- Alg. building blocks -------------------------------------------------------------


def get_upward_graph(topology: Topology, h: int) -> UpwardGraph:
    """Every node and link reachable from ``h`` along strictly height-decreasing paths."""
    if not topology.is_hypervisor(h):
        raise InvalidParameterError(f"node {h} is not a hypervisor")
    heights = topology.heights
    if heights[h] is None:
        raise InvalidParameterError(f"hypervisor {h} has no height")
    nodes = {h}
    links: set[int] = set()
    queue = deque([h])
    while queue:
        u = queue.popleft()
        hu = heights[u]
        for v, lid in topology.adjacency[u]:
            hv = heights[v]
            if hv is not None and hv < hu:
                links.add(lid)
                if v not in nodes:
                    nodes.add(v)
                    queue.append(v)
    return UpwardGraph(h, frozenset(nodes), frozenset(links))


def common_nodes(upward_graphs: Sequence[UpwardGraph]) -> set[int]:
    if not upward_graphs:
        raise InvalidParameterError("need at least one upward graph")
    out = set(upward_graphs[0].nodes)
    for g in upward_graphs[1:]:
        out &= g.nodes
    return out


def get_downward_paths(
    topology: Topology, c: int, h: int, upward: UpwardGraph | None = None
) -> list[list[int]]:
    """All strictly height-increasing simple paths from ``c`` down to ``h``.

    ``upward`` (the upward graph of ``h``) restricts the walk to nodes that
    can still reach ``h``; it is computed when omitted.
    """
    if c == h:
        return [[]]
    if upward is None:
        upward = get_upward_graph(topology, h)
    allowed = upward.nodes
    if c not in allowed:
        return []
    heights = topology.heights
    paths: list[list[int]] = []
    stack: list[tuple[int, list[int]]] = [(c, [])]
    while stack:
        u, path = stack.pop()
        hu = heights[u]
        for v, lid in topology.adjacency[u]:
            if v not in allowed or heights[v] <= hu:
                continue
            if v == h:
                paths.append(path + [lid])
            else:
                stack.append((v, path + [lid]))
    paths.sort()
    return paths


def search_candidates(
    topology: Topology, placement: VmPlacement | Iterable[int]
) -> list[RoutingCandidate]:
    """All desired routing candidates, ordered by (common node, links)."""
    placement = _as_placement(placement)
    _check_hosts(topology, placement)
    if len(placement) == 1:
        return _singleton(placement)
    ups = [get_upward_graph(topology, h) for h in placement]
    found: dict[tuple[int, ...], int] = {}
    links_of = topology.links
    for c in sorted(common_nodes(ups)):
        per_host = [get_downward_paths(topology, c, h, up) for h, up in zip(placement, ups)]
        if any(not p for p in per_host):
            continue
        for combo in product(*per_host):
            links: set[int] = set()
            for path in combo:
                links.update(path)
            nodes = {c}
            for lid in links:
                nodes.add(links_of[lid].a)
                nodes.add(links_of[lid].b)
            if len(nodes) != len(links) + 1:
                continue
            key = tuple(sorted(links))
            found.setdefault(key, c)
    out = [RoutingCandidate(k, c, placement) for k, c in found.items()]
    out.sort(key=lambda rc: rc.sort_key)
    return out


# -- random topologies ------------------------------------------------------------


def k_shortest_paths(topology: Topology, src: int, dst: int, k: int) -> list[tuple[int, ...]]:
    """Up to ``k`` loop-free paths as node sequences, ties broken lexicographically."""
    import networkx as nx

    g = topology.as_networkx()
    try:
        gen = nx.shortest_simple_paths(g, src, dst)
        collected: list[tuple[int, ...]] = []
        for path in gen:
            if len(collected) >= k and len(path) > len(collected[k - 1]):
                break
            collected.append(tuple(path))
    except nx.NetworkXNoPath:
        return []
    collected.sort(key=lambda p: (len(p), p))
    return collected[:k]


def _node_path_to_links(topology: Topology, nodes: Sequence[int]) -> tuple[int, ...]:
    return tuple(topology.link_between(a, b) for a, b in zip(nodes, nodes[1:]))


def search_random_topology(
    topology: Topology, placement: VmPlacement | Iterable[int], k_paths: int
) -> list[RoutingCandidate]:
    """Candidates assembled from per-pair k-shortest paths.

    A candidate is a tree whose path between every pair of placement
    hypervisors is one of that pair's ``k_paths`` shortest loop-free paths.
    The apex recorded as common node is the lowest-height node of the tree
    (lowest id on ties, or lowest id when heights are unset).
    """
    if k_paths < 1:
        raise InvalidParameterError("k_paths must be >= 1")
    placement = _as_placement(placement)
    _check_hosts(topology, placement)
    if len(placement) == 1:
        return _singleton(placement)
    hosts = placement.hypervisors
    allowed: dict[tuple[int, int], set[tuple[int, ...]]] = {}
    for a, b in combinations(hosts, 2):
        paths = k_shortest_paths(topology, a, b, k_paths)
        if not paths:
            return []
        allowed[(a, b)] = {_node_path_to_links(topology, p) for p in paths}
    root = hosts[0]
    star = [sorted(allowed[(root, h)]) for h in hosts[1:]]
    found: dict[tuple[int, ...], int] = {}
    for combo in product(*star):
        links: set[int] = set()
        for path in combo:
            links.update(path)
        nodes = topology.nodes_of(links)
        if len(nodes) != len(links) + 1:
            continue
        tree = _TreeIndex(topology, links)
        ok = True
        for (a, b), options in allowed.items():
            if tree.path(a, b) not in options:
                ok = False
                break
        if not ok:
            continue
        key = tuple(sorted(links))
        if key not in found:
            found[key] = _apex(topology, nodes)
    out = [RoutingCandidate(k, c, placement) for k, c in found.items()]
    out.sort(key=lambda rc: rc.sort_key)
    return out


def _apex(topology: Topology, nodes: Iterable[int]) -> int:
    big = float("inf")
    return min(nodes, key=lambda n: (topology.heights[n] if topology.heights[n] is not None else big, n))


class _TreeIndex:
    """Adjacency of a link subset, for extracting unique tree paths."""

    def __init__(self, topology: Topology, links: Iterable[int]):
        self.adj: dict[int, list[tuple[int, int]]] = {}
        for lid in links:
            link = topology.links[lid]
            self.adj.setdefault(link.a, []).append((link.b, lid))
            self.adj.setdefault(link.b, []).append((link.a, lid))

    def reachable(self, a: int) -> set[int]:
        seen = {a}
        stack = [a]
        while stack:
            u = stack.pop()
            for v, _ in self.adj.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen

    def node_path(self, a: int, b: int) -> tuple[list[int], list[int]] | None:
        if a == b:
            return [a], []
        prev: dict[int, tuple[int, int]] = {a: (-1, -1)}
        queue = deque([a])
        while queue:
            u = queue.popleft()
            if u == b:
                break
            for v, lid in self.adj.get(u, ()):
                if v not in prev:
                    prev[v] = (u, lid)
                    queue.append(v)
        if b not in prev:
            return None
        nodes, links = [b], []
        cur = b
        while cur != a:
            p, lid = prev[cur]
            links.append(lid)
            nodes.append(p)
            cur = p
        nodes.reverse()
        links.reverse()
        return nodes, links

    def path(self, a: int, b: int) -> tuple[int, ...] | None:
        res = self.node_path(a, b)
        return None if res is None else tuple(res[1])


# -- oracle ---------------------------------------------------------------------------

ORACLE_MAX_NODES = 40


def _valley_free_paths(topology: Topology, src: int, dst: int) -> list[list[int]]:
    """Simple src->dst paths whose heights strictly fall to one apex then strictly rise."""
    heights = topology.heights
    out: list[list[int]] = []
    # state: node, climbing flag, visited set, link path
    stack = [(src, True, frozenset([src]), [])]
    while stack:
        u, climbing, seen, path = stack.pop()
        if u == dst:
            out.append(path)
            continue
        hu = heights[u]
        for v, lid in topology.adjacency[u]:
            if v in seen:
                continue
            hv = heights[v]
            if hv is None or hv == hu:
                continue
            if climbing:
                stack.append((v, hv < hu, seen | {v}, path + [lid]))
            elif hv > hu:
                stack.append((v, False, seen | {v}, path + [lid]))
    return out


def _is_valley_free(heights, nodes: Sequence[int]) -> bool:
    i = 0
    n = len(nodes)
    while i + 1 < n and heights[nodes[i + 1]] < heights[nodes[i]]:
        i += 1
    while i + 1 < n and heights[nodes[i + 1]] > heights[nodes[i]]:
        i += 1
    return i == n - 1


def _decreasing_spurs(topology: Topology, start: int, blocked: set[int]) -> list[list[int]]:
    """Non-empty strictly height-decreasing simple paths leaving ``start`` through unblocked nodes."""
    heights = topology.heights
    out: list[list[int]] = []
    stack = [(start, [])]
    while stack:
        u, path = stack.pop()
        for v, lid in topology.adjacency[u]:
            if v in blocked or heights[v] is None or heights[v] >= heights[u]:
                continue
            np_ = path + [lid]
            out.append(np_)
            stack.append((v, np_))
    return out


def _desired(topology: Topology, links: set[int], placement: VmPlacement) -> int | None:
    """Return the apex if ``links`` forms a desired routing for ``placement``, else None."""
    heights = topology.heights
    hosts = placement.hypervisors
    nodes = topology.nodes_of(links)
    if len(nodes) != len(links) + 1 or not set(hosts) <= nodes:
        return None
    tree = _TreeIndex(topology, links)
    if len(tree.reachable(hosts[0])) != len(nodes):
        return None
    degree = {n: len(tree.adj.get(n, ())) for n in nodes}
    outside_leaves = [n for n in nodes if degree[n] == 1 and n not in hosts]
    if len(outside_leaves) > 1:
        return None
    for a, b in combinations(hosts, 2):
        node_seq, _ = tree.node_path(a, b)
        if not _is_valley_free(heights, node_seq):
            return None
    if outside_leaves:
        spur = outside_leaves[0]
        for h in hosts:
            node_seq, _ = tree.node_path(spur, h)
            if any(heights[y] <= heights[x] for x, y in zip(node_seq, node_seq[1:])):
                return None
    # the apex is the unique lowest-height node
    low = min(heights[n] for n in nodes)
    apexes = [n for n in nodes if heights[n] == low]
    if len(apexes) != 1:
        return None
    return apexes[0]


def brute_force_candidates(
    topology: Topology,
    placement: VmPlacement | Iterable[int],
    max_nodes: int = ORACLE_MAX_NODES,
) -> list[RoutingCandidate]:
    """Exponential reference enumeration of desired routings.

    Enumerates every subtree spanned by valley-free paths from the first
    hypervisor to each other one, optionally extended by one upward spur,
    and keeps those passing :func:`_desired`. Independent of the
    upward-graph machinery used by :func:`search_candidates`.
    """
    if topology.node_count > max_nodes:
        raise InvalidParameterError(
            f"oracle refuses topologies above {max_nodes} nodes (got {topology.node_count})"
        )
    placement = _as_placement(placement)
    _check_hosts(topology, placement)
    if len(placement) == 1:
        return _singleton(placement)
    hosts = placement.hypervisors
    per_host = [_valley_free_paths(topology, hosts[0], h) for h in hosts[1:]]
    found: dict[tuple[int, ...], int] = {}
    bases: list[set[int]] = []
    seen_bases: set[tuple[int, ...]] = set()
    for combo in product(*per_host):
        links = set().union(*combo)
        key = tuple(sorted(links))
        if key in seen_bases:
            continue
        seen_bases.add(key)
        apex = _desired(topology, links, placement)
        if apex is not None:
            found[key] = apex
            bases.append(links)
    for links in bases:
        nodes = topology.nodes_of(links)
        for v in sorted(nodes):
            for spur in _decreasing_spurs(topology, v, nodes):
                ext = links | set(spur)
                key = tuple(sorted(ext))
                if key in found:
                    continue
                apex = _desired(topology, ext, placement)
                if apex is not None:
                    found[key] = apex
    out = [RoutingCandidate(k, c, placement) for k, c in found.items()]
    out.sort(key=lambda rc: rc.sort_key)
    return out


# -- validation & dumps -------------------------------------------------------------------


def is_tree_spanning(topology: Topology, candidate: RoutingCandidate) -> bool:
    hosts = candidate.placement.hypervisors
    if not candidate.links:
        return len(hosts) == 1
    links = set(candidate.links)
    nodes = topology.nodes_of(links)
    if len(nodes) != len(links) + 1 or not set(hosts) <= nodes:
        return False
    return len(_TreeIndex(topology, links).reachable(hosts[0])) == len(nodes)


def is_desired(topology: Topology, candidate: RoutingCandidate) -> bool:
    """Tree, spanning, and single-apex structure with ``common_node`` as apex."""
    if not candidate.links:
        return len(candidate.placement) == 1
    if not is_tree_spanning(topology, candidate):
        return False
    return _desired(topology, set(candidate.links), candidate.placement) == candidate.common_node


def dump_candidates(placement: VmPlacement, candidates: Sequence[RoutingCandidate]) -> str:
    return json.dumps(
        {
            "placement": list(placement.hypervisors),
            "candidates": [c.to_dict() for c in candidates],
        },
        sort_keys=True,
    )


def load_candidates(text: str) -> list[RoutingCandidate]:
    data = json.loads(text)
    placement = VmPlacement(tuple(data["placement"]))
    return [
        RoutingCandidate(tuple(c["links"]), int(c["common_node"]), placement)
        for c in data["candidates"]
    ]
