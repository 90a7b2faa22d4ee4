"""Layered datacenter topologies: fat-tree, Clos, shortcut-augmented, random layered.

Node and link ids are dense integers starting at 0. Every builder returns a
:class:`Topology` with heights already assigned (cores at height 1, every
other node one more than its hop distance to the nearest core).
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import InvalidParameterError, InvalidTopologyError

DEFAULT_CAPACITY = 1e9  # bits/s
MAX_ID = 2**32 - 1


class NodeKind(str, Enum):
    HYPERVISOR = "hypervisor"
    EDGE = "edge"
    AGGREGATION = "aggregation"
    CORE = "core"
    SWITCH = "generic-switch"


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    height: int | None = None
    pod: int | None = None

    @property
    def is_switch(self) -> bool:
        return self.kind is not NodeKind.HYPERVISOR


@dataclass(frozen=True)
class Link:
    id: int
    a: int
    b: int
    capacity: float = DEFAULT_CAPACITY

    def other(self, node: int) -> int:
        if node == self.a:
            return self.b
        if node == self.b:
            return self.a
        raise InvalidParameterError(f"node {node} is not an endpoint of link {self.id}")


class Topology:
    """Immutable layered graph of hypervisors and switches.

    ``kind`` is a short tag (``fat_tree``, ``clos``, ``shortcut``,
    ``random_layered`` or ``custom``) and ``params`` holds the builder
    arguments that produced it.
    """

    def __init__(
        self,
        nodes: Sequence[Node],
        links: Sequence[Link],
        kind: str = "custom",
        params: dict[str, Any] | None = None,
    ):
        self.nodes: tuple[Node, ...] = tuple(nodes)
        self.links: tuple[Link, ...] = tuple(links)
        self.kind = kind
        self.params: dict[str, Any] = dict(params or {})
        self._validate()

        adj: list[list[tuple[int, int]]] = [[] for _ in self.nodes]
        self._pair: dict[tuple[int, int], int] = {}
        for link in self.links:
            adj[link.a].append((link.b, link.id))
            adj[link.b].append((link.a, link.id))
            self._pair[(min(link.a, link.b), max(link.a, link.b))] = link.id
        self.adjacency: tuple[tuple[tuple[int, int], ...], ...] = tuple(
            tuple(sorted(nbrs)) for nbrs in adj
        )
        self.heights: tuple[int | None, ...] = tuple(n.height for n in self.nodes)
        self.hypervisors: tuple[int, ...] = tuple(
            n.id for n in self.nodes if n.kind is NodeKind.HYPERVISOR
        )
        self.cores: tuple[int, ...] = tuple(n.id for n in self.nodes if n.kind is NodeKind.CORE)
        self._nx = None

    def _validate(self) -> None:
        for i, node in enumerate(self.nodes):
            if node.id != i:
                raise InvalidTopologyError(f"node ids must be dense; position {i} has id {node.id}")
        if len(self.nodes) > MAX_ID or len(self.links) > MAX_ID:
            raise InvalidTopologyError("ids must fit in 32 bits")
        seen: set[tuple[int, int]] = set()
        n = len(self.nodes)
        for i, link in enumerate(self.links):
            if link.id != i:
                raise InvalidTopologyError(f"link ids must be dense; position {i} has id {link.id}")
            if not (0 <= link.a < n and 0 <= link.b < n):
                raise InvalidTopologyError(f"link {link.id} references an unknown node")
            if link.a == link.b:
                raise InvalidTopologyError(f"link {link.id} is a self-loop")
            if not link.capacity > 0:
                raise InvalidTopologyError(f"link {link.id} has non-positive capacity")
            key = (min(link.a, link.b), max(link.a, link.b))
            if key in seen:
                raise InvalidTopologyError(f"duplicate link between {key[0]} and {key[1]}")
            seen.add(key)

    # -- queries -------------------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def link_count(self) -> int:
        return len(self.links)

    def neighbors(self, node: int) -> tuple[tuple[int, int], ...]:
        """``(neighbor, link_id)`` pairs, sorted by neighbor id."""
        return self.adjacency[node]

    def link_between(self, a: int, b: int) -> int | None:
        return self._pair.get((min(a, b), max(a, b)))

    def is_hypervisor(self, node: int) -> bool:
        return 0 <= node < len(self.nodes) and self.nodes[node].kind is NodeKind.HYPERVISOR

    def nodes_of(self, links: Iterable[int]) -> set[int]:
        out: set[int] = set()
        for lid in links:
            link = self.links[lid]
            out.add(link.a)
            out.add(link.b)
        return out

    def pod_of(self, node: int) -> int | None:
        return self.nodes[node].pod

    def capacities(self) -> list[float]:
        return [link.capacity for link in self.links]

    def as_networkx(self):
        """Undirected ``networkx.Graph`` view; edges carry ``id`` and ``capacity``."""
        if self._nx is None:
            import networkx as nx

            g = nx.Graph()
            g.add_nodes_from(range(len(self.nodes)))
            for link in self.links:
                g.add_edge(link.a, link.b, id=link.id, capacity=link.capacity)
            self._nx = g
        return self._nx

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "params": self.params,
            "nodes": [
                {"id": n.id, "kind": n.kind.value, "height": n.height, "pod": n.pod}
                for n in self.nodes
            ],
            "links": [
                {"id": l.id, "a": l.a, "b": l.b, "capacity_bps": l.capacity} for l in self.links
            ],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Topology":
        nodes = [
            Node(int(n["id"]), NodeKind(n["kind"]), n.get("height"), n.get("pod"))
            for n in data["nodes"]
        ]
        links = [
            Link(int(l["id"]), int(l["a"]), int(l["b"]), float(l["capacity_bps"]))
            for l in data["links"]
        ]
        return cls(nodes, links, data.get("kind", "custom"), data.get("params"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Topology":
        return cls.from_json(Path(path).read_text())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Topology):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.links == other.links
            and self.kind == other.kind
            and self.params == other.params
        )

    def __hash__(self) -> int:
        return hash((self.kind, len(self.nodes), len(self.links)))

    def __repr__(self) -> str:
        return (
            f"Topology(kind={self.kind!r}, params={self.params!r}, "
            f"nodes={len(self.nodes)}, links={len(self.links)})"
        )

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_nx"] = None
        return state


# -- heights ----------------------------------------------------------------


def bfs_heights(topology: Topology) -> list[int | None]:
    """Multi-source BFS from every core; ``None`` marks unreachable nodes."""
    if not topology.cores:
        raise InvalidTopologyError("height assignment needs at least one core node")
    heights: list[int | None] = [None] * topology.node_count
    queue: deque[int] = deque()
    for c in topology.cores:
        heights[c] = 1
        queue.append(c)
    while queue:
        u = queue.popleft()
        hu = heights[u]
        for v, _ in topology.adjacency[u]:
            if heights[v] is None:
                heights[v] = hu + 1
                queue.append(v)
    return heights


def assign_heights(topology: Topology) -> Topology:
    """Return a copy of ``topology`` whose nodes carry BFS heights."""
    heights = bfs_heights(topology)
    nodes = [replace(n, height=h) for n, h in zip(topology.nodes, heights)]
    return Topology(nodes, topology.links, topology.kind, topology.params)


def unreachable_nodes(topology: Topology) -> list[int]:
    return [n.id for n in topology.nodes if n.height is None]


# -- builders -----------------------------------------------------------------


class _Builder:
    def __init__(self, capacity: float):
        self.capacity = capacity
        self.nodes: list[Node] = []
        self.links: list[Link] = []

    def node(self, kind: NodeKind, pod: int | None = None) -> int:
        nid = len(self.nodes)
        self.nodes.append(Node(nid, kind, None, pod))
        return nid

    def link(self, a: int, b: int) -> int:
        lid = len(self.links)
        self.links.append(Link(lid, a, b, self.capacity))
        return lid

    def build(self, kind: str, params: dict[str, Any]) -> Topology:
        return assign_heights(Topology(self.nodes, self.links, kind, params))


def build_fat_tree(k: int, capacity: float = DEFAULT_CAPACITY) -> Topology:
    """Standard k-ary fat-tree: (k/2)^2 cores, k pods, k^3/4 hypervisors.

    Aggregation switch ``j`` of every pod connects to cores
    ``j*k/2 .. j*k/2 + k/2 - 1``. Ids are laid out cores, aggregation
    (pod-major), edge (pod-major), hypervisors.
    """
    if not isinstance(k, int) or k < 4 or k % 2:
        raise InvalidParameterError(f"fat-tree arity must be an even integer >= 4, got {k!r}")
    half = k // 2
    b = _Builder(capacity)
    cores = [b.node(NodeKind.CORE) for _ in range(half * half)]
    aggs = [[b.node(NodeKind.AGGREGATION, p) for _ in range(half)] for p in range(k)]
    edges = [[b.node(NodeKind.EDGE, p) for _ in range(half)] for p in range(k)]
    hosts = [[[b.node(NodeKind.HYPERVISOR, p) for _ in range(half)] for _ in range(half)] for p in range(k)]
    for p in range(k):
        for j, agg in enumerate(aggs[p]):
            for i in range(half):
                b.link(cores[j * half + i], agg)
    for p in range(k):
        for agg in aggs[p]:
            for edge in edges[p]:
                b.link(agg, edge)
    for p in range(k):
        for e, edge in enumerate(edges[p]):
            for host in hosts[p][e]:
                b.link(edge, host)
    return b.build("fat_tree", {"k": k})


CLOS_PODS = 8
CLOS_EDGES_PER_POD = 4
CLOS_HOSTS_PER_EDGE = 4
CLOS_AGGS_PER_POD = 2
CLOS_CORES_PER_AGG = 4


def build_clos(capacity: float = DEFAULT_CAPACITY) -> Topology:
    """Three-tier Clos with 128 hypervisors and 2:1 oversubscription at the ToR.

    8 pods x 4 ToR x 4 hypervisors. Each ToR has 2 uplinks (one per pod
    aggregation switch) against 4 downlinks. Aggregation switch ``j`` of
    every pod connects to the 4 cores of core group ``j`` (8 cores total),
    which gives 2 x 4 = 8 equal-cost paths between pods.
    """
    b = _Builder(capacity)
    n_cores = CLOS_AGGS_PER_POD * CLOS_CORES_PER_AGG
    cores = [b.node(NodeKind.CORE) for _ in range(n_cores)]
    aggs = [[b.node(NodeKind.AGGREGATION, p) for _ in range(CLOS_AGGS_PER_POD)] for p in range(CLOS_PODS)]
    edges = [[b.node(NodeKind.EDGE, p) for _ in range(CLOS_EDGES_PER_POD)] for p in range(CLOS_PODS)]
    hosts = [
        [[b.node(NodeKind.HYPERVISOR, p) for _ in range(CLOS_HOSTS_PER_EDGE)] for _ in range(CLOS_EDGES_PER_POD)]
        for p in range(CLOS_PODS)
    ]
    for p in range(CLOS_PODS):
        for j, agg in enumerate(aggs[p]):
            for i in range(CLOS_CORES_PER_AGG):
                b.link(cores[j * CLOS_CORES_PER_AGG + i], agg)
    for p in range(CLOS_PODS):
        for agg in aggs[p]:
            for edge in edges[p]:
                b.link(agg, edge)
    for p in range(CLOS_PODS):
        for e, edge in enumerate(edges[p]):
            for host in hosts[p][e]:
                b.link(edge, host)
    return b.build(
        "clos",
        {
            "pods": CLOS_PODS,
            "edges_per_pod": CLOS_EDGES_PER_POD,
            "hosts_per_edge": CLOS_HOSTS_PER_EDGE,
            "aggs_per_pod": CLOS_AGGS_PER_POD,
            "cores_per_agg": CLOS_CORES_PER_AGG,
        },
    )


def build_shortcut(base: Topology, n_shortcuts: int, seed: int) -> Topology:
    """Add ``n_shortcuts`` random edge-to-edge links between distinct pods."""
    if base.kind != "fat_tree":
        raise InvalidParameterError("shortcut topologies are built on a fat-tree base")
    if n_shortcuts < 0:
        raise InvalidParameterError("n_shortcuts must be >= 0")
    edges = [n for n in base.nodes if n.kind is NodeKind.EDGE]
    pairs = [
        (a.id, b.id)
        for a, b in combinations(edges, 2)
        if a.pod != b.pod and base.link_between(a.id, b.id) is None
    ]
    if n_shortcuts > len(pairs):
        raise InvalidParameterError(
            f"asked for {n_shortcuts} shortcuts but only {len(pairs)} inter-pod edge pairs exist"
        )
    chosen = sorted(random.Random(seed).sample(pairs, n_shortcuts))
    capacity = base.links[0].capacity if base.links else DEFAULT_CAPACITY
    links = list(base.links)
    for a, b in chosen:
        links.append(Link(len(links), a, b, capacity))
    params = {"base_k": base.params.get("k"), "n_shortcuts": n_shortcuts, "seed": seed}
    nodes = [replace(n, height=None) for n in base.nodes]
    return assign_heights(Topology(nodes, links, "shortcut", params))


def build_random_layered(
    layer_sizes: Sequence[int],
    edge_prob: float,
    seed: int,
    capacity: float = DEFAULT_CAPACITY,
) -> Topology:
    """Random graph with edges only between adjacent layers.

    Layer 0 holds cores, the last layer hypervisors, anything between is a
    generic switch. Every node gets at least one neighbour in the layer above
    and (except hypervisors) one in the layer below; remaining components are
    stitched together through core-to-layer-1 links, so heights equal
    ``layer index + 1`` and all hypervisors are connected.
    """
    if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
        raise InvalidParameterError("need at least two non-empty layers")
    if not 0.0 <= edge_prob <= 1.0:
        raise InvalidParameterError("edge_prob must lie in [0, 1]")
    rng = random.Random(seed)
    b = _Builder(capacity)
    layers: list[list[int]] = []
    last = len(layer_sizes) - 1
    for li, size in enumerate(layer_sizes):
        kind = NodeKind.CORE if li == 0 else NodeKind.HYPERVISOR if li == last else NodeKind.SWITCH
        layers.append([b.node(kind) for _ in range(size)])

    pairs: set[tuple[int, int]] = set()
    for li in range(last):
        upper, lower = layers[li], layers[li + 1]
        for u in upper:
            for v in lower:
                if rng.random() < edge_prob:
                    pairs.add((u, v))
        for v in lower:
            if not any((u, v) in pairs for u in upper):
                pairs.add((rng.choice(upper), v))
        for u in upper:
            if not any((u, v) in pairs for v in lower):
                pairs.add((u, rng.choice(lower)))

    # union-find to stitch components
    parent = list(range(len(b.nodes)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in pairs:
        parent[find(u)] = find(v)
    core0 = layers[0][0]
    for v in layers[1]:
        if find(v) != find(core0):
            pairs.add((core0, v))
            parent[find(v)] = find(core0)

    for u, v in sorted(pairs):
        b.link(u, v)
    return b.build(
        "random_layered",
        {"layer_sizes": list(layer_sizes), "edge_prob": edge_prob, "seed": seed},
    )


# -- paths ----------------------------------------------------------------------


def bfs_distances(topology: Topology, source: int) -> list[int]:
    dist = [-1] * topology.node_count
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v, _ in topology.adjacency[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def equal_cost_shortest_paths(topology: Topology, h1: int, h2: int) -> list[list[int]]:
    """All shortest paths from ``h1`` to ``h2`` as ordered link-id lists.

    Paths are returned in lexicographic order of their link-id sequence.
    A disconnected pair yields an empty list.
    """
    if h1 == h2:
        raise InvalidParameterError("endpoints must differ")
    for h in (h1, h2):
        if not topology.is_hypervisor(h):
            raise InvalidParameterError(f"node {h} is not a hypervisor")
    to_dst = bfs_distances(topology, h2)
    if to_dst[h1] < 0:
        return []
    paths: list[list[int]] = []
    stack: list[tuple[int, list[int]]] = [(h1, [])]
    while stack:
        u, path = stack.pop()
        if u == h2:
            paths.append(path)
            continue
        for v, lid in topology.adjacency[u]:
            if to_dst[v] == to_dst[u] - 1:
                stack.append((v, path + [lid]))
    paths.sort()
    return paths


# -- refs -------------------------------------------------------------------------


def resolve_topology(ref: str, capacity: float = DEFAULT_CAPACITY) -> Topology:
    """Resolve ``builtin:ft<k>``, ``builtin:clos``, ``builtin:shortcut:ft<k>:<n>:<seed>`` or a JSON path."""
    if ref.startswith("builtin:"):
        body = ref[len("builtin:"):]
        parts = body.split(":")
        if parts[0] == "clos" and len(parts) == 1:
            return build_clos(capacity)
        if parts[0].startswith("ft") and len(parts) == 1:
            return build_fat_tree(_parse_k(parts[0], ref), capacity)
        if parts[0] == "shortcut" and len(parts) == 4:
            base = build_fat_tree(_parse_k(parts[1], ref), capacity)
            try:
                n, seed = int(parts[2]), int(parts[3])
            except ValueError:
                raise InvalidParameterError(f"bad shortcut reference {ref!r}") from None
            return build_shortcut(base, n, seed)
        raise InvalidParameterError(f"unknown builtin topology {ref!r}")
    path = Path(ref)
    if not path.exists():
        raise InvalidParameterError(f"topology file {ref!r} does not exist")
    return Topology.load(path)


def _parse_k(token: str, ref: str) -> int:
    if not token.startswith("ft"):
        raise InvalidParameterError(f"bad topology reference {ref!r}")
    try:
        return int(token[2:])
    except ValueError:
        raise InvalidParameterError(f"bad topology reference {ref!r}") from None
