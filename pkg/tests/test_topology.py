import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_chain
from vtnroute.errors import InvalidParameterError, InvalidTopologyError
from vtnroute.topology import (
    Link,
    Node,
    NodeKind,
    Topology,
    assign_heights,
    bfs_distances,
    bfs_heights,
    build_clos,
    build_fat_tree,
    build_random_layered,
    build_shortcut,
    equal_cost_shortest_paths,
    resolve_topology,
    unreachable_nodes,
)


def count(topo, kind):
    return sum(1 for n in topo.nodes if n.kind is kind)


@pytest.mark.parametrize("k", [4, 6, 8, 16])
def test_fat_tree_closed_forms(k):
    t = build_fat_tree(k)
    assert len(t.hypervisors) == k**3 // 4
    assert len(t.cores) == (k // 2) ** 2
    assert count(t, NodeKind.EDGE) == k * k // 2
    assert count(t, NodeKind.AGGREGATION) == k * k // 2
    # core-agg, agg-edge, edge-host
    assert t.link_count == 3 * k**3 // 4
    for pod in range(k):
        members = [n for n in t.nodes if n.pod == pod]
        assert sum(n.kind is NodeKind.EDGE for n in members) == k // 2
        assert sum(n.kind is NodeKind.AGGREGATION for n in members) == k // 2


def test_fat_tree_k4_counts(ft4):
    assert (len(ft4.hypervisors), len(ft4.cores)) == (16, 4)
    assert count(ft4, NodeKind.EDGE) == 8 and count(ft4, NodeKind.AGGREGATION) == 8


def test_fat_tree_heights(ft4):
    want = {NodeKind.CORE: 1, NodeKind.AGGREGATION: 2, NodeKind.EDGE: 3, NodeKind.HYPERVISOR: 4}
    for n in ft4.nodes:
        assert n.height == want[n.kind]


@pytest.mark.parametrize("k", [3, 2, 0, 5, 7])
def test_fat_tree_rejects_bad_k(k):
    with pytest.raises(InvalidParameterError):
        build_fat_tree(k)


def _pods(topo, h):
    return topo.nodes[h].pod


def _inter_pod_pair(topo):
    hs = topo.hypervisors
    return hs[0], next(h for h in hs if _pods(topo, h) != _pods(topo, hs[0]))


@pytest.mark.parametrize("k,paths", [(4, 4), (8, 16), (16, 64)])
def test_inter_pod_path_count(k, paths):
    t = build_fat_tree(k)
    a, b = _inter_pod_pair(t)
    found = equal_cost_shortest_paths(t, a, b)
    assert len(found) == paths == (k // 2) ** 2
    assert all(len(p) == 6 for p in found)


def test_same_edge_pair_single_path(ft4):
    a, b = ft4.hypervisors[0], ft4.hypervisors[1]
    paths = equal_cost_shortest_paths(ft4, a, b)
    assert len(paths) == 1 and len(paths[0]) == 2


def test_paths_are_contiguous_and_link_ids(ft4):
    a, b = _inter_pod_pair(ft4)
    for p in equal_cost_shortest_paths(ft4, a, b):
        node = a
        for lid in p:
            node = ft4.links[lid].other(node)
        assert node == b


def test_disconnected_pair_has_no_paths():
    nodes = [Node(0, NodeKind.CORE), Node(1, NodeKind.HYPERVISOR), Node(2, NodeKind.HYPERVISOR)]
    t = assign_heights(Topology(nodes, [Link(0, 0, 1)]))
    assert equal_cost_shortest_paths(t, 1, 2) == []
    assert unreachable_nodes(t) == [2]


def test_clos_shape():
    t = build_clos()
    assert len(t.hypervisors) == 128
    a, b = _inter_pod_pair(t)
    assert len(equal_cost_shortest_paths(t, a, b)) == 8
    # 2:1 oversubscription at the ToR: 4 hosts down, 2 uplinks
    tor = t.links[t.adjacency[a][0][1]].other(a)
    down = sum(1 for v, _ in t.adjacency[tor] if t.nodes[v].kind is NodeKind.HYPERVISOR)
    up = len(t.adjacency[tor]) - down
    assert down == 2 * up


def test_clos_same_edge_pair():
    t = build_clos()
    h = t.hypervisors[0]
    tor = t.adjacency[h][0][0]
    sib = next(v for v, _ in t.adjacency[tor] if t.is_hypervisor(v) and v != h)
    paths = equal_cost_shortest_paths(t, h, sib)
    assert len(paths) >= 1 and len(paths[0]) == 2


def test_shortcut_zero_is_identity(ft8):
    s = build_shortcut(ft8, 0, 7)
    assert s.links == ft8.links and s.heights == ft8.heights


def test_shortcut_adds_inter_pod_edge_links(ft8):
    s = build_shortcut(ft8, 5, 3)
    extra = s.links[ft8.link_count:]
    assert len(extra) == 5
    for link in extra:
        a, b = s.nodes[link.a], s.nodes[link.b]
        assert a.kind is b.kind is NodeKind.EDGE and a.pod != b.pod
    # shortcut links join equal-height nodes, so heights do not move
    assert s.heights == ft8.heights


def test_shortcut_deterministic(ft8):
    assert build_shortcut(ft8, 10, 99) == build_shortcut(ft8, 10, 99)
    assert build_shortcut(ft8, 10, 99) != build_shortcut(ft8, 10, 98)


def test_shortcut_too_many(ft4):
    with pytest.raises(InvalidParameterError):
        build_shortcut(ft4, 10_000, 1)
    with pytest.raises(InvalidParameterError):
        build_shortcut(ft4, -1, 1)
    with pytest.raises(InvalidParameterError):
        build_shortcut(build_clos(), 1, 1)


def test_chain_heights():
    t = make_chain()
    assert t.heights == (1, 2)


def test_no_core_is_an_error():
    nodes = [Node(0, NodeKind.SWITCH), Node(1, NodeKind.HYPERVISOR)]
    with pytest.raises(InvalidTopologyError):
        assign_heights(Topology(nodes, [Link(0, 0, 1)]))


@pytest.mark.parametrize(
    "nodes,links",
    [
        ([Node(1, NodeKind.CORE)], []),
        ([Node(0, NodeKind.CORE)], [Link(0, 0, 0)]),
        ([Node(0, NodeKind.CORE), Node(1, NodeKind.HYPERVISOR)], [Link(0, 0, 1), Link(1, 1, 0)]),
        ([Node(0, NodeKind.CORE), Node(1, NodeKind.HYPERVISOR)], [Link(0, 0, 1, 0.0)]),
        ([Node(0, NodeKind.CORE), Node(1, NodeKind.HYPERVISOR)], [Link(0, 0, 5)]),
    ],
)
def test_structural_validation(nodes, links):
    with pytest.raises(InvalidTopologyError):
        Topology(nodes, links)


def _per_core_bfs(topo):
    # independent oracle: one BFS per core, then take the minimum
    best = [None] * topo.node_count
    for c in topo.cores:
        for v, d in enumerate(bfs_distances(topo, c)):
            if d >= 0 and (best[v] is None or d + 1 < best[v]):
                best[v] = d + 1
    return best


layered = st.builds(
    build_random_layered,
    st.lists(st.integers(1, 5), min_size=2, max_size=5),
    st.floats(0.0, 1.0),
    st.integers(0, 2**32),
)


@settings(max_examples=60, deadline=None)
@given(layered)
def test_heights_match_per_core_oracle_and_are_idempotent(topo):
    assert list(topo.heights) == bfs_heights(topo) == _per_core_bfs(topo)
    assert assign_heights(topo) == topo


@settings(max_examples=40, deadline=None)
@given(layered)
def test_random_layered_heights_are_layer_index(topo):
    sizes = topo.params["layer_sizes"]
    i = 0
    for li, size in enumerate(sizes):
        for _ in range(size):
            assert topo.heights[i] == li + 1
            i += 1
    # only adjacent-layer edges
    for link in topo.links:
        assert abs(topo.heights[link.a] - topo.heights[link.b]) == 1


@settings(max_examples=40, deadline=None)
@given(layered)
def test_serialization_round_trip(topo):
    text = topo.to_json()
    back = Topology.from_json(text)
    assert back == topo
    assert back.to_json() == text


def test_file_round_trip_and_format(tmp_path, ft4):
    path = tmp_path / "t.json"
    ft4.save(path)
    data = json.loads(path.read_text())
    assert data["kind"] == "fat_tree"
    assert set(data["nodes"][0]) >= {"id", "kind", "height"}
    assert set(data["links"][0]) == {"id", "a", "b", "capacity_bps"}
    assert Topology.load(path) == ft4
    assert resolve_topology(str(path)) == ft4


def test_resolve_builtins():
    assert len(resolve_topology("builtin:ft8").hypervisors) == 128
    assert len(resolve_topology("builtin:clos").hypervisors) == 128
    s = resolve_topology("builtin:shortcut:ft8:4:2")
    assert s.kind == "shortcut" and s.link_count == build_fat_tree(8).link_count + 4
    for bad in ("builtin:ft", "builtin:mesh", "builtin:shortcut:ft8:x:1", "/no/such/file.json"):
        with pytest.raises(InvalidParameterError):
            resolve_topology(bad)


def test_topology_pickles_without_networkx_cache(ft4):
    import pickle

    ft4.as_networkx()
    assert pickle.loads(pickle.dumps(ft4)) == ft4
