import pytest

from vtnroute.topology import Link, Node, NodeKind, Topology, assign_heights, build_fat_tree


def make_testbed(capacity=1e9):
    """Three cores over two edge switches with two hypervisors each.

    Ids: C1..C3 = 0..2, E1 = 3, E2 = 4, hosts 5, 6 under E1 and 7, 8 under E2.
    """
    kinds = [NodeKind.CORE] * 3 + [NodeKind.EDGE] * 2 + [NodeKind.HYPERVISOR] * 4
    nodes = [Node(i, k) for i, k in enumerate(kinds)]
    pairs = [(c, e) for e in (3, 4) for c in (0, 1, 2)] + [(3, 5), (3, 6), (4, 7), (4, 8)]
    links = [Link(i, a, b, capacity) for i, (a, b) in enumerate(pairs)]
    return assign_heights(Topology(nodes, links, "custom", {"name": "testbed"}))


def make_chain(n_switches=0):
    """core - switch ... - host, a single path."""
    kinds = [NodeKind.CORE] + [NodeKind.SWITCH] * n_switches + [NodeKind.HYPERVISOR]
    nodes = [Node(i, k) for i, k in enumerate(kinds)]
    links = [Link(i, i, i + 1) for i in range(len(nodes) - 1)]
    return assign_heights(Topology(nodes, links))


@pytest.fixture(scope="session")
def ft4():
    return build_fat_tree(4)


@pytest.fixture(scope="session")
def ft8():
    return build_fat_tree(8)


@pytest.fixture(scope="session")
def testbed():
    return make_testbed()


# one "PASS/FAIL criterion N ..." line per acceptance criterion, filled by test_acceptance
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
