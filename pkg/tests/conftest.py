import itertools

import networkx as nx
import pytest

from meshroute.fuzzy import default_system
from meshroute.sim import cost_all_links
from meshroute.topology import Link, LinkMetrics, Node, Topology, generate_random_topology

ACCEPTANCE_RESULTS = []

PLAIN = LinkMetrics(0.5, 50.0, 10.0)


@pytest.fixture(scope="session")
def fis():
    return default_system()


def abstract_topology(costs, n=None):
    """Topology from ``{(u, v): cost}``; positions are placeholders, so never validate() it."""
    ids = sorted({v for e in costs for v in e} | set(range(1, (n or 0) + 1)))
    nodes = {i: Node(i, 0.0, 0.0) for i in ids}
    edges = {e: Link(PLAIN, c) for e, c in costs.items()}
    return Topology(nodes, edges)


def connected_topology(n, seed, area=(500.0, 500.0), system=None):
    """First seeded topology (trying seed*1000, seed*1000+1, ...) that is connected, costed."""
    for k in itertools.count():
        topo = generate_random_topology(n, area, 250.0, seed=seed * 1000 + k)
        g = nx.Graph()
        g.add_nodes_from(topo.nodes)
        g.add_edges_from(topo.edges)
        if nx.is_connected(g):
            return cost_all_links(topo, system or default_system())


def record(criterion, passed, detail):
    ACCEPTANCE_RESULTS.append((criterion, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
