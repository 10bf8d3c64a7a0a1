"""Exact shortest-path references.

Both functions rank paths by ``(cost, hops, node sequence)`` and accumulate
cost left to right from the source, exactly as :func:`path_cost` does, so
equal paths produce bit-identical costs and the tie-break is shared.
"""

from __future__ import annotations

import heapq

from .bbbc import NoPathError, Path, _check_endpoints
from .topology import Topology, TopologyError

__all__ = ["dijkstra", "brute_force_shortest", "BRUTE_FORCE_LIMIT"]

BRUTE_FORCE_LIMIT = 12


def dijkstra(topology: Topology, s: int, t: int) -> Path:
    _check_endpoints(topology, s, t)
    # labels are (cost, hops, nodes); extending by one edge preserves their order
    heap = [(0.0, 0, (s,))]
    settled = set()
    while heap:
        cost, hops, nodes = heapq.heappop(heap)
        u = nodes[-1]
        if u in settled:
            continue
        settled.add(u)
        if u == t:
            return Path(nodes, cost)
        for v in topology.adjacent(u):
            if v not in settled:
                c = topology.cost(u, v)
                if not c > 0:
                    raise TopologyError(f"link {u}-{v} has non-positive cost {c}")
                heapq.heappush(heap, (cost + c, hops + 1, nodes + (v,)))
    raise NoPathError(s, t)


def brute_force_shortest(topology: Topology, s: int, t: int) -> Path:
    """Enumerate every simple s-t path and keep the best."""
    if len(topology) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} nodes, got {len(topology)}")
    _check_endpoints(topology, s, t)
    best = None
    stack = [(s,)]
    while stack:
        nodes = stack.pop()
        u = nodes[-1]
        if u == t:
            cost = 0.0
            for a, b in zip(nodes, nodes[1:]):
                cost += topology.cost(a, b)
            key = (cost, len(nodes), nodes)
            if best is None or key < best:
                best = key
            continue
        for v in topology.adjacent(u):
            if v not in nodes:
                stack.append(nodes + (v,))
    if best is None:
        raise NoPathError(s, t)
    return Path(best[2], best[0])
