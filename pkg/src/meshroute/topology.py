"""Wireless mesh topologies as range-limited (unit-disk) geometric graphs.

A :class:`Topology` is an immutable snapshot ``G_i``. Churn produces a new
snapshot with the epoch counter advanced; the input is never touched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "Node",
    "LinkMetrics",
    "Link",
    "Topology",
    "ChurnEvent",
    "MetricDistributions",
    "TopologyError",
    "UnknownNodeError",
    "in_range",
    "generate_random_topology",
    "apply_churn",
    "neighbors",
    "dumps",
    "loads",
    "write_topology",
    "read_topology",
]

DEFAULT_RANGE = 250.0


class TopologyError(ValueError):
    pass


class UnknownNodeError(TopologyError, KeyError):
    def __init__(self, node_id: int):
        super().__init__(f"unknown node id {node_id}")
        self.node_id = node_id

    def __str__(self) -> str:
        return self.args[0]


def quantize(x: float) -> float:
    """Round to 9 significant digits so the text format round-trips exactly."""
    return float(f"{x:.9g}")


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    residual_energy: float = 1.0
    range: float = DEFAULT_RANGE

    def __post_init__(self):
        if not 0.0 <= self.residual_energy <= 1.0:
            raise TopologyError(f"node {self.id}: residual_energy {self.residual_energy} outside [0, 1]")
        if not self.range > 0:
            raise TopologyError(f"node {self.id}: range must be > 0")

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class LinkMetrics:
    throughput: float
    delay: float
    jitter: float

    def __post_init__(self):
        if not 0.0 <= self.throughput <= 1.0:
            raise TopologyError(f"throughput {self.throughput} outside [0, 1]")
        if not self.delay >= 0:
            raise TopologyError(f"delay {self.delay} must be >= 0")
        if not self.jitter >= 0:
            raise TopologyError(f"jitter {self.jitter} must be >= 0")


@dataclass(frozen=True)
class Link:
    metrics: LinkMetrics
    cost: float | None = None


@dataclass(frozen=True)
class ChurnEvent:
    """A join (``node`` is a :class:`Node`) or a leave (``node`` is an id)."""

    kind: str
    node: Node | int
    at_epoch: int = 0

    def __post_init__(self):
        if self.kind == "join":
            if not isinstance(self.node, Node):
                raise TopologyError("join event needs a Node payload")
        elif self.kind == "leave":
            if isinstance(self.node, Node) or not isinstance(self.node, int):
                raise TopologyError("leave event needs a node id")
        else:
            raise TopologyError(f"unknown churn kind {self.kind!r}")

    @property
    def node_id(self) -> int:
        return self.node.id if isinstance(self.node, Node) else self.node


@dataclass(frozen=True)
class MetricDistributions:
    """Uniform ranges used to draw link metrics and node energies."""

    throughput: tuple[float, float] = (0.0, 1.0)
    delay_ms: tuple[float, float] = (1.0, 100.0)
    jitter_ms: tuple[float, float] = (0.0, 20.0)
    energy: tuple[float, float] = (0.2, 1.0)

    def draw_metrics(self, rng: np.random.Generator) -> LinkMetrics:
        return LinkMetrics(
            throughput=quantize(rng.uniform(*self.throughput)),
            delay=quantize(rng.uniform(*self.delay_ms)),
            jitter=quantize(rng.uniform(*self.jitter_ms)),
        )

    def draw_energy(self, rng: np.random.Generator) -> float:
        return quantize(rng.uniform(*self.energy))


def in_range(a: Node, b: Node) -> bool:
    """Unit-disk rule: inclusive, against the shorter of the two ranges."""
    return math.hypot(a.x - b.x, a.y - b.y) <= min(a.range, b.range)


def _key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True, eq=False)
class Topology:
    nodes: Mapping[int, Node]
    edges: Mapping[tuple[int, int], Link]
    area: tuple[float, float] = (500.0, 500.0)
    epoch: int = 0
    # largest id ever issued in this lineage; survives the node leaving
    id_high_water: int = 0
    # ids of nodes that have left; they may never join again
    retired: frozenset[int] = frozenset()
    _adj: Mapping[int, tuple[int, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = dict(sorted(self.nodes.items()))
        adj: dict[int, list[int]] = {i: [] for i in nodes}
        edges = {}
        for (u, v), link in self.edges.items():
            if u == v:
                raise TopologyError(f"self-loop on node {u}")
            if u not in nodes:
                raise UnknownNodeError(u)
            if v not in nodes:
                raise UnknownNodeError(v)
            edges[_key(u, v)] = link
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", dict(sorted(edges.items())))
        object.__setattr__(self, "_adj", {i: tuple(sorted(vs)) for i, vs in adj.items()})
        object.__setattr__(self, "id_high_water", max([self.id_high_water, *nodes]))

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.nodes

    def node(self, node_id: int) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def adjacent(self, node_id: int) -> tuple[int, ...]:
        """Sorted neighbour ids."""
        try:
            return self._adj[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def has_edge(self, u: int, v: int) -> bool:
        return _key(u, v) in self.edges

    def link(self, u: int, v: int) -> Link:
        try:
            return self.edges[_key(u, v)]
        except KeyError:
            raise TopologyError(f"no link between {u} and {v}") from None

    def cost(self, u: int, v: int) -> float:
        c = self.link(u, v).cost
        if c is None:
            raise TopologyError(f"link {u}-{v} has no cached cost; cost the links first")
        return c

    @property
    def is_costed(self) -> bool:
        return all(link.cost is not None for link in self.edges.values())

    def iter_edges(self) -> Iterator[tuple[int, int, Link]]:
        for (u, v), link in self.edges.items():
            yield u, v, link

    def with_costs(self, costs: Mapping[tuple[int, int], float]) -> Topology:
        edges = {k: replace(link, cost=costs[k]) for k, link in self.edges.items()}
        return Topology(self.nodes, edges, self.area, self.epoch, self.id_high_water, self.retired)

    def with_energies(self, energies: Mapping[int, float]) -> Topology:
        """Same structure, selected nodes' residual energy replaced. Costs are dropped."""
        nodes = {
            i: replace(n, residual_energy=energies[i]) if i in energies else n
            for i, n in self.nodes.items()
        }
        edges = {k: Link(link.metrics) for k, link in self.edges.items()}
        return Topology(nodes, edges, self.area, self.epoch, self.id_high_water, self.retired)

    def next_id(self) -> int:
        return self.id_high_water + 1

    def validate(self) -> None:
        """Check the unit-disk rule and node placement; raise TopologyError on violation."""
        w, h = self.area
        for n in self.nodes.values():
            if not (0 <= n.x <= w and 0 <= n.y <= h):
                raise TopologyError(f"node {n.id} at {n.position} outside area {self.area}")
        ids = list(self.nodes)
        for i, u in enumerate(ids):
            for v in ids[i + 1:]:
                linked = self.has_edge(u, v)
                if linked != in_range(self.nodes[u], self.nodes[v]):
                    state = "present" if linked else "missing"
                    raise TopologyError(f"edge {u}-{v} {state} contrary to the range rule")


def generate_random_topology(
    n: int,
    area: tuple[float, float] = (500.0, 500.0),
    range: float = DEFAULT_RANGE,
    seed: int | None = None,
    distributions: MetricDistributions | None = None,
) -> Topology:
    """Place ``n`` nodes uniformly in ``area`` and connect every pair within range.

    Nodes are numbered 1..n. Positions, energies and link metrics are all drawn
    from one seeded generator, so the result is a pure function of the arguments.
    A disconnected graph is a valid result.
    """
    if n < 1:
        raise TopologyError("need at least one node")
    width, height = area
    if not (width > 0 and height > 0):
        raise TopologyError("area dimensions must be > 0")
    if not range > 0:
        raise TopologyError("range must be > 0")
    dist = distributions or MetricDistributions()
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, width, size=n)
    ys = rng.uniform(0.0, height, size=n)
    nodes = {}
    for i, (x, y) in enumerate(zip(xs, ys), start=1):
        nodes[i] = Node(
            id=i,
            x=quantize(x),
            y=quantize(y),
            residual_energy=dist.draw_energy(rng),
            range=float(range),
        )
    edges = {}
    for u, v in _pairs_in_range(list(nodes.values())):
        edges[(u, v)] = Link(dist.draw_metrics(rng))
    return Topology(nodes, edges, (float(width), float(height)), 0)


def _pairs_in_range(nodes: Sequence[Node]) -> list[tuple[int, int]]:
    # numpy prefilter with slack, exact decision by in_range
    if len(nodes) < 2:
        return []
    pos = np.array([(n.x, n.y) for n in nodes])
    rad = np.array([n.range for n in nodes])
    d = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
    lim = np.minimum(rad[:, None], rad[None, :]) * (1 + 1e-9) + 1e-9
    iu, ju = np.nonzero(np.triu(d <= lim, k=1))
    out = []
    for i, j in zip(iu.tolist(), ju.tolist()):
        if in_range(nodes[i], nodes[j]):
            out.append(_key(nodes[i].id, nodes[j].id))
    out.sort()
    return out


def apply_churn(
    topology: Topology,
    events: Iterable[ChurnEvent],
    seed: int | None = None,
    distributions: MetricDistributions | None = None,
) -> Topology:
    """Apply joins and leaves in order and return the next snapshot.

    Joined nodes are linked to every surviving node within range; metrics for the
    new links are drawn from ``seed``. Leaving removes the node and its links.
    """
    dist = distributions or MetricDistributions()
    rng = np.random.default_rng(seed)
    nodes = dict(topology.nodes)
    edges = dict(topology.edges)
    # ids are never reused, including ids of nodes that left in this batch
    high_water = topology.id_high_water
    retired = set(topology.retired)
    for ev in events:
        if ev.kind == "leave":
            nid = ev.node_id
            if nid not in nodes:
                raise UnknownNodeError(nid)
            del nodes[nid]
            retired.add(nid)
            edges = {k: link for k, link in edges.items() if nid not in k}
        else:
            new = ev.node
            if new.id in nodes or new.id in retired:
                raise TopologyError(f"join reuses node id {new.id}")
            high_water = max(high_water, new.id)
            w, h = topology.area
            if not (0 <= new.x <= w and 0 <= new.y <= h):
                raise TopologyError(f"joining node {new.id} outside area {topology.area}")
            for other in sorted(nodes.values(), key=lambda n: n.id):
                if in_range(new, other):
                    edges[_key(new.id, other.id)] = Link(dist.draw_metrics(rng))
            nodes[new.id] = new
    return Topology(nodes, edges, topology.area, topology.epoch + 1, high_water, frozenset(retired))


def neighbors(topology: Topology, v: int) -> set[int]:
    return set(topology.adjacent(v))


# -- text format ---------------------------------------------------------------

def dumps(topology: Topology) -> str:
    w, h = topology.area
    lines = [f"wmn v1 {len(topology)} {w:.9g} {h:.9g} {topology.epoch}"]
    for n in topology.nodes.values():
        lines.append(f"node {n.id} {n.x:.9g} {n.y:.9g} {n.residual_energy:.9g} {n.range:.9g}")
    for u, v, link in topology.iter_edges():
        m = link.metrics
        lines.append(f"edge {u} {v} {m.throughput:.9g} {m.delay:.9g} {m.jitter:.9g}")
    return "\n".join(lines) + "\n"


def loads(text: str, validate: bool = True) -> Topology:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or rows[0][:2] != ["wmn", "v1"] or len(rows[0]) != 6:
        raise TopologyError("missing 'wmn v1 <n> <width> <height> <epoch>' header")
    try:
        count = int(rows[0][2])
        area = (float(rows[0][3]), float(rows[0][4]))
        epoch = int(rows[0][5])
        nodes: dict[int, Node] = {}
        edges: dict[tuple[int, int], Link] = {}
        for lineno, row in enumerate(rows[1:], start=2):
            if row[0] == "node" and len(row) == 6:
                nid = int(row[1])
                if nid in nodes:
                    raise TopologyError(f"line {lineno}: duplicate node {nid}")
                nodes[nid] = Node(nid, float(row[2]), float(row[3]), float(row[4]), float(row[5]))
            elif row[0] == "edge" and len(row) == 6:
                u, v = int(row[1]), int(row[2])
                edges[_key(u, v)] = Link(LinkMetrics(float(row[3]), float(row[4]), float(row[5])))
            else:
                raise TopologyError(f"line {lineno}: cannot parse {' '.join(row)!r}")
    except ValueError as exc:
        if isinstance(exc, TopologyError):
            raise
        raise TopologyError(f"malformed topology file: {exc}") from None
    if len(nodes) != count:
        raise TopologyError(f"header says {count} nodes, found {len(nodes)}")
    topo = Topology(nodes, edges, area, epoch)
    if validate:
        topo.validate()
    return topo


def write_topology(topology: Topology, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps(topology))


def read_topology(path, validate: bool = True) -> Topology:
    with open(path, encoding="ascii") as fh:
        return loads(fh.read(), validate=validate)
