"""Big Bang-Big Crunch optimisation.

Two forms share one configuration and trace type:

* :func:`optimize_continuous` scatters candidates around the inverse-fitness
  weighted centre of mass with a spread that shrinks every generation.
* :func:`optimize_path` works on loop-free node sequences. A path has no
  componentwise mean, so the elite path is the centre, and new paths are grown
  by cutting the elite and regrowing a random tail towards the terminal.
"""

from __future__ import annotations

import csv
import io
import math
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .topology import Topology, TopologyError, UnknownNodeError

__all__ = [
    "NoPathError",
    "Path",
    "BbbcConfig",
    "GenerationRecord",
    "Trace",
    "random_path",
    "path_cost",
    "center_of_mass",
    "optimize_continuous",
    "optimize_path",
]

GENERATIONS = "generations exhausted"
TIME_BUDGET = "time budget"
STAGNATION = "stagnation"


class NoPathError(TopologyError):
    """The terminal is not reachable from the source."""

    def __init__(self, s: int, t: int):
        super().__init__(f"no path exists from {s} to {t}")
        self.source, self.terminal = s, t


@dataclass(frozen=True)
class Path:
    nodes: tuple[int, ...]
    cost: float

    @classmethod
    def on(cls, topology: Topology, nodes: Sequence[int]) -> Path:
        nodes = tuple(nodes)
        return cls(nodes, path_cost(topology, nodes))

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1

    def label(self) -> str:
        return "-".join(map(str, self.nodes))

    def validate(self, topology: Topology, s: int | None = None, t: int | None = None) -> None:
        """Raise TopologyError unless this is a loop-free s-t path with a fresh cost."""
        if len(self.nodes) < 2:
            raise TopologyError("a path needs at least two nodes")
        if s is not None and self.nodes[0] != s:
            raise TopologyError(f"path starts at {self.nodes[0]}, not {s}")
        if t is not None and self.nodes[-1] != t:
            raise TopologyError(f"path ends at {self.nodes[-1]}, not {t}")
        if len(set(self.nodes)) != len(self.nodes):
            raise TopologyError(f"path {self.label()} revisits a node")
        fresh = path_cost(topology, self.nodes)
        if fresh != self.cost:
            raise TopologyError(f"cached cost {self.cost} != recomputed {fresh}")


@dataclass(frozen=True)
class BbbcConfig:
    population_size: int = 20
    max_generations: int = 100
    time_budget: float | None = None
    shrink_exponent: float = 1.0
    # None: weighted centre of mass in continuous mode, elite in path mode
    elite_as_center: bool | None = None
    stagnation_limit: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if self.time_budget is not None and not self.time_budget > 0:
            raise ValueError("time_budget must be > 0")
        if self.stagnation_limit is not None and self.stagnation_limit < 1:
            raise ValueError("stagnation_limit must be >= 1")


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_cost: float
    best: object
    elapsed_ms: float


@dataclass
class Trace:
    records: list[GenerationRecord] = field(default_factory=list)
    wall_time: float = 0.0
    reason: str = GENERATIONS

    @property
    def best_costs(self) -> list[float]:
        return [r.best_cost for r in self.records]

    @property
    def generations(self) -> int:
        return len(self.records)

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["generation", "best_cost", "elapsed_ms"])
        for r in self.records:
            w.writerow([r.generation, repr(r.best_cost), f"{r.elapsed_ms:.3f}" if timing else "0"])
        return buf.getvalue()


def path_cost(topology: Topology, nodes: Sequence[int]) -> float:
    """Sum of cached link costs along ``nodes``, folded from the source."""
    if len(nodes) < 2:
        raise TopologyError("a path needs at least two nodes")
    total = 0.0
    for u, v in zip(nodes, nodes[1:]):
        if not topology.has_edge(u, v):
            raise TopologyError(f"nodes {u} and {v} are not adjacent")
        total += topology.cost(u, v)
    return total


def _walk(topology: Topology, prefix: list[int], t: int, rng: random.Random) -> list[int] | None:
    """Random loop-free walk extending ``prefix`` to ``t``.

    Dead ends are backtracked and excluded for the rest of the walk, which makes
    this a randomised depth-first search: it returns None only when no
    extension avoiding the prefix exists.
    """
    path = list(prefix)
    blocked = set(path)
    floor = len(prefix)
    while path[-1] != t:
        options = [v for v in topology.adjacent(path[-1]) if v not in blocked]
        if options:
            nxt = options[rng.randrange(len(options))]
            path.append(nxt)
            blocked.add(nxt)
        elif len(path) > floor:
            path.pop()
        else:
            return None
    return path


def _check_endpoints(topology: Topology, s: int, t: int) -> None:
    for v in (s, t):
        if v not in topology:
            raise UnknownNodeError(v)
    if s == t:
        raise ValueError("source and terminal must differ")


def random_path(topology: Topology, s: int, t: int, rng: random.Random) -> Path:
    _check_endpoints(topology, s, t)
    nodes = _walk(topology, [s], t, rng)
    if nodes is None:
        raise NoPathError(s, t)
    return Path.on(topology, nodes)


def center_of_mass(points, fitnesses) -> np.ndarray:
    """Inverse-fitness weighted mean of ``points`` (shape ``(N, D)``)."""
    x = np.asarray(points, dtype=float)
    f = np.asarray(fitnesses, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if len(f) == 0 or len(x) == 0:
        raise ValueError("center_of_mass needs at least one candidate")
    if len(f) != len(x):
        raise ValueError("points and fitnesses differ in length")
    if not np.all(f > 0):
        raise ValueError("fitness values must be strictly positive")
    w = 1.0 / f
    return (w[:, None] * x).sum(axis=0) / w.sum()


def _timed_out(start: float, budget: float | None) -> bool:
    return budget is not None and time.perf_counter() - start >= budget


def optimize_continuous(
    objective: Callable[[np.ndarray], float],
    bounds,
    config: BbbcConfig,
) -> tuple[np.ndarray, Trace]:
    """Minimise ``objective`` over the box ``bounds = (lower, upper)``.

    Candidates of generation k+1 are ``x_c + r * (upper - lower) / (k + 1) ** shrink``
    with standard-normal ``r``, clipped to the box. The best point seen so far
    is carried into every population.
    """
    lower, upper = (np.atleast_1d(np.asarray(b, dtype=float)) for b in bounds)
    if lower.shape != upper.shape or not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ValueError("bounds must be finite and of equal shape")
    if np.any(upper < lower):
        raise ValueError("upper bound below lower bound")
    rng = np.random.default_rng(config.seed)
    n, span = config.population_size, upper - lower
    start = time.perf_counter()
    trace = Trace()

    def score(pts: np.ndarray) -> np.ndarray:
        vals = np.empty(len(pts))
        for i, p in enumerate(pts):
            v = float(objective(p))
            if not math.isfinite(v):
                raise ValueError(f"objective is {v} at {p.tolist()}")
            vals[i] = v
        return vals

    pop = lower + rng.random((n, lower.size)) * span
    best_x, best_f, stale = None, math.inf, 0
    for k in range(1, config.max_generations + 1):
        fit = score(pop)
        i = int(np.argmin(fit))
        if fit[i] < best_f:
            best_x, best_f, stale = pop[i].copy(), float(fit[i]), 0
        else:
            stale += 1
        trace.records.append(GenerationRecord(k, best_f, best_x.copy(), (time.perf_counter() - start) * 1e3))
        if k == config.max_generations:
            break
        if _timed_out(start, config.time_budget):
            trace.reason = TIME_BUDGET
            break
        if config.stagnation_limit is not None and stale >= config.stagnation_limit:
            trace.reason = STAGNATION
            break
        if config.elite_as_center:
            centre = best_x
        else:
            # the weighting needs positive fitness; shift objectives that reach zero or below
            weights_from = fit if fit.min() > 0 else fit - fit.min() + 1e-12
            centre = center_of_mass(pop, weights_from)
        spread = span / (k + 1) ** config.shrink_exponent
        pop = centre + rng.standard_normal((n, lower.size)) * spread
        pop = np.clip(pop, lower, upper)
        pop[0] = best_x
    trace.wall_time = time.perf_counter() - start
    return best_x, trace


def _cut_weights(length: int, progress: float) -> list[float]:
    # cut positions 1..length-1; uniform at progress 0, ramp towards the tail at 1
    m = length - 1
    return [(1 - progress) + progress * 2 * i / (m + 1) for i in range(1, m + 1)]


def _regrow(topology: Topology, elite: Path, t: int, rng: random.Random, progress: float) -> list[int]:
    nodes = elite.nodes
    cut = rng.choices(range(1, len(nodes)), weights=_cut_weights(len(nodes), progress))[0]
    grown = _walk(topology, list(nodes[:cut]), t, rng)
    if grown is None:
        grown = _walk(topology, [nodes[0]], t, rng)
    return grown


def optimize_path(
    topology: Topology,
    s: int,
    t: int,
    system=None,
    config: BbbcConfig | None = None,
    observer: Callable[[int, list[Path]], None] | None = None,
) -> tuple[Path, Trace]:
    """Search for a cheap loop-free s-t path.

    With ``system`` given, link costs are first evaluated by that fuzzy system;
    otherwise the topology's cached costs are used. ``observer`` is called with
    every population, for instrumentation.
    """
    config = config or BbbcConfig()
    if config.elite_as_center is False:
        raise ValueError("path mode always uses the elite path as centre")
    _check_endpoints(topology, s, t)
    start = time.perf_counter()
    if system is not None:
        from .fuzzy import cost_links

        topology = cost_links(topology, system)
    elif not topology.is_costed:
        raise TopologyError("topology has uncosted links and no fuzzy system was given")
    rng = random.Random(config.seed)
    trace = Trace()
    generations = config.max_generations

    def fresh(k: int, elite: Path | None) -> list[Path]:
        pop = [] if elite is None else [elite]
        progress = (k - 1) / (generations - 1) if generations > 1 else 1.0
        while len(pop) < config.population_size:
            if elite is None:
                nodes = _walk(topology, [s], t, rng)
                if nodes is None:
                    raise NoPathError(s, t)
            else:
                nodes = _regrow(topology, elite, t, rng, progress)
            pop.append(Path.on(topology, nodes))
            if _timed_out(start, config.time_budget):
                break
        return pop

    best: Path | None = None
    stale = 0
    for k in range(1, generations + 1):
        pop = fresh(k, best)
        if observer is not None:
            observer(k, pop)
        elite = min(pop, key=lambda p: p.cost)
        if best is None or elite.cost < best.cost:
            best, stale = elite, 0
        else:
            stale += 1
        trace.records.append(GenerationRecord(k, best.cost, best, (time.perf_counter() - start) * 1e3))
        if len(pop) < config.population_size:
            trace.reason = TIME_BUDGET
            break
        if k == generations:
            break
        if _timed_out(start, config.time_budget):
            trace.reason = TIME_BUDGET
            break
        if config.stagnation_limit is not None and stale >= config.stagnation_limit:
            trace.reason = STAGNATION
            break
    trace.wall_time = time.perf_counter() - start
    return best, trace
