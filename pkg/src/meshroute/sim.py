"""Epoch-by-epoch routing simulation.

Each round churns the previous snapshot, costs every link with the fuzzy
system, routes every (source, terminal) pair with BB-BC, updates the routing
table and drains energy from the nodes that carry traffic.
"""

from __future__ import annotations

import csv
import io
import os
import time
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .bbbc import BbbcConfig, NoPathError, Path, optimize_path
from .fuzzy import FuzzyInferenceSystem, cost_links, default_system
from .oracle import dijkstra
from .topology import (
    ChurnEvent,
    MetricDistributions,
    Node,
    Topology,
    apply_churn,
    generate_random_topology,
    quantize,
    read_topology,
)

__all__ = [
    "ScenarioConfig",
    "EpochRecord",
    "RoutingTable",
    "Comparison",
    "cost_all_links",
    "run_scenario",
    "compare_with_oracle",
    "records_to_csv",
    "comparison_to_csv",
    "load_scenario_config",
    "ConfigError",
    "derive_seed",
]

UNREACHABLE = "unreachable"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 25
    area: tuple[float, float] = (500.0, 500.0)
    range: float = 250.0
    distributions: MetricDistributions = field(default_factory=MetricDistributions)
    pairs: tuple[tuple[int, int], ...] | None = None
    epochs: int = 1
    joins_per_epoch: int = 0
    leaves_per_epoch: int = 0
    schedule: tuple[ChurnEvent, ...] = ()
    bbbc: BbbcConfig = field(default_factory=BbbcConfig)
    energy_drain: float = 0.02
    seed: int = 0
    topology: Topology | None = None

    @property
    def route_pairs(self) -> tuple[tuple[int, int], ...]:
        if self.pairs is not None:
            return tuple(self.pairs)
        last = max(self.topology.nodes) if self.topology is not None else self.n
        return ((1, last),)

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.topology is None and self.n < 1:
            raise ConfigError("n must be >= 1")
        pairs = self.route_pairs
        if not pairs:
            raise ConfigError("at least one (source, terminal) pair is required")
        known = set(self.topology.nodes) if self.topology is not None else set(range(1, self.n + 1))
        for s, t in pairs:
            if s == t:
                raise ConfigError(f"pair {s}-{t}: source equals terminal")
            for v in (s, t):
                if v not in known:
                    raise ConfigError(f"pair {s}-{t}: node {v} not in the initial topology")
        protected = {v for pair in pairs for v in pair}
        for ev in self.schedule:
            if ev.kind == "leave" and ev.node_id in protected:
                raise ConfigError(f"schedule removes node {ev.node_id}, a live source/terminal")
            if not 1 <= ev.at_epoch <= self.epochs:
                raise ConfigError(f"churn event at epoch {ev.at_epoch} outside 1..{self.epochs}")
        if self.joins_per_epoch < 0 or self.leaves_per_epoch < 0:
            raise ConfigError("churn counts must be >= 0")
        if not 0 <= self.energy_drain <= 1:
            raise ConfigError("energy_drain must lie in [0, 1]")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    source: int
    terminal: int
    nodes: int
    generations: int
    path: tuple[int, ...] | None
    cost: float | None
    time_sec: float
    reason: str

    @property
    def reachable(self) -> bool:
        return self.path is not None

    def path_label(self) -> str:
        return "-".join(map(str, self.path)) if self.path else UNREACHABLE


@dataclass
class RoutingTable:
    routes: dict[tuple[int, int], tuple[Path, int]] = field(default_factory=dict)

    def update(self, s: int, t: int, path: Path | None, epoch: int) -> None:
        if path is None:
            self.routes.pop((s, t), None)
        else:
            self.routes[(s, t)] = (path, epoch)

    def get(self, s: int, t: int) -> tuple[Path, int] | None:
        return self.routes.get((s, t))


@dataclass(frozen=True)
class Comparison:
    epoch: int
    source: int
    terminal: int
    bbbc_cost: float | None
    dijkstra_cost: float | None
    bbbc_time: float
    dijkstra_time: float

    @property
    def gap(self) -> float | None:
        if self.bbbc_cost is None or self.dijkstra_cost is None:
            return None
        return self.bbbc_cost - self.dijkstra_cost


def cost_all_links(topology: Topology, system: FuzzyInferenceSystem) -> Topology:
    return cost_links(topology, system)


def derive_seed(*parts: int) -> int:
    """Stable 32-bit child seed for a tuple of integers."""
    return int(np.random.SeedSequence([p & 0xFFFFFFFF for p in parts]).generate_state(1)[0])


def _random_churn(
    config: ScenarioConfig, snap: Topology, epoch: int, protected: set[int], scheduled: list[ChurnEvent]
) -> list[ChurnEvent]:
    rng = np.random.default_rng(derive_seed(config.seed, epoch, 1))
    events = []
    gone = {ev.node_id for ev in scheduled if ev.kind == "leave"}
    removable = sorted(v for v in snap.nodes if v not in protected and v not in gone)
    k = min(config.leaves_per_epoch, len(removable))
    if k:
        for v in sorted(rng.choice(removable, size=k, replace=False).tolist()):
            events.append(ChurnEvent("leave", int(v), epoch))
    w, h = snap.area
    # ids named by scheduled joins, in any epoch, are reserved
    nid = max([snap.next_id()] + [ev.node_id + 1 for ev in config.schedule if ev.kind == "join"])
    for _ in range(config.joins_per_epoch):
        node = Node(
            nid,
            quantize(rng.uniform(0, w)),
            quantize(rng.uniform(0, h)),
            config.distributions.draw_energy(rng),
            config.range,
        )
        events.append(ChurnEvent("join", node, epoch))
        nid += 1
    return events


def _drain(snap: Topology, paths: list[Path], amount: float) -> Topology:
    if amount == 0 or not paths:
        return snap
    used = sorted({v for p in paths for v in p.nodes})
    energies = {v: quantize(max(0.0, snap.nodes[v].residual_energy - amount)) for v in used}
    return snap.with_energies(energies)


def _rounds(
    config: ScenarioConfig, system: FuzzyInferenceSystem
) -> Iterator[tuple[Topology, list[EpochRecord], list[Path | None]]]:
    config.validate()
    if config.topology is not None:
        snap = config.topology
    else:
        snap = generate_random_topology(config.n, config.area, config.range, config.seed, config.distributions)
    pairs = config.route_pairs
    protected = {v for pair in pairs for v in pair}
    for epoch in range(1, config.epochs + 1):
        events = [ev for ev in config.schedule if ev.at_epoch == epoch]
        if epoch > 1:
            events += _random_churn(config, snap, epoch, protected, events)
        snap = apply_churn(snap, events, seed=derive_seed(config.seed, epoch, 2), distributions=config.distributions)
        snap = replace(snap, epoch=epoch) if snap.epoch != epoch else snap
        costed = cost_all_links(snap, system)
        records, paths = [], []
        for i, (s, t) in enumerate(pairs):
            bb = replace(config.bbbc, seed=derive_seed(config.seed, epoch, 3, i))
            try:
                path, trace = optimize_path(costed, s, t, None, bb)
            except NoPathError:
                records.append(EpochRecord(epoch, s, t, len(costed), 0, None, None, 0.0, UNREACHABLE))
                paths.append(None)
                continue
            records.append(
                EpochRecord(epoch, s, t, len(costed), trace.generations, path.nodes, path.cost, trace.wall_time, trace.reason)
            )
            paths.append(path)
        yield costed, records, paths
        snap = _drain(snap, [p for p in paths if p is not None], config.energy_drain)


def run_scenario(
    config: ScenarioConfig, system: FuzzyInferenceSystem | None = None
) -> tuple[list[EpochRecord], RoutingTable]:
    system = system or default_system()
    table = RoutingTable()
    out: list[EpochRecord] = []
    for _, records, paths in _rounds(config, system):
        for rec, path in zip(records, paths):
            table.update(rec.source, rec.terminal, path, rec.epoch)
        out.extend(records)
    return out, table


def compare_with_oracle(config: ScenarioConfig, system: FuzzyInferenceSystem | None = None) -> list[Comparison]:
    system = system or default_system()
    report = []
    for snap, records, _ in _rounds(config, system):
        for rec in records:
            t0 = time.perf_counter()
            try:
                exact = dijkstra(snap, rec.source, rec.terminal).cost
            except NoPathError:
                exact = None
            report.append(
                Comparison(rec.epoch, rec.source, rec.terminal, rec.cost, exact, rec.time_sec, time.perf_counter() - t0)
            )
    return report


def records_to_csv(records: list[EpochRecord], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "nodes", "generations", "path_cost", "time_sec", "path"])
    for r in records:
        cost = f"{r.cost:.4f}" if r.cost is not None else ""
        sec = f"{r.time_sec:.6f}" if timing else "0"
        w.writerow([r.epoch, r.nodes, r.generations, cost, sec, r.path_label()])
    return buf.getvalue()


def comparison_to_csv(rows: list[Comparison], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "source", "terminal", "bbbc_cost", "dijkstra_cost", "gap", "bbbc_sec", "dijkstra_sec"])

    def fmt(x):
        return "" if x is None else repr(x)

    for r in rows:
        times = [f"{r.bbbc_time:.6f}", f"{r.dijkstra_time:.6f}"] if timing else ["0", "0"]
        w.writerow([r.epoch, r.source, r.terminal, fmt(r.bbbc_cost), fmt(r.dijkstra_cost), fmt(r.gap), *times])
    return buf.getvalue()


# -- key=value scenario files ---------------------------------------------------

def _pair(text: str) -> tuple[float, float]:
    lo, hi = (float(x) for x in text.split(","))
    return lo, hi


def load_scenario_config(path: str | os.PathLike, seed: int | None = None) -> ScenarioConfig:
    """Parse a flat ``key=value`` scenario file; ``#`` starts a comment.

    ``join=<epoch>:<id>:<x>:<y>[:<energy>[:<range>]]`` and ``leave=<epoch>:<id>``
    may repeat. ``seed`` overrides the file's seed when given.
    """
    base = os.path.dirname(os.path.abspath(path))
    fields: dict = {}
    bb: dict = {}
    dist: dict = {}
    schedule: list[ChurnEvent] = []
    scalar = {
        "n": ("n", int), "epochs": ("epochs", int), "range": ("range", float),
        "joins_per_epoch": ("joins_per_epoch", int), "leaves_per_epoch": ("leaves_per_epoch", int),
        "energy_drain": ("energy_drain", float), "seed": ("seed", int),
    }
    bbbc_keys = {
        "population": ("population_size", int), "generations": ("max_generations", int),
        "time_budget": ("time_budget", float), "shrink_exponent": ("shrink_exponent", float),
        "stagnation": ("stagnation_limit", int),
    }
    width = height = None
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value")
        try:
            if key in scalar:
                name, conv = scalar[key]
                fields[name] = conv(value)
            elif key in bbbc_keys:
                name, conv = bbbc_keys[key]
                bb[name] = conv(value)
            elif key == "width":
                width = float(value)
            elif key == "height":
                height = float(value)
            elif key == "pairs":
                fields["pairs"] = tuple(
                    tuple(int(v) for v in item.split("-")) for item in value.split(",") if item.strip()
                )
            elif key in ("throughput", "delay_ms", "jitter_ms", "energy"):
                dist[key] = _pair(value)
            elif key == "topology":
                fields["topology"] = read_topology(os.path.join(base, value))
            elif key == "join":
                parts = value.split(":")
                epoch, nid, x, y = int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3])
                energy = float(parts[4]) if len(parts) > 4 else 1.0
                rng_m = float(parts[5]) if len(parts) > 5 else fields.get("range", 250.0)
                schedule.append(ChurnEvent("join", Node(nid, x, y, energy, rng_m), epoch))
            elif key == "leave":
                epoch, nid = (int(v) for v in value.split(":"))
                schedule.append(ChurnEvent("leave", nid, epoch))
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ConfigError:
            raise
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    if width is not None or height is not None:
        fields["area"] = (width or 500.0, height or width or 500.0)
    if seed is not None:
        fields["seed"] = seed
    try:
        bbbc_cfg = BbbcConfig(**bb)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if "seed" in fields:
        bbbc_cfg = replace(bbbc_cfg, seed=fields["seed"])
    return ScenarioConfig(
        **fields,
        distributions=MetricDistributions(**dist),
        schedule=tuple(schedule),
        bbbc=bbbc_cfg,
    )
