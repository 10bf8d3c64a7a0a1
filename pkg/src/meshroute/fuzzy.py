"""Mamdani fuzzy inference for the integrated link cost.

Four inputs (throughput, delay, jitter, residual energy), three terms each,
81 generated rules, five output terms on [0, 1], clipping implication and a
sampled centroid defuzzifier.

The default operators are product conjunction and bounded-sum aggregation.
With these, the firing strengths of all rules sum to one and each output
term's weight is a multilinear blend of the rule table, which keeps the cost
monotone in every input. Min conjunction with max aggregation is available
but is not monotone: two neighbouring rules with the same consequent give a
V-shaped clip level as one input moves between term peaks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .topology import LinkMetrics, Topology

__all__ = [
    "FuzzyError",
    "MembershipFunction",
    "FuzzyVariable",
    "RuleBase",
    "Aggregate",
    "FuzzyInferenceSystem",
    "fuzzify",
    "infer",
    "defuzzify",
    "link_cost",
    "cost_links",
    "default_system",
    "INPUT_TERMS",
    "OUTPUT_TERMS",
]

INPUT_TERMS = ("Low", "Medium", "High")
OUTPUT_TERMS = ("VeryLow", "Low", "Medium", "High", "VeryHigh")
INPUT_KEYS = ("T", "D", "J", "E")
DEFAULT_RESOLUTION = 1001


class FuzzyError(ValueError):
    pass


@dataclass(frozen=True)
class MembershipFunction:
    """Triangle ``(a, b, c)`` or shoulder ``(a, b)``.

    ``left`` shoulders are 1 up to ``a`` and fall to 0 at ``b``; ``right``
    shoulders rise from 0 at ``a`` to 1 at ``b`` and stay there.
    """

    shape: str
    breakpoints: tuple[float, ...]

    def __post_init__(self):
        want = 3 if self.shape == "triangle" else 2
        if self.shape not in ("triangle", "left", "right"):
            raise FuzzyError(f"unknown shape {self.shape!r}")
        if len(self.breakpoints) != want:
            raise FuzzyError(f"{self.shape} needs {want} breakpoints")
        if any(b >= c for b, c in zip(self.breakpoints, self.breakpoints[1:])):
            raise FuzzyError(f"breakpoints must be strictly increasing: {self.breakpoints}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.shape == "triangle":
            a, b, c = self.breakpoints
            y = np.minimum((x - a) / (b - a), (c - x) / (c - b))
        elif self.shape == "left":
            a, b = self.breakpoints
            y = (b - x) / (b - a)
        else:
            a, b = self.breakpoints
            y = (x - a) / (b - a)
        y = np.clip(y, 0.0, 1.0)
        return float(y) if y.ndim == 0 else y

    @property
    def peak(self) -> float:
        if self.shape == "triangle":
            return self.breakpoints[1]
        return self.breakpoints[0] if self.shape == "left" else self.breakpoints[1]


@dataclass(frozen=True)
class FuzzyVariable:
    name: str
    universe: tuple[float, float]
    terms: tuple[tuple[str, MembershipFunction], ...]
    units: str = ""

    @classmethod
    def three_terms(cls, name: str, lo: float, hi: float, units: str = "") -> FuzzyVariable:
        """Low/Medium/High with peaks at 0%, 50% and 100% of the universe."""
        mid = (lo + hi) / 2
        return cls(
            name,
            (lo, hi),
            (
                ("Low", MembershipFunction("left", (lo, mid))),
                ("Medium", MembershipFunction("triangle", (lo, mid, hi))),
                ("High", MembershipFunction("right", (mid, hi))),
            ),
            units,
        )

    @classmethod
    def evenly_spaced(cls, name: str, lo: float, hi: float, names: Sequence[str]) -> FuzzyVariable:
        k = len(names)
        if k < 2:
            raise FuzzyError("need at least two terms")
        peaks = [lo + (hi - lo) * i / (k - 1) for i in range(k)]
        terms = []
        for i, term in enumerate(names):
            if i == 0:
                mf = MembershipFunction("left", (peaks[0], peaks[1]))
            elif i == k - 1:
                mf = MembershipFunction("right", (peaks[-2], peaks[-1]))
            else:
                mf = MembershipFunction("triangle", (peaks[i - 1], peaks[i], peaks[i + 1]))
            terms.append((term, mf))
        return cls(name, (lo, hi), tuple(terms))

    @property
    def term_names(self) -> tuple[str, ...]:
        return tuple(t for t, _ in self.terms)

    def term(self, name: str) -> MembershipFunction:
        for t, mf in self.terms:
            if t == name:
                return mf
        raise FuzzyError(f"variable {self.name} has no term {name!r}")

    def clamp(self, value: float) -> float:
        if not math.isfinite(value):
            raise FuzzyError(f"{self.name}: non-finite input {value!r}")
        lo, hi = self.universe
        return min(max(float(value), lo), hi)


def fuzzify(variable: FuzzyVariable, value: float) -> dict[str, float]:
    """Membership degree of ``value`` in each term; out-of-universe values clamp."""
    x = variable.clamp(value)
    return {t: mf(x) for t, mf in variable.terms}


def _consequent_index(badness: int) -> int:
    # badness 0..8 onto 5 terms as 2,2,1,2,2 bins; symmetric about 4
    return badness // 2 if badness <= 4 else (badness + 1) // 2


@dataclass(frozen=True)
class RuleBase:
    """Antecedent ``(T, D, J, E)`` term names mapped to an output term name."""

    rules: Mapping[tuple[str, str, str, str], str]

    @classmethod
    def generated(cls) -> RuleBase:
        """Rank-sum rule base: complete and monotone by construction."""
        rules = {}
        for combo in product(range(3), repeat=4):
            t, d, j, e = combo
            badness = (2 - t) + d + j + (2 - e)
            rules[tuple(INPUT_TERMS[r] for r in combo)] = OUTPUT_TERMS[_consequent_index(badness)]
        return cls(rules)

    def check(self) -> None:
        """Raise FuzzyError unless the base is complete and monotone."""
        expected = set(product(INPUT_TERMS, repeat=4))
        missing = expected - set(self.rules)
        if missing:
            raise FuzzyError(f"rule base incomplete: no rule for {sorted(missing)[0]}")
        extra = set(self.rules) - expected
        if extra:
            raise FuzzyError(f"rule base has unknown antecedent {sorted(extra)[0]}")
        for out in self.rules.values():
            if out not in OUTPUT_TERMS:
                raise FuzzyError(f"unknown output term {out!r}")
        rank = {t: i for i, t in enumerate(INPUT_TERMS)}
        out_rank = {t: i for i, t in enumerate(OUTPUT_TERMS)}
        # step each input one rank in its "better" direction
        better = (+1, -1, -1, +1)
        for ante, out in self.rules.items():
            for axis, step in enumerate(better):
                r = rank[ante[axis]] + step
                if not 0 <= r < 3:
                    continue
                improved = list(ante)
                improved[axis] = INPUT_TERMS[r]
                if out_rank[self.rules[tuple(improved)]] > out_rank[out]:
                    raise FuzzyError(f"rule base not monotone: {ante} -> {out} vs {tuple(improved)}")

    def dumps(self) -> str:
        lines = []
        for ante in product(INPUT_TERMS, repeat=4):
            if ante in self.rules:
                parts = " ".join(f"{k}={v}" for k, v in zip(INPUT_KEYS, ante))
                lines.append(f"if {parts} then C={self.rules[ante]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, check: bool = True) -> RuleBase:
        rules = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            if len(tok) != 7 or tok[0] != "if" or tok[5] != "then":
                raise FuzzyError(f"line {lineno}: expected 'if T=.. D=.. J=.. E=.. then C=..'")
            ante = []
            for key, item in zip(INPUT_KEYS, tok[1:5]):
                k, _, v = item.partition("=")
                if k != key or v not in INPUT_TERMS:
                    raise FuzzyError(f"line {lineno}: bad antecedent {item!r}")
                ante.append(v)
            k, _, out = tok[6].partition("=")
            if k != "C" or out not in OUTPUT_TERMS:
                raise FuzzyError(f"line {lineno}: bad consequent {tok[6]!r}")
            if tuple(ante) in rules:
                raise FuzzyError(f"line {lineno}: duplicate rule for {tuple(ante)}")
            rules[tuple(ante)] = out
        rb = cls(rules)
        if check:
            rb.check()
        return rb


@dataclass(frozen=True)
class Aggregate:
    """Max-aggregated output set, sampled on ``xs``.

    ``levels`` holds the clip height of each output term, which is enough to
    rebuild the curve at any resolution.
    """

    xs: np.ndarray
    membership: np.ndarray
    levels: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class FuzzyInferenceSystem:
    inputs: tuple[FuzzyVariable, FuzzyVariable, FuzzyVariable, FuzzyVariable]
    rule_base: RuleBase
    output: FuzzyVariable
    resolution: int = DEFAULT_RESOLUTION
    conjunction: str = "product"
    aggregation: str = "bounded_sum"

    def __post_init__(self):
        if len(self.inputs) != 4:
            raise FuzzyError("expected four input variables")
        if self.conjunction not in ("product", "min"):
            raise FuzzyError(f"unknown conjunction {self.conjunction!r}")
        if self.aggregation not in ("bounded_sum", "max"):
            raise FuzzyError(f"unknown aggregation {self.aggregation!r}")
        if self.resolution < 2:
            raise FuzzyError("resolution must be >= 2")
        lo, hi = self.output.universe
        xs = np.linspace(lo, hi, self.resolution)
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_out_curves", np.array([mf(xs) for _, mf in self.output.terms]))
        object.__setattr__(self, "_out_index", {t: i for i, t in enumerate(self.output.term_names)})

    @property
    def xs(self) -> np.ndarray:
        return self._xs

    def curve(self, levels: Mapping[str, float], xs: np.ndarray | None = None) -> np.ndarray:
        """Aggregate membership for the given clip levels, on ``xs`` or the default grid."""
        if xs is None:
            curves, xs = self._out_curves, self._xs
        else:
            curves = np.array([mf(xs) for _, mf in self.output.terms])
        lv = np.array([levels.get(t, 0.0) for t in self.output.term_names])
        clipped = np.minimum(curves, lv[:, None])
        if self.aggregation == "max":
            return clipped.max(axis=0)
        return np.minimum(clipped.sum(axis=0), 1.0)

    def with_rules(self, rule_base: RuleBase) -> FuzzyInferenceSystem:
        return replace(self, rule_base=rule_base)


def default_system(
    rule_base: RuleBase | None = None,
    resolution: int = DEFAULT_RESOLUTION,
    conjunction: str = "product",
    aggregation: str = "bounded_sum",
) -> FuzzyInferenceSystem:
    inputs = (
        FuzzyVariable.three_terms("throughput", 0.0, 1.0, "fraction"),
        FuzzyVariable.three_terms("delay", 0.0, 100.0, "ms"),
        FuzzyVariable.three_terms("jitter", 0.0, 20.0, "ms"),
        FuzzyVariable.three_terms("energy", 0.0, 1.0, "fraction"),
    )
    output = FuzzyVariable.evenly_spaced("cost", 0.0, 1.0, OUTPUT_TERMS)
    rb = rule_base if rule_base is not None else RuleBase.generated()
    rb.check()
    return FuzzyInferenceSystem(inputs, rb, output, resolution, conjunction, aggregation)


def firing_levels(system: FuzzyInferenceSystem, values: Sequence[float]) -> dict[str, float]:
    """Clip level of each output term, combining the rules that conclude it."""
    if len(values) != 4:
        raise FuzzyError("expected four crisp inputs")
    active = []
    for var, v in zip(system.inputs, values):
        active.append([(t, d) for t, d in fuzzify(var, v).items() if d > 0.0])
    levels = {t: 0.0 for t in system.output.term_names}
    use_min = system.conjunction == "min"
    use_max = system.aggregation == "max"
    for combo in product(*active):
        if use_min:
            strength = min(d for _, d in combo)
        else:
            strength = math.prod(d for _, d in combo)
        out = system.rule_base.rules[tuple(t for t, _ in combo)]
        if use_max:
            levels[out] = max(levels[out], strength)
        else:
            levels[out] = min(1.0, levels[out] + strength)
    return levels


def infer(system: FuzzyInferenceSystem, values: Sequence[float]) -> Aggregate:
    levels = firing_levels(system, values)
    return Aggregate(system.xs, system.curve(levels), levels)


def defuzzify(aggregate: Aggregate | tuple[np.ndarray, np.ndarray]) -> float:
    """Centroid of the sampled output set."""
    if isinstance(aggregate, Aggregate):
        xs, mu = aggregate.xs, aggregate.membership
    else:
        xs, mu = (np.asarray(a, dtype=float) for a in aggregate)
    total = float(mu.sum())
    if not total > 0.0:
        raise FuzzyError("aggregate is zero everywhere; the rule base left this input uncovered")
    return float((xs * mu).sum() / total)


def link_cost(system: FuzzyInferenceSystem, metrics: LinkMetrics, residual_energy: float) -> float:
    values = (metrics.throughput, metrics.delay, metrics.jitter, residual_energy)
    return defuzzify(infer(system, values))


def cost_links(topology: Topology, system: FuzzyInferenceSystem) -> Topology:
    """Snapshot with every link's cached cost set from the weaker endpoint's energy."""
    costs = {}
    for u, v, link in topology.iter_edges():
        energy = min(topology.nodes[u].residual_energy, topology.nodes[v].residual_energy)
        costs[(u, v)] = link_cost(system, link.metrics, energy)
    return topology.with_costs(costs)
