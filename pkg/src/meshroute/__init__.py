"""Fuzzy-cost, Big Bang-Big Crunch routing workbench for wireless mesh networks."""

from .bbbc import BbbcConfig, NoPathError, Path, Trace, center_of_mass, optimize_continuous, optimize_path, path_cost, random_path
from .fuzzy import FuzzyInferenceSystem, RuleBase, default_system, defuzzify, fuzzify, infer, link_cost
from .oracle import brute_force_shortest, dijkstra
from .sim import ScenarioConfig, compare_with_oracle, cost_all_links, run_scenario
from .topology import ChurnEvent, LinkMetrics, Node, Topology, apply_churn, generate_random_topology, neighbors

__version__ = "0.1.0"
