"""Fuzzy vehicular mobility model with a random-waypoint baseline and ad-hoc network metrics."""

from .environment import Environment, PathGraph, Site, euclidean_distance, load_map, nearest_site
from .errors import ConfigError, DomainError, FuzzyMobError, NoActivationError, NoPathError
from .fuzzy_core import (
    FuzzyRule,
    center_average_defuzzify,
    fuzzy_pipeline,
    fuzzy_system_eval,
    place_membership,
    singleton_fuzzify,
    time_membership,
)
from .mobility import (
    FuzzySelector,
    NodeState,
    RuleTable,
    ScoringParams,
    derive_rule_table,
    init_nodes,
    lookup_destination,
    score_destination,
    step_node,
)
from .netsim import MetricsReport, aggregate_runs, route, run_traffic, snapshot_connectivity

__version__ = "0.1.0"
