"""byzmatch: simulator and bounded exhaustive checker for a self-stabilizing
matching protocol that contains Byzantine influence to radius 2."""

__version__ = "0.1.0"

from .adversary import StrategySpec, byz_action, make_strategy
from .analysis import (
    ContainmentVerdict,
    Potential,
    ResolvedScenario,
    containment_monitor,
    extract_matching,
    is_maximal_by_enumeration,
    is_maximal_matching,
    marriage_subset,
    potential,
    run_simulation,
)
from .modelcheck import (
    CheckReport,
    check_closure,
    check_convergence_all,
    check_lemma6,
    enumerate_configs,
    state_space,
    theorem2_replay,
)
from .protocol import (
    Configuration,
    NodeState,
    Predicate,
    Rule,
    Target,
    apply_rule,
    baseline_apply_rule,
    classify,
    enabled_rules,
    in_lc,
    next_v,
    spec_holds,
)
from .scenario import Scenario, builtin_scenario, load_scenario, resolve_scenario
from .schedulers import (
    AdversarialGreedy,
    RoundRobinAge,
    SeededRandomFair,
    fairness_audit,
    next_actor,
)
from .topology import Topology, build_topology, named_graph, parse_graph_file

__all__ = [
    "AdversarialGreedy",
    "CheckReport",
    "Configuration",
    "ContainmentVerdict",
    "NodeState",
    "Potential",
    "Predicate",
    "ResolvedScenario",
    "RoundRobinAge",
    "Rule",
    "Scenario",
    "SeededRandomFair",
    "StrategySpec",
    "Target",
    "Topology",
    "apply_rule",
    "baseline_apply_rule",
    "builtin_scenario",
    "build_topology",
    "byz_action",
    "check_closure",
    "check_convergence_all",
    "check_lemma6",
    "classify",
    "containment_monitor",
    "enabled_rules",
    "enumerate_configs",
    "extract_matching",
    "fairness_audit",
    "in_lc",
    "is_maximal_by_enumeration",
    "is_maximal_matching",
    "load_scenario",
    "make_strategy",
    "marriage_subset",
    "named_graph",
    "next_actor",
    "next_v",
    "parse_graph_file",
    "potential",
    "resolve_scenario",
    "run_simulation",
    "spec_holds",
    "state_space",
    "theorem2_replay",
]
