"""Bounded exhaustive verification on small graphs.

Enumerates the full configuration space (each node contributes
(deg+1)*deg states: pref in {null} + ports, old_pref in ports) and checks,
per graph and faulty-node placement:

* lemma6      - outside the legitimacy set, every rule fired by a fully
                shielded node strictly decreases the potential,
* closure     - inside the legitimacy set no shielded node is enabled, and
                no possible rewrite of a faulty node's state (its entire
                finite domain, not a sampled strategy) breaks legitimacy
                or moves a shielded pref,
* convergence - from every initial configuration, a fair central daemon
                reaches the legitimacy set within a step budget,
* theorem2    - replays the built-in radius-1 impossibility scenario: a
                single divorce by the faulty endpoint of a 5-chain breaks
                legitimacy at distance 1 while distance-2 nodes stay
                contained for the whole run.

Together the first three constitute the desk-scale evidence that the
protocol stabilizes with containment radius 2 on the checked graph.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .adversary import StrategySpec
from .analysis import (
    ResolvedScenario,
    potential_over,
    run_loop,
    run_simulation,
)
from .protocol import (
    APPLY_FNS,
    Configuration,
    NodeState,
    config_to_jsonable,
    enabled_rule,
    in_lc,
    spec_holds,
)
from .schedulers import DaemonPolicy, RoundRobinAge, fairness_threshold
from .topology import Topology

DEFAULT_BUDGET = 10_000_000
STEP_BUDGET_FACTOR = 50
MAX_COUNTEREXAMPLES = 5


class BudgetExceededError(ValueError):
    def __init__(self, total: int, budget: int):
        super().__init__(
            f"state space has {total} configurations, over the budget of {budget}"
        )
        self.total = total
        self.budget = budget


@dataclass(frozen=True)
class StateSpace:
    node_count: int
    per_node: tuple[int, ...]
    total: int


def state_space(t: Topology) -> StateSpace:
    per_node = tuple((t.degree(v) + 1) * t.degree(v) for v in range(t.node_count))
    return StateSpace(t.node_count, per_node, math.prod(per_node))


def node_state_domain(t: Topology, v: int) -> list[NodeState]:
    """Canonical order: pref None first then ascending, old_pref ascending."""
    deg = t.degree(v)
    prefs: list[Optional[int]] = [None] + list(range(deg))
    return [NodeState(p, op) for p in prefs for op in range(deg)]


def enumerate_configs(t: Topology, budget: int = DEFAULT_BUDGET) -> Iterator[Configuration]:
    """Lexicographic stream of every valid configuration; refuses graphs
    whose space exceeds the budget, reporting the exact count."""
    space = state_space(t)
    if space.total > budget:
        raise BudgetExceededError(space.total, budget)
    domains = [node_state_domain(t, v) for v in range(t.node_count)]
    return itertools.product(*domains)


@dataclass
class CheckReport:
    check: str
    graph: str
    byz: list[int]
    universe: int
    passed: bool
    details: dict = field(default_factory=dict)
    counterexamples: list = field(default_factory=list)

    def to_jsonable(self) -> dict:
        return {
            "check": self.check,
            "graph": self.graph,
            "byz": self.byz,
            "universe": self.universe,
            "passed": self.passed,
            "details": self.details,
            "counterexamples": self.counterexamples,
        }

    def render(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        extras = ", ".join(f"{k}={v}" for k, v in self.details.items() if not isinstance(v, (list, dict)))
        line = f"[{mark}] {self.check} graph={self.graph} byz={self.byz} universe={self.universe}"
        if extras:
            line += f" ({extras})"
        if not self.passed:
            line += f" counterexamples={len(self.counterexamples)}"
        return line


def _graph_desc(t: Topology) -> str:
    return f"n={t.node_count},m={t.edge_count}"


def check_lemma6(
    t: Topology,
    byz: frozenset = frozenset(),
    protocol: str = "ssmm",
    budget: int = DEFAULT_BUDGET,
    max_counterexamples: int = MAX_COUNTEREXAMPLES,
) -> CheckReport:
    """Exhaustive per-step variant decrease.

    For every configuration outside the legitimacy set and every shielded
    node with an enabled rule, applies the rule and requires a strict
    lexicographic drop of the potential.
    """
    v2 = tuple(sorted(t.c_honest_set(byz, 2)))
    apply_fn = APPLY_FNS[protocol]
    universe = 0
    activations = 0
    cexs: list[dict] = []
    for cfg in enumerate_configs(t, budget):
        universe += 1
        if in_lc(t, cfg, byz, 2):
            continue
        pot = potential_over(t, cfg, v2)
        for v in v2:
            r = enabled_rule(t, cfg, v)
            if r is None:
                continue
            activations += 1
            pot2 = potential_over(t, apply_fn(t, cfg, v, r), v2)
            if not pot2 < pot:
                if len(cexs) < max_counterexamples:
                    cexs.append(
                        {
                            "config": config_to_jsonable(cfg),
                            "node": v,
                            "rule": r.value,
                            "potential_before": list(pot),
                            "potential_after": list(pot2),
                        }
                    )
    return CheckReport(
        check="lemma6",
        graph=_graph_desc(t),
        byz=sorted(byz),
        universe=universe,
        passed=not cexs,
        details={"activations": activations, "protocol": protocol, "v2": list(v2)},
        counterexamples=cexs,
    )


def check_closure(
    t: Topology,
    byz: frozenset = frozenset(),
    budget: int = DEFAULT_BUDGET,
    max_counterexamples: int = MAX_COUNTEREXAMPLES,
) -> CheckReport:
    """Exhaustive closure of the legitimacy set.

    In every legitimate configuration: (a) no shielded node is enabled;
    (b) for every faulty node and every state in its finite domain, the
    rewrite leaves every shielded node legitimate with its pref unchanged.
    With no faulty nodes this reduces to: legitimate configurations are
    terminal for the shielded (= all) nodes.
    """
    v2 = tuple(sorted(t.c_honest_set(byz, 2)))
    byz_sorted = sorted(byz)
    domains = {b: node_state_domain(t, b) for b in byz_sorted}
    universe = 0
    lc_configs = 0
    rewrites = 0
    cexs: list[dict] = []

    def record(cex: dict) -> None:
        if len(cexs) < max_counterexamples:
            cexs.append(cex)

    for cfg in enumerate_configs(t, budget):
        universe += 1
        if not in_lc(t, cfg, byz, 2):
            continue
        lc_configs += 1
        for v in v2:
            r = enabled_rule(t, cfg, v)
            if r is not None:
                record(
                    {
                        "cause": "enabled-inside-lc2",
                        "config": config_to_jsonable(cfg),
                        "node": v,
                        "rule": r.value,
                    }
                )
        for b in byz_sorted:
            for st in domains[b]:
                rewrites += 1
                cfg2 = cfg[:b] + (st,) + cfg[b + 1:]
                for v in v2:
                    if cfg2[v].pref != cfg[v].pref:
                        record(
                            {
                                "cause": "o-variable-changed",
                                "config": config_to_jsonable(cfg),
                                "byz_node": b,
                                "injected": st.to_jsonable(),
                                "node": v,
                            }
                        )
                    elif not spec_holds(t, cfg2, v):
                        record(
                            {
                                "cause": "spec-broken-after-rewrite",
                                "config": config_to_jsonable(cfg),
                                "byz_node": b,
                                "injected": st.to_jsonable(),
                                "node": v,
                            }
                        )
    return CheckReport(
        check="closure",
        graph=_graph_desc(t),
        byz=byz_sorted,
        universe=universe,
        passed=not cexs,
        details={"lc2_configs": lc_configs, "byz_rewrites": rewrites, "v2": list(v2)},
        counterexamples=cexs,
    )


DEFAULT_CONVERGENCE_STRATEGIES = (
    StrategySpec("dormant"),
    StrategySpec("divorcer"),
    StrategySpec("oscillator", period=1),
)


def _scenario_doc(resolved: ResolvedScenario) -> dict:
    """A replayable scenario document for counterexample reports."""
    from .scenario import scenario_from_resolved

    return scenario_from_resolved(resolved).model_dump(mode="json", exclude_none=True)


def check_convergence_all(
    t: Topology,
    byz: frozenset = frozenset(),
    policy: Optional[DaemonPolicy] = None,
    step_budget: Optional[int] = None,
    strategies: Optional[Sequence[StrategySpec]] = None,
    byz_period: int = 2,
    protocol: str = "ssmm",
    budget: int = DEFAULT_BUDGET,
    max_counterexamples: int = MAX_COUNTEREXAMPLES,
    on_final=None,
) -> CheckReport:
    """Convergence from every initial configuration under a fair policy.

    The adversary axis is always Dormant plus each supplied strategy (with
    no faulty nodes the axis collapses: the adversary never acts).  The
    report carries the worst convergence time, the worst count of
    potential-increasing steps with its theoretical bound (the number of
    nodes at distance exactly 2 from the faulty set), and the worst honest
    waiting time seen by the fairness accounting.  ``on_final`` is invoked
    with (final configuration, convergence step) after every run; callers
    use it to harvest the reached configurations for further auditing.
    """
    policy = policy or RoundRobinAge()
    if step_budget is None:
        step_budget = STEP_BUDGET_FACTOR * t.node_count
    if byz:
        axis: list[StrategySpec] = [StrategySpec("dormant")]
        for s in strategies or ():
            if s not in axis:
                axis.append(s)
    else:
        axis = [StrategySpec("dormant")]
    v1 = t.c_honest_set(byz, 1)
    v2 = t.c_honest_set(byz, 2)
    p_increase_bound = len(v1 - v2)

    runs = 0
    max_steps_seen = 0
    worst: Optional[dict] = None
    p_increase_max = 0
    max_wait = 0
    cexs: list[dict] = []
    for cfg in enumerate_configs(t, budget):
        for sspec in axis:
            resolved = ResolvedScenario(
                topology=t,
                initial=cfg,
                byz=byz,
                strategy=sspec,
                policy=policy,
                byz_period=byz_period,
                max_steps=step_budget,
                radius=2,
                protocol=protocol,
            )
            loop = run_loop(resolved, step_budget, stop_at_lc=True)
            runs += 1
            if on_final is not None:
                on_final(loop.final, loop.convergence_step)
            if loop.p_increases > p_increase_max:
                p_increase_max = loop.p_increases
            if loop.max_wait > max_wait:
                max_wait = loop.max_wait
            if loop.convergence_step is None:
                if len(cexs) < max_counterexamples:
                    replay = run_simulation(resolved, step_budget)
                    cexs.append(
                        {
                            "cause": "no-convergence-within-budget",
                            "scenario": _scenario_doc(resolved),
                            "step_budget": step_budget,
                            "final_potential": replay.summary["final_potential"],
                            "trace_prefix": replay.events[:50],
                        }
                    )
            elif loop.convergence_step > max_steps_seen:
                max_steps_seen = loop.convergence_step
                worst = {
                    "initial": config_to_jsonable(cfg),
                    "strategy": sspec.kind,
                    "steps": loop.convergence_step,
                }
    return CheckReport(
        check="convergence",
        graph=_graph_desc(t),
        byz=sorted(byz),
        universe=runs,
        passed=not cexs,
        details={
            "policy": policy.kind,
            "strategies": [s.kind for s in axis],
            "byz_period": byz_period,
            "step_budget": step_budget,
            "protocol": protocol,
            "max_convergence_step": max_steps_seen,
            "worst_case": worst,
            "p_increase_max": p_increase_max,
            "p_increase_bound": p_increase_bound,
            "max_wait": max_wait,
            "wait_threshold": fairness_threshold(t),
        },
        counterexamples=cexs,
    )


def theorem2_replay(max_steps: int = 1000) -> CheckReport:
    """Replay the fixed radius-1 impossibility scenario.

    A 5-chain starts with both end pairs married and the middle node dead;
    the left endpoint is faulty and divorces on its first turn.  The run
    must show: the start is legitimate at radius 1, the middle node flips
    from dead to single after that one divorce (a radius-1 break at a node
    the adversary never touched), and the two distance->2 nodes keep their
    marriage and prefs for the entire run.  Passing means the demonstration
    reproduced; it is a witness against radius-1 containment for this
    protocol, not a proof over all protocols.
    """
    from .scenario import builtin_scenario, resolve_scenario

    resolved = resolve_scenario(builtin_scenario("theorem2"))
    result = run_simulation(resolved, max_steps)
    summary = result.summary
    events = result.events

    first = events[0] if events else {}
    post_preds = first.get("predicates", [])
    radius1 = summary["containment_by_radius"]["1"]
    radius2 = summary["containment_by_radius"]["2"]
    checks = {
        "initial_in_lc1": summary["initial"]["in_lc"]["1"],
        "initial_middle_dead": summary["initial"]["predicates"][2] == "dead",
        "first_step_is_byz_divorce": first.get("kind") == "byz"
        and first.get("actor") == 0
        and first.get("new_state", {}).get("pref") is None,
        "post_divorce_neighbor_proposing": len(post_preds) == 5 and post_preds[1] == "proposing",
        "post_divorce_middle_single": len(post_preds) == 5 and post_preds[2] == "single",
        "radius1_spec_broken_at_middle": {
            "step": 1,
            "node": 2,
            "cause": "spec-broken",
        }
        in radius1["violations"],
        "radius1_not_contained": radius1["contained_from_step"] is None,
        "radius2_contained_from_start": radius2["contained_from_step"] == 0,
        "radius2_no_violations": radius2["violation_count"] == 0,
    }
    return CheckReport(
        check="theorem2",
        graph="n=5,m=4",
        byz=[0],
        universe=1,
        passed=all(checks.values()),
        details={
            "facts": checks,
            "steps": summary["steps"],
            "byz_actions": summary["byz_actions"],
            "final_matching": summary["matching"],
        },
        counterexamples=[]
        if all(checks.values())
        else [{"cause": "demonstration-mismatch", "facts": checks}],
    )


CHECK_NAMES = ("lemma6", "closure", "convergence", "theorem2")


def run_checks(
    t: Optional[Topology],
    byz: frozenset,
    checks: Iterable[str],
    policies: Sequence[DaemonPolicy] = (),
    strategies: Sequence[StrategySpec] = DEFAULT_CONVERGENCE_STRATEGIES,
    byz_period: int = 2,
    step_budget: Optional[int] = None,
    budget: int = DEFAULT_BUDGET,
    protocol: str = "ssmm",
) -> list[CheckReport]:
    """Run the selected checks; `convergence` expands to one report per
    policy.  `theorem2` ignores the graph argument (fixed scenario)."""
    wanted: list[str] = []
    for name in checks:
        if name == "all":
            wanted.extend(CHECK_NAMES)
        elif name in CHECK_NAMES:
            wanted.append(name)
        else:
            raise ValueError(f"unknown check {name!r} (expected one of {CHECK_NAMES} or 'all')")
    reports: list[CheckReport] = []
    for name in wanted:
        if name == "theorem2":
            reports.append(theorem2_replay())
            continue
        if t is None:
            raise ValueError(f"check {name!r} needs a graph")
        if name == "lemma6":
            reports.append(check_lemma6(t, byz, budget=budget, protocol=protocol))
        elif name == "closure":
            reports.append(check_closure(t, byz, budget=budget))
        elif name == "convergence":
            for policy in policies or (RoundRobinAge(),):
                reports.append(
                    check_convergence_all(
                        t,
                        byz,
                        policy=policy,
                        step_budget=step_budget,
                        strategies=strategies,
                        byz_period=byz_period,
                        protocol=protocol,
                        budget=budget,
                    )
                )
    return reports
