"""Run analysis: potential function, matching extraction, containment.

The potential of a configuration is a lexicographic pair computed over the
fully shielded nodes (honest, distance > 2 from every faulty node):

    primary   = n_proposing + n_doomed + n_single
    secondary = 2 * n_doomed + n_single

It is zero exactly when all of those nodes are married or dead, and every
rule fired by one of them outside that target set strictly decreases it;
the model checker verifies both claims exhaustively on small graphs.

This module also owns the simulation loop: a central-daemon run
interleaving honest rule firings with adversary turns, producing a trace
and a summary with convergence, matching, containment, and fairness data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

from . import schedulers
from .adversary import StrategySpec, byz_action
from .protocol import (
    APPLY_FNS,
    Configuration,
    Predicate,
    Rule,
    classify,
    classify_all,
    config_to_jsonable,
    enabled_rule,
    in_lc,
    spec_holds,
    with_state,
)
from .schedulers import DaemonPolicy, advance, fairness_threshold, new_daemon_state, next_actor
from .topology import Topology


class Potential(NamedTuple):
    primary: int
    secondary: int


def potential_over(t: Topology, cfg: Configuration, nodes) -> Potential:
    """Potential restricted to an explicit node set (hot-path variant)."""
    n_proposing = n_doomed = n_single = 0
    for v in nodes:
        p = classify(t, cfg, v)
        if p is Predicate.PROPOSING:
            n_proposing += 1
        elif p is Predicate.DOOMED:
            n_doomed += 1
        elif p is Predicate.SINGLE:
            n_single += 1
    return Potential(n_proposing + n_doomed + n_single, 2 * n_doomed + n_single)


def potential(t: Topology, cfg: Configuration, byz: frozenset) -> Potential:
    """Lexicographic variant value over the radius-2 shielded node set."""
    return potential_over(t, cfg, t.c_honest_set(byz, 2))


def marriage_subset(t: Topology, cfg: Configuration, byz: frozenset, c: int) -> frozenset:
    """Shielded nodes plus outside nodes mutually married to one of them."""
    vc = t.c_honest_set(byz, c)
    extra = set()
    for u in vc:
        p = cfg[u].pref
        if p is None:
            continue
        w = t.adjacency[u][p]
        if w in vc or w in extra:
            continue
        q = cfg[w].pref
        if q is not None and t.adjacency[w][q] == u:
            extra.add(w)
    return vc | frozenset(extra)


def extract_matching(t: Topology, cfg: Configuration, subset) -> frozenset:
    """Mutual preference pairs internal to ``subset``, as (lo, hi) edges.

    One-sided proposals are not edges; each mutual pair appears once.
    """
    edges = set()
    for v in subset:
        p = cfg[v].pref
        if p is None:
            continue
        u = t.adjacency[v][p]
        if u not in subset or u < v:
            continue
        q = cfg[u].pref
        if q is not None and t.adjacency[u][q] == v:
            edges.add((v, u))
    return frozenset(edges)


def _normalize_edges(edges) -> set:
    return {(min(u, v), max(u, v)) for u, v in edges}


def induced_edges(t: Topology, subset) -> list:
    sub = set(subset)
    return sorted(
        (v, u) for v in sub for u in t.adjacency[v] if u in sub and v < u
    )


def is_maximal_matching(t: Topology, subset, edges) -> bool:
    """Definition check: the edges form a matching of the induced subgraph
    and no induced edge has both endpoints unmatched."""
    sub = set(subset)
    norm = _normalize_edges(edges)
    matched: set[int] = set()
    for u, v in norm:
        if u not in sub or v not in sub or v not in t.adjacency[u]:
            return False
        if u in matched or v in matched:
            return False
        matched.add(u)
        matched.add(v)
    for u, v in induced_edges(t, sub):
        if u not in matched and v not in matched:
            return False
    return True


MATCHING_ENUM_NODE_LIMIT = 12


def enumerate_matchings(t: Topology, subset):
    """Yield every matching (edge subsets with disjoint endpoints) of the
    induced subgraph, the empty one included.  Guarded to small subsets;
    this is the independent oracle behind maximality verdicts."""
    sub = set(subset)
    if len(sub) > MATCHING_ENUM_NODE_LIMIT:
        raise ValueError(
            f"matching enumeration limited to {MATCHING_ENUM_NODE_LIMIT} nodes, got {len(sub)}"
        )
    edges = induced_edges(t, sub)

    def rec(i: int, used: set, acc: list):
        if i == len(edges):
            yield frozenset(acc)
            return
        yield from rec(i + 1, used, acc)
        u, v = edges[i]
        if u not in used and v not in used:
            used.add(u)
            used.add(v)
            acc.append((u, v))
            yield from rec(i + 1, used, acc)
            acc.pop()
            used.discard(u)
            used.discard(v)

    yield from rec(0, set(), [])


def is_maximal_by_enumeration(t: Topology, subset, edges) -> bool:
    """Oracle verdict: enumerate all matchings of the induced subgraph and
    check none strictly contains ``edges`` (and that ``edges`` itself is a
    matching).  Independent of the definition check above."""
    norm = frozenset(_normalize_edges(edges))
    candidates = set(enumerate_matchings(t, subset))
    if norm not in candidates:
        return False
    return not any(norm < m for m in candidates)


class Violation(NamedTuple):
    step: int
    node: int
    cause: str  # "spec-broken" | "o-variable-changed"


@dataclass
class ContainmentVerdict:
    """Earliest suffix of a finite trace on which every shielded node keeps
    the legitimacy predicate and an unchanged pref; None when no such
    suffix exists within the observed horizon."""

    contained_from_step: Optional[int]
    violations: list
    horizon: int

    def to_jsonable(self, max_violations: int = 100) -> dict:
        shown = [
            {"step": s, "node": n, "cause": c}
            for s, n, c in self.violations[:max_violations]
        ]
        return {
            "contained_from_step": self.contained_from_step,
            "violations": shown,
            "violation_count": len(self.violations),
            "horizon": self.horizon,
        }


def containment_monitor(
    t: Topology, byz: frozenset, configs: Sequence[Configuration], c: int = 2
) -> ContainmentVerdict:
    """Scan a configuration sequence for containment at radius c.

    A spec break at configuration index j, or a pref change during step j,
    pushes the containment point past j.  The verdict certifies only the
    observed horizon (the trace is finite; the property is about forever).
    """
    vc = sorted(t.c_honest_set(byz, c))
    horizon = len(configs) - 1
    violations: list[Violation] = []
    last_bad = -1
    for j, cfg in enumerate(configs):
        for v in vc:
            if not spec_holds(t, cfg, v):
                violations.append(Violation(j, v, "spec-broken"))
                last_bad = max(last_bad, j)
    for j in range(horizon):
        cur, nxt = configs[j], configs[j + 1]
        for v in vc:
            if cur[v].pref != nxt[v].pref:
                violations.append(Violation(j, v, "o-variable-changed"))
                last_bad = max(last_bad, j)
    violations.sort()
    start = last_bad + 1
    return ContainmentVerdict(
        contained_from_step=start if start <= horizon else None,
        violations=violations,
        horizon=horizon,
    )


def replay_configs(t: Topology, initial: Configuration, events: Sequence[dict]) -> list:
    """Reconstruct the configuration sequence from a trace."""
    from .protocol import NodeState

    configs = [initial]
    cfg = initial
    for ev in events:
        ns = ev.get("new_state")
        if ns is not None:
            cfg = with_state(cfg, ev["actor"], NodeState(ns["pref"], ns["old_pref"]))
        configs.append(cfg)
    return configs


@dataclass
class ResolvedScenario:
    """A scenario with everything resolved to runtime objects; the unit of
    work for `run_simulation` and the model checker's convergence runs."""

    topology: Topology
    initial: Configuration
    byz: frozenset = frozenset()
    strategy: StrategySpec = StrategySpec()
    policy: DaemonPolicy = field(default_factory=schedulers.RoundRobinAge)
    byz_period: int = 2
    max_steps: int = 1000
    radius: int = 2
    protocol: str = "ssmm"
    name: Optional[str] = None

    def make_strategies(self) -> dict:
        return {
            v: self.strategy.instantiate(byz=self.byz, node=v)
            for v in self.byz
        }


@dataclass
class LoopResult:
    final: Configuration
    steps: int
    convergence_step: Optional[int]
    p_increases: int
    max_wait: int
    rule_fires: dict
    byz_actions: int
    terminal: bool
    fairness_violations: list


def run_loop(
    resolved: ResolvedScenario,
    max_steps: int,
    on_event: Optional[Callable] = None,
    stop_at_lc: bool = False,
) -> LoopResult:
    t = resolved.topology
    n = t.node_count
    byz = resolved.byz
    byz_sorted = tuple(sorted(byz))
    period = resolved.byz_period
    apply_fn = APPLY_FNS[resolved.protocol]
    policy = resolved.policy
    dstate = new_daemon_state(policy, n)
    strategies = resolved.make_strategies()
    v2 = tuple(sorted(t.c_honest_set(byz, 2)))
    wait_threshold = fairness_threshold(t)

    def score_fn(c):
        return potential_over(t, c, v2)

    cfg = resolved.initial
    pot = potential_over(t, cfg, v2)
    # primary == 0 is equivalent to radius-2 legitimacy: the five node
    # predicates partition, so a zero count of proposing/doomed/single
    # leaves only married and dead.
    convergence_step = 0 if pot.primary == 0 else None
    p_increases = 0
    waits = [0] * n
    wait_start = [0] * n
    max_wait = 0
    fairness_violations: list[schedulers.FairnessViolation] = []
    rule_fires = {Rule.M: 0, Rule.S: 0, Rule.A: 0}
    byz_actions = 0
    steps = 0
    terminal = False

    if not (stop_at_lc and convergence_step is not None):
        honest = [v for v in range(n) if v not in byz]
        for step in range(max_steps):
            enabled = tuple(v for v in honest if enabled_rule(t, cfg, v) is not None)
            byz_turn = bool(byz_sorted) and step % period == 0
            choice = next_actor(
                policy, dstate, t, cfg, enabled, byz_turn, byz_sorted,
                apply_fn=apply_fn, score_fn=score_fn,
            )
            rule = None
            new_state = None
            if choice.kind == "honest":
                rule = enabled_rule(t, cfg, choice.node)
                cfg = apply_fn(t, cfg, choice.node, rule)
                new_state = cfg[choice.node]
                rule_fires[rule] += 1
            elif choice.kind == "byz":
                new_state = byz_action(strategies[choice.node], t, cfg, choice.node, step)
                cfg = with_state(cfg, choice.node, new_state)
                byz_actions += 1
            if choice.kind != "byz":
                for v in honest:
                    if v in enabled and v != choice.node:
                        if waits[v] == 0:
                            wait_start[v] = step
                        waits[v] += 1
                        if waits[v] > max_wait:
                            max_wait = waits[v]
                        if waits[v] == wait_threshold + 1:
                            fairness_violations.append(
                                schedulers.FairnessViolation(v, wait_start[v], waits[v])
                            )
                    else:
                        waits[v] = 0
            advance(dstate, choice)
            steps += 1
            new_pot = potential_over(t, cfg, v2)
            if new_pot > pot:
                p_increases += 1
            pot = new_pot
            if convergence_step is None and pot.primary == 0:
                convergence_step = step + 1
            if on_event is not None:
                on_event(step, choice, rule, new_state, cfg, pot)
            if choice.kind == "quiescent" and not byz_sorted:
                terminal = True
                break
            if stop_at_lc and convergence_step is not None:
                break

    return LoopResult(
        final=cfg,
        steps=steps,
        convergence_step=convergence_step,
        p_increases=p_increases,
        max_wait=max_wait,
        rule_fires=rule_fires,
        byz_actions=byz_actions,
        terminal=terminal,
        fairness_violations=fairness_violations,
    )


@dataclass
class RunResult:
    events: list
    summary: dict
    configs: list


def run_simulation(resolved: ResolvedScenario, max_steps: Optional[int] = None) -> RunResult:
    """Execute a scenario and assemble the trace and summary.

    Exhausting max_steps without reaching the legitimacy set is reported as
    non-convergence in the summary, not raised.
    """
    t = resolved.topology
    byz = resolved.byz
    steps_cap = resolved.max_steps if max_steps is None else max_steps
    events: list[dict] = []
    configs: list[Configuration] = [resolved.initial]
    series: list[list[int]] = []

    def on_event(step, choice, rule, new_state, cfg, pot):
        configs.append(cfg)
        series.append([pot.primary, pot.secondary])
        events.append(
            {
                "step": step,
                "actor": choice.node,
                "kind": "rule" if choice.kind == "honest" else choice.kind,
                "rule": rule.value if rule is not None else None,
                "new_state": new_state.to_jsonable() if new_state is not None else None,
                "predicates": [p.value for p in classify_all(t, cfg)],
                "potential": [pot.primary, pot.secondary],
                "in_lc2": pot.primary == 0,
            }
        )

    loop = run_loop(resolved, steps_cap, on_event=on_event)
    initial_pot = potential(t, resolved.initial, byz)
    subset = marriage_subset(t, loop.final, byz, resolved.radius)
    matching = extract_matching(t, loop.final, subset)
    verdicts = {
        c: containment_monitor(t, byz, configs, c=c) for c in (1, 2)
    }
    if resolved.radius in verdicts:
        radius_verdict = verdicts[resolved.radius]
    else:
        radius_verdict = containment_monitor(t, byz, configs, c=resolved.radius)
        verdicts[resolved.radius] = radius_verdict

    summary = {
        "format": 1,
        "scenario": resolved.name,
        "nodes": t.node_count,
        "byzantine": sorted(byz),
        "strategy": resolved.strategy.kind,
        "policy": resolved.policy.kind,
        "byz_period": resolved.byz_period,
        "protocol": resolved.protocol,
        "radius": resolved.radius,
        "max_steps": steps_cap,
        "steps": loop.steps,
        "terminal": loop.terminal,
        "initial": {
            "config": config_to_jsonable(resolved.initial),
            "predicates": [p.value for p in classify_all(t, resolved.initial)],
            "potential": [initial_pot.primary, initial_pot.secondary],
            "in_lc": {str(c): in_lc(t, resolved.initial, byz, c) for c in (0, 1, 2)},
        },
        "convergence_step": loop.convergence_step,
        "final_potential": list(
            potential(t, loop.final, byz)
        ),
        "potential_series": [[initial_pot.primary, initial_pot.secondary]] + series,
        "final_config": config_to_jsonable(loop.final),
        "matching": sorted(list(e) for e in matching),
        "matching_subset": sorted(subset),
        "matching_maximal": is_maximal_matching(t, subset, matching),
        "containment": radius_verdict.to_jsonable(),
        "containment_by_radius": {
            str(c): verdicts[c].to_jsonable() for c in sorted(verdicts)
        },
        "rule_fires": {r.value: loop.rule_fires[r] for r in Rule},
        "byz_actions": loop.byz_actions,
        "p_increase_steps": loop.p_increases,
        "fairness": {
            "max_wait": loop.max_wait,
            "threshold": fairness_threshold(t),
            "violations": [
                {"node": fv.node, "from_step": fv.from_step, "waited": fv.waited}
                for fv in loop.fairness_violations
            ],
        },
    }
    return RunResult(events=events, summary=summary, configs=configs)
