"""Central daemon policies.

Exactly one actor moves per step.  Adversary turns are offered on a fixed
deterministic cadence (every ``byz_period``-th step) so that perturbed runs
stay reproducible; they never count against honest fairness.  Every shipped
policy bounds the waiting time of a continuously enabled honest node, which
implies the weak fairness the model demands and makes fairness auditable on
finite traces.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

from .protocol import Configuration, NodeState, enabled_rule, with_state
from .topology import Topology


@dataclass(frozen=True)
class RoundRobinAge:
    """Pick the enabled honest node that has waited longest (max age,
    ties to the lowest index)."""

    kind: str = "round-robin-age"


@dataclass(frozen=True)
class SeededRandomFair:
    """Uniform random choice among enabled nodes, with a starvation guard:
    once some enabled node's age reaches twice the node count it is picked
    unconditionally."""

    seed: int = 0
    kind: str = "seeded-random"


@dataclass(frozen=True)
class AdversarialGreedy:
    """Worst-case-but-fair daemon: picks the enabled honest node whose move
    leaves the potential highest (ties to the lowest index), subject to the
    same starvation guard as SeededRandomFair."""

    kind: str = "adversarial-greedy"


DaemonPolicy = RoundRobinAge | SeededRandomFair | AdversarialGreedy

POLICY_KINDS = ("round-robin-age", "seeded-random", "adversarial-greedy")


def make_policy(kind: str, seed: int = 0) -> DaemonPolicy:
    if kind == "round-robin-age":
        return RoundRobinAge()
    if kind == "seeded-random":
        return SeededRandomFair(seed=seed)
    if kind == "adversarial-greedy":
        return AdversarialGreedy()
    raise ValueError(f"unknown daemon policy {kind!r}")


@dataclass
class DaemonState:
    """Book-keeping owned by a single run: per-node ages (steps since last
    activation), the step index, the RNG for seeded policies, and the
    rotation cursor for multi-node adversaries."""

    ages: list[int]
    step: int = 0
    rng: Optional[random.Random] = None
    byz_cursor: int = 0


def new_daemon_state(policy: DaemonPolicy, node_count: int) -> DaemonState:
    rng = random.Random(policy.seed) if isinstance(policy, SeededRandomFair) else None
    return DaemonState(ages=[0] * node_count, rng=rng)


class ActorChoice(NamedTuple):
    kind: str  # "honest" | "byz" | "quiescent"
    node: Optional[int]


QUIESCENT = ActorChoice("quiescent", None)


def next_actor(
    policy: DaemonPolicy,
    state: DaemonState,
    t: Topology,
    cfg: Configuration,
    enabled_honest: Sequence[int],
    byz_turn_available: bool,
    byz: Sequence[int],
    apply_fn: Optional[Callable] = None,
    score_fn: Optional[Callable] = None,
) -> ActorChoice:
    """Choose exactly one actor for this step.

    Adversary turns, when offered and a faulty node exists, preempt honest
    ones; quiescent is returned only when nothing honest is enabled and no
    adversary turn is taken.  AdversarialGreedy needs ``apply_fn`` (rule
    application) and ``score_fn`` (configuration -> potential) injected by
    the runner.
    """
    if byz_turn_available and byz:
        node = sorted(byz)[state.byz_cursor % len(byz)]
        return ActorChoice("byz", node)
    if not enabled_honest:
        return QUIESCENT

    ages = state.ages
    if isinstance(policy, RoundRobinAge):
        pick = max(enabled_honest, key=lambda v: (ages[v], -v))
        return ActorChoice("honest", pick)

    guard = 2 * t.node_count
    oldest = max(enabled_honest, key=lambda v: (ages[v], -v))
    if ages[oldest] >= guard:
        return ActorChoice("honest", oldest)

    if isinstance(policy, SeededRandomFair):
        return ActorChoice("honest", state.rng.choice(sorted(enabled_honest)))

    if isinstance(policy, AdversarialGreedy):
        if apply_fn is None or score_fn is None:
            raise ValueError("AdversarialGreedy needs apply_fn and score_fn")
        best, best_score = None, None
        for v in sorted(enabled_honest):
            r = enabled_rule(t, cfg, v)
            score = score_fn(apply_fn(t, cfg, v, r))
            if best_score is None or score > best_score:
                best, best_score = v, score
        return ActorChoice("honest", best)

    raise ValueError(f"unknown policy {policy!r}")


def advance(state: DaemonState, choice: ActorChoice) -> None:
    """Advance ages and cursors after a step."""
    for v in range(len(state.ages)):
        state.ages[v] += 1
    if choice.kind == "honest":
        state.ages[choice.node] = 0
    elif choice.kind == "byz":
        state.byz_cursor += 1
    state.step += 1


def fairness_threshold(t: Topology) -> int:
    """Audit bound: node count times the largest per-node state count."""
    max_states = max((t.degree(v) + 1) * t.degree(v) for v in range(t.node_count))
    return t.node_count * max_states


@dataclass(frozen=True)
class FairnessViolation:
    node: int
    from_step: int
    waited: int


def fairness_audit(
    t: Topology,
    byz: frozenset,
    initial: Configuration,
    events: Sequence[dict],
    threshold: Optional[int] = None,
) -> list[FairnessViolation]:
    """Post-hoc fairness check over a finished trace.

    Replays the configurations and reports every honest node that stayed
    enabled for more than ``threshold`` consecutive honest-turn steps
    without being activated.  Adversary turns do not count: the offer
    cadence is a scheduler parameter, not a fairness debt.  Empty report
    means the schedule honored bounded waiting.
    """
    if threshold is None:
        threshold = fairness_threshold(t)
    cfg = initial
    waits = [0] * t.node_count
    since = [0] * t.node_count
    violations: dict[int, FairnessViolation] = {}
    for ev in events:
        kind = ev["kind"]
        actor = ev.get("actor")
        if kind != "byz":
            for v in range(t.node_count):
                if v in byz:
                    continue
                if enabled_rule(t, cfg, v) is None or v == actor:
                    waits[v] = 0
                    since[v] = ev["step"] + 1
                else:
                    waits[v] += 1
                    if waits[v] > threshold:
                        prev = violations.get(v)
                        if prev is None or waits[v] > prev.waited:
                            violations[v] = FairnessViolation(v, since[v], waits[v])
        if kind in ("rule", "byz") and ev.get("new_state") is not None:
            ns = ev["new_state"]
            cfg = with_state(cfg, actor, NodeState(ns["pref"], ns["old_pref"]))
    return sorted(violations.values(), key=lambda x: x.node)
