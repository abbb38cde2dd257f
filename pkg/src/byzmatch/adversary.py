"""Byzantine behavior generators.

A faulty node may rewrite its own state arbitrarily on its turns; it can
read neighbor states (shared-state model) but never write anyone else's
memory.  Strategies are small stateful objects, one instance per faulty
node per run, all behind the same ``act`` interface so the model checker
can swap in exhaustive state enumeration instead of a fixed strategy.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .protocol import Configuration, NodeState, is_married, validate_state
from .topology import Topology


class AdversaryError(ValueError):
    pass


class Dormant:
    """Never changes state."""

    def act(self, t: Topology, cfg: Configuration, v: int, step: int) -> NodeState:
        return cfg[v]


class Divorcer:
    """Breaks its own marriage by resetting pref; otherwise does nothing."""

    def act(self, t: Topology, cfg: Configuration, v: int, step: int) -> NodeState:
        st = cfg[v]
        if is_married(t, cfg, v):
            return NodeState(None, st.old_pref)
        return st


@dataclass
class Oscillator:
    """Cycles pref through port 0, 1, ..., deg-1, None, dwelling ``period``
    turns on each value."""

    period: int = 1
    _turn: int = field(default=0, init=False)

    def act(self, t: Topology, cfg: Configuration, v: int, step: int) -> NodeState:
        deg = t.degree(v)
        idx = (self._turn // self.period) % (deg + 1)
        self._turn += 1
        pref = idx if idx < deg else None
        return NodeState(pref, cfg[v].old_pref)


@dataclass
class Seducer:
    """Alternates between proposing to a well-connected honest neighbor and
    retracting the proposal.

    The mark is the lowest-port neighbor with at least two honest neighbors
    of its own (a node whose defection disturbs the most others).  With no
    such neighbor the strategy is a no-op.
    """

    byz: frozenset = frozenset()
    _retracting: bool = field(default=False, init=False)

    def act(self, t: Topology, cfg: Configuration, v: int, step: int) -> NodeState:
        st = cfg[v]
        if self._retracting:
            self._retracting = False
            return NodeState(None, st.old_pref)
        mark = self._mark(t, v)
        if mark is None:
            return st
        self._retracting = True
        return NodeState(mark, st.old_pref)

    def _mark(self, t: Topology, v: int) -> Optional[int]:
        for port, u in enumerate(t.adjacency[v]):
            honest = sum(1 for w in t.adjacency[u] if w not in self.byz)
            if honest >= 2:
                return port
        return None


@dataclass
class RandomState:
    """Uniform random valid state each turn, deterministic per seed.  Each
    faulty node derives its own stream so two nodes never mirror."""

    seed: int = 0
    node: int = 0
    _rng: random.Random = field(init=False, repr=False)

    def __post_init__(self):
        # distinct integer stream per (seed, node) pair
        self._rng = random.Random(self.seed * 2654435761 + self.node)

    def act(self, t: Topology, cfg: Configuration, v: int, step: int) -> NodeState:
        deg = t.degree(v)
        pref = self._rng.randrange(-1, deg)
        return NodeState(None if pref < 0 else pref, self._rng.randrange(deg))


@dataclass
class Scripted:
    """Replays ``entries``: a mapping of global step index to state.  Steps
    without an entry are no-ops.  Entries are validated against the node's
    degree up front (scenario load time)."""

    entries: dict  # step -> NodeState

    def validate(self, t: Topology, v: int) -> None:
        for step, st in self.entries.items():
            try:
                validate_state(t, v, st)
            except Exception as e:
                raise AdversaryError(f"scripted entry at step {step}: {e}") from e

    def act(self, t: Topology, cfg: Configuration, v: int, step: int) -> NodeState:
        return self.entries.get(step, cfg[v])


STRATEGY_KINDS = ("dormant", "divorcer", "oscillator", "seducer", "random-state", "scripted")


@dataclass(frozen=True)
class StrategySpec:
    """Declarative strategy description: picklable, hashable, turned into a
    fresh stateful instance per faulty node per run."""

    kind: str = "dormant"
    period: int = 1
    seed: int = 0
    entries: tuple = ()  # ((step, (pref, old_pref)), ...) for scripted

    def instantiate(self, byz: frozenset = frozenset(), node: int = 0):
        entries = {step: NodeState(*state) for step, state in self.entries}
        return make_strategy(
            self.kind, period=self.period, seed=self.seed,
            entries=entries, byz=byz, node=node,
        )


def make_strategy(kind: str, *, period: int = 1, seed: int = 0,
                  entries: Optional[dict] = None, byz: frozenset = frozenset(),
                  node: int = 0):
    """Instantiate one strategy object for one faulty node."""
    if kind == "dormant":
        return Dormant()
    if kind == "divorcer":
        return Divorcer()
    if kind == "oscillator":
        if period < 1:
            raise AdversaryError(f"oscillator period must be >= 1, got {period}")
        return Oscillator(period=period)
    if kind == "seducer":
        return Seducer(byz=byz)
    if kind == "random-state":
        return RandomState(seed=seed, node=node)
    if kind == "scripted":
        return Scripted(entries=dict(entries or {}))
    raise AdversaryError(f"unknown adversary strategy {kind!r}")


def byz_action(strategy, t: Topology, cfg: Configuration, v: int, step: int) -> NodeState:
    """The faulty node's next full state.  Only v's own state may change;
    the produced state is checked against the node's port range."""
    st = strategy.act(t, cfg, v, step)
    validate_state(t, v, st)
    return st
