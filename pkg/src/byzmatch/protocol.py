"""The matching protocol state machine.

Each node keeps a preference pointer ``pref`` (a local port, or None when it
is not courting anyone) and ``old_pref``, the port of its most recent failed
courtship.  Three guarded rules drive the protocol:

* M  - accept: a suitor exists, point back at one (round-robin priority).
* S  - solicit: nobody courts us, propose to some uncommitted neighbor.
* A  - abandon: our target prefers a third party, withdraw and remember it.

The round-robin scan starts one past ``old_pref`` and wraps, so the port
that just burned us is reconsidered last; a memory-less baseline variant
that always scans from port 0 (and never records failures) is included for
comparison runs.

All functions are pure: configurations are tuples of node states and every
rule application returns a fresh configuration differing only at the
activated node.
"""

from __future__ import annotations

import enum
from typing import Iterable, NamedTuple, Optional

from .topology import Topology


class NodeState(NamedTuple):
    pref: Optional[int]  # local port, or None
    old_pref: int        # always a valid local port, never None

    def to_jsonable(self) -> dict:
        return {"pref": self.pref, "old_pref": self.old_pref}


Configuration = tuple  # tuple[NodeState, ...], one state per node


class Predicate(enum.Enum):
    PROPOSING = "proposing"
    MARRIED = "married"
    DOOMED = "doomed"
    DEAD = "dead"
    SINGLE = "single"


class Rule(enum.Enum):
    M = "M"
    S = "S"
    A = "A"


class Target(enum.Enum):
    """What ``next_v`` scans for: neighbors with a null pref, or neighbors
    whose pref points back at the scanning node."""

    NULL = "null"
    SELF = "self"


class ProtocolError(ValueError):
    pass


class RuleNotEnabledError(ProtocolError):
    """Applying a rule whose guard is false is a contract violation."""


def validate_state(t: Topology, v: int, st: NodeState) -> None:
    deg = t.degree(v)
    if st.pref is not None and not 0 <= st.pref < deg:
        raise ProtocolError(f"node {v}: pref port {st.pref} out of range (deg={deg})")
    if not 0 <= st.old_pref < deg:
        raise ProtocolError(f"node {v}: old_pref port {st.old_pref} out of range (deg={deg})")


def validate_config(t: Topology, cfg: Configuration) -> None:
    if len(cfg) != t.node_count:
        raise ProtocolError(f"configuration has {len(cfg)} states for {t.node_count} nodes")
    for v, st in enumerate(cfg):
        validate_state(t, v, st)


def all_null_config(t: Topology) -> Configuration:
    """Every pref null, every old_pref at port 0."""
    return tuple(NodeState(None, 0) for _ in range(t.node_count))


def random_config(t: Topology, rng) -> Configuration:
    states = []
    for v in range(t.node_count):
        deg = t.degree(v)
        pref = rng.randrange(-1, deg)
        states.append(NodeState(None if pref < 0 else pref, rng.randrange(deg)))
    return tuple(states)


def with_state(cfg: Configuration, v: int, st: NodeState) -> Configuration:
    return cfg[:v] + (st,) + cfg[v + 1:]


def state_to_jsonable(st: NodeState) -> dict:
    return st.to_jsonable()


def config_to_jsonable(cfg: Configuration) -> list[dict]:
    return [st.to_jsonable() for st in cfg]


def config_from_jsonable(t: Topology, data: Iterable[dict]) -> Configuration:
    states = []
    for v, item in enumerate(data):
        if not isinstance(item, dict) or set(item) - {"pref", "old_pref"}:
            raise ProtocolError(f"node {v}: expected {{pref, old_pref}}, got {item!r}")
        states.append(NodeState(item.get("pref"), item.get("old_pref", 0)))
    cfg = tuple(states)
    validate_config(t, cfg)
    return cfg


def pref_node(t: Topology, cfg: Configuration, v: int) -> Optional[int]:
    """The node v's pref points at, or None."""
    p = cfg[v].pref
    return None if p is None else t.adjacency[v][p]


def is_married(t: Topology, cfg: Configuration, v: int) -> bool:
    p = cfg[v].pref
    if p is None:
        return False
    u = t.adjacency[v][p]
    q = cfg[u].pref
    return q is not None and t.adjacency[u][q] == v


def classify(t: Topology, cfg: Configuration, v: int) -> Predicate:
    """Exactly one of the five predicates holds for any node."""
    p = cfg[v].pref
    if p is not None:
        u = t.adjacency[v][p]
        q = cfg[u].pref
        if q is None:
            return Predicate.PROPOSING
        if t.adjacency[u][q] == v:
            return Predicate.MARRIED
        return Predicate.DOOMED
    for u in t.adjacency[v]:
        if not is_married(t, cfg, u):
            return Predicate.SINGLE
    return Predicate.DEAD


def classify_all(t: Topology, cfg: Configuration) -> tuple[Predicate, ...]:
    return tuple(classify(t, cfg, v) for v in range(t.node_count))


def spec_holds(t: Topology, cfg: Configuration, v: int) -> bool:
    """The local legitimacy predicate: married or dead."""
    return classify(t, cfg, v) in (Predicate.MARRIED, Predicate.DEAD)


def next_v(t: Topology, cfg: Configuration, v: int, target: Target) -> Optional[int]:
    """Round-robin candidate scan.

    Examines ports cyclically starting one past ``old_pref`` so the previous
    preference comes last; it can only be re-chosen when it is the sole
    candidate.  Returns the first port whose neighbor matches ``target``
    (null pref, or pref pointing back at v), or None when nothing matches.
    """
    adj = t.adjacency[v]
    back = t.back_ports[v]
    deg = len(adj)
    start = (cfg[v].old_pref + 1) % deg
    for k in range(deg):
        port = (start + k) % deg
        u_state = cfg[adj[port]]
        if target is Target.NULL:
            if u_state.pref is None:
                return port
        elif u_state.pref == back[port]:
            return port
    return None


def baseline_next_v(t: Topology, cfg: Configuration, v: int, target: Target) -> Optional[int]:
    """Memory-less scan: always starts at port 0, ignores old_pref."""
    adj = t.adjacency[v]
    back = t.back_ports[v]
    for port in range(len(adj)):
        u_state = cfg[adj[port]]
        if target is Target.NULL:
            if u_state.pref is None:
                return port
        elif u_state.pref == back[port]:
            return port
    return None


def enabled_rule(t: Topology, cfg: Configuration, v: int) -> Optional[Rule]:
    """The single enabled rule at v, or None.

    The guards are mutually exclusive: M and S both require a null pref but
    disagree on suitors, while A requires a non-null pref.
    """
    st = cfg[v]
    adj = t.adjacency[v]
    back = t.back_ports[v]
    if st.pref is None:
        has_null = False
        for i in range(len(adj)):
            q = cfg[adj[i]].pref
            if q is None:
                has_null = True
            elif q == back[i]:
                return Rule.M
        return Rule.S if has_null else None
    u = adj[st.pref]
    q = cfg[u].pref
    if q is None or t.adjacency[u][q] == v:
        return None
    return Rule.A


def enabled_rules(t: Topology, cfg: Configuration, v: int) -> frozenset:
    r = enabled_rule(t, cfg, v)
    return frozenset() if r is None else frozenset({r})


def _apply(t: Topology, cfg: Configuration, v: int, r: Rule, scan, record_failure: bool) -> Configuration:
    if enabled_rule(t, cfg, v) is not r:
        raise RuleNotEnabledError(f"rule {r.value} is not enabled at node {v}")
    st = cfg[v]
    if r is Rule.M:
        port = scan(t, cfg, v, Target.SELF)
        new = NodeState(port, st.old_pref)
    elif r is Rule.S:
        port = scan(t, cfg, v, Target.NULL)
        new = NodeState(port, st.old_pref)
    else:
        new = NodeState(None, st.pref if record_failure else st.old_pref)
    return with_state(cfg, v, new)


def apply_rule(t: Topology, cfg: Configuration, v: int, r: Rule) -> Configuration:
    """Fire rule r at node v; raises RuleNotEnabledError when disabled.

    The result differs from cfg only at v.  Whenever M or S is enabled the
    scan is guaranteed to find a port, so pref never becomes None through
    those rules.
    """
    return _apply(t, cfg, v, r, next_v, record_failure=True)


def baseline_apply_rule(t: Topology, cfg: Configuration, v: int, r: Rule) -> Configuration:
    """Memory-less variant: identical guards, lowest-port candidate choice,
    and rule A does not record the failed preference."""
    return _apply(t, cfg, v, r, baseline_next_v, record_failure=False)


APPLY_FNS = {"ssmm": apply_rule, "baseline": baseline_apply_rule}


def in_lc(t: Topology, cfg: Configuration, byz: frozenset, c: int) -> bool:
    """True iff every node at distance more than c from the faulty set
    satisfies the legitimacy predicate (vacuously true when that set is
    empty)."""
    return all(spec_holds(t, cfg, v) for v in t.c_honest_set(byz, c))
