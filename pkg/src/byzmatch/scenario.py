"""Scenario files: the strict, versioned schema for reproducible runs.

A scenario pins everything a run needs: the graph, the initial
configuration, the faulty nodes and their strategy, the daemon policy and
its adversary cadence, the step cap, and the containment radius.  Schema
violations are rejected with the offending field named.  A few named
scenarios ship built in so tests and docs need no fixture paths.
"""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .adversary import Scripted, StrategySpec
from .analysis import ResolvedScenario
from .protocol import (
    NodeState,
    all_null_config,
    config_from_jsonable,
    random_config,
)
from .schedulers import make_policy
from .topology import GraphError, Topology, build_topology, named_graph, parse_graph_file


class ScenarioError(ValueError):
    """Semantic scenario problem; message names the offending field."""


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GraphModel(_StrictModel):
    """Exactly one of: a built-in name, a graph file path, or inline
    ``n`` + ``edges``."""

    name: Optional[str] = None
    file: Optional[str] = None
    n: Optional[int] = None
    edges: Optional[list[tuple[int, int]]] = None

    @model_validator(mode="after")
    def _one_source(self):
        inline = self.n is not None or self.edges is not None
        sources = sum([self.name is not None, self.file is not None, inline])
        if sources != 1:
            raise ValueError("graph: give exactly one of name, file, or n+edges")
        if inline and (self.n is None or self.edges is None):
            raise ValueError("graph: inline graphs need both n and edges")
        return self


class ScriptEntryModel(_StrictModel):
    step: int = Field(ge=0)
    pref: Optional[int] = None
    old_pref: int = Field(default=0, ge=0)


class StrategyModel(_StrictModel):
    kind: Literal[
        "dormant", "divorcer", "oscillator", "seducer", "random-state", "scripted"
    ] = "dormant"
    period: int = Field(default=1, ge=1)
    seed: int = 0
    entries: list[ScriptEntryModel] = Field(default_factory=list)

    def to_spec(self) -> StrategySpec:
        return StrategySpec(
            kind=self.kind,
            period=self.period,
            seed=self.seed,
            entries=tuple((e.step, (e.pref, e.old_pref)) for e in self.entries),
        )


class ByzantineModel(_StrictModel):
    nodes: list[int] = Field(default_factory=list)
    strategy: StrategyModel = Field(default_factory=StrategyModel)


class DaemonModel(_StrictModel):
    kind: Literal["round-robin-age", "seeded-random", "adversarial-greedy"] = (
        "round-robin-age"
    )
    seed: int = 0
    # adversary turns are offered every byz_period-th step; 1 would starve
    # honest nodes outright and break the fairness contract
    byz_period: int = Field(default=2, ge=2)


class StateModel(_StrictModel):
    pref: Optional[int] = None
    old_pref: int = Field(default=0, ge=0)


class InitialModel(_StrictModel):
    kind: Literal["all-null", "random", "explicit", "enumerate"] = "all-null"
    seed: int = 0
    states: Optional[list[StateModel]] = None

    @model_validator(mode="after")
    def _states_match_kind(self):
        if self.kind == "explicit" and not self.states:
            raise ValueError("initial: explicit initial needs states")
        if self.kind != "explicit" and self.states is not None:
            raise ValueError("initial: states only allowed with kind=explicit")
        return self


class Scenario(_StrictModel):
    format: Literal[1] = 1
    name: Optional[str] = None
    description: Optional[str] = None
    graph: GraphModel
    initial: Union[str, InitialModel] = Field(default_factory=InitialModel)
    byzantine: Optional[ByzantineModel] = None
    daemon: DaemonModel = Field(default_factory=DaemonModel)
    max_steps: int = Field(default=1000, ge=1)
    radius: int = Field(default=2, ge=0)
    protocol: Literal["ssmm", "baseline"] = "ssmm"

    @model_validator(mode="after")
    def _coerce_initial(self):
        if isinstance(self.initial, str):
            if self.initial != "all-null":
                raise ValueError(
                    "initial: only 'all-null' may be given as a bare string"
                )
            self.initial = InitialModel(kind="all-null")
        return self


BUILTIN_SCENARIOS: dict[str, dict] = {
    "theorem2": {
        "format": 1,
        "name": "theorem2",
        "description": "Radius-1 impossibility demonstration: 5-chain with both "
        "end pairs married, faulty left endpoint divorces on its first turn; "
        "the middle node breaks at radius 1 while radius 2 stays contained.",
        "graph": {"name": "p5"},
        "initial": {
            "kind": "explicit",
            "states": [
                {"pref": 0, "old_pref": 0},
                {"pref": 0, "old_pref": 0},
                {"pref": None, "old_pref": 0},
                {"pref": 1, "old_pref": 0},
                {"pref": 0, "old_pref": 0},
            ],
        },
        "byzantine": {"nodes": [0], "strategy": {"kind": "divorcer"}},
        "daemon": {"kind": "round-robin-age", "byz_period": 2},
        "max_steps": 1000,
        "radius": 2,
    },
    "edge-smoke": {
        "format": 1,
        "name": "edge-smoke",
        "description": "Two nodes, one edge, empty memory: the smallest run "
        "that ends married.",
        "graph": {"name": "edge"},
        "initial": "all-null",
        "daemon": {"kind": "round-robin-age"},
        "max_steps": 50,
        "radius": 2,
    },
    "p5-all-null": {
        "format": 1,
        "name": "p5-all-null",
        "description": "5-chain from empty memory, no faults; converges to a "
        "maximal matching.",
        "graph": {"name": "p5"},
        "initial": "all-null",
        "daemon": {"kind": "round-robin-age"},
        "max_steps": 200,
        "radius": 2,
    },
}


def builtin_scenario(name: str) -> Scenario:
    if name not in BUILTIN_SCENARIOS:
        raise ScenarioError(
            f"unknown builtin scenario {name!r}; have {sorted(BUILTIN_SCENARIOS)}"
        )
    return Scenario.model_validate(BUILTIN_SCENARIOS[name])


def load_scenario(path_or_name: str, base_dir: Optional[Path] = None) -> Scenario:
    """A builtin name, or a path to a scenario JSON file."""
    if path_or_name in BUILTIN_SCENARIOS:
        return builtin_scenario(path_or_name)
    path = Path(path_or_name)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise ScenarioError(
            f"{path_or_name!r} is neither a builtin scenario nor an existing file"
        )
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: not valid JSON: {e}") from e
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        raise ScenarioError(f"{path}: {format_validation_error(e)}") from e


def format_validation_error(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def resolve_graph(g: GraphModel, base_dir: Optional[Path] = None) -> Topology:
    try:
        if g.name is not None:
            return named_graph(g.name)
        if g.file is not None:
            path = Path(g.file)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return parse_graph_file(path.read_text())
        return build_topology(g.n, [tuple(e) for e in g.edges])
    except FileNotFoundError as e:
        raise ScenarioError(f"graph.file: {e}") from e
    except GraphError as e:
        raise ScenarioError(f"graph: {e}") from e


def resolve_scenario(s: Scenario, base_dir: Optional[Path] = None) -> ResolvedScenario:
    """Type-check the scenario against its graph and build runtime objects."""
    t = resolve_graph(s.graph, base_dir)

    byz_model = s.byzantine or ByzantineModel()
    for v in byz_model.nodes:
        if not 0 <= v < t.node_count:
            raise ScenarioError(
                f"byzantine.nodes: node {v} out of range (n={t.node_count})"
            )
    byz = frozenset(byz_model.nodes)
    strategy = byz_model.strategy.to_spec()
    if strategy.kind == "scripted":
        entries = {step: NodeState(*state) for step, state in strategy.entries}
        for v in sorted(byz):
            try:
                Scripted(entries).validate(t, v)
            except Exception as e:
                raise ScenarioError(f"byzantine.strategy.entries: node {v}: {e}") from e

    initial_model = s.initial
    assert isinstance(initial_model, InitialModel)
    if initial_model.kind == "all-null":
        initial = all_null_config(t)
    elif initial_model.kind == "random":
        initial = random_config(t, random.Random(initial_model.seed))
    elif initial_model.kind == "explicit":
        try:
            initial = config_from_jsonable(
                t, [st.model_dump() for st in initial_model.states]
            )
        except Exception as e:
            raise ScenarioError(f"initial.states: {e}") from e
    else:
        raise ScenarioError(
            "initial.kind: 'enumerate' is only meaningful for model checking, "
            "not for single runs"
        )

    policy = make_policy(s.daemon.kind, seed=s.daemon.seed)
    return ResolvedScenario(
        topology=t,
        initial=initial,
        byz=byz,
        strategy=strategy,
        policy=policy,
        byz_period=s.daemon.byz_period,
        max_steps=s.max_steps,
        radius=s.radius,
        protocol=s.protocol,
        name=s.name,
    )


def scenario_from_resolved(r: ResolvedScenario) -> Scenario:
    """Inline scenario document reproducing a resolved run; used to make
    counterexamples replayable."""
    t = r.topology
    policy_kind = r.policy.kind
    seed = getattr(r.policy, "seed", 0)
    strategy = StrategyModel(
        kind=r.strategy.kind,
        period=r.strategy.period,
        seed=r.strategy.seed,
        entries=[
            ScriptEntryModel(step=step, pref=state[0], old_pref=state[1])
            for step, state in r.strategy.entries
        ],
    )
    return Scenario(
        format=1,
        name=r.name,
        graph=GraphModel(n=t.node_count, edges=sorted(t.edges())),
        initial=InitialModel(
            kind="explicit",
            states=[StateModel(pref=st.pref, old_pref=st.old_pref) for st in r.initial],
        ),
        byzantine=ByzantineModel(nodes=sorted(r.byz), strategy=strategy)
        if r.byz
        else None,
        daemon=DaemonModel(kind=policy_kind, seed=seed, byz_period=r.byz_period),
        max_steps=r.max_steps,
        radius=r.radius,
        protocol=r.protocol,
    )
