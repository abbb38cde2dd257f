"""HTTP face of the toolkit.

Wraps the core package behind a small FastAPI app so runs, sweeps, and
model checks can be served from a shared box; the CLI talks to this app
(in-process by default, remotely with --server).  Endpoints are stateless:
every request carries the full scenario or spec, every response carries
the complete result.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .adversary import StrategySpec
from .analysis import run_simulation
from .modelcheck import (
    DEFAULT_BUDGET,
    DEFAULT_CONVERGENCE_STRATEGIES,
    BudgetExceededError,
    run_checks,
)
from .scenario import (
    BUILTIN_SCENARIOS,
    GraphModel,
    Scenario,
    ScenarioError,
    StrategyModel,
    builtin_scenario,
    resolve_graph,
    resolve_scenario,
)
from .schedulers import make_policy
from .sweep import SweepSpec, run_sweep
from .topology import GraphError

app = FastAPI(
    title="byzmatch",
    version=__version__,
    description="Simulator and bounded exhaustive checker for a "
    "Byzantine-containing self-stabilizing matching protocol.",
)


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: Union[str, Scenario]
    max_steps: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = None
    byz_period: Optional[int] = Field(default=None, ge=2)
    radius: Optional[int] = Field(default=None, ge=0)


class RunResponse(BaseModel):
    summary: dict
    trace: list[dict]


class ModelCheckRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    graph: Optional[GraphModel] = None
    byz: list[int] = Field(default_factory=list)
    checks: list[str] = Field(default_factory=lambda: ["all"])
    budget: int = Field(default=DEFAULT_BUDGET, ge=1)
    step_budget: Optional[int] = Field(default=None, ge=1)
    policies: list[
        Literal["round-robin-age", "seeded-random", "adversarial-greedy"]
    ] = Field(default_factory=lambda: ["round-robin-age", "adversarial-greedy"])
    strategies: Optional[list[StrategyModel]] = None
    byz_period: int = Field(default=2, ge=2)
    protocol: Literal["ssmm", "baseline"] = "ssmm"
    seed: int = 0


class ModelCheckResponse(BaseModel):
    ok: bool
    reports: list[dict]


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    spec: SweepSpec
    jobs: int = Field(default=1, ge=1, le=16)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/scenarios")
def list_scenarios() -> dict:
    return {
        "scenarios": [
            {"name": name, "description": doc.get("description", "")}
            for name, doc in sorted(BUILTIN_SCENARIOS.items())
        ]
    }


@app.get("/scenarios/{name}")
def get_scenario(name: str) -> dict:
    try:
        return builtin_scenario(name).model_dump(mode="json", exclude_none=True)
    except ScenarioError as e:
        raise HTTPException(status_code=404, detail=str(e)) from e


@app.post("/run", response_model=RunResponse)
def post_run(req: RunRequest) -> RunResponse:
    try:
        scenario = (
            builtin_scenario(req.scenario)
            if isinstance(req.scenario, str)
            else req.scenario
        )
        scenario = _apply_overrides(scenario, req)
        resolved = resolve_scenario(scenario)
        result = run_simulation(resolved)
    except (ScenarioError, GraphError) as e:
        raise HTTPException(status_code=422, detail=str(e)) from e
    return RunResponse(summary=result.summary, trace=result.events)


def _apply_overrides(scenario: Scenario, req: RunRequest) -> Scenario:
    doc = scenario.model_copy(deep=True)
    if req.max_steps is not None:
        doc.max_steps = req.max_steps
    if req.radius is not None:
        doc.radius = req.radius
    if req.byz_period is not None:
        doc.daemon.byz_period = req.byz_period
    if req.seed is not None:
        doc.daemon.seed = req.seed
        if not isinstance(doc.initial, str) and doc.initial.kind == "random":
            doc.initial.seed = req.seed
    return doc


@app.post("/modelcheck", response_model=ModelCheckResponse)
def post_modelcheck(req: ModelCheckRequest) -> ModelCheckResponse:
    try:
        t = resolve_graph(req.graph) if req.graph is not None else None
        if t is not None:
            for v in req.byz:
                if not 0 <= v < t.node_count:
                    raise ScenarioError(f"byz: node {v} out of range (n={t.node_count})")
        strategies: tuple[StrategySpec, ...] = (
            tuple(s.to_spec() for s in req.strategies)
            if req.strategies is not None
            else DEFAULT_CONVERGENCE_STRATEGIES
        )
        reports = run_checks(
            t,
            frozenset(req.byz),
            req.checks,
            policies=[make_policy(k, seed=req.seed) for k in req.policies],
            strategies=strategies,
            byz_period=req.byz_period,
            step_budget=req.step_budget,
            budget=req.budget,
            protocol=req.protocol,
        )
    except BudgetExceededError as e:
        raise HTTPException(status_code=422, detail=str(e)) from e
    except (ScenarioError, GraphError, ValueError) as e:
        raise HTTPException(status_code=422, detail=str(e)) from e
    return ModelCheckResponse(
        ok=all(r.passed for r in reports),
        reports=[r.to_jsonable() for r in reports],
    )


@app.post("/sweep")
def post_sweep(req: SweepRequest) -> dict:
    try:
        return run_sweep(req.spec, jobs=req.jobs)
    except (ScenarioError, GraphError) as e:
        raise HTTPException(status_code=422, detail=str(e)) from e
