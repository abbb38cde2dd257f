"""Parameter sweeps: a cartesian grid of scenarios run to summary rows.

Cells are independent and may run in parallel; per-cell failures become a
row with an error message and the sweep continues.  Row order is the cell
expansion order regardless of completion order, so outputs stay
deterministic.
"""

from __future__ import annotations

import csv
import io
import statistics
from concurrent.futures import ProcessPoolExecutor
from typing import Literal, Optional

from pydantic import Field

from .analysis import run_simulation
from .scenario import (
    GraphModel,
    Scenario,
    StrategyModel,
    _StrictModel,
    resolve_scenario,
)

CSV_COLUMNS = [
    "cell",
    "graph",
    "protocol",
    "policy",
    "strategy",
    "seed",
    "byz_period",
    "byz",
    "converged",
    "convergence_step",
    "final_potential_primary",
    "final_potential_secondary",
    "matching_size",
    "matching_maximal",
    "contained_from_step",
    "rule_M",
    "rule_S",
    "rule_A",
    "byz_actions",
    "steps",
    "max_wait",
    "error",
]


class SweepAxes(_StrictModel):
    graph: Optional[list[GraphModel]] = None
    strategy: Optional[list[StrategyModel]] = None
    seed: Optional[list[int]] = None
    byz_period: Optional[list[int]] = None
    protocol: Optional[list[Literal["ssmm", "baseline"]]] = None
    daemon: Optional[
        list[Literal["round-robin-age", "seeded-random", "adversarial-greedy"]]
    ] = None


class SweepSpec(_StrictModel):
    format: Literal[1] = 1
    name: Optional[str] = None
    base: Scenario
    axes: SweepAxes = Field(default_factory=SweepAxes)


def _graph_label(g: GraphModel) -> str:
    if g.name:
        return g.name
    if g.file:
        return g.file
    return f"inline-n{g.n}"


def expand_cells(spec: SweepSpec) -> list[tuple[int, dict, Scenario]]:
    """All (cell index, axis-value labels, scenario) triples, in grid order."""
    base = spec.base
    graphs = spec.axes.graph or [base.graph]
    strategies = spec.axes.strategy
    if strategies is None:
        strategies = [base.byzantine.strategy] if base.byzantine else [StrategyModel()]
    seeds = spec.axes.seed or [base.daemon.seed]
    periods = spec.axes.byz_period or [base.daemon.byz_period]
    protocols = spec.axes.protocol or [base.protocol]
    daemons = spec.axes.daemon or [base.daemon.kind]

    cells = []
    idx = 0
    for g in graphs:
        for proto in protocols:
            for daemon in daemons:
                for strat in strategies:
                    for period in periods:
                        for seed in seeds:
                            doc = base.model_copy(deep=True)
                            doc.graph = g
                            doc.protocol = proto
                            doc.daemon.kind = daemon
                            doc.daemon.seed = seed
                            doc.daemon.byz_period = period
                            if doc.byzantine is not None:
                                doc.byzantine.strategy = strat
                            if (
                                not isinstance(doc.initial, str)
                                and doc.initial.kind == "random"
                            ):
                                doc.initial.seed = seed
                            labels = {
                                "graph": _graph_label(g),
                                "protocol": proto,
                                "policy": daemon,
                                "strategy": strat.kind,
                                "seed": seed,
                                "byz_period": period,
                            }
                            cells.append((idx, labels, doc))
                            idx += 1
    return cells


def run_cell(payload: tuple[int, dict, dict]) -> dict:
    """Execute one cell from plain JSON data (picklable for worker pools)."""
    idx, labels, doc = payload
    row = {"cell": idx, **labels, "error": None}
    try:
        scenario = Scenario.model_validate(doc)
        resolved = resolve_scenario(scenario)
        summary = run_simulation(resolved).summary
        row.update(
            {
                "byz": " ".join(str(b) for b in summary["byzantine"]),
                "converged": summary["convergence_step"] is not None,
                "convergence_step": summary["convergence_step"],
                "final_potential_primary": summary["final_potential"][0],
                "final_potential_secondary": summary["final_potential"][1],
                "matching_size": len(summary["matching"]),
                "matching_maximal": summary["matching_maximal"],
                "contained_from_step": summary["containment"]["contained_from_step"],
                "rule_M": summary["rule_fires"]["M"],
                "rule_S": summary["rule_fires"]["S"],
                "rule_A": summary["rule_fires"]["A"],
                "byz_actions": summary["byz_actions"],
                "steps": summary["steps"],
                "max_wait": summary["fairness"]["max_wait"],
            }
        )
    except Exception as e:  # cell isolation: a bad cell must not kill the sweep
        row["error"] = str(e) or type(e).__name__
    return row


def run_sweep(spec: SweepSpec, jobs: int = 1) -> dict:
    cells = expand_cells(spec)
    payloads = [
        (idx, labels, doc.model_dump(mode="json")) for idx, labels, doc in cells
    ]
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_cell, payloads))
    else:
        rows = [run_cell(p) for p in payloads]
    rows.sort(key=lambda r: r["cell"])
    return {"rows": rows, "aggregates": aggregate_rows(rows)}


def aggregate_rows(rows: list[dict]) -> dict:
    converged = [
        r["convergence_step"]
        for r in rows
        if r["error"] is None and r.get("convergence_step") is not None
    ]
    return {
        "cells": len(rows),
        "errors": sum(1 for r in rows if r["error"] is not None),
        "converged_cells": len(converged),
        "non_converged_cells": sum(
            1
            for r in rows
            if r["error"] is None and r.get("convergence_step") is None
        ),
        "max_convergence_step": max(converged) if converged else None,
        "median_convergence_step": statistics.median(converged) if converged else None,
    }


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _csv_cell(row.get(k)) for k in CSV_COLUMNS})
    return buf.getvalue()


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return value
