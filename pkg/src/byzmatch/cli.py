"""Command-line front end: a thin client of the HTTP service.

By default the CLI mounts the service in-process, so it works standalone;
pass --server to target a remote instance instead.  All computation
happens behind the service API either way, and the client only marshals
requests and persists responses.

Exit codes: 0 success (non-convergence is a finding, not a failure),
1 model-check property failure, 2 bad input.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click
import httpx

from .scenario import Scenario, ScenarioError, format_validation_error, load_scenario
from .sweep import SweepSpec, rows_to_csv
from .traces import canonical_dumps, write_atomic, write_summary, write_trace

EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2


class ClientError(Exception):
    def __init__(self, status: int, detail: str):
        super().__init__(detail)
        self.status = status
        self.detail = detail


class ServiceClient:
    """HTTP client; in-process ASGI when no server URL is given."""

    def __init__(self, server: Optional[str] = None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            import warnings

            with warnings.catch_warnings():
                # the bundled test client nags about httpx versions; it is
                # the supported way to mount an ASGI app in-process
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import app

            self._client = TestClient(app)

    def request(self, method: str, path: str, **kwargs) -> dict:
        resp = self._client.request(method, path, **kwargs)
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except Exception:
                detail = resp.text
            raise ClientError(resp.status_code, str(detail))
        return resp.json()

    def get(self, path: str) -> dict:
        return self.request("GET", path)

    def post(self, path: str, payload: dict) -> dict:
        return self.request("POST", path, json=payload)


def _fail(message: str, code: int = EXIT_BAD_INPUT):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _inline_graph_model(g, base_dir: Path):
    """Graph files are client-local; a remote service never sees our
    filesystem, so the thin client resolves them before posting."""
    if g.file is None:
        return g
    from .scenario import GraphModel, resolve_graph

    t = resolve_graph(g, base_dir=base_dir)
    return GraphModel(n=t.node_count, edges=sorted(t.edges()))


def _inline_graph_files(doc: Scenario, base_dir: Path) -> Scenario:
    if doc.graph.file is None:
        return doc
    doc = doc.model_copy(deep=True)
    doc.graph = _inline_graph_model(doc.graph, base_dir)
    return doc


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Remote service URL (default: run in-process).")
@click.pass_context
def main(ctx: click.Context, server: Optional[str]):
    """Simulate, sweep, and model-check the matching protocol."""
    ctx.obj = {"server": server}


def _client(ctx: click.Context) -> ServiceClient:
    return ServiceClient(ctx.obj.get("server"))


@main.command()
@click.argument("scenario")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Output directory (default runs/<scenario>).")
@click.option("--max-steps", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--byz-period", type=int, default=None)
@click.option("--radius", type=int, default=None)
@click.pass_context
def run(ctx, scenario: str, out: Optional[Path], max_steps, seed, byz_period, radius):
    """Run SCENARIO (builtin name or JSON file) and write trace + summary."""
    try:
        doc = load_scenario(scenario)
        doc = _inline_graph_files(doc, Path(scenario).parent)
    except ScenarioError as e:
        _fail(str(e))
    payload = {"scenario": doc.model_dump(mode="json", exclude_none=True)}
    for key, value in (
        ("max_steps", max_steps),
        ("seed", seed),
        ("byz_period", byz_period),
        ("radius", radius),
    ):
        if value is not None:
            payload[key] = value
    try:
        data = _client(ctx).post("/run", payload)
    except ClientError as e:
        _fail(e.detail)

    summary = data["summary"]
    name = doc.name or Path(scenario).stem
    out_dir = out if out is not None else Path("runs") / name
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trace(out_dir / "trace.jsonl", data["trace"], summary)
    write_summary(out_dir / "summary.json", summary)

    conv = summary["convergence_step"]
    state = f"converged at step {conv}" if conv is not None else "did not converge"
    click.echo(
        f"{name}: {state}; steps={summary['steps']} "
        f"matching={len(summary['matching'])} maximal={summary['matching_maximal']} "
        f"contained_from={summary['containment']['contained_from_step']} "
        f"-> {out_dir}"
    )


@main.command()
@click.argument("graph", required=False)
@click.option("--byz", default="", metavar="NODES",
              help="Comma-separated faulty node indices.")
@click.option("--checks", default="all", metavar="LIST",
              help="Comma list of lemma6,closure,convergence,theorem2 or 'all'.")
@click.option("--budget", type=int, default=None,
              help="Configuration-count ceiling for exhaustive checks.")
@click.option("--step-budget", type=int, default=None,
              help="Per-run step ceiling for convergence (default 50*n).")
@click.option("--policy", "policies", multiple=True,
              type=click.Choice(["round-robin-age", "seeded-random", "adversarial-greedy"]),
              help="Daemon policy for convergence (repeatable).")
@click.option("--byz-period", type=int, default=2)
@click.option("--protocol", type=click.Choice(["ssmm", "baseline"]), default="ssmm")
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Write reports JSON here.")
@click.pass_context
def modelcheck(ctx, graph, byz, checks, budget, step_budget, policies, byz_period,
               protocol, seed, out):
    """Exhaustively check GRAPH (builtin name or graph file).

    GRAPH may be omitted when --checks is theorem2 only (fixed scenario).
    """
    check_list = [c.strip() for c in checks.split(",") if c.strip()]
    if not check_list:
        _fail("no checks selected")
    payload: dict = {
        "checks": check_list,
        "byz_period": byz_period,
        "protocol": protocol,
        "seed": seed,
    }
    if graph is not None:
        payload["graph"] = _graph_payload(graph)
    if byz:
        try:
            payload["byz"] = [int(x) for x in byz.split(",")]
        except ValueError:
            _fail(f"--byz expects comma-separated integers, got {byz!r}")
    if budget is not None:
        payload["budget"] = budget
    if step_budget is not None:
        payload["step_budget"] = step_budget
    if policies:
        payload["policies"] = list(policies)
    try:
        data = _client(ctx).post("/modelcheck", payload)
    except ClientError as e:
        _fail(e.detail)

    for report in data["reports"]:
        mark = "PASS" if report["passed"] else "FAIL"
        details = report["details"]
        extras = ", ".join(
            f"{k}={v}" for k, v in details.items() if not isinstance(v, (list, dict))
        )
        click.echo(
            f"[{mark}] {report['check']} graph={report['graph']} "
            f"byz={report['byz']} universe={report['universe']}"
            + (f" ({extras})" if extras else "")
        )
    if out is not None:
        write_atomic(out, canonical_dumps(data) + "\n")
        click.echo(f"reports -> {out}")
    if not data["ok"]:
        sys.exit(EXIT_CHECK_FAILED)


def _graph_payload(graph: str) -> dict:
    # graph files are client-local: parse here, send inline
    path = Path(graph)
    if path.exists():
        from .topology import GraphFormatError, parse_graph_file

        try:
            t = parse_graph_file(path.read_text())
        except GraphFormatError as e:
            _fail(f"{path}: {e}")
        return {"n": t.node_count, "edges": [list(e) for e in sorted(t.edges())]}
    return {"name": graph}


@main.command()
@click.argument("spec", type=click.Path(exists=True, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Output directory (default sweeps/<name>).")
@click.option("--jobs", type=int, default=1, help="Parallel cells.")
@click.pass_context
def sweep(ctx, spec: Path, out: Optional[Path], jobs: int):
    """Run the sweep SPEC (JSON) and write per-cell rows plus aggregates."""
    try:
        data = json.loads(spec.read_text())
        doc = SweepSpec.model_validate(data)
    except json.JSONDecodeError as e:
        _fail(f"{spec}: not valid JSON: {e}")
    except Exception as e:
        from pydantic import ValidationError

        if isinstance(e, ValidationError):
            _fail(f"{spec}: {format_validation_error(e)}")
        raise
    try:
        doc.base = _inline_graph_files(doc.base, spec.parent)
        if doc.axes.graph is not None:
            doc.axes.graph = [
                _inline_graph_model(g, spec.parent) for g in doc.axes.graph
            ]
        result = _client(ctx).post(
            "/sweep", {"spec": doc.model_dump(mode="json", exclude_none=True), "jobs": jobs}
        )
    except ScenarioError as e:
        _fail(str(e))
    except ClientError as e:
        _fail(e.detail)

    out_dir = out if out is not None else Path("sweeps") / (doc.name or spec.stem)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_atomic(out_dir / "sweep.csv", rows_to_csv(result["rows"]))
    write_atomic(
        out_dir / "sweep.jsonl",
        "".join(canonical_dumps(row) + "\n" for row in result["rows"]),
    )
    write_atomic(out_dir / "aggregates.json", canonical_dumps(result["aggregates"]) + "\n")
    agg = result["aggregates"]
    click.echo(
        f"{agg['cells']} cells ({agg['errors']} errors, "
        f"{agg['non_converged_cells']} non-converged); "
        f"max/median convergence = {agg['max_convergence_step']}/"
        f"{agg['median_convergence_step']} -> {out_dir}"
    )


@main.group()
def scenarios():
    """Inspect built-in scenarios."""


@scenarios.command("list")
@click.pass_context
def scenarios_list(ctx):
    """List built-in scenarios."""
    try:
        data = _client(ctx).get("/scenarios")
    except ClientError as e:
        _fail(e.detail)
    for item in data["scenarios"]:
        click.echo(f"{item['name']:<14} {item['description']}")


@scenarios.command("show")
@click.argument("name")
@click.pass_context
def scenarios_show(ctx, name: str):
    """Print a built-in scenario document."""
    try:
        data = _client(ctx).get(f"/scenarios/{name}")
    except ClientError as e:
        _fail(e.detail)
    click.echo(json.dumps(data, indent=2))


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host: str, port: int):
    """Serve the HTTP API."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
