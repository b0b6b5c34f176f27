"""Headless runner and experiment harness.

`teamsim run` executes one scenario to completion and exits 0 on success,
2 on timeout.  `teamsim sweep` replays the evaluation grid — team sizes x
map complexities x ablation sets, N repeats per cell — and reports each
cell as mean +/- standard deviation, with ">{cap}" marking cells whose
every run hit the step cap.  `teamsim serve` starts the HTTP service.
"""

from __future__ import annotations

import json
import statistics
import sys
from dataclasses import dataclass, field
from typing import Optional

import click

from . import engine as eng
from .errors import TeamSimError
from .scenarios import rescue_scenario
from .store import (
    RunLog,
    RunStore,
    ScenarioDocument,
    export_results,
    load_scenario,
)

ABLATION_CHOICES = ("none",) + eng.ABLATION_FLAGS


@dataclass
class SweepSpec:
    team_sizes: list[int] = field(default_factory=lambda: [2, 3, 4, 5])
    complexities: list[str] = field(default_factory=lambda: ["low"])
    ablation_sets: list[list[str]] = field(default_factory=lambda: [[]])
    repeats: int = 3
    seed_base: int = 0
    policy_mode: str = "scripted"
    scenario_path: Optional[str] = None
    max_timesteps: Optional[int] = None
    parallel: int = 1  # concurrent runs; bounded by the service's run cap

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        self.parallel = max(1, min(self.parallel, 4))


def _scenario_for(spec: SweepSpec, team_size: int, complexity: str,
                  seed: int) -> ScenarioDocument:
    if spec.scenario_path:
        doc = load_scenario(spec.scenario_path)
        agents = list(doc.agents)
        default_role = agents[0] if agents else {"role": "Transporter"}
        while len(agents) < team_size:
            agents.append(dict(default_role, name=f"Agent-{len(agents) + 1}"))
        doc.agents = agents[:team_size]
        return doc
    doc = rescue_scenario(agents=team_size, complexity=complexity, seed=seed)
    if spec.max_timesteps:
        doc.max_timesteps = spec.max_timesteps
    return doc


def run_once(scenario: ScenarioDocument, config: eng.SimulationConfig,
             log: Optional[RunLog] = None) -> tuple[eng.Metrics, str]:
    """One headless run; returns (metrics, final status)."""
    state = eng.init_simulation(scenario, config, log=log)
    metrics = eng.run(state)
    return metrics, state.status


def cell_seed(seed_base: int, cell_index: int, repeat_index: int) -> int:
    # Recorded in the report so any single run can be replayed exactly.
    return seed_base + 1000 * cell_index + repeat_index


def _sweep_one(spec: SweepSpec, store: Optional[RunStore], cell_index: int,
               team_size: int, complexity: str, ablations: list[str],
               repeat: int) -> dict:
    seed = cell_seed(spec.seed_base, cell_index, repeat)
    scenario = _scenario_for(spec, team_size, complexity, seed)
    config = eng.SimulationConfig(
        seed=seed,
        max_timesteps=scenario.max_timesteps,
        ablations={flag: True for flag in ablations},
        policy_mode=spec.policy_mode,
    )
    log = store.create(f"cell{cell_index}-r{repeat}") if store else None
    try:
        metrics, status = run_once(scenario, config, log)
        return {"seed": seed, "status": status,
                "timed_out": status == eng.TIMED_OUT,
                "metrics": metrics.to_dict()}
    except TeamSimError as exc:
        return {"seed": seed, "status": "failed", "error": str(exc)}


def run_sweep(spec: SweepSpec, store: Optional[RunStore] = None,
              echo=None) -> dict:
    """Execute the full grid and aggregate each cell.

    Sequential by default; ``parallel`` runs cells on a bounded pool.  Runs
    share no mutable state, so the results are identical either way.
    """
    grid = []
    cell_index = 0
    for complexity in spec.complexities:
        for team_size in spec.team_sizes:
            for ablations in spec.ablation_sets:
                for repeat in range(spec.repeats):
                    grid.append((cell_index, team_size, complexity,
                                 list(ablations), repeat))
                cell_index += 1

    results_by_key = {}
    if spec.parallel > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=spec.parallel) as pool:
            futures = {
                pool.submit(_sweep_one, spec, store, *item): item
                for item in grid
            }
            for future, item in futures.items():
                results_by_key[(item[0], item[4])] = future.result()
    else:
        for item in grid:
            outcome = _sweep_one(spec, store, *item)
            results_by_key[(item[0], item[4])] = outcome
            if echo:
                echo(f"  cell {item[0]} ({item[2]}, {item[1]} agents, "
                     f"{'+'.join(item[3]) or 'full'}) repeat {item[4]}: "
                     f"{outcome['status']}")

    cells = []
    cell_index = 0
    for complexity in spec.complexities:
        for team_size in spec.team_sizes:
            for ablations in spec.ablation_sets:
                runs = [results_by_key[(cell_index, repeat)]
                        for repeat in range(spec.repeats)]
                cells.append({
                    "cell_index": cell_index,
                    "complexity": complexity,
                    "team_size": team_size,
                    "ablations": list(ablations),
                    "runs": runs,
                    "aggregates": aggregate_cell(runs, team_size),
                })
                cell_index += 1
    return {
        "spec": {
            "team_sizes": spec.team_sizes,
            "complexities": spec.complexities,
            "ablation_sets": spec.ablation_sets,
            "repeats": spec.repeats,
            "seed_base": spec.seed_base,
            "policy_mode": spec.policy_mode,
        },
        "cells": cells,
    }


def _mean_sd(values: list[float]) -> dict:
    if not values:
        return {"mean": None, "sd": None}
    return {
        "mean": statistics.fmean(values),
        "sd": statistics.pstdev(values) if len(values) > 1 else 0.0,
    }


def aggregate_cell(runs: list[dict], team_size: int) -> dict:
    ok = [r for r in runs if "metrics" in r]
    if not ok:
        return {"failed": len(runs)}
    team = [r["metrics"]["team"] for r in ok]
    aggregates = {
        "victims_rescued": _mean_sd([t["targets_rescued"] for t in team]),
        "duration_steps": _mean_sd([t["duration_steps"] for t in team]),
        "action_events": _mean_sd([t["action_events"] for t in team]),
        "action_events_per_agent": _mean_sd(
            [t["action_events"] / team_size for t in team]),
        "communication_events": _mean_sd(
            [t["communication_events"] for t in team]),
        "all_timed_out": all(r["timed_out"] for r in ok),
        "failed": len(runs) - len(ok),
    }
    return aggregates


def render_report(results: dict, fmt: str = "table") -> str:
    """Render sweep results as a text table or machine-readable JSON."""
    if fmt == "machine-readable":
        return json.dumps(results, indent=2, sort_keys=True) + "\n"
    if fmt != "table":
        raise ValueError(f"unknown report format {fmt!r}")
    cap = None
    columns = ("Victims Rescued", "Duration (steps)", "Action Events",
               "Action Events / Agent", "Communication Events")
    header = f"{'Cell':<36} | " + " | ".join(f"{c:>22}" for c in columns)
    lines = [header, "-" * len(header)]
    for cell in results.get("cells", []):
        label = (f"{cell['complexity']}, {cell['team_size']} agents"
                 + (", " + "+".join(cell["ablations"]) if cell["ablations"] else ""))
        agg = cell["aggregates"]
        if "victims_rescued" not in agg:
            lines.append(f"{label:<36} | all runs failed")
            continue
        cap = max((r["metrics"]["team"]["duration_steps"]
                   for r in cell["runs"] if r.get("timed_out")), default=cap)

        def fmt_stat(stat: dict) -> str:
            if stat["mean"] is None:
                return "-"
            return f"{stat['mean']:,.2f} ± {stat['sd']:,.2f}"

        duration = fmt_stat(agg["duration_steps"])
        if agg["all_timed_out"]:
            over = int(agg["duration_steps"]["mean"])
            duration = f">{over:,}"
        row = [
            fmt_stat(agg["victims_rescued"]),
            duration,
            fmt_stat(agg["action_events"]),
            fmt_stat(agg["action_events_per_agent"]),
            fmt_stat(agg["communication_events"]),
        ]
        lines.append(f"{label:<36} | " + " | ".join(f"{v:>22}" for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


@click.group()
def main():
    """Team-dynamics simulator."""


def _parse_scenario_arg(scenario: str, agents: int, complexity: str,
                        seed: int) -> ScenarioDocument:
    if scenario == "rescue":
        return rescue_scenario(agents=agents, complexity=complexity, seed=seed)
    if scenario == "rescue-roles":
        return rescue_scenario(agents=agents, complexity=complexity, seed=seed,
                               roles=True, critical_victims=5, rubble=2)
    return load_scenario(scenario)


@main.command("run")
@click.option("--scenario", default="rescue",
              help="Scenario path, or builtin: rescue, rescue-roles.")
@click.option("--agents", default=3, show_default=True)
@click.option("--complexity", default="low",
              type=click.Choice(["low", "medium", "high"]))
@click.option("--ablate", multiple=True,
              type=click.Choice(ABLATION_CHOICES))
@click.option("--seed", default=7, show_default=True)
@click.option("--policy", default="scripted",
              type=click.Choice(["scripted", "gateway"]))
@click.option("--max-steps", default=None, type=int)
@click.option("--out", default=None, type=click.Path(),
              help="Directory for the run log.")
def run_command(scenario, agents, complexity, ablate, seed, policy,
                max_steps, out):
    """Run one scenario headless; exit 0 on success, 2 on timeout."""
    try:
        doc = _parse_scenario_arg(scenario, agents, complexity, seed)
    except (TeamSimError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    if max_steps:
        doc.max_timesteps = max_steps
    config = eng.SimulationConfig(
        seed=seed,
        max_timesteps=doc.max_timesteps,
        ablations={flag: True for flag in ablate if flag != "none"},
        policy_mode=policy,
    )
    log = None
    if out:
        log = RunStore(out).create(f"run-seed{seed}")
    try:
        metrics, status = run_once(doc, config, log)
    except TeamSimError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    team = metrics.team
    total = team["targets_located"] + team["targets_remaining"]
    click.echo(f"status: {status}")
    click.echo(f"duration: {team['duration_steps']} steps")
    click.echo(f"rescued: {team['targets_rescued']}/{total}")
    click.echo(f"areas discovered: {team['areas_discovered']}")
    if out:
        import os

        for fmt, suffix in (("json", "json"), ("csv", "csv")):
            path = os.path.join(out, f"results-seed{seed}.{suffix}")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(export_results(metrics.to_dict(), finished=True,
                                        fmt=fmt))
        click.echo(f"log: {log.path}")
    sys.exit(0 if status == eng.SUCCEEDED else 2)


@main.command("sweep")
@click.option("--scenario", default=None, type=click.Path(exists=True),
              help="Scenario file; defaults to the builtin rescue mission.")
@click.option("--agents", default="2,3,4,5", show_default=True,
              help="Comma-separated team sizes.")
@click.option("--complexity", default="low", show_default=True,
              help="Comma-separated complexities.")
@click.option("--ablate", multiple=True, type=click.Choice(ABLATION_CHOICES),
              help="Repeatable; each value adds an ablation column.")
@click.option("--repeats", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True, help="Seed base.")
@click.option("--policy", default="scripted",
              type=click.Choice(["scripted", "gateway"]))
@click.option("--max-steps", default=None, type=int)
@click.option("--parallel", default=1, show_default=True,
              help="Concurrent runs (capped at 4).")
@click.option("--out", default=None, type=click.Path(),
              help="Write machine-readable results here.")
def sweep_command(scenario, agents, complexity, ablate, repeats, seed,
                  policy, max_steps, parallel, out):
    """Run the evaluation grid and print the aggregate table."""
    ablation_sets: list[list[str]] = [[]]
    for flag in ablate:
        ablation_sets.append([] if flag == "none" else [flag])
    if ablate and ablation_sets.count([]) > 1:
        ablation_sets = [s for i, s in enumerate(ablation_sets)
                         if s or i == ablation_sets.index([])]
    spec = SweepSpec(
        team_sizes=[int(x) for x in agents.split(",") if x],
        complexities=[c.strip() for c in complexity.split(",") if c.strip()],
        ablation_sets=ablation_sets,
        repeats=repeats,
        seed_base=seed,
        policy_mode=policy,
        scenario_path=scenario,
        max_timesteps=max_steps,
        parallel=parallel,
    )
    results = run_sweep(spec, echo=click.echo)
    click.echo(render_report(results, "table"))
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(render_report(results, "machine-readable"))
        click.echo(f"results written to {out}")


@main.command("report")
@click.argument("results_path", type=click.Path(exists=True))
@click.option("--fmt", default="table",
              type=click.Choice(["table", "machine-readable"]))
def report_command(results_path, fmt):
    """Re-render a saved sweep result."""
    with open(results_path, encoding="utf-8") as fh:
        results = json.load(fh)
    click.echo(render_report(results, fmt), nl=False)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--data-dir", default=None, type=click.Path())
def serve_command(host, port, data_dir):
    """Start the HTTP service."""
    from .server import main as serve_main

    serve_main(host, port, data_dir)


if __name__ == "__main__":
    main()
