"""Operator surface: task listing, synthesis, paraphrasing, and evaluation.

Exit codes are a stable contract: 0 success, 2 synthesis rejected,
3 backend error, 64 usage error. Credentials travel only through
environment variables; replay is the default backend so everything runs
offline.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import codegen, gateway, sim
from .scene import default_manifest, task_catalog
from .sandbox import InProcessWorker

EXIT_OK = 0
EXIT_REJECTED = 2
EXIT_BACKEND = 3
EXIT_USAGE = 64


@click.group()
def cli():
    """Turn textual manipulation tasks into goal and reward functions."""


@cli.command("tasks")
@click.option("--family", type=click.Choice(["gcrl", "mtrl"]), default=None)
@click.option("--id", "task_id", default=None)
def cmd_tasks(family, task_id):
    """List the task catalog."""
    family_map = {"gcrl": "goal_gcrl", "mtrl": "reward_mtrl"}
    for t in task_catalog():
        if task_id is not None and t.id != task_id:
            continue
        if family is not None and t.family != family_map[family]:
            continue
        click.echo(f"{t.id}\t{t.family}\t{t.description}")


def _resolve_task(task_id: str, out_dir: Path | None):
    """Resolve 'd01' or a paraphrase-variant address like 'd01#2'."""
    base_id, _, variant = task_id.partition("#")
    for t in task_catalog():
        if t.id == base_id:
            if not variant:
                return t
            if out_dir is None:
                raise click.UsageError("variant addressing needs --out with stored paraphrases")
            path = Path(out_dir) / f"{base_id}.paraphrases.txt"
            if not path.exists():
                raise click.UsageError(f"no stored paraphrases for {base_id} in {out_dir}")
            lines = [l for l in path.read_text(encoding="utf-8").splitlines() if l.strip()]
            index = int(variant) - 1
            if not 0 <= index < len(lines):
                raise click.UsageError(f"variant {variant} of {base_id} does not exist")
            from dataclasses import replace

            return replace(t, description=lines[index])
    raise click.UsageError(f"unknown task id {task_id!r}")


def _make_backend(backend: str, fixtures):
    if backend == "replay":
        if fixtures is None:
            raise click.UsageError("--backend replay requires --fixtures")
        return gateway.ReplayBackend(fixtures)
    return gateway.make_backend(backend, fixture_dir=fixtures)


@cli.command("synth")
@click.argument("kind", type=click.Choice(["goal", "reward"]))
@click.argument("task_id")
@click.option("--backend", type=click.Choice(["live", "record", "replay"]), default="replay")
@click.option("--fixtures", type=click.Path(), default=None, help="Fixture directory for replay/record.")
@click.option("--max-repairs", type=int, default=3)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), default=None, help="Audit-trail directory.")
@click.pass_context
def cmd_synth(ctx, kind, task_id, backend, fixtures, max_repairs, seed, out):
    """Synthesize a goal or reward function for one task."""
    task = _resolve_task(task_id, Path(out) if out else None)
    expected = "goal" if task.family == "goal_gcrl" else "reward"
    if kind != expected:
        raise click.UsageError(f"task {task.id} belongs to the {expected} family")
    be = _make_backend(backend, fixtures)
    cfg = codegen.SynthesisConfig(kind=kind, max_repairs=max_repairs, seed=seed)
    worker = InProcessWorker()
    try:
        outcome = codegen.synthesize(
            task, default_manifest(), cfg, be, worker, audit_dir=out
        )
    finally:
        worker.close()
    if outcome.status == "accepted":
        click.echo(f"{task.id}: accepted after {len(outcome.attempts)} attempts")
        ctx.exit(EXIT_OK)
    click.echo(f"{task.id}: rejected ({outcome.rejection_reason})", err=True)
    ctx.exit(EXIT_BACKEND if outcome.rejection_reason == "backend_error" else EXIT_REJECTED)


@cli.command("eval")
@click.option("--suite", type=click.Choice(["gcrl", "mtrl", "all"]), default="all")
@click.option("--oracle", is_flag=True, help="Use the built-in reference goal generators.")
@click.option("--artifacts", type=click.Path(), default=None, help="Directory of synthesis audit trails.")
@click.option("--episodes", type=int, default=10)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), default=".")
@click.pass_context
def cmd_eval(ctx, suite, oracle, artifacts, episodes, seed, out):
    """Run the episode suite and emit CSV and Markdown reports."""
    family_map = {"gcrl": ("goal_gcrl",), "mtrl": ("reward_mtrl",), "all": ("goal_gcrl", "reward_mtrl")}
    tasks = [t for t in task_catalog() if t.family in family_map[suite]]
    if oracle:
        artifact_map = {t.id: sim.Artifact("oracle") for t in tasks}
    elif artifacts is not None:
        artifact_map = {}
        for t in tasks:
            source_path = Path(artifacts) / t.id / "final-source.py"
            if source_path.exists():
                kind = "goal_source" if t.family == "goal_gcrl" else "reward_source"
                artifact_map[t.id] = sim.Artifact(kind, source_path.read_text(encoding="utf-8"))
    else:
        raise click.UsageError("eval needs --oracle or --artifacts")
    report = sim.evaluate_suite(
        tasks,
        artifact_map,
        episodes_per_task=episodes,
        seed=seed,
        worker_factory=InProcessWorker,
    )
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_text = sim.emit_report(report, "csv")
    (out_dir / "report.csv").write_text(csv_text, encoding="utf-8")
    (out_dir / "report.md").write_text(sim.emit_report(report, "markdown"), encoding="utf-8")
    click.echo(csv_text, nl=False)
    ctx.exit(EXIT_OK)


@cli.command("paraphrase")
@click.argument("task_id")
@click.option("-n", "count", type=int, default=3)
@click.option("--backend", type=click.Choice(["live", "record", "replay"]), default="replay")
@click.option("--fixtures", type=click.Path(), default=None)
@click.option("--out", type=click.Path(), default=".")
@click.pass_context
def cmd_paraphrase(ctx, task_id, count, backend, fixtures, out):
    """Store n paraphrased variants of a task description."""
    if count < 1:
        raise click.UsageError("-n must be >= 1")
    task = _resolve_task(task_id, None)
    from .prompts import build_paraphrase_prompt

    be = _make_backend(backend, fixtures)
    prompt = build_paraphrase_prompt(task, count)
    try:
        completion = be.complete(gateway.ChatRequest.user(prompt))
    except gateway.BackendError as e:
        click.echo(str(e), err=True)
        ctx.exit(EXIT_BACKEND)
    variants = [l.strip() for l in completion.splitlines() if l.strip()][:count]
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{task.id}.paraphrases.txt"
    path.write_text("\n".join(variants) + "\n", encoding="utf-8")
    for v in variants:
        click.echo(v)
    ctx.exit(EXIT_OK)


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as e:
        return int(e.exit_code)
    except click.UsageError as e:
        click.echo(f"usage error: {e.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except SystemExit as e:
        return int(e.code or 0)
    except gateway.BackendError as e:
        click.echo(str(e), err=True)
        return EXIT_BACKEND
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
