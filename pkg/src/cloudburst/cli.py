"""Command-line entry points: run, bench, ablate, serve, replay, report."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .audit import AuditLog
from .config import (ABLATABLE, SimConfig, ablation_config, baseline_config,
                     load_manifest, mas_config)
from .learning import summarize_audit

DEFAULT_OUT = os.environ.get("CLOUDBURST_OUT", "runs")


def _config_for(config_path: str | None, mode: str) -> SimConfig:
    if config_path:
        cfg, _, manifest_mode = load_manifest(config_path)
        if mode and manifest_mode not in (mode, "mas"):
            raise click.ClickException(
                f"manifest mode {manifest_mode!r} conflicts with --mode {mode!r}")
    else:
        cfg = mas_config()
    if mode == "baseline":
        base = baseline_config()
        cfg.toggles = base.toggles
        cfg.channels = base.channels
    elif mode.startswith("ablation:"):
        component = mode.split(":", 1)[1]
        if component not in ABLATABLE:
            raise click.ClickException(f"unknown ablation {component!r}")
        abl = ablation_config(component)
        cfg.toggles = abl.toggles
    elif mode not in ("", "mas"):
        raise click.ClickException(f"unknown mode {mode!r}")
    return cfg


@click.group()
def main():
    """Deterministic multi-agent cloudburst prediction and response."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Run manifest JSON.")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--mode", default="mas", show_default=True,
              help="mas | baseline | ablation:<component>")
@click.option("--out", default=None, help="Output directory.")
def run(config_path, seed, mode, out):
    """Simulate one event end to end and write artifacts."""
    from .artifacts import write_run_artifacts
    from .simulation import run_simulation

    try:
        cfg = _config_for(config_path, mode)
    except json.JSONDecodeError as exc:
        raise click.ClickException(
            f"config parse error at line {exc.lineno}: {exc.msg}")
    out_dir = Path(out or DEFAULT_OUT) / f"{mode.replace(':', '-')}-seed{seed}"
    result = run_simulation(cfg, seed, mode=mode)
    summary = write_run_artifacts(result, out_dir, seed=seed)
    click.echo(f"run complete: mode={mode} seed={seed} "
               f"ticks={summary['digest']['ticks']} "
               f"events={summary['digest']['events']} "
               f"alerts={summary['digest']['alerts']} "
               f"degraded={summary['digest']['degraded']}")
    click.echo(f"run digest: {summary['digest']['run_digest']}")
    click.echo(f"artifacts: {out_dir}")
    if result.degraded:
        click.echo("note: run completed in degraded mode")


@main.command()
@click.option("--events", type=int, default=48, show_default=True)
@click.option("--seed-base", type=int, default=1, show_default=True)
@click.option("--out", default=None)
def bench(events, seed_base, out):
    """Run the seeded MAS-vs-baseline benchmark batch."""
    from .evaluation.benchmark import (report_markdown, run_benchmark,
                                       write_reports)
    if events <= 0:
        raise click.ClickException("empty batch")
    report = run_benchmark(events=events, seed_base=seed_base,
                           progress=_progress)
    click.echo(report_markdown(report))
    out_dir = Path(out or DEFAULT_OUT) / f"bench-{events}x{seed_base}"
    write_reports(report, out_dir)
    click.echo(f"reports: {out_dir}")
    sys.exit(0 if report.passed() else 2)


@main.command()
@click.argument("component", type=click.Choice(ABLATABLE))
@click.option("--events", type=int, default=48, show_default=True)
@click.option("--seed-base", type=int, default=1, show_default=True)
@click.option("--out", default=None)
def ablate(component, events, seed_base, out):
    """Rerun the batch with one agent disabled and report deltas."""
    from .evaluation.benchmark import run_ablation
    if events <= 0:
        raise click.ClickException("empty batch")
    report = run_ablation(component, events=events, seed_base=seed_base,
                          progress=_progress)
    click.echo(f"ablation: {component}")
    click.echo("| metric | full MAS | ablated | delta |")
    click.echo("|---|---|---|---|")
    for metric, delta in report.deltas.items():
        f = getattr(report.full, metric)
        a = getattr(report.ablated, metric)
        fmt = lambda x: "n/a" if x is None else f"{x:.4f}"
        click.echo(f"| {metric} | {fmt(f)} | {fmt(a)} | {fmt(delta)} |")
    ok = report.sign_ok()
    click.echo(f"expected degradation sign: {'confirmed' if ok else 'NOT confirmed'}")
    if out:
        out_dir = Path(out) / f"ablate-{component}"
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "deltas.json").write_text(json.dumps(
            {"component": component, "deltas": report.deltas,
             "full": report.full.to_dict(),
             "ablated": report.ablated.to_dict(), "sign_ok": ok},
            indent=2, sort_keys=True))
    sys.exit(0 if ok else 2)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--mode", default="mas", show_default=True)
@click.option("--addr", default="127.0.0.1:8700", show_default=True)
@click.option("--pace", type=float, default=10.0, show_default=True,
              help="Simulated minutes advanced per wall second.")
@click.option("--out", default=None)
def serve(config_path, seed, mode, addr, pace, out):
    """Run a live simulation with the operator gateway attached."""
    from .gateway import serve_live
    cfg = _config_for(config_path, mode)
    host, port = addr.rsplit(":", 1)
    out_dir = Path(out or DEFAULT_OUT) / f"live-{mode.replace(':', '-')}-seed{seed}"
    click.echo(f"gateway on http://{addr}  (pace: {pace} sim-min/s)")
    serve_live(cfg, seed, mode, host, int(port), pace, out_dir)


@main.command()
@click.option("--run", "run_dir", type=click.Path(exists=True), required=True)
@click.option("--addr", default="127.0.0.1:8700", show_default=True)
def replay(run_dir, addr):
    """Serve a recorded run read-only."""
    from .gateway import serve_replay
    host, port = addr.rsplit(":", 1)
    click.echo(f"replaying {run_dir} on http://{addr}")
    serve_replay(Path(run_dir), host, int(port))


@main.command()
@click.option("--run", "run_dir", type=click.Path(exists=True), required=True)
def report(run_dir):
    """Summarize a recorded run's metrics and audit trail."""
    run_dir = Path(run_dir)
    metrics = json.loads((run_dir / "metrics.json").read_text())
    click.echo("metrics:")
    for key in sorted(metrics):
        click.echo(f"  {key}: {metrics[key]}")
    log = AuditLog.load(run_dir / "audit.ndjson")
    click.echo("")
    click.echo(summarize_audit(log).to_text())
    click.echo(f"audit chain intact: {log.verify_chain()}")


def _progress(label, done, total):
    if done == total or done % 8 == 0:
        click.echo(f"  [{label}] {done}/{total}", err=True)


if __name__ == "__main__":
    main()
