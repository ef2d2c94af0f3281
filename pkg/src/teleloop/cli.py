"""Command-line surface for the full experiment pipeline.

Subcommands: collect (scripted demos), train (base policy), hil (headless
learning loop), eval (stage report), metrics (scaling-precision and
collection-time tables), serve (interactive WebSocket session). Batch modes
run the clock as fast as possible; serve runs in real time.
"""

import json
import sys
from pathlib import Path

import click

from .config import default_config, load_config
from .hil import (
    alignment_comparison,
    collect_demos,
    collection_time_report,
    evaluate,
    format_stage_table,
    run_hil,
)
from .policy import load_policy, save_policy, train_base
from .recording import merge_dataset, read_dataset, write_dataset

TASKS = ("peg_insert", "cube_sort")


def _config(task, config_path, overrides=None):
    if config_path:
        return load_config(config_path, task_kind=task, overrides=overrides)
    return default_config(task, overrides)


def _write_json(path, doc):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@click.group()
def main():
    """Leader-follower teleoperation simulator with clip-based fine-tuning."""


@main.command()
@click.option("--task", type=click.Choice(TASKS), default="peg_insert")
@click.option("--episodes", default=20, show_default=True)
@click.option("--seed", default=100, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", required=True, type=click.Path())
@click.option("--keep-failures", is_flag=True, help="Keep unsuccessful demonstrations.")
def collect(task, episodes, seed, config_path, out, keep_failures):
    """Record scripted expert demonstrations into a dataset directory."""
    cfg = _config(task, config_path)
    rec = collect_demos(cfg, episodes, seed0=seed, require_success=not keep_failures)
    ds = rec.dataset()
    if len(ds.episodes) < episodes:
        raise click.ClickException(
            f"only {len(ds.episodes)}/{episodes} successful demonstrations"
        )
    manifest = write_dataset(ds, out)
    click.echo(f"wrote {manifest['counts']['episodes']} episodes to {out}")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--knn", default=None, type=int, help="Neighbor count (default from config).")
@click.option("--horizon", default=None, type=int, help="Chunk horizon (default from config).")
@click.option("--task", type=click.Choice(TASKS), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def train(data, out, knn, horizon, task, config_path):
    """Train the base policy from a dataset directory."""
    ds = read_dataset(data)
    cfg = _config(task or ds.meta.get("task_id", "peg_insert"), config_path)
    k = knn if knn is not None else cfg.policy_k
    h = horizon if horizon is not None else cfg.policy_h
    policy = train_base(ds, h=h, k=k)
    save_policy(policy, out, data)
    click.echo(f"trained on {policy.n_pairs} pairs (k={k}, h={h}); manifest in {out}")


@main.command("eval")
@click.option("--policy", "policy_dir", required=True, type=click.Path(exists=True))
@click.option("--task", type=click.Choice(TASKS), default="peg_insert")
@click.option("--rollouts", default=50, show_default=True)
@click.option("--seed", default=10_000, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", default=None, type=click.Path())
def eval_cmd(policy_dir, task, rollouts, seed, config_path, out):
    """Stage-wise evaluation (S1 / S2 / Total) over seeded rollouts."""
    cfg = _config(task, config_path)
    policy = load_policy(policy_dir)
    report = evaluate(policy, cfg, rollouts=rollouts, seed0=seed)
    click.echo(format_stage_table({"policy": report}))
    if out:
        _write_json(Path(out) / "stage_report.json", report.as_dict())
        click.echo(f"report written to {out}/stage_report.json")


@main.command()
@click.option("--task", type=click.Choice(TASKS), default="peg_insert")
@click.option("--episodes", default=20, show_default=True, help="Base demonstrations.")
@click.option("--k", "trigger_k", default=5, show_default=True, help="Clip trigger K.")
@click.option("--iters", default=2, show_default=True, help="Loop iterations N.")
@click.option("--rollouts", default=None, type=int, help="Evaluation rollouts.")
@click.option("--seed", default=7, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", required=True, type=click.Path())
@click.option("--check", is_flag=True,
              help="Exit nonzero unless fine-tuning improves total success by 10 points.")
def hil(task, episodes, trigger_k, iters, rollouts, seed, config_path, out, check):
    """Full loop: collect base demos, train, deploy with interventions,
    clip-triggered fine-tuning, evaluate base vs fine-tuned."""
    overrides = {"hil": {"trigger_k": trigger_k, "iterations": iters}}
    cfg = _config(task, config_path, overrides)
    out = Path(out)

    rec = collect_demos(cfg, episodes, seed0=100 + seed)
    d0 = rec.dataset()
    write_dataset(d0, out / "base_dataset")
    base_policy = train_base(d0, h=cfg.policy_h, k=cfg.policy_k)
    save_policy(base_policy, out / "base_policy", out / "base_dataset")

    tuned, clips, log = run_hil(d0, base_policy, cfg, seed0=5000 + seed)
    merged = merge_dataset(d0, clips)
    write_dataset(merged, out / "merged_dataset")
    save_policy(tuned, out / "final_policy", out / "merged_dataset")

    m = rollouts or cfg.hil.eval_rollouts
    base_rep = evaluate(base_policy, cfg, rollouts=m, seed0=10_000 + seed)
    tuned_rep = evaluate(tuned, cfg, rollouts=m, seed0=10_000 + seed)
    table = format_stage_table({"base": base_rep, "fine-tuned": tuned_rep})
    click.echo(table)
    click.echo(f"clips: {len(clips)}  finetunes: {log['finetune_count']}  "
               f"interventions: {log['interventions']}")
    _write_json(out / "stage_report.json", {
        "base": base_rep.as_dict(),
        "fine_tuned": tuned_rep.as_dict(),
        "clips": len(clips),
        "finetune_count": log["finetune_count"],
        "interventions": log["interventions"],
        "log": log,
    })
    if check:
        gain = tuned_rep.total_pct - base_rep.total_pct
        s1_ok = tuned_rep.stage1_pct >= base_rep.stage1_pct
        if gain < 10.0 or not s1_ok:
            raise click.ClickException(
                f"improvement check failed: gain {gain:.1f} points, "
                f"S1 {base_rep.stage1_pct:.1f} -> {tuned_rep.stage1_pct:.1f}"
            )
        click.echo(f"improvement check passed: +{gain:.1f} points")


@main.command()
@click.option("--task", type=click.Choice(TASKS), default="peg_insert")
@click.option("--trials", default=200, show_default=True)
@click.option("--episodes", default=10, show_default=True,
              help="Demonstrations for the collection-time table.")
@click.option("--seed", default=3000, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", default=None, type=click.Path())
@click.option("--check", is_flag=True,
              help="Exit nonzero unless the scaling and timing relations hold.")
def metrics(task, trials, episodes, seed, config_path, out, check):
    """Alignment-precision comparison across scaling factors and the
    clip-vs-demo collection time table."""
    if task != "peg_insert":
        raise click.ClickException("the alignment metric is defined for peg_insert")

    def make_cfg(alpha):
        return _config(task, config_path, {"workspace": {"alpha": alpha}})

    seeds = list(range(seed, seed + trials))
    comparison = alignment_comparison(make_cfg, seeds, alphas=(0.5, 2.0))
    click.echo(f"{'alpha':>6} {'lateral RMS (mm)':>18} {'forward RMS (mm)':>18}")
    for alpha in (0.5, 2.0):
        c = comparison[alpha]
        click.echo(f"{alpha:>6.1f} {c['lateral_rms'] * 1e3:>18.2f} {c['forward_rms'] * 1e3:>18.2f}")

    cfg = make_cfg(0.5)
    rec = collect_demos(cfg, episodes, seed0=seed)
    base_policy = train_base(rec.dataset(), h=cfg.policy_h, k=cfg.policy_k)
    _, clips, _ = run_hil(rec.dataset(), base_policy, cfg, seed0=seed + 1000)
    times = collection_time_report(rec.dataset().episodes, clips)
    click.echo(f"{'source':>10} {'count':>6} {'total time (s)':>15}")
    click.echo(f"{'Base':>10} {times['episodes']['n']:>6} {times['episodes']['total_s']:>15.1f}")
    click.echo(f"{'Proposed':>10} {times['clips']['n']:>6} {times['clips']['total_s']:>15.1f}")

    doc = {"alignment": {str(a): comparison[a] for a in comparison},
           "collection_time": times}
    if out:
        _write_json(Path(out) / "metrics.json", doc)
    if check:
        ratios = [comparison[2.0][k] / comparison[0.5][k]
                  for k in ("lateral_rms", "forward_rms")]
        ok = all(r > 1.0 for r in ratios) and all(2.0 <= r <= 8.0 for r in ratios)
        if not ok:
            raise click.ClickException(f"scaling-precision check failed: ratios {ratios}")
        if times["matched"]["n"] and not times["matched"]["clips_less"]:
            raise click.ClickException("collection-time check failed: clips not faster")
        click.echo(f"metrics checks passed (RMS ratios {ratios[0]:.2f}, {ratios[1]:.2f})")


@main.command()
@click.option("--task", type=click.Choice(TASKS), default="peg_insert")
@click.option("--port", default=8733, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--policy", "policy_dir", type=click.Path(exists=True), default=None)
def serve(task, port, host, seed, config_path, policy_dir):
    """Run the interactive session: WebSocket state stream + operator
    commands on /session, static console UI on / if built."""
    import uvicorn

    from .server import build_app

    cfg = _config(task, config_path)
    policy = load_policy(policy_dir) if policy_dir else None
    app = build_app(cfg, seed=seed, policy=policy)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except SystemExit as e:  # uvicorn exits on bind failure
        raise click.ClickException(f"server failed to start: {e}") from e


if __name__ == "__main__":
    sys.exit(main())
