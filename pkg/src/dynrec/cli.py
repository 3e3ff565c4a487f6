"""Command-line entry point.

Commands:

* ``pretrain``     — segment a log, train the base table, write a checkpoint
* ``finetune``     — adapt up to one training snapshot, write its checkpoint
* ``run-dynamic``  — the full rolling train/test protocol over all snapshots
* ``evaluate``     — frozen-baseline evaluation of an existing checkpoint
* ``report``       — render a run directory's metrics as a text table

Diagnostics go to stderr; stdout carries only report output. Exit codes:
0 success, 1 runtime failure, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from .artifacts import (
    read_checkpoint,
    read_json,
    sha256_file,
    write_checkpoint,
    write_json,
    write_manifest,
    write_summary_csv,
    write_user_metrics_csv,
)
from .config import RunConfig, load_config, parse_config
from .data import SnapshotSeries, load_interactions, segment_snapshots
from .dynamics import DynamicResult, run_dynamic, run_frozen
from .training import pretrain

log = logging.getLogger("dynrec")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynrec",
        description="Dynamic graph recommendation: pre-train, adapt per snapshot, evaluate.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a key = value config file")
    common.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )
    common.add_argument("--quiet", action="store_true", help="suppress progress logging")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", parents=[common], help="train the base embedding table")
    p.add_argument("--data", required=True, help="interaction log (user\\titem\\tts_unix)")
    p.add_argument("--out", required=True, help="output run directory")
    p.set_defaults(func=_cmd_pretrain)

    p = sub.add_parser("finetune", parents=[common], help="adapt through one training snapshot")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--snapshot", type=int, required=True, help="1-based training snapshot index")
    p.add_argument("--pretrained", help="checkpoint or run directory to start from")
    p.set_defaults(func=_cmd_finetune)

    p = sub.add_parser("run-dynamic", parents=[common], help="full rolling protocol")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pretrained", help="reuse an existing base checkpoint")
    p.set_defaults(func=_cmd_run_dynamic)

    p = sub.add_parser("evaluate", parents=[common], help="frozen baseline over all test snapshots")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pretrained", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", parents=[common], help="print a run's metric table")
    p.add_argument("--run", required=True, help="run directory containing metrics.json")
    p.add_argument("--baseline", help="second run directory to compare against")
    p.set_defaults(func=_cmd_report)
    return parser


def _load_cfg(args) -> RunConfig:
    if getattr(args, "config", None):
        return load_config(args.config, args.set)
    return parse_config(None, getattr(args, "set", []))


def _load_series(path: str, cfg: RunConfig) -> SnapshotSeries:
    interactions, _ = load_interactions(path)
    series = segment_snapshots(
        interactions, cfg.pretrain_span_seconds, cfg.granularity_seconds
    )
    log.info(
        "segmented %d interactions: %d users, %d items, %d pre-training edges, %d snapshots",
        len(interactions),
        series.n_users,
        series.n_items,
        series.pretrain.n_edges,
        series.n_snapshots,
    )
    return series


def _resolve_checkpoint(path: str) -> str:
    """Accept either a checkpoint directory or a run directory containing one."""
    if os.path.isfile(os.path.join(path, "checkpoint.json")):
        return path
    nested = os.path.join(path, "checkpoints", "pretrain")
    if os.path.isfile(os.path.join(nested, "checkpoint.json")):
        return nested
    raise FileNotFoundError(f"no checkpoint.json under {path!r}")


def _write_run_outputs(
    out: str, series: SnapshotSeries, result: DynamicResult, cfg: RunConfig
) -> None:
    write_json(os.path.join(out, "segments.json"), series.manifest())
    write_json(
        os.path.join(out, "metrics.json"),
        {"records": result.records, "summary": result.summary()},
    )
    write_summary_csv(os.path.join(out, "summary.csv"), result.records)
    per_user = os.path.join(out, "per_user")
    os.makedirs(per_user, exist_ok=True)
    for idx, cycle in enumerate(result.cycles, start=1):
        write_user_metrics_csv(
            os.path.join(per_user, f"cycle_{idx:03d}.csv"), cycle.report
        )


def _cmd_pretrain(args, cfg: RunConfig) -> int:
    series = _load_series(args.data, cfg)
    result = pretrain(
        series.pretrain,
        cfg.d,
        cfg.layers,
        cfg.tau_seconds,
        cfg.train_config(),
        no_temporal=cfg.no_temporal,
        init_std=cfg.init_std,
    )
    os.makedirs(args.out, exist_ok=True)
    write_manifest(args.out, "pretrain", cfg, [args.data])
    write_json(os.path.join(args.out, "segments.json"), series.manifest())
    write_json(os.path.join(args.out, "pretrain_log.json"), result.log)
    write_checkpoint(
        os.path.join(args.out, "checkpoints", "pretrain"),
        result.embeddings,
        kind="pretrain",
        n_users=series.n_users,
        n_items=series.n_items,
        optimizer_step=result.optimizer_steps,
        extra={"best_epoch": result.best_epoch, "best_recall": result.best_recall},
    )
    log.info(
        "pre-training done: best epoch %d, held-out recall %.4f",
        result.best_epoch,
        result.best_recall,
    )
    return 0


def _load_pretrained(args, cfg: RunConfig):
    if not getattr(args, "pretrained", None):
        return None, None
    ckpt_dir = _resolve_checkpoint(args.pretrained)
    embeddings, meta, _ = read_checkpoint(ckpt_dir)
    if meta["d"] != cfg.d:
        raise ValueError(
            f"checkpoint dimension {meta['d']} does not match config d={cfg.d}"
        )
    return embeddings, ckpt_dir


def _cmd_run_dynamic(args, cfg: RunConfig) -> int:
    series = _load_series(args.data, cfg)
    pretrained, _ = _load_pretrained(args, cfg)
    result = run_dynamic(series, cfg, pretrained)
    os.makedirs(args.out, exist_ok=True)
    write_manifest(args.out, "run-dynamic", cfg, [args.data])
    write_json(os.path.join(args.out, "pretrain_log.json"), result.pretrain_log)
    write_checkpoint(
        os.path.join(args.out, "checkpoints", "pretrain"),
        result.pretrained,
        kind="pretrain",
        n_users=series.n_users,
        n_items=series.n_items,
    )
    for idx, cycle in enumerate(result.cycles, start=1):
        write_checkpoint(
            os.path.join(args.out, "checkpoints", f"snapshot_{idx:03d}"),
            cycle.embeddings,
            kind="finetune",
            n_users=series.n_users,
            n_items=series.n_items,
            optimizer_step=cycle.optimizer_steps,
            gate=cycle.gate,
        )
    _write_run_outputs(args.out, series, result, cfg)
    summary = result.summary()
    log.info(
        "dynamic run done: %d cycles, macro recall %.4f, macro ndcg %.4f",
        summary["n_cycles"],
        summary["macro_recall"],
        summary["macro_ndcg"],
    )
    return 0


def _cmd_finetune(args, cfg: RunConfig) -> int:
    series = _load_series(args.data, cfg)
    n = args.snapshot
    if not 1 <= n <= series.n_snapshots - 1:
        raise ValueError(
            f"--snapshot must lie in [1, {series.n_snapshots - 1}] so a test "
            f"snapshot follows it; got {n}"
        )
    truncated = dataclasses.replace(
        series,
        snapshots=series.snapshots[: n + 1],
        boundaries=series.boundaries[: n + 1],
    )
    pretrained, ckpt_dir = _load_pretrained(args, cfg)
    result = run_dynamic(truncated, cfg, pretrained)
    os.makedirs(args.out, exist_ok=True)
    write_manifest(args.out, "finetune", cfg, [args.data])
    last = result.cycles[-1]
    extra = {"snapshot": n}
    if ckpt_dir is not None:
        extra["upstream_checkpoint_sha256"] = sha256_file(
            os.path.join(ckpt_dir, "checkpoint.json")
        )
    write_checkpoint(
        os.path.join(args.out, "checkpoints", f"snapshot_{n:03d}"),
        last.embeddings,
        kind="finetune",
        n_users=series.n_users,
        n_items=series.n_items,
        optimizer_step=last.optimizer_steps,
        gate=last.gate,
        extra=extra,
    )
    _write_run_outputs(args.out, truncated, result, cfg)
    log.info(
        "fine-tuned through snapshot %d: recall %.4f on snapshot %d",
        n,
        result.records[-1]["recall"],
        n + 1,
    )
    return 0


def _cmd_evaluate(args, cfg: RunConfig) -> int:
    series = _load_series(args.data, cfg)
    pretrained, _ = _load_pretrained(args, cfg)
    result = run_frozen(series, cfg, pretrained)
    os.makedirs(args.out, exist_ok=True)
    write_manifest(args.out, "evaluate", cfg, [args.data])
    _write_run_outputs(args.out, series, result, cfg)
    summary = result.summary()
    log.info(
        "frozen evaluation done: %d cycles, macro recall %.4f",
        summary["n_cycles"],
        summary["macro_recall"],
    )
    return 0


def _format_metrics(tag: str, payload: dict) -> list[str]:
    lines = [f"== {tag} =="]
    header = f"{'cycle':>5} {'test':>5} {'users':>6} {'recall':>8} {'ndcg':>8} {'epochs':>6}  note"
    lines.append(header)
    for rec in payload["records"]:
        lines.append(
            f"{rec['cycle']:>5} {rec['test_snapshot']:>5} {rec['n_eval_users']:>6} "
            f"{rec['recall']:>8.4f} {rec['ndcg']:>8.4f} {rec['epochs']:>6}  "
            f"{rec.get('warning') or ''}"
        )
    s = payload["summary"]
    lines.append(
        f"macro recall {s['macro_recall']:.4f}  macro ndcg {s['macro_ndcg']:.4f}  "
        f"micro recall {s['micro_recall']:.4f}  micro ndcg {s['micro_ndcg']:.4f}"
    )
    return lines


def _cmd_report(args, cfg: RunConfig) -> int:
    payload = read_json(os.path.join(args.run, "metrics.json"))
    for line in _format_metrics(args.run, payload):
        print(line)
    if args.baseline:
        base = read_json(os.path.join(args.baseline, "metrics.json"))
        for line in _format_metrics(args.baseline, base):
            print(line)
        ours = payload["summary"]["macro_recall"]
        theirs = base["summary"]["macro_recall"]
        if theirs > 0:
            print(f"macro recall ratio vs baseline: {ours / theirs:.4f}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        cfg = _load_cfg(args)
    except (ValueError, OSError) as exc:
        log.error("configuration error: %s", exc)
        return 2
    try:
        return args.func(args, cfg)
    except ValueError as exc:
        log.error("%s", exc)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
