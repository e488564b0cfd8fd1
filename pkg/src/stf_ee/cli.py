"""Command-line interface.

Subcommands cover the full experiment lifecycle: data generation, the two
training stages, both self-training variants, evaluation, the certainty
threshold sweep, model selection, and report rendering. Every artifact
embeds the config hash and seed. Exit codes: 0 success, 1 validation
error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import checkpoint as ckpt
from . import metrics as metrics_mod
from .config import RunConfig, load_config, require_paths
from .corpus import (
    generate_synthetic,
    load_flags,
    load_labeled,
    save_flags,
    save_labeled,
)
from .amr.penman import load_amr_bundle, save_amr_bundle
from .errors import ConfigError, MissingLogs, StfError, UnknownCommand
from .extractor import EventExtractor
from .scorer import CompatibilityScorer, build_scoring_examples, make_negatives
from .selftrain import run_stf, vanilla_self_train

logger = logging.getLogger("stf_ee")

COMMANDS = (
    "gen-data",
    "train-ee",
    "train-scorer",
    "stf-run",
    "self-train",
    "evaluate",
    "sweep-threshold",
    "select-model",
    "report",
)


def _common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="TOML-style config file")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--quiet", action="store_true", help="suppress progress logging")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stf-ee",
        description="Event extraction with compatibility-guided self-training",
    )
    sub = parser.add_subparsers(dest="command")

    for name, desc in (
        ("gen-data", "generate the synthetic corpus and AMR bundle"),
        ("train-ee", "train the base event extraction model (stage 1)"),
        ("train-scorer", "train the compatibility scorer"),
        ("stf-run", "run both stages with compatibility-weighted self-training"),
        ("self-train", "run the probability-thresholded self-training baseline"),
        ("sweep-threshold", "sweep the certainty threshold grid"),
    ):
        p = sub.add_parser(name, help=desc)
        _common_flags(p)

    p = sub.add_parser("evaluate", help="compare prediction and gold JSONL files")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    _common_flags(p)

    p = sub.add_parser("select-model", help="pick the best checkpoint from an event log")
    p.add_argument("--run", required=True, help="run directory holding events.jsonl")
    p.add_argument("--criterion", default="avg_compat", choices=["avg_compat", "dev_f1"])
    _common_flags(p)

    p = sub.add_parser("report", help="render a comparison table from run logs")
    p.add_argument("--run", required=True, help="directory holding per-method subdirectories")
    _common_flags(p)

    return parser


def _load_run_config(args) -> RunConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None):
        overrides["out"] = args.out
    if getattr(args, "quiet", False):
        overrides["quiet"] = "true"
    return load_config(getattr(args, "config", None), overrides)


def _prepare_out(config: RunConfig) -> str:
    os.makedirs(config.out, exist_ok=True)
    return config.out


def _write_json(path: str, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _meta(config: RunConfig) -> dict:
    return {"config_hash": config.hash(), "seed": config.seed}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    config = _load_run_config(args)
    out = _prepare_out(config)
    corpus = generate_synthetic(config.corpus)
    tokens = {
        s.sent_id: list(s.tokens)
        for split in (corpus.labeled, corpus.unlabeled, corpus.heldout)
        for s in split
    }
    save_labeled(os.path.join(out, "labeled.jsonl"), corpus.labeled)
    save_labeled(os.path.join(out, "unlabeled.jsonl"), corpus.unlabeled, with_events=False)
    save_labeled(os.path.join(out, "heldout.jsonl"), corpus.heldout, with_events=False)
    save_amr_bundle(os.path.join(out, "amr.penman"), corpus.amr, tokens)
    save_flags(os.path.join(out, "flags.jsonl"), corpus.flags)
    _write_json(
        os.path.join(out, "meta.json"),
        {
            **_meta(config),
            "sentences": {
                "labeled": len(corpus.labeled),
                "unlabeled": len(corpus.unlabeled),
                "heldout": len(corpus.heldout),
            },
            "events": sum(len(s.events) for s in corpus.labeled),
            "flags": len(corpus.flags),
        },
    )
    logger.info("wrote corpus with %d labeled sentences to %s", len(corpus.labeled), out)
    return 0


def _evaluate_extractor(extractor, config: RunConfig, scorer=None) -> dict:
    result = {}
    if config.paths.test:
        test = load_labeled(config.paths.test)
        preds = extractor.predict(test)
        result["tri_c_f1"] = metrics_mod.f1_trigger_classification(preds, test).f1
        result["arg_c_f1"] = metrics_mod.f1_argument_classification(preds, test).f1
    if scorer is not None and config.paths.heldout and config.paths.amr:
        heldout = load_labeled(config.paths.heldout)
        amr = load_amr_bundle(config.paths.amr)
        result["mean_compatibility"] = metrics_mod.average_compatibility(
            extractor, scorer, heldout, amr
        )
    return result


def cmd_train_ee(args) -> int:
    config = _load_run_config(args)
    require_paths(config, "labeled")
    out = _prepare_out(config)
    labeled = load_labeled(config.paths.labeled)
    extractor = EventExtractor(**_extractor_kwargs(config)).fit(labeled)
    ckpt.save_extractor(
        os.path.join(out, "extractor.ckpt"),
        extractor,
        config_hash=config.hash(),
        meta={"history": extractor.history_},
    )
    metrics = {"method": "supervised", **_meta(config), **_evaluate_extractor(extractor, config)}
    _write_json(os.path.join(out, "metrics.json"), metrics)
    logger.info("trained extractor for %d epochs", config.extractor.epochs)
    return 0


def _extractor_kwargs(config: RunConfig) -> dict:
    from dataclasses import asdict

    return {**asdict(config.extractor), "seed": config.seed}


def cmd_train_scorer(args) -> int:
    config = _load_run_config(args)
    require_paths(config, "labeled", "amr")
    out = _prepare_out(config)
    labeled = load_labeled(config.paths.labeled)
    amr = load_amr_bundle(config.paths.amr)

    types = sorted({ev.event_type for s in labeled for ev in s.events})
    roles = sorted({a.role for s in labeled for ev in s.events for a in ev.args})
    from .labels import LabelSchema

    schema = LabelSchema(trigger_types=tuple(types), argument_roles=tuple(roles))
    from dataclasses import asdict

    scorer = CompatibilityScorer(**asdict(config.scorer), seed=config.seed)
    positives = build_scoring_examples(labeled, amr, use_path=scorer.use_path)
    rng = np.random.default_rng(config.seed)
    negatives = make_negatives(positives, list(schema.argument_roles), rng)
    vocab_sentences = [list(ex.tokens) for ex in positives]
    if config.paths.unlabeled:
        vocab_sentences += [list(s.tokens) for s in load_labeled(config.paths.unlabeled)]
    scorer.build(schema, vocab_sentences)
    scorer.fit(positives + negatives, schema=schema)
    ckpt.save_scorer(
        os.path.join(out, "scorer.ckpt"),
        scorer,
        config_hash=config.hash(),
        meta={"history": scorer.history_},
    )
    with open(os.path.join(out, "scorer_curve.jsonl"), "w", encoding="utf-8") as fh:
        for row in scorer.history_:
            fh.write(json.dumps(row) + "\n")
    logger.info("trained scorer on %d examples", 2 * len(positives))
    return 0


def _run_self_training(args, mode: str) -> int:
    config = _load_run_config(args)
    require_paths(config, "labeled", "unlabeled", "amr")
    out = _prepare_out(config)
    labeled = load_labeled(config.paths.labeled)
    unlabeled = load_labeled(config.paths.unlabeled)
    amr = load_amr_bundle(config.paths.amr)
    heldout = load_labeled(config.paths.heldout) if config.paths.heldout else None

    scorer = None
    if mode == "stf" or config.paths.scorer_checkpoint:
        require_paths(config, "scorer_checkpoint")
        scorer = ckpt.load_scorer(config.paths.scorer_checkpoint)

    if mode == "stf":
        extractor, series = run_stf(
            labeled, unlabeled, scorer, config.stf, amr=amr, heldout=heldout
        )
        method = "stf"
    else:
        extractor, series = vanilla_self_train(
            labeled, unlabeled, config.stf, heldout=heldout, scorer=scorer, amr=amr
        )
        method = "self-training"

    series.write_log(os.path.join(out, "events.jsonl"))
    ckpt.save_extractor(
        os.path.join(out, "final.ckpt"), extractor, config_hash=config.hash(),
        meta={"epoch": series.final().epoch},
    )
    try:
        best = metrics_mod.select_checkpoint(series.records, "avg_compat")
        extractor.module_.load_state_dict(best.state)
        ckpt.save_extractor(
            os.path.join(out, "best.ckpt"), extractor, config_hash=config.hash(),
            meta={"epoch": best.epoch, "criterion": "avg_compat"},
        )
        extractor.module_.load_state_dict(series.final().state)
    except (KeyError, StfError):
        logger.info("no avg_compat criterion available; skipping best checkpoint")

    metrics = {"method": method, **_meta(config), **_evaluate_extractor(extractor, config, scorer)}
    _write_json(os.path.join(out, "metrics.json"), metrics)
    return 0


def cmd_stf_run(args) -> int:
    return _run_self_training(args, "stf")


def cmd_self_train(args) -> int:
    return _run_self_training(args, "vanilla")


def cmd_evaluate(args) -> int:
    pred = load_labeled(args.pred)
    gold = load_labeled(args.gold)
    tri = metrics_mod.f1_trigger_classification(pred, gold)
    arg = metrics_mod.f1_argument_classification(pred, gold)
    print(f"Tri-C F1 {tri.f1:.3f} (P {tri.precision:.3f} R {tri.recall:.3f})")
    print(f"Arg-C F1 {arg.f1:.3f} (P {arg.precision:.3f} R {arg.recall:.3f})")
    return 0


def cmd_sweep_threshold(args) -> int:
    config = _load_run_config(args)
    require_paths(config, "labeled", "unlabeled", "amr", "scorer_checkpoint", "test")
    out = _prepare_out(config)
    labeled = load_labeled(config.paths.labeled)
    unlabeled = load_labeled(config.paths.unlabeled)
    amr = load_amr_bundle(config.paths.amr)
    test = load_labeled(config.paths.test)
    scorer = ckpt.load_scorer(config.paths.scorer_checkpoint)

    from dataclasses import replace

    results = []
    for threshold in metrics_mod.SWEEP_THRESHOLDS:
        stf_config = replace(config.stf, certainty_threshold=threshold)
        extractor, series = run_stf(labeled, unlabeled, scorer, stf_config, amr=amr)
        preds = extractor.predict(test)
        f1 = metrics_mod.f1_argument_classification(preds, test).f1
        first_stage2 = next(r for r in series.records if r.stage == 2)
        results.append(
            {
                "threshold": threshold,
                "f1": f1,
                "retained_first_epoch": first_stage2.pseudo_count,
                "retained_mean": float(
                    np.mean([r.pseudo_count for r in series.records if r.stage == 2])
                ),
            }
        )
        logger.info("threshold %.1f: Arg-C F1 %.3f", threshold, f1)

    report = metrics_mod.sweep_report(results)
    with open(os.path.join(out, "sweep.csv"), "w", encoding="utf-8") as fh:
        fh.write(report["csv"])
    _write_json(os.path.join(out, "sweep.json"), {**_meta(config), "rows": report["rows"]})
    print(report["csv"], end="")
    return 0


def cmd_select_model(args) -> int:
    events_path = os.path.join(args.run, "events.jsonl")
    if not os.path.exists(events_path):
        raise MissingLogs(f"{events_path} not found")
    records = []
    with open(events_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    candidates = []
    for rec in records:
        crit = {}
        if rec.get("mean_compatibility") is not None:
            crit["avg_compat"] = rec["mean_compatibility"]
        if rec.get("dev_metrics", {}).get("arg_c_f1") is not None:
            crit["dev_f1"] = rec["dev_metrics"]["arg_c_f1"]
        crit["epoch"] = rec["epoch"]
        if args.criterion in crit:
            candidates.append(crit)
    best = metrics_mod.select_checkpoint(
        [{k: v for k, v in c.items() if k != "epoch"} for c in candidates],
        args.criterion,
    )
    epoch = next(c["epoch"] for c in candidates if c[args.criterion] == best[args.criterion])
    print(f"best epoch by {args.criterion}: {epoch} ({best[args.criterion]:.4f})")
    _write_json(
        os.path.join(args.run, "selection.json"),
        {"criterion": args.criterion, "epoch": epoch, "value": best[args.criterion]},
    )
    return 0


def cmd_report(args) -> int:
    run_dir = args.run
    rows = []
    if os.path.isdir(run_dir):
        for name in sorted(os.listdir(run_dir)):
            metrics_path = os.path.join(run_dir, name, "metrics.json")
            if os.path.exists(metrics_path):
                with open(metrics_path, encoding="utf-8") as fh:
                    rows.append(json.load(fh))
    if not rows:
        raise MissingLogs(f"no metrics.json files under {run_dir}")

    def fmt(value):
        return f"{value:.3f}" if isinstance(value, float) else str(value if value is not None else "-")

    header = ["method", "tri_c_f1", "arg_c_f1", "mean_compat"]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    csv_lines = [",".join(header)]
    for row in rows:
        values = [
            row.get("method", "-"),
            row.get("tri_c_f1"),
            row.get("arg_c_f1"),
            row.get("mean_compatibility"),
        ]
        lines.append("| " + " | ".join(fmt(v) for v in values) + " |")
        csv_lines.append(",".join(fmt(v) for v in values))
    markdown = "\n".join(lines) + "\n"
    csv_text = "\n".join(csv_lines) + "\n"
    with open(os.path.join(run_dir, "report.md"), "w", encoding="utf-8") as fh:
        fh.write(markdown)
    with open(os.path.join(run_dir, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    print(markdown, end="")
    return 0


_HANDLERS = {
    "gen-data": cmd_gen_data,
    "train-ee": cmd_train_ee,
    "train-scorer": cmd_train_scorer,
    "stf-run": cmd_stf_run,
    "self-train": cmd_self_train,
    "evaluate": cmd_evaluate,
    "sweep-threshold": cmd_sweep_threshold,
    "select-model": cmd_select_model,
    "report": cmd_report,
}


def dispatch(argv: list[str]) -> int:
    """Route one invocation; returns the process exit code."""
    import torch

    threads = os.environ.get("STF_EE_THREADS")
    if threads:
        try:
            torch.set_num_threads(max(1, int(threads)))
        except ValueError:
            raise ConfigError(f"STF_EE_THREADS must be an integer, got {threads!r}") from None

    if argv and argv[0] not in COMMANDS and argv[0] not in ("-h", "--help"):
        raise UnknownCommand(f"unknown command {argv[0]!r}; expected one of {', '.join(COMMANDS)}")

    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse prints its own message; --help exits 0
        return 0 if exc.code == 0 else 1
    if args.command is None:
        parser.print_help()
        return 0

    logging.basicConfig(
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return _HANDLERS[args.command](args)


_VALIDATION_ERRORS = (
    ConfigError,
    UnknownCommand,
    MissingLogs,
)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        return dispatch(argv)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StfError as exc:
        from .errors import DuplicateSentId, IoError, MalformedPenman, SchemaError

        if isinstance(exc, (SchemaError, IoError, MalformedPenman, DuplicateSentId)):
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
