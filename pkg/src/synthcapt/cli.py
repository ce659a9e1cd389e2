"""Command-line interface: ``synthcapt <subcommand> --config c.toml [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

COMMANDS = {
    "gen-corpus": "generate the toy world and synthetic data; write utterances and manifests",
    "train": "generate data and train the configured detector; write checkpoints",
    "eval": "evaluate the configured detector (reusing checkpoints in --out); write metrics, PR curve CSV and plot",
    "ablate": "run the WEAKLY-S ablations (full, NO-SYNTH-ERR, NO-L2-ADAPT, NO-L1L2-TRAIN)",
    "compare-methods": "compare P2P, T2S and S2S synthetic data with identical seeds",
    "stress": "lexical-stress experiment: attention / non-attention models with and without T2S stress errors",
    "report": "summarise metrics JSON files found under --out as a table",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synthcapt", description="Synthetic mispronunciation generation and "
                                                                   "detection experiments in a toy speech domain.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        if name != "report":
            p.add_argument("--config", required=True, type=Path, help="experiment config (TOML)")
            p.add_argument("--seed", type=int, action="append",
                           help="run only this seed (repeatable); overrides the config's seeds")
        p.add_argument("--out", type=Path, default=Path("results"), help="output directory (default: results)")
        if name == "compare-methods":
            p.add_argument("--methods", default="p2p,t2s,s2s", help="comma-separated generation methods")
    return parser


def _experiment_config(args):
    from .experiments import ExperimentConfig

    cfg = ExperimentConfig.from_toml(args.config)
    return cfg.with_(seeds=tuple(args.seed)) if args.seed else cfg


def _print_summary(name: str, summary: dict) -> None:
    print(f"{name}: AUC median {summary['auc_median']:.4f} | precision {summary['precision_median']:.4f} "
          f"at recall {summary['recall_median']:.4f} | per seed {', '.join(f'{a:.4f}' for a in summary['auc'])}")


def _run(args) -> int:
    from . import experiments as ex

    if args.command == "report":
        return _report(args.out)
    if not args.config.is_file():
        print(f"synthcapt: error: config file {args.config} not found", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "stress":
        cfg = ex.StressExperimentConfig.from_toml(args.config)
        if args.seed:
            cfg = replace(cfg, seeds=tuple(args.seed))
        res = ex.run_stress_experiment(cfg, args.out)
        for name, s in res["summary"].items():
            print(f"{name}: word AUC median {s['word_auc_median']:.4f} | syllable AUC median "
                  f"{s['syllable_auc_median']:.4f}")
        return EXIT_OK
    cfg = _experiment_config(args)
    if args.command == "gen-corpus":
        res = ex.run_experiment(cfg, args.out, stages=("generate",))
        for seed, run in res.runs.items():
            sizes = {k: len(v) for k, v in run.world.corpora.items()}
            print(f"seed {seed}: {sizes}, synthetic {len(run.synthetic)} ({cfg.method})")
    elif args.command == "train":
        ex.run_experiment(cfg, args.out, stages=("generate", "train"))
        print(f"checkpoints written under {args.out}")
    elif args.command == "eval":
        res = ex.run_experiment(cfg, args.out, reuse_checkpoints=True)
        _print_summary(cfg.name, res.summary)
    elif args.command == "ablate":
        for name, res in ex.ablate(cfg, args.out).items():
            _print_summary(name, res.summary)
    elif args.command == "compare-methods":
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        for name, res in ex.compare_methods(cfg, args.out, methods).items():
            _print_summary(name, res.summary)
    return EXIT_OK


def _report(out: Path) -> int:
    files = sorted(out.rglob("metrics.json"))
    if not files:
        print(f"synthcapt: error: no metrics.json under {out}", file=sys.stderr)
        return EXIT_FAILURE
    print("| run | AUC (median) | precision | recall | seeds |")
    print("|---|---|---|---|---|")
    for f in files:
        data = json.loads(f.read_text())
        s = data["summary"]
        print(f"| {data['name']} | {s['auc_median']:.4f} | {s['precision_median']:.4f} | "
              f"{s['recall_median']:.4f} | {len(s['seeds'])} |")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help exits 0, usage errors exit 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .experiments import ConfigError, StageError

    try:
        return _run(args)
    except ConfigError as exc:
        print(f"synthcapt: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"synthcapt: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
