"""``lowspec`` command line: gen-data, train, evaluate, reproduce, export-spectrogram."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import LowspecError
from .evaluation import append_ledger
from .experiment import (
    build_datasets,
    default_config,
    evaluate_artifact,
    generate_data,
    load_artifact,
    load_config,
    load_data,
    reproduce_table,
    run_experiment,
    save_artifact,
)
from .spectrogram import export_png, stft

LEDGER_NAME = "results.csv"


def _config(args):
    cfg = load_config(args.config) if args.config else default_config(args.regime)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    d = generate_data(cfg, args.out)
    print(d)
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    bundle = load_data(cfg, args.data)
    art = run_experiment(cfg, bundle)
    out = Path(args.out)
    save_artifact(art, out)
    ledger = out / LEDGER_NAME
    if ledger.exists():
        ledger.unlink()
    append_ledger(ledger, art.reports)
    for r in art.reports:
        print(f"{r.regime} {r.extractor} {r.head_or_loss} seed={r.seed} "
              f"accuracy={r.accuracy:.4f} auc={r.auc:.4f}")
    return 0


def cmd_evaluate(args) -> int:
    art = load_artifact(args.artifact)
    if args.regime and args.regime != art.config.regime:
        raise LowspecError(f"artifact is a {art.config.regime} run, not {args.regime}")
    reports = evaluate_artifact(art, args.seed)
    for r in reports:
        print(r.to_json() if args.json else
              f"{r.regime} {r.extractor} {r.head_or_loss} accuracy={r.accuracy:.4f} auc={r.auc:.4f}")
    if args.ledger:
        append_ledger(args.ledger, reports)
    return 0


def cmd_reproduce(args) -> int:
    base = load_config(args.config) if args.config else None
    archs = tuple(args.archs.split(",")) if args.archs else None
    seeds = tuple(int(s) for s in args.seeds.split(","))
    reproduce_table(args.table, args.out, seeds, archs, base)
    return 0


def cmd_export_spectrogram(args) -> int:
    cfg = _config(args)
    sets = build_datasets(cfg)
    if args.split not in sets:
        raise LowspecError(f"--split must be one of {sorted(sets)}")
    items = sets[args.split].audio_items()
    if not 0 <= args.index < len(items):
        raise LowspecError(f"--index must lie in [0, {len(items)})")
    sig = items[args.index].render(cfg.dataset.duration_s, cfg.dataset.fs)
    export_png(stft(sig, cfg.stft), args.out)
    print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lowspec", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    def config_args(sp):
        sp.add_argument("--config", help="experiment config (JSON)")
        sp.add_argument("--regime", default="binary", choices=("binary", "one_class", "siamese"),
                        help="default config to use when --config is absent")
        sp.add_argument("--seed", type=int, help="override the config seed")

    g = sub.add_parser("gen-data", help="write the dataset manifest and spectrogram caches")
    config_args(g)
    g.add_argument("--out", help="dataset directory (default: under $LOWSPEC_CACHE_DIR)")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train on a generated dataset and store the run artifact")
    config_args(t)
    t.add_argument("--out", required=True, help="run artifact directory")
    t.add_argument("--data", help="dataset directory (default: where gen-data put it)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="re-score a stored run artifact")
    e.add_argument("artifact", help="run artifact directory")
    e.add_argument("--seed", type=int, help="evaluate on a fresh test split drawn from this seed")
    e.add_argument("--regime", choices=("binary", "one_class", "siamese"),
                   help="fail unless the artifact has this regime")
    e.add_argument("--json", action="store_true", help="print full JSON reports")
    e.add_argument("--ledger", help="append report rows to this CSV ledger")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("reproduce", help="run one table's grid and compare with its target values")
    r.add_argument("--table", type=int, required=True, choices=(1, 2, 3))
    r.add_argument("--out", required=True, help="directory for table<N>.csv")
    r.add_argument("--config", help="base config for the grid (regime must match the table)")
    r.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    r.add_argument("--archs", help="comma-separated subset of the table's architectures")
    r.set_defaults(func=cmd_reproduce)

    x = sub.add_parser("export-spectrogram", help="render one dataset item as a PNG spectrogram")
    config_args(x)
    x.add_argument("--out", required=True, help="PNG path")
    x.add_argument("--split", default="train")
    x.add_argument("--index", type=int, default=0)
    x.set_defaults(func=cmd_export_spectrogram)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except LowspecError as exc:
        print(f"lowspec: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"lowspec: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
