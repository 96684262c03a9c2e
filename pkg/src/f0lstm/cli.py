"""Command line entry point: ``f0lstm <subcommand> [options]``.

Configuration precedence: ``--preset`` < ``--config FILE`` < individual flags. Every
ExperimentConfig field has a flag (``snr_levels`` -> ``--snr-levels -5,0,5``).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .experiment import Experiment, ExperimentConfig, ExperimentError, _coerce, desk_config, full_config, parse_key_values

PRESETS = {"default": ExperimentConfig, "desk": desk_config, "full": full_config}

log = logging.getLogger("f0lstm")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("experiment configuration")
    group.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    group.add_argument("--config", type=Path, help="plain-text key = value file")
    taken = set(parser._option_string_actions)
    for f in fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        if flag in taken:  # the subcommand's own filter wins (train/eval --systems)
            parser.set_defaults(**{f"cfg_{f.name}": None})
            continue
        group.add_argument(flag, dest=f"cfg_{f.name}", metavar="VALUE", default=None)


def build_config(args) -> tuple[ExperimentConfig, str | None]:
    cfg = PRESETS[args.preset]()
    text = None
    values = {}
    if args.config is not None:
        text = args.config.read_text()
        values.update(parse_key_values(text))
    for f in fields(ExperimentConfig):
        flag = getattr(args, f"cfg_{f.name}")
        if flag is not None:
            values[f.name] = flag
    for key, raw in values.items():
        if not hasattr(cfg, key):
            raise ValueError(f"unknown config key {key!r}")
        setattr(cfg, key, _coerce(getattr(cfg, key), raw))
    if text is not None and any(getattr(args, f"cfg_{f.name}") is not None for f in fields(ExperimentConfig)):
        text = None  # flags changed the file's settings; snapshot the effective config instead
    return cfg, text


def _levels(raw):
    return None if raw is None else [float(v) for v in raw.split(",")]


def _systems(raw):
    return None if raw is None else [s.strip() for s in raw.split(",") if s.strip()]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="f0lstm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="synthesize the corpus, noisy variants and features")
    p.add_argument("--force", action="store_true", help="rebuild even if an identical corpus exists")
    sub.add_parser("pretrain", help="auto-associative pretraining on clean training features")
    p = sub.add_parser("train", help="train denoising networks")
    p.add_argument("--systems", dest="only_systems", help="comma list of LSTM, LSTM-AA")
    p.add_argument("--snr", help="comma list of levels (default: all configured)")
    p = sub.add_parser("eval", help="score systems on the test split")
    p.add_argument("--systems", dest="only_systems")
    p.add_argument("--snr")
    sub.add_parser("report", help="tables, curves and figures from an evaluated run")
    p = sub.add_parser("contour", help="per-frame f0 contours of one test utterance")
    p.add_argument("--utt", required=True)
    p.add_argument("--snr", required=True, type=float)
    p.add_argument("--systems", dest="only_systems", default="None,LSTM,LSTM-AA")
    sub.add_parser("run-all", help="every stage end to end")
    for name, sp in sub.choices.items():
        _add_config_flags(sp)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        cfg, text = build_config(args)
        exp = Experiment(cfg, text)
        return _dispatch(exp, args)
    except (ExperimentError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(exp: Experiment, args) -> int:
    cmd = args.command
    if cmd == "gen-corpus":
        ds = exp.gen_corpus(force=args.force)
        print(f"corpus: {len(ds.train)} train / {len(ds.validation)} validation / {len(ds.test)} test "
              f"at SNR {', '.join(str(v) for v in ds.snr_levels)} -> {exp.corpus_dir}")
        return 0
    if cmd == "pretrain":
        exp.pretrain()
        rec = exp.manifest.records["pretrain"]
        print(f"pretrain: {rec['epochs']} epochs ({rec['stop_reason']}), best val sse "
              f"{rec['best_validation_sse']:.6g} at epoch {rec['best_epoch']}")
        return 0
    if cmd == "train":
        ok = exp.train_all(_systems(args.only_systems), _levels(args.snr))
        for name, rec in sorted(exp.manifest.records.items()):
            if name != "pretrain":
                print(f"{name}: best val sse {rec['best_validation_sse']:.6g} at epoch {rec['best_epoch']}")
        return 0 if ok else 1
    if cmd == "eval":
        reports, ok = exp.evaluate(_systems(args.only_systems), _levels(args.snr))
        for r in reports:
            print(f"{r.system:8s} SNR {r.snr_db:6.1f}  DR {r.dr_percent:6.2f}%  VDE {r.vde_percent:6.2f}%  sse {r.test_sse:.6g}")
        return 0 if ok else 1
    if cmd == "report":
        for path in exp.report():
            print(path)
        return 0
    if cmd == "contour":
        path = exp.export_contour(args.utt, args.snr, _systems(args.only_systems))
        if exp.cfg.figures:
            from .plotting import plot_contour

            plot_contour(path, exp.root / "figures" / f"{path.stem}.png", exp.cfg.hop_ms / 1000.0, path.stem)
        print(path)
        return 0
    if cmd == "run-all":
        manifest = exp.run_all()
        print((exp.root / "reports" / "eval.csv").read_text(), end="")
        if manifest.failures:
            for key, msg in manifest.failures.items():
                print(f"FAILED {key}: {msg}", file=sys.stderr)
        return 0 if manifest.complete else 1
    raise AssertionError(cmd)


if __name__ == "__main__":
    sys.exit(main())
