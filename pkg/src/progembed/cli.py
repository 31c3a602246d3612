"""Command-line entry point: ``progembed <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import report
from .errors import ProgEmbedError

log = logging.getLogger("progembed")


def _add_common(p):
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--regime", choices=("sequence", "linear", "naive"))
    p.add_argument("--out", help="output directory")
    p.add_argument("--vocab", help="vocabulary file (one lexeme per line)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key")


def build_parser():
    parser = argparse.ArgumentParser(prog="progembed", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus manifest")
    _add_common(p)
    p.add_argument("--count", type=int)

    p = sub.add_parser("ingest", help="extract methods from a source tree")
    _add_common(p)
    p.add_argument("source", help="directory to scan")
    p.add_argument("--extension")

    p = sub.add_parser("inspect-cfg", help="print the flow graph of one method")
    _add_common(p)
    p.add_argument("method", help="file holding the method, or '-' for stdin")

    p = sub.add_parser("train", help="train one regime")
    _add_common(p)
    p.add_argument("--manifest")

    p = sub.add_parser("compare", help="train and report every regime")
    _add_common(p)
    p.add_argument("--manifest")
    p.add_argument("--regimes", help="comma-separated subset of regimes")

    p = sub.add_parser("reconstruct", help="decode a method through a trained model")
    _add_common(p)
    p.add_argument("model")
    p.add_argument("method", help="file holding the method, or '-' for stdin")
    return parser


def run_config(args) -> report.RunConfig:
    values = report.read_config_file(args.config) if args.config else {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        values[key] = value
    for key in ("seed", "regime", "out", "vocab", "count", "source", "extension", "manifest", "regimes"):
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    return report.RunConfig.from_mapping(values)


def _read_text(arg):
    return sys.stdin.read() if arg == "-" else Path(arg).read_text(encoding="utf-8")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = run_config(args)
        vocab = report.load_vocabulary(cfg)
        if args.command == "synth":
            path = report.write_corpus(report.synthesize(cfg), cfg, vocab)
            print(path)
        elif args.command == "ingest":
            manifest, skipped = report.ingest(cfg, vocab)
            for item, reason in skipped:
                print(f"skipped {getattr(item, 'origin', item)}: {reason}", file=sys.stderr)
            print(report.write_corpus(manifest, cfg, vocab))
        elif args.command == "inspect-cfg":
            graph, lexemes = report.inspect_cfg(_read_text(args.method), cfg.train.regime, vocab)
            sys.stdout.write(report.format_inspection(graph, lexemes))
        elif args.command == "train":
            for path in report.train_one(cfg, vocab=vocab).values():
                print(path)
        elif args.command == "compare":
            result = report.compare(cfg, vocab=vocab)
            sys.stdout.write(result.paths["metrics_table"].read_text(encoding="utf-8"))
            if result.failures:
                return 1
        elif args.command == "reconstruct":
            print(" ".join(report.reconstruct_text(args.model, _read_text(args.method), vocab)))
    except (ProgEmbedError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
