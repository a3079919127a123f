"""Command-line entry point.

Subcommands: build-data, train, generate, eval, ablate, cross-domain,
selftest. Exit codes: 0 success, 1 usage/config error, 2 data error,
3 numerical failure. Relative --out paths resolve under $GODESC_OUTPUT_ROOT
when that variable is set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .data import CorpusError
from .experiment import (
    AblationConfig,
    ConfigError,
    CrossDomainConfig,
    DataBuildConfig,
    RunConfig,
    run_ablation,
    run_build_data,
    run_cross_domain,
    run_eval,
    run_generate,
    run_selftest,
    run_training,
)
from .train import NumericalError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise UsageError(message)


def _out_path(raw: str) -> Path:
    path = Path(raw)
    root = os.environ.get("GODESC_OUTPUT_ROOT")
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        payload = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {p}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"config must be a JSON object: {p}")
    return payload


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="godesc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-data", help="parse or synthesize a corpus; write splits and vocabulary")
    p.add_argument("--config", help="JSON build config (source or synthesis block)")
    p.add_argument("--input", help="corpus file (shortcut for a config with only 'source')")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="train a model on built data")
    p.add_argument("--config", required=True, help="JSON run config: data_dir, seed, model, train")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("generate", help="generate descriptions from a trained model")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--terms", nargs="*", default=None)
    p.add_argument("--strategy", choices=["greedy", "beam"], default="greedy")
    p.add_argument("--beam-size", type=int, default=4)
    p.add_argument("--attention", type=int, default=None, metavar="K",
                   help="also export the top-K attended memory rows per token")

    p = sub.add_parser("eval", help="score hypotheses against references")
    p.add_argument("--out", required=True)
    p.add_argument("--hyp", help="hypothesis file, one tokenized sentence per line")
    p.add_argument("--ref", help="reference file, aligned with --hyp")
    p.add_argument("--model-dir")
    p.add_argument("--data-dir")
    p.add_argument("--split", default="test")
    p.add_argument("--strategy", choices=["greedy", "beam"], default="greedy")
    p.add_argument("--beam-size", type=int, default=4)

    p = sub.add_parser("ablate", help="run the encoder ablation grid over seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("cross-domain", help="train per corpus and evaluate the full matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("selftest", help="run gradient and metric oracles")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "build-data":
            if bool(args.config) == bool(args.input):
                raise ConfigError("build-data needs exactly one of --config or --input")
            payload = _load_config(args.config) if args.config else {"source": args.input}
            if args.seed is not None:
                payload["seed"] = args.seed
            cfg = DataBuildConfig.from_dict(payload)
            run_build_data(cfg, _out_path(args.out))
        elif args.command == "train":
            payload = _load_config(args.config)
            if args.seed is not None:
                payload["seed"] = args.seed
            run_cfg = RunConfig.from_dict(payload)
            log = (lambda *_: None) if args.quiet else print
            run_training(run_cfg, _out_path(args.out), log=log)
        elif args.command == "generate":
            run_generate(
                args.model_dir,
                args.data_dir,
                _out_path(args.out),
                split=args.split,
                term_ids=args.terms,
                strategy=args.strategy,
                beam_size=args.beam_size,
                attention_k=args.attention,
            )
        elif args.command == "eval":
            run_eval(
                _out_path(args.out),
                hyp_file=args.hyp,
                ref_file=args.ref,
                model_dir=args.model_dir,
                data_dir=args.data_dir,
                split=args.split,
                strategy=args.strategy,
                beam_size=args.beam_size,
            )
        elif args.command == "ablate":
            cfg = AblationConfig.from_dict(_load_config(args.config))
            run_ablation(cfg, _out_path(args.out))
        elif args.command == "cross-domain":
            cfg = CrossDomainConfig.from_dict(_load_config(args.config))
            run_cross_domain(cfg, _out_path(args.out))
        elif args.command == "selftest":
            if not run_selftest():
                return EXIT_NUMERIC
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CorpusError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (KeyError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
