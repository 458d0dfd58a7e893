"""Command-line entry point: run simulations, validate configs, emit presets,
or serve the HTTP API.  Exit codes: 0 success, 2 config error, 3 runtime error."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from .config import ConfigError, parse_config, preset_config, validate
from .datagen import DataError
from .flcore import run_simulation
from .metrics import format_csv, format_jsonl, summarize, write_metrics

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _setup_logging() -> None:
    level = os.environ.get("PEERFL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _load_config(path: str):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text)


def _cmd_run(args) -> int:
    try:
        cfg = _load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        errors = validate(cfg)
        if errors:
            for err in errors:
                print(f"config error: {err}", file=sys.stderr)
            return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_simulation(cfg)
    except (DataError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # simulation failure
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        if args.out:
            write_metrics(result.log, args.out, args.format)
        elif not args.summary:
            text = format_csv(result.log) if args.format == "csv" else format_jsonl(result.log)
            sys.stdout.write(text)
        if args.summary:
            print(json.dumps(summarize(result.log).to_dict(), indent=2, sort_keys=True))
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        cfg = _load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    errors = validate(cfg)
    if errors:
        for err in errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


def _cmd_gen_config(args) -> int:
    try:
        text = preset_config(args.preset)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peerfl",
                                     description="peer-to-peer federated learning simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a simulation")
    run.add_argument("--config", required=True, help="path to the configuration file")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help="metrics output path (default: stdout)")
    run.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    run.add_argument("--summary", action="store_true",
                     help="print a JSON run summary to stdout")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="check a configuration without running it")
    val.add_argument("--config", required=True)
    val.set_defaults(func=_cmd_validate)

    gen = sub.add_parser("gen-config", help="emit a documented example configuration")
    gen.add_argument("--preset", required=True, choices=("line3", "star10", "scale100"))
    gen.add_argument("--out", default=None)
    gen.set_defaults(func=_cmd_gen_config)

    serve = sub.add_parser("serve", help="start the HTTP API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
