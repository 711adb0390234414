"""Command line entry point: ``decolab <command> --config <file>``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from decolab.config import COMMANDS, parse_config
from decolab.errors import DecolabError, IoError, ParseError, ValidationError

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _threads(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("DECOLAB_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(f"DECOLAB_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValidationError("DECOLAB_THREADS must be >= 1")
        return n
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="decolab", description="Decoherence datasets from the effective open-system action.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="JSON run configuration (defaults are used when omitted)")
    p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    p.add_argument("--strict", action="store_true", help="reject unknown configuration keys instead of warning")
    p.add_argument("--threads", type=int, help="worker threads (falls back to DECOLAB_THREADS, then 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text, strict=args.strict, command=args.command)
        threads = _threads(args.threads)
        if threads < 1:
            raise ValidationError("--threads must be >= 1")
    except (ParseError, ValidationError, OSError, UnicodeDecodeError) as exc:
        print(f"decolab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for w in cfg.warnings:
        print(f"decolab: warning: {w}", file=sys.stderr)

    from decolab.experiments import run

    try:
        manifest = run(cfg, out_dir=args.out, threads=threads)
    except IoError as exc:
        print(f"decolab: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except DecolabError as exc:
        print(f"decolab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    out = args.out if args.out is not None else Path(cfg.output_dir)
    for t in manifest.tasks:
        line = f"{t.name}: {t.status}"
        if t.error:
            line += f" ({t.error})"
        print(line)
    print(f"manifest: {out / 'manifest.json'}")
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
