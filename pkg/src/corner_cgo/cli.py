"""Command line entry point: ``corner-cgo <subcommand> [--config PATH] [--out DIR] [--serial] [--threads N]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import COMMANDS, config_from_dict
from .errors import ConfigurationError
from .runner import EXIT_VALIDATION, run


def _read_raw(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {p}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{p}: the config must be a JSON object")
    return raw


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corner-cgo", description="CGO solutions and scattering verdicts at corners.")
    ap.add_argument("subcommand", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file (defaults are used for missing keys)")
    ap.add_argument("--out", help="output directory (overrides output_path)")
    ap.add_argument("--serial", action="store_true", help="force single-threaded execution")
    ap.add_argument("--threads", type=int, default=None, help="worker threads, 0 = all cores")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = _read_raw(args.config)
        cmd = raw.setdefault("command", args.subcommand)
        if cmd != args.subcommand:
            raise ConfigurationError(f"config command {cmd!r} does not match subcommand {args.subcommand!r}")
        if args.threads is not None and args.threads < 0:
            raise ConfigurationError("--threads must be non-negative")
        cfg = config_from_dict(raw)
    except (ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    manifest = run(cfg, args.out, args.threads, args.serial)
    for name, chk in manifest.checks.items():
        print(f"{'PASS' if chk['passed'] else 'FAIL'} {name} = {chk['value']!r} (limit {chk['limit']!r})")
    print(f"{manifest.status} exit={manifest.exit_code} out={args.out or cfg.output_path}")
    if manifest.error:
        print(f"error: {manifest.error}", file=sys.stderr)
    return manifest.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
