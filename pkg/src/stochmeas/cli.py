"""``stochmeas`` command line.

    stochmeas <experiment> [--config FILE] [--KEY VALUE ...] [--set KEY=VALUE ...]

Every config key has a flag (``two_x`` becomes ``--two-x``); nested keys go
through ``--set sinks.j0=2``.  Values use YAML scalar syntax, so lists are
written ``--psi-squared "[0.7, 0.3]"``.

Exit codes: 0 success, 1 invariant failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .config import EXPERIMENTS, OUTPUT_ENV, ExperimentConfig, load_config, parse_scalar
from .errors import ConfigError, NoData

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 1, 2

_FLAG_KEYS = [f.name for f in dataclasses.fields(ExperimentConfig) if f.name not in ("experiment", "sinks", "gedanken")]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochmeas",
        description="Stochastic apparatus measurement experiments.",
        epilog=f"Default output directory comes from ${OUTPUT_ENV}.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="YAML configuration file")
        for key in _FLAG_KEYS:
            p.add_argument("--" + key.replace("_", "-"), dest=key, metavar="VALUE")
        if name == "gedanken":
            p.add_argument("--alpha-b", dest="gedanken.alpha_b", metavar="VALUE", help="alpha|B| in [0, 1)")
            p.add_argument("--epsilon", dest="gedanken.epsilon", metavar="SIGN", help="1, -1 or marginal")
        if name == "sinks":
            p.add_argument("--m", dest="sinks.m", metavar="LIST", help='raw amplitudes, e.g. "[1, 0.5j]"')
            p.add_argument("--f", dest="sinks.f", metavar="LIST", help="sink efficiencies")
            p.add_argument("--j0", dest="sinks.j0", metavar="VALUE", help="source strength")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any key, dotted for nested")
        p.add_argument("--quiet", action="store_true", help="print nothing on success")
    return parser


def overrides_from(args: argparse.Namespace) -> dict:
    out = {"experiment": args.experiment}
    for key in _FLAG_KEYS:
        value = getattr(args, key)
        if value is not None:
            out[key] = value if key in ("outputs", "eta", "c") and not _numeric(value) else parse_scalar(value)
    for key, value in vars(args).items():
        if "." in key and value is not None:
            out[key] = parse_scalar(value)
    for item in args.set:
        if "=" not in item:
            raise ConfigError("--set", f"expected KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = parse_scalar(value)
    return out


def _numeric(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def main(argv: list[str] | None = None) -> int:
    from .runner import run

    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, overrides_from(args))
        manifest = run(cfg)
    except (ConfigError, NoData) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        print(json.dumps(manifest.summary, indent=2))
        print(f"wrote {', '.join(manifest.files)} and manifest.json to {cfg.outputs}")
    if cfg.experiment == "verify" and not manifest.summary["all_passed"]:
        failed = [c["name"] for c in manifest.summary["checks"] if not c["passed"]]
        print(f"invariant failure: {', '.join(failed)}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
