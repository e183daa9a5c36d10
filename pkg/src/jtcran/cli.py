"""Command line entry point: ``jtcran run|validate|show-defaults``.

Exit codes: 0 success, 1 configuration error, 2 numeric failure,
3 a validation gate failed.
"""
from __future__ import annotations

import argparse
import sys

from .core_model import ParameterError
from .experiments import KINDS, SEED_ENV, ConfigError, ExperimentError, default_config, parse_config, run_experiment
from .quadrature import QuadratureError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_GATE = 0, 1, 2, 3


def _run(args) -> int:
    try:
        spec = parse_config(args.config)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_experiment(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ExperimentError, QuadratureError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for path in result.files:
        print(path)
    print(result.manifest)
    if spec.kind == "validation_suite" and result.diagnostics.get("failed_checks"):
        return EXIT_GATE
    return EXIT_OK


def _validate(args) -> int:
    from .validation import run_all

    checks = run_all()
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_GATE


def _show_defaults(args) -> int:
    sys.stdout.write(default_config(args.kind))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jtcran", description="Coverage of cooperative cloud radio access networks.",
                                epilog=f"{SEED_ENV} overrides the master seed of any config.")
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run the experiment described by an INI config")
    r.add_argument("config")
    r.set_defaults(func=_run)
    v = sub.add_parser("validate", help="run the closed-form oracle checks")
    v.set_defaults(func=_validate)
    d = sub.add_parser("show-defaults", help="print a complete config with every default filled in")
    d.add_argument("--kind", choices=KINDS, default="coverage_curve")
    d.set_defaults(func=_show_defaults)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
