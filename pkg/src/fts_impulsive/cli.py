"""Command-line entry point: ``fts-impulsive {simulate,certify,mnn,reproduce}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import scenarios as sc
from .errors import ConfigurationError

log = logging.getLogger("fts_impulsive")


def _common(p):
    p.add_argument("--tol", type=float, help="integrator tolerance (overrides config)")
    p.add_argument("--deadband", type=float, help="zero deadband (overrides config)")
    p.add_argument("--out-dir", help="artifact directory (overrides config)")
    p.add_argument("--no-plots", action="store_true", help="skip figure output")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fts-impulsive",
        description="Finite-time stability certificates and simulation for conformable systems "
                    "with delayed impulses.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="certify, simulate and monitor one scenario")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("certify", help="settling-time certificate only, no simulation")
    p.add_argument("config")
    p.add_argument("--out-dir", help="also write summary.json here")

    p = sub.add_parser("mnn", help="drive-response network scenario (system.kind must be mnn)")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("reproduce", help="run the built-in reference scenarios")
    p.add_argument("--only", action="append", help="scenario name prefix, e.g. example1 (repeatable)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    _common(p)
    return parser


def _load(path, args, require_kind=None):
    cfg = sc.ScenarioConfig.load(path)
    if require_kind and cfg.system.get("kind") != require_kind:
        raise ConfigurationError(f"system.kind must be {require_kind!r} for this command", field="system.kind")
    if getattr(args, "tol", None) is not None:
        cfg.tol = args.tol
    if getattr(args, "deadband", None) is not None:
        cfg.deadband = args.deadband
    cfg.validate()
    return cfg


def _config_error(exc):
    where = f" [{exc.field}]" if getattr(exc, "field", None) else ""
    print(f"configuration error{where}: {exc}", file=sys.stderr)
    return sc.EXIT_CONFIG


def _cmd_run(args, require_kind=None):
    try:
        cfg = _load(args.config, args, require_kind)
    except ConfigurationError as exc:
        return _config_error(exc)
    result = sc.run_scenario(cfg, args.out_dir, plots=False if args.no_plots else None)
    s = result.summary
    if s.get("error"):
        err = s["error"]
        kind = err.get("kind", "error")
        where = f" [{err['field']}]" if err.get("field") else ""
        print(f"{kind} error{where}: {err['message']}", file=sys.stderr)
        return result.status
    print(f"scenario        {s['scenario']}")
    print(f"regime          {s['regime']}  (certificate {'valid' if s['certificate_valid'] else 'INVALID'})")
    print(f"gamma_s0        {s['gamma_s0']:.6f}")
    print(f"settling bound  {s['settling_bound']:.6f}  (impulse count {s['impulse_count']})")
    emp = s["empirical_settling"]
    print(f"empirical       {'not settled' if emp is None else f'{emp:.6f}'}  (eps {s['eps']:g})")
    m = s["monitor"]
    print(f"monitor         {m['flow_violations']} flow / {m['jump_violations']} jump violations")
    for name in (c["name"] for c in s["conditions"] if not c["pass"]):
        print(f"failed          {name}")
    for path in result.paths.values():
        print(f"wrote           {path}")
    return result.status


def _cmd_certify(args):
    try:
        cfg = sc.ScenarioConfig.load(args.config)
        certificate = sc.certify_config(cfg)
    except ConfigurationError as exc:
        return _config_error(exc)
    doc = sc._jsonable(certificate.to_dict())
    text = json.dumps(doc, indent=2)
    print(text)
    if args.out_dir:
        try:
            out = sc._prepare_dir(args.out_dir)
        except ConfigurationError as exc:
            return _config_error(exc)
        (out / "certificate.json").write_text(text + "\n")
    return sc.EXIT_OK if certificate.valid else sc.EXIT_CHECK


def _cmd_reproduce(args):
    try:
        status, rows, _ = sc.reproduce(args.out_dir or "runs/reference", args.only, args.jobs,
                                       plots=not args.no_plots, tol=args.tol, deadband=args.deadband)
    except ConfigurationError as exc:
        return _config_error(exc)
    print(sc.format_table(rows))
    failed = sorted({r["scenario"] for r in rows if not r["pass"]})
    if failed:
        print("failing scenarios: " + ", ".join(failed))
    return status


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "simulate":
        return _cmd_run(args)
    if args.command == "mnn":
        return _cmd_run(args, require_kind="mnn")
    if args.command == "certify":
        return _cmd_certify(args)
    return _cmd_reproduce(args)


if __name__ == "__main__":
    sys.exit(main())
