"""ftn-covert command line: figure sweeps as CSV and the acceptance check."""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import __version__
from .experiments import ConfigError, ExperimentConfig, load_config, render_csv, run

FIGURES = ("fig2", "fig3", "fig4", "sweep")
_FLAG_KEYS = [f.name for f in fields(ExperimentConfig)]


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="FILE", help="flat 'key = value' config file; flags win")
    for key in _FLAG_KEYS:
        if key == "strict":
            continue
        p.add_argument("--" + key.replace("_", "-"), dest=key, metavar="VALUE", default=None)
    p.add_argument("--strict", action="store_true", default=None,
                   help="exit nonzero with a summary when any row fails")


def _overrides(args) -> dict:
    out = {}
    for key in _FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            out[key] = "true" if v is True else v
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ftn-covert", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ftn-covert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "fig2": "max power vs N' (AWGN, eps=0.01)",
        "fig3": "max power vs tau at N'=5000 (AWGN, eps=0.01)",
        "fig4": "ergodic covert rate vs N' (Rayleigh, eps=0.05)",
        "sweep": "generic grid over constraints x epsilons x N' x tau",
    }
    for name in FIGURES:
        _add_config_flags(sub.add_parser(name, help=helps[name]))
    chk = sub.add_parser("check", help="run the acceptance invariants")
    chk.add_argument("--only", metavar="LIST", help="comma-separated criterion numbers, e.g. 1,2,6")
    chk.add_argument("--paper-scale", action="store_true",
                     help="also run the full Table I reproduction (long; asymptotic spectra)")
    chk.add_argument("--cache-dir", dest="cache_dir", default=None)
    chk.add_argument("--output-dir", dest="output_dir", default=None,
                     help="where the paper-scale run writes its figure CSVs")
    return parser


def _run_figure(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    if cfg.cache_dir is None:
        base = Path(cfg.output).parent if cfg.output else Path(".")
        cfg = replace(cfg, cache_dir=str(base / ".ftn-cache"))
    rows = run(args.command, cfg)
    text = render_csv(rows, cfg)
    if cfg.output:
        Path(cfg.output).write_text(text, newline="")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()
    failed = [r for r in rows if r["error"]]
    if failed:
        print(f"{len(failed)} of {len(rows)} rows failed", file=sys.stderr)
        if cfg.strict:
            for r in failed:
                print(f"  {r['constraint']} {r['scheme']} tau={r['tau']} n_prime={r['n_prime']}: {r['error']}",
                      file=sys.stderr)
            return 1
    return 0


def _run_check(args) -> int:
    from . import acceptance

    numbers = None
    if args.only:
        try:
            numbers = [int(s) for s in args.only.split(",") if s.strip()]
        except ValueError:
            print(f"--only: cannot parse {args.only!r}", file=sys.stderr)
            return 2
    want7 = args.paper_scale or (numbers is not None and 7 in numbers)
    base = [k for k in (numbers or sorted(acceptance.CRITERIA)) if k != 7]
    unknown = [k for k in base if k not in acceptance.CRITERIA]
    if unknown:
        print(f"--only: unknown criteria {unknown}", file=sys.stderr)
        return 2
    ok = True
    for o in acceptance.run_criteria(base, args.cache_dir):
        print(o.line(), flush=True)
        ok &= o.passed
    if want7:
        cfg = ExperimentConfig(eigen="asymptotic", cache_dir=args.cache_dir)
        o = acceptance.criterion_7(cfg, args.output_dir)
        print(o.line(), flush=True)
        ok &= o.passed
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return _run_check(args)
        return _run_figure(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
