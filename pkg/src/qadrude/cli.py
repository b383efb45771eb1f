"""Command-line entry point.

    qadrude run CONFIG [--output DIR] [--workers N] [--figures]
    qadrude validate CONFIG
    qadrude materials list
    qadrude smoke [--output DIR]

Exit status is 0 on success, 1 when the configuration is invalid and 2 when
the run itself fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import ConfigurationError

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _load(path):
    from .config import load_config

    try:
        return load_config(path)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror or exc}") from None


def cmd_run(args) -> int:
    from .runner import run_experiment

    cfg = _load(args.config)
    if args.figures:
        cfg = replace(cfg, figures=True)
    out = args.output or cfg.output
    manifest = run_experiment(cfg, output=out, workers=args.workers)
    print(f"wrote {len(manifest.files)} files to {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .config import dump_config

    cfg = _load(args.config)
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


def cmd_materials(args) -> int:
    from .materials import PRESETS, derive_quantities

    print("name,n_m2,m_star,v_s_mps,E_d_eV,rho_kgm2,E_F_eV,a_m,T_D_K,q_D_per_nm,k_F_per_nm")
    for name, m in PRESETS.items():
        d = derive_quantities(m)
        print(f"{name},{m.n:g},{m.m_star:g},{m.v_s:g},{m.E_d:g},{m.rho:g},{m.E_F:g},{m.a:g},"
              f"{m.T_D:g},{d.q_D_nm:.4f},{d.k_F_nm:.4f}")
    return EXIT_OK


def cmd_smoke(args) -> int:
    from .analysis import peak_location
    from .config import SMOKE_CONFIG, parse_config
    from .runner import load_spectrum, run_experiment

    cfg = parse_config(SMOKE_CONFIG)
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(args.output) if args.output else Path(tmp)
        run_experiment(cfg, output=out)
        sp = load_spectrum(out, "LSCO", 300.0, "static")
        w_p = peak_location(sp)
    print(f"LSCO 300 K static peak at {w_p:.4f} eV")
    if not w_p > 0:
        print("smoke check failed: no displaced peak", file=sys.stderr)
        return EXIT_RUNTIME
    print("smoke check passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qadrude", description=(
        "Optical conductivity of 2D electrons in a thermal acoustic deformation potential."))
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help="key = value experiment file")
    r.add_argument("--output", "-o", help="output directory (overrides the config)")
    r.add_argument("--workers", type=int, default=None,
                   help="process count (default: QADRUDE_WORKERS or the config value)")
    r.add_argument("--figures", action="store_true", help="also render PNG figures")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a config and print it fully resolved")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    m = sub.add_parser("materials", help="material presets")
    m.add_argument("action", choices=["list"])
    m.set_defaults(func=cmd_materials)

    s = sub.add_parser("smoke", help="small end-to-end run (LSCO, 300 K, two realizations)")
    s.add_argument("--output", "-o", help="keep the outputs in this directory")
    s.set_defaults(func=cmd_smoke)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
