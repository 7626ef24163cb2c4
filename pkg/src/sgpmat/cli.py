"""Command-line entry point: ``sgpmat {cloaking,tomography,custom}``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, from_dict, load_config, default_dict, validate
from .experiments import RUNNERS


def _sweep_list(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok.lower() in ("continuous", "inf", "none"):
            out.append("continuous")
            continue
        try:
            n = int(tok)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid orientation count {tok!r}") from None
        if n < 1:
            raise argparse.ArgumentTypeError(f"orientation count must be positive, got {n}")
        out.append(n)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgpmat", description="Material optimization by sequential global "
                                     "programming for 2D Helmholtz scattering.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON or YAML run configuration (defaults apply when omitted)")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
        p.add_argument("--threads", type=int, help="limit BLAS/LAPACK threads")
        p.add_argument("--max-outer", type=int, help="override sgp.max_outer")
        p.add_argument("-v", "--verbose", action="count", default=0)
        if name == "cloaking":
            p.add_argument("--sweep-angles", type=_sweep_list,
                           help="comma separated orientation counts, 'continuous' for the closed edge")
    return parser


def _load(args):
    if args.config:
        cfg = load_config(args.config, args.experiment)
    else:
        cfg = from_dict(default_dict(args.experiment), args.experiment)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        cfg.seed = args.seed
    if args.max_outer is not None:
        cfg.sgp.max_outer = args.max_outer
    if args.out:
        cfg.output.directory = args.out
    if getattr(args, "sweep_angles", None) is not None:
        cfg.sweep.orientations = args.sweep_angles
    validate(cfg)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"sgpmat: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.threads:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=args.threads):
                art = RUNNERS[args.experiment](cfg, args.out)
        else:
            art = RUNNERS[args.experiment](cfg, args.out)
    except Exception as exc:  # library errors become a diagnostic and exit code 1
        logging.getLogger("sgpmat").debug("run failed", exc_info=True)
        print(f"sgpmat: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for key in sorted(art.metrics):
        val = art.metrics[key]
        if isinstance(val, (int, float, bool)):
            print(f"{key}: {val}")
    print(f"outputs written to {art.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
