"""Command-line interface.

Subcommands: ``run`` (full pipeline), ``gen-toy`` (synthetic datasets),
``measure`` (matrices only), ``render`` (plot from saved geometry).
Exit codes: 0 ok, 1 configuration error, 2 data error, 3 pipeline error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import parse_config_file, resolve_config
from .dataset import write_text
from .errors import ConfigError, DataError, PipelineError
from .pipeline import measure, render_from_geometry, run
from .toydata import TOY_NAMES, gen_toy


def _add_run_flags(p: argparse.ArgumentParser, for_render: bool = False):
    s = argparse.SUPPRESS
    if not for_render:
        p.add_argument("--config", default=None,
                       help="config file (key=value text or .json)")
        p.add_argument("--input", default=s)
        p.add_argument("--format", default=s, choices=("text", "binary"))
        p.add_argument("--label-col", dest="label_col", default=s)
        p.add_argument("--sidecar", default=s)
        p.add_argument("--labels", default=s,
                       help="binary-format label file (default: payload + '.labels')")
        p.add_argument("--standardize", default=s, choices=("none", "zscore"))
        p.add_argument("--birch-threshold", dest="birch_threshold", default=s)
        p.add_argument("--birch-branching", dest="birch_branching",
                       type=int, default=s)
        p.add_argument("--anchors-target", dest="anchors_target", default=s,
                       help="median per-class anchor band, e.g. 20,60")
        p.add_argument("--embed", default=s, choices=("pca", "mds", "external"))
        p.add_argument("--external-coords", dest="external_coords", default=s)
        p.add_argument("--k-overlap", dest="k_overlap", type=int, default=s)
        p.add_argument("--k-prox", dest="k_prox", type=int, default=s)
        p.add_argument("--k-confusion", dest="k_confusion", type=int, default=s)
        p.add_argument("--alpha-radius", dest="alpha_radius", default=s)
        p.add_argument("--lof-k", dest="lof_k", type=int, default=s)
        p.add_argument("--lof-threshold", dest="lof_threshold",
                       type=float, default=s)
        p.add_argument("--smoothing-passes", dest="smoothing_passes",
                       type=int, default=s)
        p.add_argument("--virtual-cap", dest="virtual_cap", type=int, default=s)
        p.add_argument("--iterations", type=int, default=s)
        p.add_argument("--lr", type=float, default=s)
        p.add_argument("--delta", type=float, default=s)
        p.add_argument("--stall-patience", dest="stall_patience",
                       type=int, default=s)
        p.add_argument("--damp-factor", dest="damp_factor",
                       type=float, default=s)
        p.add_argument("--inter-label-only", dest="inter_label_only",
                       action=argparse.BooleanOptionalAction, default=s)
        p.add_argument("--lazy", action=argparse.BooleanOptionalAction,
                       default=s)
        p.add_argument("--confusion", action=argparse.BooleanOptionalAction,
                       default=s)
    p.add_argument("--canvas", type=int, default=s)
    p.add_argument("--palette", default=s,
                   help="comma-joined hex colors, cycled over labels")
    p.add_argument("--fill-opacity", dest="fill_opacity", type=float, default=s)
    p.add_argument("--stroke-frac", dest="stroke_frac", type=float, default=s)
    p.add_argument("--legend", action=argparse.BooleanOptionalAction, default=s)
    p.add_argument("--seed", type=int, default=s)
    p.add_argument("--threads", type=int, default=s)
    p.add_argument("--out", default=s)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blobplot",
        description="2D blob diagrams whose overlap and proximity mirror "
                    "relations measured in the original feature space")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline: data to plot")
    _add_run_flags(p_run)

    p_toy = sub.add_parser("gen-toy", help="write a synthetic dataset")
    p_toy.add_argument("--name", required=True, choices=TOY_NAMES)
    p_toy.add_argument("--n", type=int, default=None,
                       help="total points (hourglass/cross)")
    p_toy.add_argument("--classes", type=int, default=None,
                       help="class count (gaussians)")
    p_toy.add_argument("--per-class", dest="per_class", type=int, default=None,
                       help="points per class (gaussians)")
    p_toy.add_argument("--dim", type=int, default=None,
                       help="dimensionality (gaussians)")
    p_toy.add_argument("--separation", type=float, default=None,
                       help="center distance in sigmas (gaussians)")
    p_toy.add_argument("--seed", type=int, default=0)
    p_toy.add_argument("--out", required=True, help="output csv path")

    p_measure = sub.add_parser("measure",
                               help="matrices only, no optimization")
    _add_run_flags(p_measure)

    p_render = sub.add_parser("render", help="plot from saved geometry")
    p_render.add_argument("--geometry", required=True,
                          help="blobs.json from an earlier run")
    _add_run_flags(p_render, for_render=True)
    return parser


def _set_threads(cfg) -> None:
    # kernels are deliberately sequential so results never depend on the
    # thread count; the flag is recorded for config round-trips and future
    # parallel kernels pick it up from the environment
    if cfg.threads > 0:
        os.environ["BLOBPLOT_THREADS"] = str(cfg.threads)


def _gen_toy_cmd(args) -> int:
    params = {}
    if args.name in ("hourglass", "cross") and args.n:
        params["n"] = args.n
    if args.name == "gaussians":
        if args.classes:
            params["m"] = args.classes
        if args.per_class:
            params["n_per_class"] = args.per_class
        if args.dim:
            params["dim"] = args.dim
        if args.separation:
            params["separation"] = args.separation
    ds = gen_toy(args.name, seed=args.seed, **params)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    write_text(ds, args.out)
    print(f"wrote {ds.n} points, {ds.m} classes, {ds.d} dims to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen-toy":
            return _gen_toy_cmd(args)

        flag_values = {k: v for k, v in vars(args).items()
                       if k not in ("command", "config", "geometry")}
        file_values = None
        if getattr(args, "config", None):
            file_values = parse_config_file(args.config)
        cfg = resolve_config(file_values, flag_values)
        _set_threads(cfg)

        if args.command == "run":
            manifest = run(cfg)
        elif args.command == "measure":
            manifest = measure(cfg)
        else:
            manifest = render_from_geometry(args.geometry, cfg)
        print(f"ok: manifest at {manifest}")
        return 0
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except PipelineError as e:
        print(f"pipeline error: {e}", file=sys.stderr)
        return 3
    except BrokenPipeError:
        return 0


if __name__ == "__main__":
    sys.exit(main())
