"""``sparq`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import errors
from .ingest import ProjectionConfig, ProjectionMode, load_trajectory
from .metrics import rqa_metrics
from .plot import Palette, PlotSpec, Target, render_plot
from .preprocess import load_config
from .recurrence import RecurrenceMatrix, accumulate, cross_recurrence, self_recurrence
from .risk import Tier, export_features, load_policy
from .store import SECRET_ENV, Store
from .testkit import bundled_melody, parse_symbols

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_NOT_FOUND = 4
EXIT_STORE = 5
EXIT_ANALYSIS = 6
EXIT_VIGILANCE = 10
EXIT_ISOLATE = 20
EXIT_UNAUTHORIZED = 30

TIER_EXIT = {Tier.NONE: EXIT_OK, Tier.VIGILANCE: EXIT_VIGILANCE, Tier.ISOLATE: EXIT_ISOLATE}

EXIT_CODES_HELP = """\
exit codes:
   0  success (trace: tier none)
   1  internal error
   2  malformed input file or bad arguments
   3  invalid config or policy (including window size violations)
   4  artifact or store not found
   5  store I/O error
   6  analysis error (e.g. mismatched matrix sizes)
  10  trace: tier vigilance
  20  trace: tier isolate
  30  credential rejected for the contagious pool
"""

_ERROR_EXIT = [
    ((errors.MalformedRecord, errors.DuplicateTimestamp, errors.EmptyInput, errors.FormatError), EXIT_INPUT),
    ((errors.ConfigError, errors.InvalidPolicy, errors.NyquistViolation, errors.InvalidLMin), EXIT_CONFIG),
    ((errors.NotFound, FileNotFoundError), EXIT_NOT_FOUND),
    ((errors.Unauthorized,), EXIT_UNAUTHORIZED),
    ((errors.StoreError, OSError), EXIT_STORE),
    ((errors.SparqError,), EXIT_ANALYSIS),
    ((ValueError,), EXIT_INPUT),
]


def exit_code_for(exc: BaseException) -> int:
    for types, code in _ERROR_EXIT:
        if isinstance(exc, types):
            return code
    return EXIT_INTERNAL


def _emit(obj):
    sys.stdout.write(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _projection(args) -> ProjectionConfig:
    if args.equirectangular:
        return ProjectionConfig(args.ref_lat, ProjectionMode.EQUIRECTANGULAR)
    return ProjectionConfig()


def _config_overrides(args) -> dict:
    return {
        "window_s": args.window_s,
        "critical_exposure_s": args.critical_exposure_s,
        "cell_m": args.cell_m,
        "grid_origin_t": args.grid_origin_t,
    }


def _check_store_config(store: Store, args):
    """A --config or override flag must agree with the pool's own config."""
    given = {k: v for k, v in _config_overrides(args).items() if v is not None}
    if args.config is None and not given:
        return
    wanted = load_config(args.config, given).to_dict()
    have = store.config.to_dict()
    keys = set(given) | ({k for k in wanted} if args.config else set())
    diff = sorted(k for k in keys if wanted[k] != have[k])
    if diff:
        raise errors.ConfigError(f"config disagrees with the store on {', '.join(diff)}")


def _read_symbols(ref: str) -> list[int]:
    if ref.startswith("bundled:"):
        return bundled_melody(ref.split(":", 1)[1])
    return parse_symbols(Path(ref).read_text(encoding="utf-8"))


def _write(path, data: bytes):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(data)


def cmd_init(args) -> int:
    cfg = load_config(args.config, _config_overrides(args))
    Store.create(args.store, cfg, os.environ.get(SECRET_ENV))
    _emit({"store": str(args.store), "config": cfg.to_dict()})
    return EXIT_OK


def cmd_rqa(args) -> int:
    a = _read_symbols(args.input)
    if args.cross:
        b = _read_symbols(args.cross)
        n = min(len(a), len(b))
        m = cross_recurrence(a[:n], b[:n])
    else:
        m = self_recurrence(a)
    metrics = rqa_metrics(m, args.l_min, self_recurrence=not args.cross)
    if args.out:
        _write(args.out, render_plot(m, PlotSpec(Target.MATRIX, args.scale, Palette.BINARY)))
    _emit({"n": m.n, **vars(metrics)})
    return EXIT_OK


def cmd_ingest(args) -> int:
    store = Store(args.store)
    _check_store_config(store, args)
    traj = load_trajectory(args.trajectory, _projection(args))
    rec = store.ingest_contagious(traj, os.environ.get(SECRET_ENV), case_id=args.case_id)
    del traj
    _emit({"case_id": rec.case_id, "windows": rec.grid_series.n, "start_index": rec.grid_series.start_index,
           "ingested_at": rec.ingested_at})
    return EXIT_OK


def cmd_trace(args) -> int:
    store = Store(args.store)
    _check_store_config(store, args)
    policy = load_policy(args.policy)
    healthy = load_trajectory(args.trajectory, _projection(args))
    result = store.query_risk(healthy, opt_in=args.opt_in, policy=policy, query_id=args.query_id)
    del healthy
    if args.plot_dir:
        spec = PlotSpec(Target.MATRIX, args.scale, Palette.BINARY)
        for i, m in enumerate(result.matrices.values()):
            _write(Path(args.plot_dir) / f"combined_{i}.pgm", render_plot(m, spec))
        if result.accumulator is not None:
            _write(Path(args.plot_dir) / "accumulator.pgm",
                   render_plot(result.accumulator, PlotSpec(Target.ACCUMULATOR, args.scale, Palette.HEAT)))
    if args.features and result.per_record:
        fv = export_features(list(result.per_record.values()),
                             [f"c{i}" for i in range(len(result.per_record))])
        _write(args.features, fv.to_csv().encode("utf-8"))
    _emit(result.to_dict())
    return TIER_EXIT[result.assessment.tier]


def cmd_delete(args) -> int:
    Store(args.store).delete_opt_in(args.query_id)
    _emit({"deleted": args.query_id})
    return EXIT_OK


def cmd_plot(args) -> int:
    palette = Palette(args.palette)
    if args.artifact:
        acc = Store(args.store).load_opt_in(args.artifact).accumulator()
        if acc is None:
            raise errors.NotFound(f"artifact {args.artifact!r} holds no matrices")
        data = render_plot(acc, PlotSpec(Target.ACCUMULATOR, args.scale, palette))
    else:
        with open(args.matrix, "rb") as fh:
            m = RecurrenceMatrix.from_bytes(fh.read())
        if palette is Palette.HEAT:
            data = render_plot(accumulate([m]), PlotSpec(Target.ACCUMULATOR, args.scale, palette))
        else:
            data = render_plot(m, PlotSpec(Target.MATRIX, args.scale, palette))
    _write(args.out, data)
    return EXIT_OK


def _add_config_flags(p):
    p.add_argument("--config", help="key = value config file (window_s, critical_exposure_s, cell_m, ...)")
    p.add_argument("--window-s", type=int, dest="window_s")
    p.add_argument("--critical-exposure-s", type=int, dest="critical_exposure_s")
    p.add_argument("--cell-m", type=float, dest="cell_m")
    p.add_argument("--grid-origin-t", type=int, dest="grid_origin_t")


def _add_projection_flags(p):
    p.add_argument("--equirectangular", action="store_true",
                   help="input columns are lat,lon degrees instead of x,y meters")
    p.add_argument("--ref-lat", type=float, default=0.0, help="reference latitude for --equirectangular")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparq",
        description="Spatial cross-recurrence contact tracing. The pool secret is read from "
                    f"${SECRET_ENV}. Config precedence: flag > --config file > built-in default.",
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create an empty store guarded by $SPARQ_POOL_SECRET")
    p.add_argument("--store", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("rqa", help="recurrence plot and RQA metrics of a symbol series",
                       epilog=EXIT_CODES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("input", help="symbol file, or bundled:frere_jacques / bundled:happy_birthday")
    p.add_argument("--cross", help="second symbol series for cross-recurrence (both trimmed to equal length)")
    p.add_argument("--l-min", type=int, default=2, dest="l_min")
    p.add_argument("-o", "--out", help="PGM output path")
    p.add_argument("--scale", type=int, default=1)
    p.set_defaults(func=cmd_rqa)

    p = sub.add_parser("ingest", help="add a confirmed case to the contagious pool",
                       epilog=EXIT_CODES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("trajectory")
    p.add_argument("--store", required=True)
    p.add_argument("--case-id")
    _add_config_flags(p)
    _add_projection_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("trace", help="assess a healthy trajectory against the pool",
                       epilog=EXIT_CODES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("trajectory")
    p.add_argument("--store", required=True)
    p.add_argument("--policy", help="key = value risk policy file")
    p.add_argument("--opt-in", action="store_true", help="persist matrices and metrics (never coordinates)")
    p.add_argument("--query-id")
    p.add_argument("--plot-dir", help="write combined_<k>.pgm and accumulator.pgm here")
    p.add_argument("--scale", type=int, default=1)
    p.add_argument("--features", help="write the per-contributor feature CSV here")
    _add_config_flags(p)
    _add_projection_flags(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("delete", help="delete an opted-in artifact")
    p.add_argument("query_id")
    p.add_argument("--store", required=True)
    p.set_defaults(func=cmd_delete)

    p = sub.add_parser("plot", help="render a stored matrix or an artifact's accumulator to PGM")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix", help="SPRQ matrix file")
    src.add_argument("--artifact", help="opted-in query id (needs --store)")
    p.add_argument("--store")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--scale", type=int, default=1)
    p.add_argument("--palette", choices=[x.value for x in Palette], default="binary")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "artifact", None) and not args.store:
        parser.error("--artifact needs --store")
    try:
        return args.func(args)
    except Exception as exc:  # mapped to documented exit codes
        code = exit_code_for(exc)
        print(f"sparq: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
