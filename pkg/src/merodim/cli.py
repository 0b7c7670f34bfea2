"""Command-line front end.

Exit codes: 0 success, 2 validation error (also argparse rejections),
3 numerical failure, 4 I/O error.  The default output directory comes
from --out-dir, else the MERODIM_OUT environment variable, else
./merodim-out.  Configs are JSON with a schema_version field; `merodim
defaults` prints the full default config.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import DEFAULTS, OUT_DIR_ENV
from .dimension import (
    CoverSequence,
    boxes_to_csv,
    escape_cover_sequence,
    fit_box_dimension,
    mcmullen_bound,
)
from .dynamics import Rect, classify_grid, iterate_orbit
from .errors import NumericalError, ValidationError
from .functions import DiskForestSpec, RationalFunctionSpec, SeriesFunctionSpec
from .pipeline import ExperimentConfig, run_experiment, sweep, sweep_to_csv
from .poles import build_atlas, counting_function, critical_exponent, dimension_bound
from .verify import (
    area_probe,
    choose_forest_params,
    probe_layout,
    ring_layout,
    sample_web,
    validate_forest_params,
    web_bound,
)

_EXIT_OK = 0
_EXIT_VALIDATION = 2
_EXIT_NUMERICAL = 3
_EXIT_IO = 4


def _out_dir(args) -> Path:
    out = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or DEFAULTS["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _series_spec(args) -> SeriesFunctionSpec:
    return SeriesFunctionSpec(rho=args.rho, M=args.mult)


def _make_layout(args):
    if args.layout == "default":
        return probe_layout(count=args.disks)
    return ring_layout(n_min=1, n_max=args.annuli, disk_radius=args.disk_radius)


def _forest_spec(args) -> DiskForestSpec:
    return choose_forest_params(_make_layout(args), eps_budget=args.eps_budget)


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_atlas(args) -> int:
    out = _out_dir(args)
    atlas = build_atlas(args.rho, args.mult, args.r_max, args.max_entries)
    path = out / "atlas.csv"
    rows = atlas.to_csv(path)
    assert rows == counting_function(atlas, atlas.r_max)
    print(f"atlas: {rows} poles in {atlas.ring_count} rings -> {path}")
    return _EXIT_OK


def _cmd_threshold(args) -> int:
    atlas = build_atlas(args.rho, args.mult, args.r_max, args.max_entries)
    estimate = critical_exponent(atlas)
    formula = dimension_bound(args.rho, args.mult)
    print(f"t* ~= {estimate:.4f} (formula {formula:.6f}, "
          f"{atlas.n_entries} poles)")
    return _EXIT_OK


def _cmd_orbit(args) -> int:
    if args.family == "series":
        spec = _series_spec(args)
    elif args.family == "forest":
        spec = _forest_spec(args)
    else:
        spec = RationalFunctionSpec(args.rational)
    record = iterate_orbit(spec, complex(args.re, args.im), args.escape_R,
                           args.horizon)
    final = record.moduli[-1] if record.moduli else float("nan")
    print(f"orbit: {record.classification} after {record.steps_taken} steps "
          f"(horizon {record.horizon}, R={record.escape_threshold}, "
          f"last modulus {final:.6g})")
    return _EXIT_OK


def _cmd_grid(args) -> int:
    out = _out_dir(args)
    spec = _series_spec(args)
    x0, y0, w, h = args.region
    grid = classify_grid(spec, Rect(x0, y0, w, h), args.nx, args.ny,
                         args.escape_R, args.horizon, jobs=args.jobs)
    grid.to_csv(out / "grid.csv")
    grid.to_png(out / "grid.png")
    counts = grid.counts()
    print(f"grid: {args.nx}x{args.ny} "
          + " ".join(f"{k}={v}" for k, v in counts.items())
          + f" -> {out / 'grid.csv'}")
    return _EXIT_OK


def _cmd_dimension(args) -> int:
    out = _out_dir(args)
    pts = []
    with open(args.points_csv, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        try:
            i_re, i_im = header.index("re"), header.index("im")
        except ValueError as exc:
            raise ValidationError("points CSV needs 're' and 'im' columns") from exc
        for line in fh:
            cells = line.strip().split(",")
            pts.append(complex(float(cells[i_re]), float(cells[i_im])))
    x0, y0, w, h = args.region
    region = Rect(x0, y0, w, h)
    est = fit_box_dimension(pts, args.sizes, region)
    boxes_to_csv(pts, args.sizes, region, out / "boxes.csv")
    print(f"box dimension ~= {est.value:.4f} (residual {est.fit_residual:.3g}, "
          f"{est.point_count} points) -> {out / 'boxes.csv'}")
    return _EXIT_OK


def _cmd_mcmullen(args) -> int:
    if args.cover_csv:
        deltas, diameters = [], []
        with open(args.cover_csv, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            i_d = header.index("delta")
            i_s = header.index("diameter")
            for line in fh:
                cells = line.strip().split(",")
                deltas.append(float(cells[i_d]))
                diameters.append(float(cells[i_s]))
        cover = CoverSequence.from_values(deltas, diameters)
        print(f"nested-cover lower bound = {mcmullen_bound(cover)!r}")
    else:
        cover = escape_cover_sequence(args.rho, args.mult, args.cover_R,
                                      args.levels, args.scale_const,
                                      args.density_const)
        bound = mcmullen_bound(cover)
        formula = dimension_bound(args.rho, args.mult)
        print(f"nested-cover lower bound = {bound!r} (formula {formula!r})")
    return _EXIT_OK


def _cmd_verify_web(args) -> int:
    spec = _series_spec(args)
    sample = sample_web(spec, args.max_ring, args.per_component)
    bound = web_bound(spec.mu)
    ok = sample.max_modulus() <= bound
    print(f"web: max|g| = {sample.max_modulus():.6f} over {len(sample)} points, "
          f"bound 4C+4 = {bound:.6f} -> {'PASS' if ok else 'FAIL'}")
    return _EXIT_OK if ok else _EXIT_NUMERICAL


def _cmd_verify_forest(args) -> int:
    out = _out_dir(args)
    spec = _forest_spec(args)
    report = validate_forest_params(spec)
    report.to_csv(out / "constraints.csv")
    n_pass = sum(1 for r in report.rows if r.passed)
    print(f"forest: {n_pass}/{len(report.rows)} constraints pass "
          f"({len(spec)} disks) -> {out / 'constraints.csv'}")
    if not report.passed:
        print("failing: " + ", ".join(r.name for r in report.failures()))
        return _EXIT_NUMERICAL
    return _EXIT_OK


def _cmd_probe(args) -> int:
    out = _out_dir(args)
    spec = _forest_spec(args)
    result = area_probe(spec, args.annulus, args.samples, args.horizon, args.seed)
    result.to_csv(out / "probe.csv")
    print(f"probe: annulus {result.annulus}, {result.samples} samples, "
          f"horizon {result.horizon}, seed {result.rng_seed}: "
          f"persisting fraction = {result.fraction_persisting!r} "
          f"(per-step {[round(s, 6) for s in result.survival_by_step]})")
    return _EXIT_OK


def _load_config(path: str, overrides: dict) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)


def _cmd_experiment(args) -> int:
    overrides = {"seed": args.seed, "out_dir": args.out_dir, "jobs": args.jobs}
    if args.config:
        cfg = _load_config(args.config, overrides)
    else:
        data = {k: v for k, v in overrides.items() if v is not None}
        cfg = ExperimentConfig.from_dict({"schema_version": 1, **data})
    report = run_experiment(cfg)
    print(f"experiment rho={cfg.rho} M={cfg.M}: formula={report.formula_value:.6f} "
          f"threshold={report.threshold_estimate:.4f} "
          f"mcmullen={report.mcmullen_limit_estimate:.6f} "
          f"-> {Path(cfg.out_dir) / 'report.txt'}")
    return _EXIT_OK


def _cmd_sweep(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    entries = data["configs"] if isinstance(data, dict) else data
    if not isinstance(entries, list) or not entries:
        raise ValidationError("sweep config must be a nonempty list of configs")
    configs = []
    for entry in entries:
        if args.out_dir is not None:
            entry = {**entry, "out_dir": args.out_dir}
        if args.seed is not None:
            entry = {**entry, "seed": args.seed}
        configs.append(ExperimentConfig.from_dict(entry))
    reports = sweep(configs)
    out = Path(configs[0].out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sweep_to_csv(reports, out / "sweep.csv")
    for r in reports:
        print(f"rho={r.config.rho} M={r.config.M}: formula={r.formula_value:.6f} "
              f"threshold={r.threshold_estimate:.4f} "
              f"mcmullen={r.mcmullen_limit_estimate:.6f}")
    print(f"sweep table -> {out / 'sweep.csv'}")
    return _EXIT_OK


def _cmd_defaults(args) -> int:  # noqa: ARG001 - uniform signature
    print(json.dumps(DEFAULTS, indent=2, sort_keys=True))
    return _EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly


def _add_series_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rho", type=float, default=DEFAULTS["rho"],
                   help="order parameter of the series family")
    p.add_argument("--mult", "-M", type=int, default=DEFAULTS["M"],
                   help="pole multiplicity M (f = g^M)")


def _add_out_dir(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-dir", default=None,
                   help=f"output directory (env {OUT_DIR_ENV}, "
                        f"else {DEFAULTS['out_dir']})")


def _add_forest_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--layout", choices=("default", "ring"), default="default",
                   help="disk layout generator")
    p.add_argument("--disks", type=int, default=6,
                   help="disk count for the default layout")
    p.add_argument("--annuli", type=int, default=2,
                   help="annulus count for the ring layout")
    p.add_argument("--disk-radius", type=float, default=0.45,
                   help="disk radius for the ring layout")
    p.add_argument("--eps-budget", type=float, default=0.4,
                   help="total weight budget (must stay below 1/2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="merodim",
        description="Escaping-set dimension experiments for meromorphic functions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def new(name, help_, fn):
        p = sub.add_parser(name, help=help_,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(fn=fn)
        return p

    p = new("atlas", "build a pole atlas and export it as CSV", _cmd_atlas)
    _add_series_args(p)
    p.add_argument("--r-max", type=float, default=DEFAULTS["r_max"],
                   help="largest pole modulus included")
    p.add_argument("--max-entries", type=int, default=DEFAULTS["max_entries"],
                   help="cap on atlas size")
    _add_out_dir(p)

    p = new("threshold", "estimate the weight-sum convergence threshold",
            _cmd_threshold)
    _add_series_args(p)
    p.add_argument("--r-max", type=float, default=DEFAULTS["r_max"],
                   help="largest pole modulus included")
    p.add_argument("--max-entries", type=int, default=DEFAULTS["max_entries"],
                   help="cap on atlas size")

    p = new("orbit", "iterate one start point and classify it", _cmd_orbit)
    _add_series_args(p)
    p.add_argument("--family", choices=("series", "forest", "rational"),
                   default="series", help="which function family to iterate")
    p.add_argument("--rational", default="reciprocal",
                   help="rational test map name (family=rational)")
    _add_forest_args(p)
    p.add_argument("--re", type=float, default=0.5, help="start point real part")
    p.add_argument("--im", type=float, default=0.0, help="start point imaginary part")
    p.add_argument("--escape-R", type=float, default=DEFAULTS["grid_R"],
                   help="escape threshold R")
    p.add_argument("--horizon", type=int, default=DEFAULTS["horizon"],
                   help="iteration horizon")

    p = new("grid", "classify a grid of start points", _cmd_grid)
    _add_series_args(p)
    p.add_argument("--region", type=float, nargs=4,
                   default=[DEFAULTS["grid"]["x0"], DEFAULTS["grid"]["y0"],
                            DEFAULTS["grid"]["width"], DEFAULTS["grid"]["height"]],
                   metavar=("X0", "Y0", "W", "H"), help="rectangle corner and extents")
    p.add_argument("--nx", type=int, default=DEFAULTS["grid"]["nx"],
                   help="cells along the real axis")
    p.add_argument("--ny", type=int, default=DEFAULTS["grid"]["ny"],
                   help="cells along the imaginary axis")
    p.add_argument("--escape-R", type=float, default=DEFAULTS["grid_R"],
                   help="escape threshold R")
    p.add_argument("--horizon", type=int, default=DEFAULTS["horizon"],
                   help="iteration horizon")
    p.add_argument("--jobs", type=int, default=DEFAULTS["jobs"],
                   help="worker process count")
    _add_out_dir(p)

    p = new("dimension", "box-counting dimension of points from a CSV",
            _cmd_dimension)
    p.add_argument("--points-csv", required=True,
                   help="CSV with re and im columns")
    p.add_argument("--region", type=float, nargs=4, default=[0.0, 0.0, 1.0, 1.0],
                   metavar=("X0", "Y0", "W", "H"), help="counting region")
    p.add_argument("--sizes", type=float, nargs="+",
                   default=[1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128],
                   help="box sizes for the fit")
    _add_out_dir(p)

    p = new("mcmullen", "nested-cover dimension lower bound", _cmd_mcmullen)
    _add_series_args(p)
    p.add_argument("--cover-R", type=float, default=DEFAULTS["R"],
                   help="threshold R of the cover construction")
    p.add_argument("--levels", type=int, default=DEFAULTS["levels"],
                   help="cover levels to generate")
    p.add_argument("--scale-const", type=float, default=1.0,
                   help="free diameter constant of the cover")
    p.add_argument("--density-const", type=float, default=1.0,
                   help="free density constant of the cover")
    p.add_argument("--cover-csv", default=None,
                   help="read (delta, diameter) levels from this CSV instead")

    p = new("verify-web", "check the uniform web bound 4C+4", _cmd_verify_web)
    _add_series_args(p)
    p.add_argument("--max-ring", type=int, default=30,
                   help="outermost web ring sampled")
    p.add_argument("--per-component", type=int, default=200,
                   help="samples per circle and per segment")

    p = new("verify-forest", "choose and validate disk-forest parameters",
            _cmd_verify_forest)
    _add_forest_args(p)
    _add_out_dir(p)

    p = new("probe", "finite-horizon persistence probe of the disk forest",
            _cmd_probe)
    _add_forest_args(p)
    p.add_argument("--annulus", type=int, default=1,
                   help="dyadic annulus index sampled")
    p.add_argument("--samples", type=int, default=20000,
                   help="Monte-Carlo sample count")
    p.add_argument("--horizon", type=int, default=1,
                   help="persistence horizon")
    p.add_argument("--seed", type=int, default=DEFAULTS["seed"],
                   help="PRNG seed (PCG64), recorded in the result")
    _add_out_dir(p)

    p = new("experiment", "full pipeline for one configuration", _cmd_experiment)
    p.add_argument("--config", default=None,
                   help="JSON config path (defaults apply when omitted)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--jobs", type=int, default=None,
                   help="override the config worker count")
    _add_out_dir(p)

    p = new("sweep", "run several experiment configs and tabulate", _cmd_sweep)
    p.add_argument("--config", required=True,
                   help="JSON file with a list of configs")
    p.add_argument("--seed", type=int, default=None,
                   help="override every config seed")
    _add_out_dir(p)

    new("defaults", "print the default configuration as JSON", _cmd_defaults)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return _EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return _EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
