"""Command-line entry point: ``stadium-spectra {solve,sweep,crossings,render,validate}``.

Exit codes: 0 success, 1 configuration error, 2 partial convergence or failed
sweep points, 3 no avoided crossing found, 4 validation failure.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config_file, worker_count
from .discretize import assemble_laplacian, matvec
from .fields import read_field_binary, symmetry_scores, unfold, write_field_binary, write_field_csv
from .geometry import StadiumGeometry, geometry_from_dict
from .spectra import (
    CurveTable,
    SweepConfig,
    analyze_crossing,
    detect_avoided_crossings,
    refine_crossing,
    run_sweep,
    solve_geometry,
)
from .validate import format_table, run_checks
from .vizexport import EmptyTable, render_correlation_svg, render_field_svg

log = logging.getLogger("stadium_spectra")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_NO_CROSSING, EXIT_VALIDATE = 0, 1, 2, 3, 4

PRECEDENCE = "Values are taken from built-in defaults, then --config JSON, then explicit flags (highest)."


# -- file helpers ---------------------------------------------------------------------


def atomic_write(path: Path, data: str | bytes) -> None:
    """Write to a temporary sibling and rename, so no partial file is ever visible."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def fmt_a(a: float) -> str:
    return f"{a:.4f}"


def field_stem(cls: str, index: int, a: float) -> str:
    return f"{cls.lower()}{index}_a{fmt_a(a)}"


def _provenance(cfg: RunConfig) -> dict:
    return {"tool": "stadium-spectra", "version": __version__, "config_hash": cfg.config_hash}


# -- argument parsing ------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", dest="output", help="output directory")
    p.add_argument("--h", type=float, help="grid spacing")
    p.add_argument("--mode", choices=("full", "quadrant"), help="solve on the full domain or a symmetry quadrant")
    p.add_argument("--class", dest="classes", action="append", help="symmetry class EE/EO/OE/OO (repeatable)")
    p.add_argument("--k", type=int, help="eigenpairs per class")
    p.add_argument("--tol", type=float, help="relative residual tolerance")
    p.add_argument("--seed", type=int, help="seed of the starting block")
    p.add_argument("--threshold", type=float, help="symmetry classification threshold")
    p.add_argument("--preconditioner", choices=("amg", "jacobi"))
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stadium-spectra",
        description="Dirichlet eigenpairs of stadium billiards: single solves, sweeps over a, avoided crossings, SVG plots.",
        epilog=PRECEDENCE,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="eigenpairs, field dumps and contour plots for one stadium", epilog=PRECEDENCE)
    _common(p)
    p.add_argument("--a", type=float, help="stadium half-length")
    p.add_argument("--r", type=float, help="cap radius")

    p = sub.add_parser("sweep", help="eigenvalue curves over a range of a", epilog=PRECEDENCE)
    _common(p)
    p.add_argument("--r", type=float, help="cap radius")
    p.add_argument("--a-values", type=float, nargs="+", help="explicit list of a")
    p.add_argument("--a-range", type=float, nargs=3, metavar=("START", "STOP", "STEP"))
    p.add_argument("--workers", type=int, help="parallel sweep points (default: $STADIUM_WORKERS or 1)")

    p = sub.add_parser("crossings", help="detect, refine and analyse avoided crossings of a finished sweep", epilog=PRECEDENCE)
    _common(p)
    p.add_argument("--min-prominence", type=float)
    p.add_argument("--max-gap-ratio", type=float)
    p.add_argument("--curves", type=int, nargs="+", help="curve indices whose adjacent pairs are examined")
    p.add_argument("--delta", type=float, help="offset either side of a_star for swap and sum/difference fields")
    p.add_argument("--no-refine", action="store_true", help="report sampled minima only")
    p.add_argument("--no-fields", action="store_true", help="skip swap diagnostics and contour output")

    p = sub.add_parser("render", help="re-render SVGs from a curve table or a binary field dump")
    p.add_argument("--table", help="curves.json written by sweep")
    p.add_argument("--class", dest="cls", default="EE")
    p.add_argument("--curves", type=int, nargs="+")
    p.add_argument("--field", help="binary field dump written by solve")
    p.add_argument("--a", type=float, help="stadium half-length of the field dump")
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--levels", type=float, nargs="+")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("validate", help="run the built-in oracle suite")
    p.add_argument("--quick", action="store_true", help="coarse grids only")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _overrides(args) -> dict:
    keys = ("output", "h", "mode", "classes", "k", "tol", "seed", "threshold", "preconditioner", "a", "r",
            "min_prominence", "max_gap_ratio", "curves", "delta")
    ov = {k: getattr(args, k, None) for k in keys}
    if ov.get("classes"):
        ov["classes"] = [c.strip() for item in ov["classes"] for c in item.split(",") if c.strip()]
    if getattr(args, "a_values", None):
        ov["a_values"] = list(args.a_values)
    elif getattr(args, "a_range", None):
        start, stop, step = args.a_range
        from .spectra import default_a_values

        ov["a_values"] = list(default_a_values(start, stop, step))
    return ov


def load_run_config(args) -> RunConfig:
    data = load_config_file(args.config) if args.config else None
    return RunConfig.from_sources(data, _overrides(args))


# -- commands ---------------------------------------------------------------------------


def cmd_solve(cfg: RunConfig) -> int:
    geometry = cfg.geometry_obj()
    sc = cfg.sweep_config(a_values=(getattr(geometry, "a", 0.0),))
    out = Path(cfg.output)
    res = solve_geometry(geometry, sc)
    a_label = getattr(geometry, "a", 0.0)
    summary = {**_provenance(cfg), "config": cfg.science_dict(), "geometry": geometry.to_dict(), "classes": {}}
    partial = False
    files = {}
    for cls in cfg.classes:
        r = res[cls]
        if isinstance(r, Exception):
            summary["classes"][cls] = {"error": str(r)}
            partial = True
            continue
        lams, fields, report = r
        if len(lams) < cfg.k:
            partial = True
        entries = []
        for idx, (lam, f) in enumerate(zip(lams, fields), start=1):
            m = assemble_laplacian(f.grid)
            v = f.values / np.linalg.norm(f.values)
            resid = float(np.linalg.norm(matvec(m, v) - lam * v))
            full = unfold(f)
            sc_ = symmetry_scores(full)
            stem = field_stem(cls, idx, a_label)
            csv_buf = io.StringIO()
            csv_buf.write(f"# stadium-spectra {__version__} config_hash={cfg.config_hash} lambda={float(lam)!r}\n")
            write_field_csv(full, csv_buf)
            bin_buf = io.BytesIO()
            write_field_binary(full, bin_buf)
            files[f"fields/{stem}.csv"] = csv_buf.getvalue()
            files[f"fields/{stem}.bin"] = bin_buf.getvalue()
            files[f"{stem}.svg"] = render_field_svg(
                full, cfg.levels, title=f"{cls} {idx}  a={fmt_a(a_label)}  lambda={lam:.6g}",
                note=f"config_hash={cfg.config_hash}",
            )
            entries.append({
                "index": idx,
                "lambda": lam,
                "residual": resid,
                "s_x": sc_.s_x,
                "s_y": sc_.s_y,
                "field_csv": f"fields/{stem}.csv",
                "field_bin": f"fields/{stem}.bin",
                "svg": f"{stem}.svg",
            })
        summary["classes"][cls] = {"eigenpairs": entries, "solve": report.to_dict()}
    summary["converged"] = not partial
    for name, data in files.items():
        atomic_write(out / name, data)
    atomic_write(out / "eigenvalues.json", dump_json(summary))
    log.info("solve: wrote %d files to %s", len(files) + 1, out)
    return EXIT_PARTIAL if partial else EXIT_OK


def cmd_sweep(cfg: RunConfig, workers: int = 1) -> int:
    sc = cfg.sweep_config()
    out = Path(cfg.output)
    table = run_sweep(sc, workers=workers, cache_dir=out / "points")
    table.config_hash = cfg.config_hash
    table.config = cfg.science_dict()
    buf = io.StringIO()
    table.to_csv(buf)
    atomic_write(out / "curves.csv", buf.getvalue())
    atomic_write(out / "curves.json", dump_json(table.to_json()))
    for cls in cfg.classes:
        try:
            svg = render_correlation_svg(table, cls)
        except EmptyTable as exc:
            log.warning("no correlation plot for %s: %s", cls, exc)
            continue
        atomic_write(out / f"correlation_{cls}.svg", svg)
    if table.failures:
        log.warning("sweep: %d failed points recorded as holes", len(table.failures))
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_crossings(cfg: RunConfig, refine: bool = True, with_fields: bool = True) -> int:
    out = Path(cfg.output)
    src = out / "curves.json"
    if not src.exists():
        raise ConfigError(f"{src} not found; run sweep first")
    table = CurveTable.from_json(json.loads(src.read_text()))
    # solves near the crossing must reproduce the sweep, so its own settings win
    sweep_cfg = RunConfig.from_sources({k: v for k, v in table.config.items()}, {})
    sc = sweep_cfg.sweep_config()
    reports = []
    pairs = [c for c in cfg.curves[:-1] if c + 1 in cfg.curves]
    for cls in table.classes:
        if max(cfg.curves, default=1) > table.k:
            raise ConfigError(f"curves {cfg.curves} exceed the {table.k} curves in the sweep")
        reports += detect_avoided_crossings(table, cls, cfg.min_prominence, pairs=pairs, max_gap_ratio=cfg.max_gap_ratio)
    if not reports:
        log.warning("crossings: none found with min_prominence=%g", cfg.min_prominence)
        atomic_write(out / "crossings.json", dump_json([]))
        return EXIT_NO_CROSSING

    files = {}
    final = []
    for rep in reports:
        if refine:
            rep = refine_crossing(rep, sc)
        if with_fields:
            res = analyze_crossing(rep, sc, cfg.delta)
            rep = res["report"]
            i, j = rep.pair
            for side, a_side, flds in (("before", res["a"][0], res["before"]), ("after", res["a"][1], res["after"])):
                for idx, f in zip((i, j), flds):
                    files[f"{field_stem(rep.cls, idx, a_side)}.svg"] = render_field_svg(
                        f, cfg.levels, title=f"{rep.cls} {idx}  a={fmt_a(a_side)}", note=f"config_hash={cfg.config_hash}"
                    )
                for name in ("plus", "minus"):
                    w = res["combos"][(side, name)]
                    files[f"sumdiff_{i}_{j}_a{fmt_a(a_side)}_{name}.svg"] = render_field_svg(
                        w,
                        cfg.levels,
                        title=f"({rep.cls}{i} {'+' if name == 'plus' else '-'} {rep.cls}{j})/sqrt2  a={fmt_a(a_side)}",
                        note=f"config_hash={cfg.config_hash}",
                    )
        final.append({**rep.to_dict(), "config_hash": cfg.config_hash, "tool_version": __version__})
    for name, data in files.items():
        atomic_write(out / name, data)
    atomic_write(out / "crossings.json", dump_json(final))
    for r in final:
        log.info("crossing %s %s: a*=%.4f gap=%.4g", r["class"], r["pair"], r["a_star"], r["min_gap"])
    return EXIT_OK


def cmd_render(args) -> int:
    out = Path(args.out)
    if not args.table and not args.field:
        raise ConfigError("render needs --table and/or --field")
    if args.table:
        try:
            table = CurveTable.from_json(json.loads(Path(args.table).read_text()))
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"cannot read table {args.table}: {exc}") from None
        atomic_write(out / f"correlation_{args.cls}.svg", render_correlation_svg(table, args.cls, args.curves))
    if args.field:
        if args.a is None:
            raise ConfigError("render --field needs --a")
        with open(args.field, "rb") as fh:
            f = read_field_binary(fh, StadiumGeometry(args.a, args.r))
        atomic_write(out / (Path(args.field).stem + ".svg"), render_field_svg(f, args.levels))
    return EXIT_OK


def cmd_validate(quick: bool = False) -> int:
    results = run_checks(quick=quick)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATE


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "validate":
            return cmd_validate(args.quick)
        if args.command == "render":
            return cmd_render(args)
        cfg = load_run_config(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, worker_count(args.workers))
        if args.command == "crossings":
            return cmd_crossings(cfg, refine=not args.no_refine, with_fields=not args.no_fields)
    except (ConfigError, EmptyTable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    parser.error(f"unknown command {args.command}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
