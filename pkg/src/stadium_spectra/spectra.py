"""Sweeps over the stadium half-length, eigenvalue curve tables and avoided crossings.

Curves are numbered from 1 within a symmetry class (curve 3 is the third
smallest eigenvalue of that class), and a curve's identity across the
sweep is simply its rank: curves of one class never cross.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks

from . import __version__
from .discretize import assemble_laplacian
from .eigensolve import make_preconditioner, smallest_k
from .fields import ScalarField, classify_pairs, combine, fix_sign, normalize, overlap, swap_diagnostic, unfold
from .geometry import SYMMETRY_CLASSES, EmptyGrid, GridSpec, StadiumGeometry, build_grid

__all__ = [
    "SweepConfig",
    "CurveTable",
    "CrossingReport",
    "LostBracket",
    "PointFailure",
    "solve_geometry",
    "solve_point",
    "run_sweep",
    "gaps",
    "detect_avoided_crossings",
    "refine_crossing",
    "golden_section_min",
    "crossing_fields",
    "analyze_crossing",
    "default_a_values",
]

log = logging.getLogger(__name__)


class LostBracket(RuntimeError):
    pass


class PointFailure(RuntimeError):
    pass


def default_a_values(start=0.0, stop=2.0, step=0.02) -> tuple[float, ...]:
    count = int(round((stop - start) / step))
    return tuple(round(start + step * j, 12) for j in range(count + 1))


@dataclass(frozen=True)
class SweepConfig:
    a_values: tuple[float, ...] = field(default_factory=default_a_values)
    r: float = 1.0
    h: float = 1 / 64
    mode: str = "quadrant"
    classes: tuple[str, ...] = ("EE",)
    k: int = 8
    tol: float = 1e-7
    seed: int = 0
    threshold: float = 0.9
    preconditioner: str = "amg"

    def __post_init__(self):
        a = tuple(float(x) for x in self.a_values)
        object.__setattr__(self, "a_values", a)
        object.__setattr__(self, "classes", tuple(self.classes))
        if not a:
            raise ValueError("a_values is empty")
        if any(b <= c for c, b in zip(a, a[1:])):
            raise ValueError("a_values must be strictly ascending")
        if min(a) < 0:
            raise ValueError("a_values must be >= 0")
        if self.mode not in ("quadrant", "full"):
            raise ValueError(f"mode must be 'quadrant' or 'full', got {self.mode!r}")
        if not self.classes or any(c not in SYMMETRY_CLASSES for c in self.classes):
            raise ValueError(f"classes must be a non-empty subset of {SYMMETRY_CLASSES}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.tol <= 1e-2:
            raise ValueError("tol must lie in (0, 1e-2]")
        if not self.h > 0:
            raise ValueError("h must be > 0")
        if not self.r > 0:
            raise ValueError("r must be > 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["a_values"] = list(self.a_values)
        d["classes"] = list(self.classes)
        return d

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


# -- single sweep point ---------------------------------------------------------


def _solve_quadrant(geometry, cls, config: SweepConfig, k: int):
    grid = build_grid(geometry, GridSpec(config.h, cls))
    if k > grid.n:
        raise PointFailure(f"k={k} exceeds {grid.n} quadrant nodes")
    m = assemble_laplacian(grid)
    pairs, report = smallest_k(m, k, config.tol, config.seed, preconditioner=make_preconditioner(m, config.preconditioner))
    if not report.converged:
        raise PointFailure(f"no convergence for class {cls} on {geometry}")
    fields = [fix_sign(normalize(ScalarField(grid, p.vector))) for p in pairs]
    return [p.lam for p in pairs], fields, report


def _solve_full(geometry, classes, config: SweepConfig, k: int):
    grid = build_grid(geometry, GridSpec(config.h))
    m = assemble_laplacian(grid)
    pre = make_preconditioner(m, config.preconditioner)
    want = min(grid.n, 4 * k + 4)
    while True:
        pairs, report = smallest_k(m, want, config.tol, config.seed, preconditioner=pre)
        if not report.converged:
            raise PointFailure(f"no convergence in full-domain solve on {geometry}")
        labelled = classify_pairs(grid, pairs, m, config.tol, config.threshold)
        # the largest computed pair may belong to a cluster cut by k; ignore it
        labelled = [t for t in labelled if t[0] < pairs[-1].lam * (1 - 10 * config.tol)] or labelled
        by_class = {c: [t for t in labelled if t[2] == c] for c in classes}
        if all(len(v) >= k for v in by_class.values()) or want == grid.n:
            break
        want = min(grid.n, int(math.ceil(want * 1.5)))
    out = {}
    for c in classes:
        got = by_class[c][:k]
        out[c] = ([t[0] for t in got], [t[1] for t in got], report)
    return out


def solve_geometry(geometry, config: SweepConfig, classes=None, k: int | None = None) -> dict:
    """Eigenvalues and fields on one domain; ``{class: (lams, fields, report)}``.

    Quadrant mode solves each class on its own folded grid; full mode solves
    the whole domain once and sorts eigenvectors into classes.  A class that
    fails is reported as a ``PointFailure`` instance in place of the tuple.
    """
    classes = tuple(classes or config.classes)
    k = k or config.k
    out = {}
    if config.mode == "quadrant":
        for c in classes:
            try:
                out[c] = _solve_quadrant(geometry, c, config, k)
            except (PointFailure, EmptyGrid) as exc:
                out[c] = PointFailure(str(exc))
    else:
        try:
            out = _solve_full(geometry, classes, config, k)
        except (PointFailure, EmptyGrid) as exc:
            out = {c: PointFailure(str(exc)) for c in classes}
    return out


def solve_point(a: float, config: SweepConfig, classes=None, k: int | None = None) -> dict:
    """:func:`solve_geometry` on the stadium with half-length ``a``."""
    return solve_geometry(StadiumGeometry(a, config.r), config, classes, k)


def _point_job(args):
    a, config, classes = args
    res = solve_point(a, config, classes)
    summary = {}
    for c, v in res.items():
        if isinstance(v, Exception):
            summary[c] = {"error": str(v)}
        else:
            summary[c] = {"lambda": [float(x) for x in v[0]], "solve": v[2].to_dict()}
    return a, summary


# -- curve table ----------------------------------------------------------------


@dataclass
class CurveTable:
    a_values: np.ndarray
    classes: tuple[str, ...]
    # curves[c][i, j]: (i+1)-th eigenvalue of class c at a_values[j]; NaN marks a hole
    curves: dict
    config: dict = field(default_factory=dict)
    config_hash: str = ""
    failures: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return next(iter(self.curves.values())).shape[0]

    def curve(self, cls: str, i: int) -> np.ndarray:
        return self.curves[cls][i - 1]

    def to_csv(self, fh) -> None:
        fh.write(f"# stadium-spectra {__version__} config_hash={self.config_hash}\n")
        fh.write("a,class,curve_index,lambda\n")
        for c in self.classes:
            lam = self.curves[c]
            for j, a in enumerate(self.a_values):
                for i in range(lam.shape[0]):
                    v = lam[i, j]
                    fh.write(f"{float(a)!r},{c},{i + 1},{'' if np.isnan(v) else repr(float(v))}\n")

    def to_json(self) -> dict:
        return {
            "tool": "stadium-spectra",
            "version": __version__,
            "config_hash": self.config_hash,
            "config": self.config,
            "a_values": [float(a) for a in self.a_values],
            "curves": {
                c: [[None if np.isnan(v) else float(v) for v in row] for row in self.curves[c]]
                for c in self.classes
            },
            "failures": self.failures,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CurveTable":
        curves = {
            c: np.array([[np.nan if v is None else v for v in row] for row in rows], dtype=float)
            for c, rows in d["curves"].items()
        }
        return cls(
            a_values=np.asarray(d["a_values"], dtype=float),
            classes=tuple(d["curves"]),
            curves=curves,
            config=d.get("config", {}),
            config_hash=d.get("config_hash", ""),
            failures=d.get("failures", []),
        )


def _point_cache_path(cache_dir: Path, a: float, classes) -> Path:
    return cache_dir / f"a{a:.6f}_{'-'.join(classes)}.json"


def run_sweep(config: SweepConfig, workers: int = 1, cache_dir=None) -> CurveTable:
    """Solve every (a, class) of the sweep and assemble a :class:`CurveTable`.

    With ``cache_dir`` each finished point is stored as JSON keyed by the
    config hash; points already present with the same hash are reused.
    """
    chash = config.config_hash
    groups = [(c,) for c in config.classes] if config.mode == "quadrant" else [config.classes]
    jobs = [(a, config, g) for g in groups for a in config.a_values]

    results = {}
    todo = []
    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
    for job in jobs:
        a, _, g = job
        if cache_dir is not None:
            p = _point_cache_path(cache_dir, a, g)
            if p.exists():
                try:
                    d = json.loads(p.read_text())
                except json.JSONDecodeError:
                    d = {}
                if d.get("config_hash") == chash:
                    results[(a, g)] = d["classes"]
                    continue
        todo.append(job)
    if cache_dir is not None:
        log.info("sweep: %d of %d points cached, %d to compute", len(jobs) - len(todo), len(jobs), len(todo))

    def store(job, summary):
        a, _, g = job
        results[(a, g)] = summary
        if cache_dir is not None:
            _atomic_write_text(
                _point_cache_path(cache_dir, a, g),
                json.dumps({"config_hash": chash, "version": __version__, "a": a, "classes": summary}, sort_keys=True, indent=1),
            )

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for job, (_, summary) in zip(todo, ex.map(_point_job, todo)):
                store(job, summary)
    else:
        for job in todo:
            _, summary = _point_job(job)
            log.debug("sweep point a=%g %s done", job[0], job[2])
            store(job, summary)

    a_arr = np.asarray(config.a_values)
    curves = {c: np.full((config.k, len(a_arr)), np.nan) for c in config.classes}
    failures = []
    for g in groups:
        for j, a in enumerate(config.a_values):
            summary = results[(a, g)]
            for c in g:
                s = summary[c]
                if "error" in s:
                    failures.append({"a": a, "class": c, "error": s["error"]})
                    continue
                lam = s["lambda"]
                curves[c][: len(lam), j] = lam
    return CurveTable(a_arr, config.classes, curves, config.to_dict(), chash, failures)


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


# -- gaps and crossings -----------------------------------------------------------


def gaps(table: CurveTable, cls: str, i: int) -> np.ndarray:
    """λ_{i+1}(a) - λ_i(a) for 1-based curve index ``i``."""
    if not 1 <= i < table.k:
        raise IndexError(f"curve pair ({i}, {i + 1}) outside 1..{table.k}")
    return table.curve(cls, i + 1) - table.curve(cls, i)


@dataclass
class CrossingReport:
    cls: str
    pair: tuple[int, int]
    a_star: float
    min_gap: float
    refined: bool = False
    prominence: float = float("nan")
    bracket: tuple[float, float] = (float("nan"), float("nan"))
    lost_bracket: bool = False
    swap: list | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "class": self.cls,
            "pair": list(self.pair),
            "a_star": self.a_star,
            "min_gap": self.min_gap,
            "refined": self.refined,
            "prominence": self.prominence,
            "bracket": list(self.bracket),
            "lost_bracket": self.lost_bracket,
            "swap": self.swap,
        }
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CrossingReport":
        return cls(
            cls=d["class"],
            pair=tuple(d["pair"]),
            a_star=d["a_star"],
            min_gap=d["min_gap"],
            refined=d.get("refined", False),
            prominence=d.get("prominence", float("nan")),
            bracket=tuple(d.get("bracket", (float("nan"), float("nan")))),
            lost_bracket=d.get("lost_bracket", False),
            swap=d.get("swap"),
        )


def detect_avoided_crossings(
    table: CurveTable,
    cls: str,
    min_prominence: float = 0.5,
    pairs=None,
    max_gap_ratio: float | None = 1.0,
) -> list[CrossingReport]:
    """Interior local minima of adjacent-curve gaps.

    A minimum is reported when its prominence is at least ``min_prominence``
    and, unless ``max_gap_ratio`` is None, the gap there is no larger than
    ``max_gap_ratio`` times that prominence (a pinch, not a shallow dip).
    ``pairs`` restricts the search to the given lower curve indices.
    """
    a = table.a_values
    if len(a) < 3:
        raise ValueError("need at least 3 sweep points")
    lows = range(1, table.k) if pairs is None else pairs
    reports = []
    for i in lows:
        g = gaps(table, cls, i)
        ok = np.isfinite(g)
        # contiguous runs of valid samples; holes split the series
        edges = np.flatnonzero(np.diff(np.concatenate([[0], ok.astype(int), [0]])))
        for s, e in zip(edges[::2], edges[1::2]):
            seg = g[s:e]
            if len(seg) < 3:
                continue
            peaks, props = find_peaks(-seg, prominence=min_prominence)
            for p, prom in zip(peaks, props["prominences"]):
                j = s + p
                if max_gap_ratio is not None and g[j] > max_gap_ratio * prom:
                    continue
                reports.append(
                    CrossingReport(
                        cls=cls,
                        pair=(i, i + 1),
                        a_star=float(a[j]),
                        min_gap=float(g[j]),
                        prominence=float(prom),
                        bracket=(float(a[j - 1]), float(a[j + 1])),
                    )
                )
    return reports


INVPHI = (math.sqrt(5) - 1) / 2


def golden_section_min(fn, lo: float, hi: float, width_tol: float = 1e-3, max_evals: int = 60):
    """Golden-section search for the minimum of a unimodal ``fn`` on [lo, hi].

    Returns (a_star, f_star, evaluations) where the final estimate is the
    vertex of the parabola through the best sample and its two evaluated
    neighbours.  Raises LostBracket when the samples are not unimodal.
    """
    evals = {}

    def f(x):
        if x not in evals:
            if len(evals) >= max_evals:
                raise LostBracket("evaluation budget exhausted")
            evals[x] = float(fn(x))
        return evals[x]

    f(lo)
    f(hi)
    c = hi - INVPHI * (hi - lo)
    d = lo + INVPHI * (hi - lo)
    if min(f(c), f(d)) >= min(f(lo), f(hi)):
        raise LostBracket("interior samples do not undercut the bracket ends")
    while hi - lo > width_tol:
        if f(c) < f(d):
            hi, d = d, c
            c = hi - INVPHI * (hi - lo)
        else:
            lo, c = c, d
            d = lo + INVPHI * (hi - lo)
    f(c)
    f(d)

    xs = np.array(sorted(evals))
    ys = np.array([evals[x] for x in xs])
    b = int(np.argmin(ys))
    if b == 0 or b == len(xs) - 1:
        raise LostBracket("minimum drifted to the edge of the bracket")
    x3, y3 = xs[b - 1 : b + 2], ys[b - 1 : b + 2]
    # parabola through three points via divided differences
    d1 = (y3[1] - y3[0]) / (x3[1] - x3[0])
    d2 = (y3[2] - y3[1]) / (x3[2] - x3[1])
    curv = (d2 - d1) / (x3[2] - x3[0])
    if curv <= 0:
        return float(xs[b]), float(ys[b]), evals
    vertex = 0.5 * (x3[0] + x3[1]) - d1 / (2 * curv)
    vertex = min(max(vertex, x3[0]), x3[2])
    fmin = y3[0] + d1 * (vertex - x3[0]) + curv * (vertex - x3[0]) * (vertex - x3[1])
    return float(vertex), float(fmin), evals


def _gap_function(report: CrossingReport, config: SweepConfig):
    i, j = report.pair

    def g(a):
        res = solve_point(a, config, classes=(report.cls,), k=max(j, config.k))[report.cls]
        if isinstance(res, Exception):
            raise LostBracket(f"solve failed at a={a}: {res}")
        lams = res[0]
        return lams[j - 1] - lams[i - 1]

    return g


def refine_crossing(report: CrossingReport, config: SweepConfig | None = None, gap_fn=None, width_tol: float = 1e-3):
    """Golden-section refinement of a detected crossing with fresh solves.

    ``gap_fn(a)`` overrides the solver-backed gap (used for synthetic checks).
    On a lost bracket the unrefined report comes back with ``lost_bracket`` set.
    """
    if gap_fn is None:
        if config is None:
            raise ValueError("refine_crossing needs a config or a gap function")
        gap_fn = _gap_function(report, config)
    lo, hi = report.bracket
    try:
        a_star, g_star, evals = golden_section_min(gap_fn, lo, hi, width_tol)
    except LostBracket as exc:
        log.warning("refinement of %s pair %s lost its bracket: %s", report.cls, report.pair, exc)
        return replace(report, lost_bracket=True)
    return replace(report, a_star=a_star, min_gap=g_star, refined=True, extra={**report.extra, "solves": len(evals)})


# -- fields near a crossing ---------------------------------------------------------


def crossing_fields(report: CrossingReport, config: SweepConfig, a: float):
    """Full-domain fields of the two curves of ``report`` at stadium ``a``."""
    i, j = report.pair
    res = solve_point(a, config, classes=(report.cls,), k=max(j, config.k))[report.cls]
    if isinstance(res, Exception):
        raise res
    lams, flds, _ = res
    return (lams[i - 1], lams[j - 1]), (unfold(flds[i - 1]), unfold(flds[j - 1]))


def analyze_crossing(report: CrossingReport, config: SweepConfig, delta: float = 0.02) -> dict:
    """Swap matrix and sum/difference fields on both sides of a crossing.

    Returns a dict with the updated report (``swap`` filled in), the fields
    ``before``/``after`` of the two curves and their sum/difference
    combinations at a_star - delta and a_star + delta.  ``affinity`` lists
    |overlap| of each combination with the eigenfunctions on the other side.
    """
    a_lo, a_hi = report.a_star - delta, report.a_star + delta
    if a_lo < 0:
        raise ValueError(f"a_star - delta = {a_lo} < 0")
    lam_lo, before = crossing_fields(report, config, a_lo)
    lam_hi, after = crossing_fields(report, config, a_hi)
    S = swap_diagnostic(before, after)
    combos = {}
    affinity = {}
    for side, (u, v), other in (("before", before, after), ("after", after, before)):
        for name, sign in (("plus", 1), ("minus", -1)):
            w = combine(u, v, sign)
            combos[(side, name)] = w
            affinity[f"{name}_{side}"] = [abs(overlap(w, o)) for o in other]
    rep = replace(
        report,
        swap=S.tolist(),
        extra={
            **report.extra,
            "delta": delta,
            "a_before": a_lo,
            "a_after": a_hi,
            "lambda_before": list(lam_lo),
            "lambda_after": list(lam_hi),
            "affinity": affinity,
        },
    )
    return {"report": rep, "before": before, "after": after, "combos": combos, "a": (a_lo, a_hi)}
