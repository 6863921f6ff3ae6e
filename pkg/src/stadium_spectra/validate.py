"""Built-in oracle suite: analytic and brute-force checks of the whole solve path."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .discretize import assemble_laplacian
from .eigensolve import make_preconditioner, smallest_k
from .geometry import SYMMETRY_CLASSES, GridSpec, RectangleGeometry, StadiumGeometry, area, build_grid, perimeter
from .oracles import disk_dirichlet_eigenvalue, jacobi_eigenvalues, masked_rectangle_eigenvalues, weyl_count
from .spectra import SweepConfig, solve_point

__all__ = ["CheckResult", "run_checks", "format_table"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _timed(fn):
    def run(*args, **kw):
        t0 = time.perf_counter()
        res = fn(*args, **kw)
        res.seconds = time.perf_counter() - t0
        return res

    return run


@_timed
def check_rectangle(h=1 / 8, k=8) -> CheckResult:
    grid = build_grid(RectangleGeometry(1.0, 1.0), GridSpec(h))
    m = assemble_laplacian(grid)
    pairs, rep = smallest_k(m, k, tol=1e-9, seed=0)
    got = np.array([p.lam for p in pairs])
    dense = jacobi_eigenvalues(m.toarray())[:k]
    side = int(round(np.sqrt(grid.n)))
    closed = masked_rectangle_eigenvalues(side, side, h)[:k]
    e_dense = float(np.max(np.abs(got - dense) / dense))
    e_closed = float(np.max(np.abs(dense - closed) / closed))
    ok = rep.converged and e_dense <= 1e-8 and e_closed <= 1e-10
    return CheckResult(
        "rectangle dense oracle",
        ok,
        f"n={grid.n} rel err vs Jacobi {e_dense:.2e} (<=1e-8), Jacobi vs closed form {e_closed:.2e}",
    )


def _disk_lambda1(h, preconditioner="amg"):
    grid = build_grid(StadiumGeometry(0.0, 1.0), GridSpec(h))
    m = assemble_laplacian(grid)
    pairs, rep = smallest_k(m, 1, 1e-7, 0, preconditioner=make_preconditioner(m, preconditioner))
    return pairs[0].lam, rep.converged


@_timed
def check_disk(hs=(1 / 32, 1 / 64, 1 / 128), limits=(0.05, 0.02, None)) -> CheckResult:
    exact = disk_dirichlet_eigenvalue(0, 1)
    errs = []
    ok = True
    for h, lim in zip(hs, limits):
        lam, conv = _disk_lambda1(h)
        err = abs(lam - exact) / exact
        errs.append(err)
        ok &= conv and (lim is None or err <= lim)
    ok &= all(b < a for a, b in zip(errs, errs[1:]))
    detail = ", ".join(f"h=1/{round(1 / h)}: {e:.3%}" for h, e in zip(hs, errs))
    return CheckResult("disk Bessel convergence", ok, f"lambda1 rel err {detail} (vs j01^2={exact:.6f})")


@_timed
def check_disk_ee(h=1 / 64, tol_rel=0.02) -> CheckResult:
    exact = [disk_dirichlet_eigenvalue(0, 1), disk_dirichlet_eigenvalue(2, 1), disk_dirichlet_eigenvalue(0, 2)]
    res = solve_point(0.0, SweepConfig(a_values=(0.0,), h=h, k=3))["EE"]
    lams = res[0]
    errs = [abs(a - b) / b for a, b in zip(lams, exact)]
    return CheckResult(
        "disk EE sequence",
        max(errs) <= tol_rel,
        "got " + ", ".join(f"{x:.4f}" for x in lams) + f"; max rel err {max(errs):.3%} (<= {tol_rel:.0%})",
    )


@_timed
def check_quadrant_full(a_values=(0.0, 0.5, 1.0), h=1 / 64, count=5, tol_rel=0.005) -> CheckResult:
    worst = 0.0
    for a in a_values:
        q = solve_point(a, SweepConfig(a_values=(a,), h=h, k=count))["EE"][0]
        f = solve_point(a, SweepConfig(a_values=(a,), h=h, k=count, mode="full"))["EE"][0]
        if len(f) < count:
            return CheckResult("quadrant/full consistency", False, f"only {len(f)} EE values at a={a}")
        worst = max(worst, float(np.max(np.abs(np.array(q) - np.array(f)) / np.array(f))))
    return CheckResult("quadrant/full consistency", worst <= tol_rel, f"max rel diff {worst:.2e} (<= {tol_rel})")


def eigenvalue_count(a: float, h: float, lam_max: float) -> int:
    """Number of full-domain eigenvalues <= lam_max, summed over the four classes."""
    total = 0
    for cls in SYMMETRY_CLASSES:
        grid = build_grid(StadiumGeometry(a, 1.0), GridSpec(h, cls))
        m = assemble_laplacian(grid)
        pre = make_preconditioner(m, "amg")
        k = 12
        while True:
            k = min(k, grid.n)
            pairs, _ = smallest_k(m, k, 1e-7, 0, preconditioner=pre)
            lams = np.array([p.lam for p in pairs])
            if lams[-1] > lam_max or k == grid.n:
                break
            k *= 2
        total += int(np.sum(lams <= lam_max))
    return total


@_timed
def check_weyl(a=1.0, h=1 / 64, lam=100.0, tol_rel=0.10) -> CheckResult:
    g = StadiumGeometry(a, 1.0)
    n = eigenvalue_count(a, h, lam)
    w = weyl_count(area(g), perimeter(g), lam)
    err = abs(n - w) / w
    return CheckResult("Weyl count", err <= tol_rel, f"N({lam:g})={n}, Weyl {w:.2f}, rel diff {err:.2%} (<= {tol_rel:.0%})")


def run_checks(quick: bool = False) -> list[CheckResult]:
    if quick:
        return [
            check_rectangle(),
            check_disk(hs=(1 / 16, 1 / 32), limits=(None, 0.05)),
            check_quadrant_full(a_values=(0.5,), h=1 / 16),
            check_weyl(h=1 / 32),
        ]
    return [check_rectangle(), check_disk(), check_disk_ee(), check_quadrant_full(), check_weyl()]


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check'.ljust(width)}  result  time    detail"]
    for r in results:
        lines.append(f"{r.name.ljust(width)}  {'PASS' if r.passed else 'FAIL'}    {r.seconds:6.1f}s {r.detail}")
    return "\n".join(lines)
