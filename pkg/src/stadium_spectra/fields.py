"""Discrete eigenfunctions: normalisation, reflection symmetry, combinations, overlaps.

All inner products use the h²-weighted lattice sum, so a normalised field
satisfies ``h² Σ u² = 1``.  Reflection names follow the coordinate that is
negated: ``reflect(f, "x")`` maps (x, y) -> (-x, y).  A symmetry class such
as ``"OE"`` lists the parity under x -> -x first and under y -> -y second.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .geometry import Grid, GridSpec, build_grid, _contains_xy

__all__ = [
    "ScalarField",
    "SymmetryScore",
    "ZeroField",
    "GridMismatch",
    "AMBIGUOUS",
    "inner",
    "normalize",
    "reflect",
    "symmetry_scores",
    "classify",
    "fix_sign",
    "combine",
    "overlap",
    "swap_diagnostic",
    "unfold",
    "class_projector",
    "classify_pairs",
    "sample",
    "write_field_csv",
    "write_field_binary",
    "read_field_binary",
]

AMBIGUOUS = "Ambiguous"


class ZeroField(ValueError):
    pass


class GridMismatch(ValueError):
    pass


@dataclass(eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise GridMismatch(f"{self.values.shape[0]} values for {self.grid.n} nodes")

    @property
    def h(self) -> float:
        return self.grid.h

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)


@dataclass(frozen=True)
class SymmetryScore:
    s_x: float
    s_y: float


def sample(grid: Grid, fn) -> ScalarField:
    """Evaluate ``fn(x, y)`` (vectorised) at the grid nodes."""
    return ScalarField(grid, fn(grid.x, grid.y))


def inner(u: ScalarField, v: ScalarField) -> float:
    if u.grid is not v.grid and (u.grid.n != v.grid.n or not _same_nodes(u.grid, v.grid)):
        raise GridMismatch("fields live on different grids")
    return float(u.h * u.h * np.dot(u.values, v.values))


def _same_nodes(g1: Grid, g2: Grid) -> bool:
    return g1.h == g2.h and np.array_equal(g1.i, g2.i) and np.array_equal(g1.j, g2.j)


def normalize(f: ScalarField) -> ScalarField:
    nrm = f.h * np.linalg.norm(f.values)
    if nrm == 0.0 or not np.isfinite(nrm):
        raise ZeroField("cannot normalise a zero field")
    return f.with_values(f.values / nrm)


def reflect(f: ScalarField, axis: str) -> ScalarField:
    perm = f.grid.reflection_index(axis)
    return f.with_values(f.values[perm])


def symmetry_scores(f: ScalarField) -> SymmetryScore:
    ff = inner(f, f)
    if ff == 0.0:
        raise ZeroField("symmetry of a zero field is undefined")
    return SymmetryScore(inner(f, reflect(f, "x")) / ff, inner(f, reflect(f, "y")) / ff)


def classify(s: SymmetryScore, threshold: float = 0.9) -> str:
    if not 0.5 < threshold < 1:
        raise ValueError(f"threshold must lie in (0.5, 1), got {threshold}")
    letters = []
    for score in (s.s_x, s.s_y):
        if score >= threshold:
            letters.append("E")
        elif score <= -threshold:
            letters.append("O")
        else:
            return AMBIGUOUS
    return "".join(letters)


def fix_sign(f: ScalarField) -> ScalarField:
    """Flip the sign so the entry of largest magnitude is positive."""
    if not np.any(f.values):
        raise ZeroField("cannot fix the sign of a zero field")
    # argmax returns the first (lowest-index) maximiser
    k = int(np.argmax(np.abs(f.values)))
    return f.with_values(-f.values) if f.values[k] < 0 else f


def combine(u: ScalarField, v: ScalarField, sign: int | str = +1) -> ScalarField:
    """(u ± v)/√2, renormalised and sign-fixed."""
    if not _same_nodes(u.grid, v.grid):
        raise GridMismatch("combine needs fields on the same grid")
    s = {"+": 1, "-": -1, "plus": 1, "minus": -1}.get(sign, sign)
    if s not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    w = (u.values + s * v.values) / np.sqrt(2.0)
    return fix_sign(normalize(u.with_values(w)))


def resample(v: ScalarField, x, y) -> np.ndarray:
    """Bilinear interpolation of ``v`` at points (x, y) on its staggered lattice.

    Lattice points that are not nodes of ``v``'s grid count as zero, and so
    does every query point outside ``v``'s domain.
    """
    h = v.h
    s = np.asarray(x) / h - 0.5
    t = np.asarray(y) / h - 0.5
    i0 = np.floor(s).astype(np.int64)
    j0 = np.floor(t).astype(np.int64)
    fs = s - i0
    ft = t - j0
    out = np.zeros(np.shape(s))
    for di, wi in ((0, 1 - fs), (1, fs)):
        for dj, wj in ((0, 1 - ft), (1, ft)):
            w = wi * wj
            idx = v.grid.index_of(i0 + di, j0 + dj)
            hit = (idx >= 0) & (w != 0)
            out[hit] += w[hit] * v.values[idx[hit]]
    out[~_contains_xy(v.grid.geometry, x, y)] = 0.0
    return out


def overlap(u: ScalarField, v: ScalarField) -> float:
    """h²-weighted inner product of u with v resampled onto u's grid."""
    if u.grid.spec.quadrant:
        u = unfold(u)
    if v.grid.spec.quadrant:
        v = unfold(v)
    vv = resample(v, u.grid.x, u.grid.y)
    return float(u.h * u.h * np.dot(u.values, vv))


def swap_diagnostic(pairs_before, pairs_after) -> np.ndarray:
    """S[p, q] = |overlap(before[p], after[q])| for a pair of adjacent curves."""
    S = np.empty((2, 2))
    for p in range(2):
        for q in range(2):
            S[p, q] = abs(overlap(pairs_before[p], pairs_after[q]))
    return S


def unfold(f: ScalarField) -> ScalarField:
    """Extend a quadrant field to the whole domain using its forced parities."""
    g = f.grid
    if not g.spec.quadrant:
        return f
    cls = g.spec.symmetry_class
    full = build_grid(g.geometry, GridSpec(g.h))
    fi = np.where(full.i >= 0, full.i, -full.i - 1)
    fj = np.where(full.j >= 0, full.j, -full.j - 1)
    sign = np.ones(full.n)
    if cls[0] == "O":
        sign[full.i < 0] *= -1
    if cls[1] == "O":
        sign[full.j < 0] *= -1
    vals = sign * f.values[g.index_of(fi, fj)]
    return normalize(ScalarField(full, vals))


def class_projector(grid: Grid, cls: str):
    """Return P(V) = (I ± R_x)(I ± R_y)/4 acting on (n,) or (n, c) arrays."""
    rx = grid.reflection_index("x")
    ry = grid.reflection_index("y")
    sx = 1.0 if cls[0] == "E" else -1.0
    sy = 1.0 if cls[1] == "E" else -1.0

    def apply(V):
        V = np.asarray(V, dtype=float)
        W = 0.5 * (V + sx * V[rx])
        return 0.5 * (W + sy * W[ry])

    return apply


def classify_pairs(grid: Grid, pairs, matrix=None, tol: float = 1e-7, threshold: float = 0.9):
    """Classify full-domain eigenpairs, splitting degenerate mixtures.

    Returns a list of ``(lam, field, class)`` sorted by eigenvalue.  Pairs
    whose eigenvalues agree to within 10·tol·λ form a cluster; if any member
    of a cluster is ambiguous, the cluster's span is re-diagonalised against
    the four reflection projectors and each resulting vector gets the
    Rayleigh quotient of ``matrix`` (or the cluster mean without one).
    """
    from .geometry import SYMMETRY_CLASSES

    clusters = []
    for p in sorted(pairs, key=lambda p: p.lam):
        if clusters and abs(p.lam - clusters[-1][-1].lam) < 10 * tol * abs(p.lam):
            clusters[-1].append(p)
        else:
            clusters.append([p])

    out = []
    for cl in clusters:
        labelled = []
        for p in cl:
            f = fix_sign(normalize(ScalarField(grid, p.vector)))
            labelled.append((p.lam, f, classify(symmetry_scores(f), threshold)))
        if len(cl) == 1 or all(c != AMBIGUOUS for _, _, c in labelled):
            out.extend(labelled)
            continue
        V = np.column_stack([p.vector for p in cl])
        V = V / np.linalg.norm(V, axis=0)
        for cls in SYMMETRY_CLASSES:
            PV = class_projector(grid, cls)(V)
            U, sv, _ = np.linalg.svd(PV, full_matrices=False)
            for c in np.flatnonzero(sv > np.sqrt(0.5)):
                vec = U[:, c]
                if matrix is not None:
                    lam = float(vec @ (matrix.csr @ vec))
                else:
                    lam = float(np.mean([p.lam for p in cl]))
                f = fix_sign(normalize(ScalarField(grid, vec)))
                out.append((lam, f, classify(symmetry_scores(f), threshold)))
    out.sort(key=lambda t: t[0])
    return out


# -- serialisation -----------------------------------------------------------

_HEADER = struct.Struct("<5dQ")


def write_field_csv(f: ScalarField, fh) -> None:
    fh.write("x,y,value\n")
    for x, y, v in zip(f.grid.x.tolist(), f.grid.y.tolist(), f.values.tolist()):
        fh.write(f"{x!r},{y!r},{v!r}\n")


def write_field_binary(f: ScalarField, fh) -> None:
    """h, bounding box (xmin, xmax, ymin, ymax), node count, then (x, y, value) rows."""
    x, y = f.grid.x, f.grid.y
    fh.write(_HEADER.pack(f.h, x.min(), x.max(), y.min(), y.max(), f.grid.n))
    fh.write(np.column_stack([x, y, f.values]).astype("<f8").tobytes())


def read_field_binary(fh, geometry) -> ScalarField:
    """Inverse of :func:`write_field_binary`; the grid is rebuilt on ``geometry``."""
    h, *_bbox, n = _HEADER.unpack(fh.read(_HEADER.size))
    rows = np.frombuffer(fh.read(24 * n), dtype="<f8").reshape(n, 3)
    i = np.rint(rows[:, 0] / h - 0.5).astype(np.int64)
    j = np.rint(rows[:, 1] / h - 0.5).astype(np.int64)
    quadrant = bool(i.min() >= 0 and j.min() >= 0)
    grid = build_grid(geometry, GridSpec(h))
    idx = grid.index_of(i, j)
    if quadrant or np.any(idx < 0) or grid.n != n:
        raise GridMismatch("binary field does not match a full grid on this geometry")
    vals = np.zeros(grid.n)
    vals[idx] = rows[:, 2]
    return ScalarField(grid, vals)
