import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.special import jv

from stadium_spectra.discretize import assemble_laplacian
from stadium_spectra.eigensolve import smallest_k
from stadium_spectra.fields import (
    AMBIGUOUS,
    GridMismatch,
    ScalarField,
    SymmetryScore,
    ZeroField,
    class_projector,
    classify,
    classify_pairs,
    combine,
    fix_sign,
    inner,
    normalize,
    overlap,
    read_field_binary,
    reflect,
    sample,
    swap_diagnostic,
    symmetry_scores,
    unfold,
    write_field_binary,
    write_field_csv,
)
from stadium_spectra.geometry import GridSpec, NotReflectionClosed, RectangleGeometry, StadiumGeometry, build_grid
from stadium_spectra.oracles import bessel_zero


def norm(f):
    return f.h * np.linalg.norm(f.values)


def test_normalize_examples():
    g = build_grid(RectangleGeometry(1, 1), GridSpec(0.5))
    f = normalize(ScalarField(g, np.ones(4)))
    assert np.array_equal(f.values, np.ones(4))
    h = normalize(ScalarField(g, [1.0, 2.0, 3.0, 4.0]))
    assert np.allclose(normalize(h).values, h.values, atol=1e-12)
    assert np.allclose(normalize(h.with_values(7 * h.values)).values, h.values, atol=1e-12)
    with pytest.raises(ZeroField):
        normalize(ScalarField(g, np.zeros(4)))


def test_grid_mismatch(disk_grid_coarse, stadium_grid_coarse):
    with pytest.raises(GridMismatch):
        ScalarField(disk_grid_coarse, np.ones(3))
    u = sample(disk_grid_coarse, lambda x, y: 1 + 0 * x)
    v = sample(stadium_grid_coarse, lambda x, y: 1 + 0 * x)
    with pytest.raises(GridMismatch):
        combine(u, v, +1)
    with pytest.raises(GridMismatch):
        inner(u, v)


def test_reflect_examples(stadium_grid_coarse):
    g = stadium_grid_coarse
    c = sample(g, lambda x, y: np.cos(x))
    assert np.array_equal(reflect(c, "x").values, c.values)
    u = sample(g, lambda x, y: y)
    assert np.array_equal(reflect(u, "y").values, -u.values)
    w = sample(g, lambda x, y: np.exp(x) + y**3)
    for axis in ("x", "y"):
        assert np.array_equal(reflect(reflect(w, axis), axis).values, w.values)


def test_reflect_rejects_quadrant():
    g = build_grid(StadiumGeometry(1.0), GridSpec(0.25, "EE"))
    with pytest.raises(NotReflectionClosed):
        reflect(ScalarField(g, np.ones(g.n)), "x")


def test_xy_is_odd_odd(disk_grid_coarse):
    s = symmetry_scores(sample(disk_grid_coarse, lambda x, y: x * y))
    assert (s.s_x, s.s_y) == (-1.0, -1.0)
    assert classify(s) == "OO"


def test_bessel_mode_is_even_even():
    g = build_grid(StadiumGeometry(0.0), GridSpec(1 / 32))
    j21 = bessel_zero(2, 1)

    def mode(x, y):
        rho = np.hypot(x, y)
        return jv(2, j21 * rho) * (x * x - y * y) / (rho * rho)

    s = symmetry_scores(sample(g, mode))
    assert s.s_x >= 0.999 and s.s_y >= 0.999


def test_shifted_linear_field(stadium_grid_coarse):
    g = stadium_grid_coarse
    s = symmetry_scores(sample(g, lambda x, y: x + 1))
    # with Σx = 0 on a symmetric grid the ratio reduces to Σ(1 - x²) / Σ(1 + x²)
    x = g.x
    expected = np.sum(1 - x * x) / np.sum(1 + x * x)
    assert s.s_y == pytest.approx(1.0, abs=1e-15)
    assert s.s_x == pytest.approx(expected, rel=1e-12)
    assert -1 < s.s_x < 1


@pytest.mark.parametrize(
    "s, expected",
    [((1.0, 1.0), "EE"), ((-1.0, 0.95), "OE"), ((0.2, 1.0), AMBIGUOUS), ((0.95, -0.95), "EO"), ((0.9, 0.9), "EE")],
)
def test_classify(s, expected):
    assert classify(SymmetryScore(*s)) == expected


def test_classify_threshold_range():
    with pytest.raises(ValueError):
        classify(SymmetryScore(1, 1), threshold=0.4)


def test_fix_sign():
    g = build_grid(RectangleGeometry(1, 1), GridSpec(0.5))
    f = ScalarField(g, [0.1, -0.8, 0.3, 0.2])
    assert np.array_equal(fix_sign(f).values, [-0.1, 0.8, -0.3, -0.2])
    p = ScalarField(g, [0.1, 0.8, 0.3, 0.2])
    assert fix_sign(p) is p
    # tie between entries 0 and 2: the lower index decides
    t = ScalarField(g, [-0.5, 0.1, 0.5, 0.0])
    assert fix_sign(t).values[0] == 0.5
    with pytest.raises(ZeroField):
        fix_sign(ScalarField(g, np.zeros(4)))


def test_combine(stadium_grid_coarse):
    g = stadium_grid_coarse
    u = fix_sign(normalize(sample(g, lambda x, y: np.cos(np.pi * y / 2) * (4 - x * x))))
    v = fix_sign(normalize(sample(g, lambda x, y: x * np.cos(np.pi * y / 2))))
    assert abs(inner(u, v)) < 1e-14
    raw = (u.values + v.values) / np.sqrt(2)
    assert g.h * np.linalg.norm(raw) == pytest.approx(1, abs=1e-9)
    assert np.allclose(combine(u, u, "+").values, u.values, atol=1e-14)
    assert np.allclose(combine(u, v, "plus").values, combine(v, u, 1).values)
    with pytest.raises(ZeroField):
        combine(u, u, -1)
    with pytest.raises(ValueError):
        combine(u, v, 2)


def test_overlap_same_and_orthogonal_classes(stadium_grid_coarse):
    g = stadium_grid_coarse
    ee = normalize(sample(g, lambda x, y: np.cos(x) * np.cos(y)))
    oo = normalize(sample(g, lambda x, y: x * y))
    assert overlap(ee, ee) == pytest.approx(1, abs=1e-9)
    assert abs(overlap(ee, oo)) <= 1e-9


def test_overlap_across_nearby_geometries():
    fn = lambda x, y: np.cos(np.pi * y / 2) * np.exp(-x * x)
    u = normalize(sample(build_grid(StadiumGeometry(0.50), GridSpec(1 / 32)), fn))
    v = normalize(sample(build_grid(StadiumGeometry(0.52), GridSpec(1 / 32)), fn))
    assert 0.99 < overlap(u, v) <= 1 + 1e-9


def test_swap_of_rotated_pair():
    g = build_grid(StadiumGeometry(0.0), GridSpec(1 / 16))
    gauss = lambda x, y: np.exp(-2 * (x * x + y * y))
    px = normalize(sample(g, lambda x, y: x * gauss(x, y)))
    py = normalize(sample(g, lambda x, y: y * gauss(x, y)))
    S = swap_diagnostic((px, py), (py, px))
    assert np.allclose(S, [[0, 1], [1, 0]], atol=1e-9)


def test_quadrant_unfold_matches_full_solve():
    geo = StadiumGeometry(0.5)
    quad = build_grid(geo, GridSpec(1 / 8, "EO"))
    full = build_grid(geo, GridSpec(1 / 8))
    (pq,), _ = smallest_k(assemble_laplacian(quad), 1, tol=1e-10)
    pf, _ = smallest_k(assemble_laplacian(full), 6, tol=1e-10)
    u = unfold(ScalarField(quad, pq.vector))
    assert u.grid.n == full.n
    assert classify(symmetry_scores(u)) == "EO"
    match = [p for p in pf if abs(p.lam - pq.lam) < 1e-8 * p.lam]
    assert len(match) == 1
    assert abs(overlap(u, normalize(ScalarField(full, match[0].vector)))) == pytest.approx(1, abs=1e-8)


def test_class_projectors_partition_identity(stadium_grid_coarse, rng):
    g = stadium_grid_coarse
    v = rng.standard_normal(g.n)
    parts = [class_projector(g, c)(v) for c in ("EE", "EO", "OE", "OO")]
    assert np.allclose(sum(parts), v)
    for i in range(4):
        assert np.allclose(class_projector(g, ("EE", "EO", "OE", "OO")[i])(parts[i]), parts[i])


def test_classify_pairs_splits_degenerate_mixture():
    g = build_grid(StadiumGeometry(0.0), GridSpec(1 / 8))
    m = assemble_laplacian(g)
    pairs, _ = smallest_k(m, 3, tol=1e-10)
    # the disk's second level is a degenerate EO/OE doublet; rotate it by 30°
    from stadium_spectra.eigensolve import EigenPair

    c, s = np.cos(np.pi / 6), np.sin(np.pi / 6)
    v1, v2 = pairs[1].vector, pairs[2].vector
    mixed = [pairs[0], EigenPair(pairs[1].lam, c * v1 + s * v2), EigenPair(pairs[2].lam, -s * v1 + c * v2)]
    out = classify_pairs(g, mixed, matrix=m, tol=1e-10)
    assert [cls for _, _, cls in out] == ["EE"] + sorted(cls for _, _, cls in out[1:])
    assert sorted(cls for _, _, cls in out[1:]) == ["EO", "OE"]


def test_csv_and_binary_round_trip(stadium_grid_coarse):
    g = stadium_grid_coarse
    f = normalize(sample(g, lambda x, y: np.sin(x + 2 * y)))
    buf = io.StringIO()
    write_field_csv(f, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "x,y,value" and len(lines) == g.n + 1
    assert [float(t) for t in lines[1].split(",")] == [g.x[0], g.y[0], f.values[0]]
    bbuf = io.BytesIO()
    write_field_binary(f, bbuf)
    assert len(bbuf.getvalue()) == 48 + 24 * g.n
    bbuf.seek(0)
    back = read_field_binary(bbuf, g.geometry)
    assert np.array_equal(back.values, f.values)


finite = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 52, elements=finite))
def test_properties(vals):
    g = build_grid(StadiumGeometry(0.0), GridSpec(0.25))
    assert g.n == 52
    if not np.any(np.abs(vals) > 1e-6):
        return
    f = ScalarField(g, vals)
    n = normalize(f)
    assert norm(n) == pytest.approx(1, abs=1e-9)
    assert np.allclose(normalize(n).values, n.values, atol=1e-12)
    s = symmetry_scores(f)
    assert abs(s.s_x) <= 1 + 1e-9 and abs(s.s_y) <= 1 + 1e-9
    fs = fix_sign(n)
    assert np.array_equal(fix_sign(fs).values, fs.values)
    assert fs.values[np.argmax(np.abs(fs.values))] > 0
    c = classify(s)
    if c != AMBIGUOUS:
        assert (c[0] == "E") == (s.s_x >= 0.9) and (c[1] == "E") == (s.s_y >= 0.9)
    assert overlap(n, n) == pytest.approx(1, abs=1e-9)
