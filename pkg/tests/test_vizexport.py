import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stadium_spectra.fields import ScalarField, sample
from stadium_spectra.geometry import GridSpec, StadiumGeometry, build_grid
from stadium_spectra.spectra import CurveTable, SweepConfig, solve_point
from stadium_spectra.vizexport import (
    CHART_SIZE,
    MARGIN,
    EmptyTable,
    default_levels,
    marching_squares,
    marching_squares_grid,
    nice_ticks,
    render_correlation_svg,
    render_field_svg,
)

NS = {"s": "http://www.w3.org/2000/svg"}
LATTICE = np.linspace(-1, 1, 129)


def lattice(fn):
    X, Y = np.meshgrid(LATTICE, LATTICE)
    return fn(X, Y)


def test_line_field():
    cs = marching_squares_grid(lattice(lambda x, y: x), LATTICE, LATTICE, [0.0])
    (line,) = cs.polylines()
    pts, closed = line
    assert not closed
    assert np.max(np.abs(pts[:, 0])) <= 1e-12
    assert pts[:, 1].min() == -1 and pts[:, 1].max() == 1


def test_circle_field():
    h = LATTICE[1] - LATTICE[0]
    cs = marching_squares_grid(lattice(lambda x, y: x * x + y * y - 0.25), LATTICE, LATTICE, [0.0])
    (line,) = cs.polylines()
    pts, closed = line
    assert closed and len(pts) > 100
    assert np.max(np.abs(np.hypot(pts[:, 0], pts[:, 1]) - 0.5)) <= h


def test_constant_field_is_empty():
    cs = marching_squares_grid(lattice(lambda x, y: 0 * x + 3.0), LATTICE, LATTICE, [0.0, 1.0, 5.0])
    assert len(cs) == 0


def test_saddle_resolution():
    # centre average above the level joins the two high corners
    V = np.array([[1.0, -0.4], [-0.4, 1.0]])
    cs = marching_squares_grid(V, [0, 1], [0, 1], [0.0])
    ends = sorted(tuple(np.round(p, 6)) for pl, _ in cs.polylines() for p in pl[[0, -1]])
    # segments cut off the low corners (1, 0) and (0, 1)
    assert len(cs) == 2
    assert all(min(abs(x - 1) + abs(y), abs(x) + abs(y - 1)) < 1 for x, y in ends)
    cs_low = marching_squares_grid(-V, [0, 1], [0, 1], [0.0])
    ends = [tuple(p) for pl, _ in cs_low.polylines() for p in pl[[0, -1]]]
    assert all(min(abs(x) + abs(y), abs(x - 1) + abs(y - 1)) < 1 for x, y in ends)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8), st.floats(0.1, 0.6))
def test_vertices_lie_on_cell_edges(cx, cy, rad):
    xs = np.linspace(-1, 1, 33)
    X, Y = np.meshgrid(xs, xs)
    V = (X - cx) ** 2 + 0.5 * (Y - cy) ** 2 - rad**2
    for pts, closed in marching_squares_grid(V, xs, xs, [0.0]).polylines():
        assert len(pts) >= 2
        on_x = np.min(np.abs(pts[:, 0, None] - xs[None, :]), axis=1) <= 1e-12
        on_y = np.min(np.abs(pts[:, 1, None] - xs[None, :]), axis=1) <= 1e-12
        assert np.all(on_x | on_y)
        assert np.all((pts >= -1) & (pts <= 1))
        if not closed:
            # open lines only end next to the lattice border
            for p in pts[[0, -1]]:
                assert np.max(np.abs(p)) >= 1 - (xs[1] - xs[0]) - 1e-12


@pytest.fixture(scope="module")
def ground_state():
    cfg = SweepConfig(a_values=(1.0,), h=1 / 32, k=1)
    return solve_point(1.0, cfg)["EE"][1][0]


def test_ground_state_has_one_sign_and_no_nodal_line(ground_state):
    assert np.all(ground_state.values > 0)
    svg = render_field_svg(ground_state)
    assert 'class="contour zero"' not in svg
    assert svg.count('class="outline"') == 1


def test_field_svg_structure_and_determinism(ground_state):
    svg = render_field_svg(ground_state, title="EE 1", note="demo")
    assert svg == render_field_svg(ground_state, title="EE 1", note="demo")
    root = ET.fromstring(svg.encode())
    assert root.get("width") == "900" and root.get("height") == "450"
    d = root.find("s:path[@class='outline']", NS).get("d")
    assert d.count(" A ") == 2 and d.count(" L ") == 2


def test_empty_contour_set_leaves_outline_only():
    g = build_grid(StadiumGeometry(1.0), GridSpec(1 / 16))
    svg = render_field_svg(ScalarField(g, np.ones(g.n)), levels=[5.0])
    assert len(ET.fromstring(svg.encode()).findall("s:path", NS)) == 1


def test_linear_field_single_path():
    g = build_grid(StadiumGeometry(1.0), GridSpec(1 / 16))
    svg = render_field_svg(sample(g, lambda x, y: x), levels=[0.0])
    paths = ET.fromstring(svg.encode()).findall("s:path", NS)
    assert len(paths) == 2
    assert paths[1].get("class") == "contour zero"


def test_default_levels():
    g = build_grid(StadiumGeometry(0.0), GridSpec(1 / 8))
    lv = default_levels(sample(g, lambda x, y: x))
    assert len(lv) == 9 and 0.0 in lv and lv == sorted(lv)


def test_quadrant_field_is_unfolded(ground_state):
    # unfolding renormalises over four quadrants, which halves the peak
    cs = marching_squares(ground_state, [0.25 * ground_state.values.max()])
    (pts, closed), = cs.polylines()
    assert closed
    assert pts[:, 0].min() < 0 < pts[:, 0].max()


def test_nice_ticks():
    assert nice_ticks(0, 2) == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert nice_ticks(3.2, 3.2) == [3.2]


def _coords(d):
    return np.array([float(v) for v in re.findall(r"-?\d+\.?\d*(?:e-?\d+)?", d)]).reshape(-1, 2)


def test_correlation_corner_mapping():
    a = np.array([0.0, 1.0, 2.0])
    t = CurveTable(a, ("EE",), {"EE": np.array([[1.0, 2.0, 3.0], [3.0, 4.0, 5.0]])})
    svg = render_correlation_svg(t, "EE")
    root = ET.fromstring(svg.encode())
    lines = root.findall(".//s:path[@class='curve-line']", NS)
    assert len(lines) == 2
    w, h = CHART_SIZE
    lower = _coords(lines[0].get("d"))
    upper = _coords(lines[1].get("d"))
    assert lower[0].tolist() == [MARGIN, h - MARGIN]
    assert upper[-1].tolist() == [w - MARGIN, MARGIN]
    assert lower[1].tolist() == [w / 2, h - MARGIN - (h - 2 * MARGIN) / 4]
    assert svg == render_correlation_svg(t, "EE")


def test_correlation_single_point_and_holes():
    t = CurveTable(np.array([0.5]), ("EE",), {"EE": np.array([[1.0], [2.0]])})
    root = ET.fromstring(render_correlation_svg(t, "EE").encode())
    assert len(root.findall(".//s:circle[@class='curve-point']", NS)) == 2
    assert root.findall(".//s:path[@class='curve-line']", NS) == []

    a = np.linspace(0, 1, 5)
    t = CurveTable(a, ("EE",), {"EE": np.array([[1.0, 2.0, np.nan, 4.0, 5.0]])})
    (line,) = ET.fromstring(render_correlation_svg(t, "EE").encode()).findall(".//s:path[@class='curve-line']", NS)
    assert line.get("d").count("M ") == 2


def test_correlation_empty():
    t = CurveTable(np.array([0.0, 1.0]), ("EE",), {"EE": np.full((2, 2), np.nan)})
    with pytest.raises(EmptyTable):
        render_correlation_svg(t, "EE")
    with pytest.raises(EmptyTable):
        render_correlation_svg(t, "OO")
