import math

import numpy as np
import pytest

from nonlocal_trace import GraphDomain, StripDomain, constant, field_from_expression, rounded_square_cover
from nonlocal_trace.geometry import (collar_points, collar_points_inverse, distortion_constants, psi_from_phi,
                                     sample_distortion, transform_G, transform_P, transform_S,
                                     transform_S_inverse)


def tilted(a=0.75, delta=1.0):
    # the profile must be nonnegative; a shift keeps the sample window above zero
    return GraphDomain(lambda xb: a * xb[:, 0] + 10.0, a, delta)


def test_flat_lower_profile():
    dom = GraphDomain.flat(1.0)
    assert np.all(dom.psi(np.array([[-3.0], [0.0], [7.5]])) == -1.0)


def test_tilted_lower_profile():
    dom = GraphDomain(lambda xb: 0.75 * xb[:, 0], 0.75, 1.0)
    assert psi_from_phi(dom, 2.0) == pytest.approx(0.25, abs=1e-9)


def test_wedge_vertex():
    dom = GraphDomain("abs(x)", 1.0, 1.0)
    assert psi_from_phi(dom, 0.0) == pytest.approx(-1.0, abs=1e-9)


def test_wedge_against_dense_graph_sampling():
    dom = GraphDomain("abs(x)", 1.0, 0.5)
    s = np.linspace(-4, 4, 400001)
    graph = np.column_stack([np.abs(s), s])
    for xb in (0.1, 0.4, 1.3):
        t = psi_from_phi(dom, xb)
        dist = np.min(np.hypot(graph[:, 0] - t, graph[:, 1] - xb))
        assert dist == pytest.approx(0.5, abs=1e-5)


@pytest.mark.parametrize("a", [0.0, 0.3, 1.0, 2.0])
def test_tilted_thickness_is_exact(a):
    dom = tilted(a, 0.25)
    xb = np.linspace(-3, 3, 50)[:, None]
    gap = dom.height(xb) - dom.psi_exact(xb)
    assert np.max(np.abs(gap - 0.25 * math.sqrt(1 + a * a))) < 1e-8


def test_cached_profile_matches_exact():
    dom = GraphDomain("abs(x) + 0.2*sin(3*x)", 1.6, 0.25)
    xb = np.linspace(-2, 2, 37)[:, None]
    assert np.max(np.abs(dom.psi(xb) - dom.psi_exact(xb))) < 1e-3 * dom.delta


@pytest.mark.parametrize("profile, lip", [("0*x", 0.0), ("0.5*x + 5", 0.5), ("abs(x)", 1.0)])
def test_validate_thickness_bounds(profile, lip):
    dom = GraphDomain(profile, lip, 0.2)
    report = dom.validate(np.random.default_rng(1).uniform(-2, 2, 200))
    assert report["thickness_ok"] and report["lipschitz_ok"]


def test_shear_examples():
    pts = np.array([[0.3, -1.2], [-0.5, 2.0]])
    u = field_from_expression("x", 2, math.inf)
    sheared = transform_P(GraphDomain("x + 5", 1.0, 1.0), u)
    assert np.allclose(sheared(pts), pts[:, 0] + pts[:, 1] + 5)
    flat = GraphDomain.flat(1.0)
    v = field_from_expression("x*y + cos(y)", 2, math.inf)
    assert np.allclose(transform_P(flat, v)(pts), v(pts))
    assert np.allclose(transform_P(GraphDomain("abs(x)", 1, 1), constant(2.5, 2))(pts), 2.5)


def test_collar_flattening_of_tilted_plane():
    a, delta = 0.75, 0.5
    dom = GraphDomain(lambda xb: a * xb[:, 0] + 3.0, a, delta)
    u = field_from_expression("x^2 + y", 2, math.inf)
    pts = np.column_stack([np.linspace(-delta, 0, 7), np.linspace(-1, 1, 7)])
    expected = u(np.column_stack([a * pts[:, 1] + 3.0 + pts[:, 0] * math.sqrt(1 + a * a), pts[:, 1]]))
    assert np.allclose(transform_G(dom, u)(pts), expected, atol=1e-9)


def test_flat_transforms_are_identity():
    dom = GraphDomain.flat(0.5)
    u = field_from_expression("sin(x) * y", 2, math.inf)
    pts = np.column_stack([np.linspace(-0.5, 2, 9), np.linspace(-3, 3, 9)])
    assert np.allclose(transform_S(dom, u)(pts), u(pts))


def test_collar_map_round_trip():
    dom = GraphDomain("abs(x)", 1.0, 0.3)
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(-0.3, 0, 200), rng.uniform(-2, 2, 200)])
    assert np.allclose(collar_points_inverse(dom, collar_points(dom, pts)), pts, atol=1e-12)
    u = field_from_expression("x + y^2", 2, math.inf)
    above = np.column_stack([rng.uniform(0, 2, 50), rng.uniform(-2, 2, 50)])
    assert np.allclose(transform_S_inverse(dom, transform_S(dom, u))(above), u(above), atol=1e-12)


def test_distortion_constants():
    flat = distortion_constants(0.0)
    assert flat.k_fwd == pytest.approx(4.0)
    one = distortion_constants(1.0)
    assert one.m_fwd == pytest.approx(max(2 + math.sqrt(2), one.k_fwd))
    assert one.k_bwd == pytest.approx(0.2)
    ratios = sample_distortion(GraphDomain.flat(0.5), 500, np.random.default_rng(0))
    assert np.allclose(ratios, 1.0)


def test_sampled_distortion_on_wedge():
    dom = GraphDomain("abs(x)", 1.0, 0.25)
    c = distortion_constants(1.0)
    ratios = sample_distortion(dom, 10_000, np.random.default_rng(3))
    assert c.k_bwd <= ratios.min() and ratios.max() <= c.k_fwd


def test_strip_domain_pieces():
    strip = StripDomain(-1.0, 2.0, 1)
    assert strip.axial_bounds() == (-1.0, 2.0)
    assert strip.bounded
    assert not StripDomain(-1.0, math.inf, 1).bounded
    assert np.array_equal(strip.contains(np.array([[-0.5], [2.5]])), [True, False])


def test_rounded_square_cover_validates():
    assert rounded_square_cover().validate(0.1)["ok"]


def test_rounded_square_collar_region_area():
    cover = rounded_square_cover()
    delta = 0.1
    region = cover.collar_region(delta)
    rng = np.random.default_rng(0)
    area = 0.0
    for piece_lo, piece_hi in region.boxes:
        lo, hi = np.asarray(piece_lo), np.asarray(piece_hi)
        pts = rng.uniform(lo, hi, size=(40_000, 2))
        assert np.all(region.contains(pts) == cover.in_collar(pts, delta))
        area += np.prod(hi - lo) * np.mean(cover.in_collar(pts, delta))
    # outer parallel band of a convex set: perimeter * delta + pi delta^2
    exact = (4.0 + math.pi * 0.5 * 2) * delta + math.pi * delta**2
    assert area == pytest.approx(exact, rel=1e-2)
