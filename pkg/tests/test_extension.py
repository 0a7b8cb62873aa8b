import math

import numpy as np
import pytest

from nonlocal_trace import (ExtensionConfig, GraphDomain, KernelSpec, constant, cube_average, extend_E, extend_EL,
                            extend_general, extend_lipschitz, field_from_expression, rounded_square_cover)
from nonlocal_trace.extension import branch_for, lambda_tilde

RNG = np.random.default_rng(11)


def low(d=1, L=1.0):
    return ExtensionConfig("low", L)


def test_branch_selection():
    assert branch_for(0.5, 1) == "low"
    assert branch_for(1.5, 1) == "high"
    with pytest.raises(ValueError):
        branch_for(2.0, 2)


def test_config_rounds_strip_length_and_checks_branch():
    assert ExtensionConfig("low", 3.0).strip_len == 4.0
    with pytest.raises(ValueError):
        ExtensionConfig("low").check(KernelSpec(1, 2, 1.5, 0.5))


@pytest.mark.parametrize("expr, d, box, expected", [
    ("2.5", 2, ((-1, 0), (0, 1)), 2.5),
    ("y", 2, ((-1, 0), (0, 1)), 0.5),
    ("x^2", 1, ((-1,), (-0.5,)), 7 / 12),
])
def test_cube_average(expr, d, box, expected):
    u = field_from_expression(expr, d, math.inf)
    assert cube_average(u, box) == pytest.approx(expected, abs=1e-12)


def test_cube_average_rejects_boxes_outside_the_collar():
    with pytest.raises(ValueError):
        cube_average(constant(1.0, 1), ((-2,), (0,)))


@pytest.mark.parametrize("branch", ["low", "high"])
@pytest.mark.parametrize("d", [1, 2])
def test_constants_are_preserved(branch, d):
    ext = extend_EL(constant(1.7, d), ExtensionConfig(branch, 4.0))
    pts = np.column_stack([RNG.uniform(1e-6, 4, 300)] + [RNG.uniform(-5, 5, 300) for _ in range(d - 1)])
    assert np.max(np.abs(ext(pts) - 1.7)) < 1e-12


@pytest.mark.parametrize("branch", ["low", "high"])
def test_restriction_identity(branch):
    u = field_from_expression("(1 + x) * cos(2*y) * bump(r, 3)", 2, 3.0)
    ext = extend_EL(u, ExtensionConfig(branch, 2.0))
    pts = np.column_stack([RNG.uniform(-1, 0, 500), RNG.uniform(-3, 3, 500)])
    assert np.array_equal(ext(pts), u(pts))


def test_cross_linear_field_at_a_point():
    u = field_from_expression("y", 2, math.inf)
    ext = extend_EL(u, low(2, 1.0))
    # the averages over the unit cells are 0.5, -0.5, 1.5, ...; the cell (0, 1] carries all the weight here
    assert ext(np.array([[0.5, 0.5]]))[0] == pytest.approx(0.5, abs=1e-6)


def test_linearity():
    u = field_from_expression("cos(x) * bump(r, 2)", 1, 2.0)
    v = field_from_expression("x^2", 1, math.inf)
    cfg = ExtensionConfig("high", 2.0)
    pts = np.linspace(0.01, 2.2, 40)[:, None]
    lhs = extend_EL(u + v * 2.0, cfg)(pts)
    rhs = extend_EL(u, cfg)(pts) + 2.0 * extend_EL(v, cfg)(pts)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_extension_vanishes_beyond_cutoff():
    ext = extend_EL(constant(1.0, 1), ExtensionConfig("low", 4.0))
    assert np.all(ext(np.array([[4.5], [6.0]])) == 0.0)
    assert ext(np.array([[4.0]]))[0] == pytest.approx(1.0)


def test_horizon_scaled_strip_length():
    spec = KernelSpec(1, 2, 0.5, 0.25)
    ext = extend_E(constant(3.0, 1), spec, ExtensionConfig.for_kernel(spec, cap=1.0))
    assert ext.strip_len == 4.0
    pts = np.linspace(0.001, 1.0, 30)[:, None]
    assert np.allclose(ext(pts), 3.0)


def test_horizon_at_cap_is_rejected():
    spec = KernelSpec(1, 2, 0.5, 1.0)
    with pytest.raises(ValueError):
        extend_E(constant(1.0, 1), spec, ExtensionConfig.for_kernel(spec, cap=1.0))


def test_scaled_restriction_identity():
    spec = KernelSpec(1, 3, 2.0, 0.125)
    u = field_from_expression("exp(x) * sin(5*x)", 1, math.inf)
    ext = extend_E(u, spec, ExtensionConfig.for_kernel(spec))
    pts = RNG.uniform(-0.125, 0, 1000)[:, None]
    assert np.array_equal(ext(pts), u(pts))


def test_flat_graph_extension_matches_strip_extension():
    spec = KernelSpec(2, 2, 0.5, 0.25)
    cfg = ExtensionConfig.for_kernel(spec)
    u = field_from_expression("(1 + y) * bump(r, 2)", 2, 2.0)
    pts = np.column_stack([RNG.uniform(0.001, 0.8, 200), RNG.uniform(-2, 2, 200)])
    graph = extend_lipschitz(u, GraphDomain.flat(0.25), spec, cfg)
    assert np.allclose(graph(pts), extend_E(u, spec, cfg)(pts), atol=1e-14)


def test_wedge_extension_restriction_and_constants():
    spec = KernelSpec(2, 2, 0.0, 0.2)
    cfg = ExtensionConfig.for_kernel(spec)
    dom = GraphDomain("abs(x)", 1.0, 0.2)
    xb = RNG.uniform(-2, 2, 1000)
    phi, psi = dom.height(xb[:, None]), dom.psi(xb[:, None])
    pts = np.column_stack([psi + RNG.uniform(0.001, 0.999, 1000) * (phi - psi), xb])
    u = field_from_expression("sin(x + 2*y) * bump(r, 3)", 2, 3.0)
    assert np.array_equal(extend_lipschitz(u, dom, spec, cfg)(pts), u(pts))
    ext = extend_lipschitz(constant(2.0, 2), dom, spec, cfg)
    inner = np.column_stack([np.abs(xb[:50]) + RNG.uniform(0, 0.5, 50), xb[:50]])
    assert np.allclose(ext(inner), 2.0, atol=1e-6)


def test_recombination_weights_on_the_collar():
    cover = rounded_square_cover()
    pts = RNG.uniform(-1.2, 1.2, size=(20_000, 2))
    pts = pts[cover.in_collar(pts, 0.1)]
    lam = np.stack([cover.weight(i, pts) for i in range(4)], 1)
    assert np.allclose(np.sum(lambda_tilde(cover, pts) * lam, axis=1), 1.0)


def boundary_band(cover, width, n=200_000):
    pts = np.random.default_rng(2).uniform(-1.2, 1.2, size=(n, 2))
    sdf = cover.sdf(pts)
    return pts[(sdf < 0) & (sdf > -width)]


@pytest.mark.parametrize("beta", [0.0, 2.5])
def test_general_extension_of_constant_restricts_exactly(beta):
    cover = rounded_square_cover()
    spec = KernelSpec(2, 2, beta, 0.1)
    ext = extend_general(constant(1.5, 2), cover, spec, ExtensionConfig.for_kernel(spec))
    pts = RNG.uniform(-1.2, 1.2, size=(4000, 2))
    collar = pts[cover.in_collar(pts, 0.1)]
    assert np.array_equal(ext(collar), np.full(collar.shape[0], 1.5))


def test_general_extension_of_constant_is_continuous_for_high_branch():
    # cube sizes shrink toward the boundary, so the interior value tends to c
    cover = rounded_square_cover()
    spec = KernelSpec(2, 2, 2.5, 0.1)
    ext = extend_general(constant(1.5, 2), cover, spec, ExtensionConfig.for_kernel(spec))
    pts = boundary_band(cover, 1e-3)
    # reflected boxes of a cube at distance t lie within a few t of the point
    bound = 1.5 * (2 / cover.epsilon) * 6 * np.abs(cover.sdf(pts))
    assert np.all(np.abs(ext(pts) - 1.5) <= bound)


@pytest.mark.parametrize("delta", [0.05, 0.0125])
def test_general_extension_of_constant_low_branch_jump(delta):
    # base cubes have side delta, so the jump across the boundary is at most
    # c * max|grad lambda| * (box diameter) with |grad lambda| <= 2 / epsilon
    cover = rounded_square_cover()
    spec = KernelSpec(2, 2, 0.0, delta)
    ext = extend_general(constant(1.5, 2), cover, spec, ExtensionConfig.for_kernel(spec))
    bound = 1.5 * (2 / cover.epsilon) * 3 * delta
    assert np.max(np.abs(ext(boundary_band(cover, 1e-3)) - 1.5)) < bound
