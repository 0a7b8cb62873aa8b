import math

import numpy as np
import pytest

from nonlocal_trace import KernelSpec, constant, field_from_expression, kernel_eval, kernel_pth_moment
from nonlocal_trace import nonlocal_laplacian
from nonlocal_trace.kernels import kernel_normalization, sphere_area


@pytest.mark.parametrize("d, area", [(1, 2.0), (2, 2 * math.pi), (3, 4 * math.pi)])
def test_sphere_area(d, area):
    assert sphere_area(d) == pytest.approx(area, rel=1e-14)


@pytest.mark.parametrize("d, p, beta, expected", [(1, 2, 0, 1.5), (2, 2, 0, 2 / math.pi)])
def test_normalization_constant(d, p, beta, expected):
    assert kernel_normalization(d, p, beta) == pytest.approx(expected, rel=1e-12)
    assert KernelSpec(d, p, beta, 1.0).c_norm == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("args", [(1, 2, 3, 1.0), (1, 2, -0.1, 1.0), (1, 1.0, 0, 1.0), (1, 2, 0, 0.0), (0, 2, 0, 1)])
def test_inadmissible_specs(args):
    with pytest.raises(ValueError):
        KernelSpec(*args)


def test_kernel_values():
    assert kernel_eval(KernelSpec(1, 2, 0, 1.0), 0.5) == pytest.approx(1.5, rel=1e-14)
    expected = (3 / (2 * math.pi)) / (0.5**3 * 0.25)
    assert kernel_eval(KernelSpec(2, 2, 1, 0.5), 0.25) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(15.2789, abs=1e-4)


def test_kernel_vanishes_at_and_beyond_horizon():
    spec = KernelSpec(2, 3, 1.5, 0.3)
    vals = kernel_eval(spec, np.array([0.3, 0.31, 5.0]))
    assert np.all(vals == 0.0)


@pytest.mark.parametrize("d, p, beta, delta, tol", [(1, 2, 0, 1.0, 1e-10), (2, 3, 1.5, 0.3, 1e-10),
                                                    (1, 2, 2.9, 1.0, 1e-8), (3, 2.5, 4.0, 2.0, 1e-10)])
def test_moment_is_one(d, p, beta, delta, tol):
    res = kernel_pth_moment(KernelSpec(d, p, beta, delta))
    assert abs(res.value - 1.0) < tol


def test_laplacian_of_constant_is_zero():
    spec = KernelSpec(2, 2, 0, 0.5)
    assert nonlocal_laplacian(spec, constant(3.0, 2), np.array([0.2, -0.1])) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("beta", [0.0, 1.0, 2.5])
@pytest.mark.parametrize("delta", [1.0, 0.25])
def test_laplacian_of_square_is_2d(beta, delta):
    spec = KernelSpec(2, 2, beta, delta)
    u = field_from_expression("x^2 + y^2", 2, math.inf)
    assert nonlocal_laplacian(spec, u, np.array([0.3, -0.7])) == pytest.approx(4.0, abs=1e-6)


def test_laplacian_of_sine_converges_quadratically():
    u = field_from_expression("sin(x + 1)", 1, math.inf)
    exact = -math.sin(1.0)
    errs = [abs(nonlocal_laplacian(KernelSpec(1, 2, 0, dl), u, np.array([0.0])) - exact) for dl in (0.4, 0.2, 0.1)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)
