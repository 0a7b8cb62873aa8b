import math

import numpy as np
import pytest

from nonlocal_trace import WhitneyCover, WhitneyCube, cube_containing, cubes_in_window
from nonlocal_trace.whitney import bump_eval, map_M1, map_M2, neighbors, next_power_of_two, smoothstep


def axial_slabs(cubes):
    return sorted(tuple(float(v) for v in c.axial) for c in cubes)


def test_smoothstep_profile():
    assert smoothstep(0.5) == 0.5
    assert smoothstep(-1.0) == 0.0 and smoothstep(2.0) == 1.0
    t = np.linspace(0, 1, 101)
    assert np.allclose(smoothstep(t) + smoothstep(1 - t), 1.0)


def test_power_of_two_rounding():
    assert next_power_of_two(3.0) == 4.0
    assert next_power_of_two(4.0) == 4.0
    assert math.isinf(next_power_of_two(math.inf))


def test_strip_length_must_be_power_of_two():
    with pytest.raises(ValueError):
        WhitneyCover("I", 3.0, 1)


@pytest.mark.parametrize("kind, L, d, x, level, axial, cross", [
    ("II", 2, 1, [0.3], 2, (0.25, 0.5), []),
    ("I", 1, 1, [0.3], 0, (0.0, 1.0), []),
    ("II", 2, 2, [0.6, 1.7], 1, (0.5, 1.0), [(1.5, 2.0)]),
])
def test_cube_containing(kind, L, d, x, level, axial, cross):
    cube = cube_containing(WhitneyCover(kind, L, d), x)
    assert cube.level == level
    assert cube.axial == axial
    assert cube.cross == cross


def test_half_open_convention():
    cover = WhitneyCover("II", 4, 1)
    assert cube_containing(cover, [0.5]).axial == (0.25, 0.5)


def test_window_type_one():
    cubes = cubes_in_window(WhitneyCover("I", 2, 1), [0.0], [2.0])
    assert axial_slabs(cubes) == [(0.0, 1.0), (1.0, 2.0)]
    assert sorted(c.kind for c in cubes) == ["base", "regular"]


def test_window_type_two():
    cubes = cubes_in_window(WhitneyCover("II", 2, 1), [0.2], [2.0])
    assert axial_slabs(cubes) == [(0.125, 0.25), (0.25, 0.5), (0.5, 1.0), (1.0, 2.0)]


def test_window_type_two_cross_section():
    cover = WhitneyCover("II", 2, 2)
    cubes = cubes_in_window(cover, [0.9, 0.0], [1.1, 1.0])
    assert {c.level for c in cubes} == {0, 1}
    for c in cubes:
        lo, hi = c.box()
        assert lo[0] < 1.1 and hi[0] > 0.9 and lo[1] < 1.0 and hi[1] > 0.0
    # enumeration oracle: every grid cell meeting the window
    assert len([c for c in cubes if c.level == 1]) == 2
    assert len([c for c in cubes if c.level == 0]) == 1


def test_window_reaching_type_two_boundary_is_rejected():
    with pytest.raises(ValueError):
        cubes_in_window(WhitneyCover("II", 2, 1), [0.0], [1.0])


def test_map_one():
    lo, hi = map_M1(WhitneyCube(0, (0,), "base"))
    assert list(lo) == [-1.0, 0.0] and list(hi) == [0.0, 1.0]
    lo, hi = map_M1(WhitneyCube(-1, (1,)))
    assert list(lo) == [-1.0, 2.0] and list(hi) == [0.0, 4.0]
    lo, hi = map_M1(WhitneyCube(1, ()))
    assert list(lo) == [-1.0] and list(hi) == [0.0]


@pytest.mark.parametrize("level, image", [(2, (-0.5, -0.25)), (-1, (-1.0, 0.0)), (1, (-1.0, -0.5))])
def test_map_two(level, image):
    lo, hi = map_M2(WhitneyCube(level, (3,)))
    assert (lo[0], hi[0]) == image
    cube_lo, cube_hi = WhitneyCube(level, (3,)).box()
    assert lo[1] == cube_lo[1] and hi[1] == cube_hi[1]


def test_reflection_preserves_volume():
    for level in range(0, 6):
        cube = WhitneyCube(level, (0,))
        lo, hi = map_M2(cube)
        clo, chi = cube.box()
        assert np.prod(hi - lo) == pytest.approx(np.prod(chi - clo), rel=1e-15)


def test_neighbors_type_two():
    cover = WhitneyCover("II", 4, 1)
    found = neighbors(cover, WhitneyCube(1, ()))
    assert axial_slabs(found) == [(0.25, 0.5), (0.5, 1.0), (1.0, 2.0)]


def test_neighbors_type_one_single_base():
    cover = WhitneyCover("I", 1, 1)
    found = neighbors(cover, WhitneyCube(0, (), "base"))
    assert axial_slabs(found) == [(0.0, 1.0)]


def test_bump_barycenter_and_far_field():
    cover = WhitneyCover("II", 4, 2)
    cube = WhitneyCube(1, (2,))
    lo, hi = cube.box()
    assert bump_eval(cover, cube, (lo + hi) / 2) == pytest.approx(1.0, abs=1e-15)
    r = cube.side / 4
    outside = np.array([[hi[0] + 1.01 * r, 0.5 * (lo[1] + hi[1])], [0.5 * (lo[0] + hi[0]), lo[1] - 1.01 * r]])
    assert np.all(bump_eval(cover, cube, outside) == 0.0)


def test_partition_terms_sum_to_one_type_two_infinite():
    cover = WhitneyCover("II", math.inf, 2)
    rng = np.random.default_rng(5)
    pts = np.column_stack([10.0 ** rng.uniform(-4, 2, 500), rng.uniform(-50, 50, 500)])
    _, _, w = cover.partition_terms(pts)
    assert np.max(np.abs(w.sum(axis=1) - 1.0)) < 1e-12


def test_cutoff_decays_beyond_strip():
    cover = WhitneyCover("I", 2, 1)
    t = np.array([[2.0], [2.1], [2.25], [2.5]])
    sums = cover.partition_terms(t)[2].sum(axis=1)
    assert sums[0] == pytest.approx(1.0) and 0 < sums[1] < 1 and sums[2] == 0 and sums[3] == 0
