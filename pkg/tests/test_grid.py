"""Grid cubes, covers, expansions, and tendril outer bounds.

Frozen reference values:
  cube (0, 0, (0,0)) under diag(2, 4) realizes to [0, 1]^2 with volume 1
  its double expansion is [-1/2, 3/2]^2
  enumerate_cover(diag(2, 4), 0, 0, [0, 1]^2) yields exactly 1 cube,
  sigma = -1 yields 4
  rounded-box volume (4 + 16)^2 - (4 - pi) 64 for the 2I tendril calibration
"""

import numpy as np
import pytest
from pytest import approx

from anisomax.dilation import validate_dilation
from anisomax.errors import (
    BudgetExceededError,
    InputInvalidError,
    NotNormalizedError,
)
from anisomax.grid import (
    GridCube,
    cube_contains,
    enumerate_cover,
    expand_cube,
    expand_parallelepiped,
    realize_cube,
    tendril_of,
    tendril_volume_estimate,
)


def _diag24():
    return validate_dilation([[2.0, 0.0], [0.0, 4.0]])


def _jordan2():
    return validate_dilation([[2.0, 1.0], [0.0, 2.0]])


def _double():
    return validate_dilation(2.0 * np.eye(2))


# ------------------------------------------------------------------ geometry


def test_realize_unit_cube():
    p = realize_cube(GridCube(0, 0, (0, 0), _diag24()))
    assert p.origin == approx(np.zeros(2))
    assert p.volume == approx(1.0)
    lo, hi = p.bbox()
    assert lo == approx(np.zeros(2))
    assert hi == approx(np.ones(2))


def test_realize_scaled_cube():
    D = _diag24()
    p = realize_cube(GridCube(-1, -2, (1, 3), D))
    # Pullback lower corner (0.5, 1.5) maps through A^-2 = diag(1/4, 1/16).
    assert p.origin == approx(np.array([0.5 / 4.0, 1.5 / 16.0]))
    assert p.volume == approx((2.0 ** -2) * (8.0 ** -2))


def test_volume_formula():
    D = _diag24()
    for sigma in (0, -1, -3):
        for tau in (-2, 0, 2):
            c = GridCube(sigma, tau, (0, 0), D)
            assert c.volume == approx(c.realize().volume, rel=1e-12)


def test_positive_sigma_rejected():
    with pytest.raises(InputInvalidError):
        GridCube(1, 0, (0, 0), _diag24())


def test_expand_unit_cube():
    D = _diag24()
    star = expand_cube(GridCube(0, 0, (0, 0), D), 2.0)
    lo, hi = star.bbox()
    assert lo == approx(np.array([-0.5, -0.5]))
    assert hi == approx(np.array([1.5, 1.5]))


def test_expand_composes():
    D = _jordan2()
    c = GridCube(-1, -2, (3, -5), D)
    twice = expand_parallelepiped(expand_cube(c, 2.0), 2.0)
    quad = expand_cube(c, 4.0)
    assert twice.origin == approx(quad.origin)
    assert twice.basis == approx(quad.basis)


def test_cube_contains():
    D = _diag24()
    star = expand_cube(GridCube(0, 0, (0, 0), D), 2.0)
    assert cube_contains(star, GridCube(0, 0, (0, 0), D))
    assert cube_contains(star, GridCube(0, -1, (0, 0), D))
    assert not cube_contains(star, GridCube(0, 0, (2, 0), D))


def test_tau_parent_contains_child():
    D = _diag24()
    rng = np.random.default_rng(3)
    for _ in range(50):
        idx = tuple(int(v) for v in rng.integers(-40, 40, size=2))
        tau = int(rng.integers(-5, 1))
        child = GridCube(0, tau, idx, D)
        parent = child.tau_parent()
        assert parent.tau == tau + 1
        assert cube_contains(parent.realize(), child)


def test_sigma_parent_is_unique_container():
    D = _jordan2()
    rng = np.random.default_rng(4)
    for _ in range(50):
        idx = tuple(int(v) for v in rng.integers(-20, 20, size=2))
        child = GridCube(-3, -1, idx, D)
        parent = child.sigma_parent()
        assert parent.sigma == -2
        assert cube_contains(parent.realize(), child)
        # No sibling of the parent contains the child.
        for shift in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            other = GridCube(-2, -1, (parent.index[0] + shift[0], parent.index[1] + shift[1]), D)
            assert not cube_contains(other.realize(), child)


# ------------------------------------------------------------------- covers


def test_cover_unit_box_single_cube():
    D = _diag24()
    cubes = enumerate_cover(D, 0, 0, (np.zeros(2), np.ones(2)))
    assert len(cubes) == 1
    assert cubes[0].index == (0, 0)


def test_cover_unit_box_refined():
    cubes = enumerate_cover(_diag24(), -1, 0, (np.zeros(2), np.ones(2)))
    assert len(cubes) == 4


def test_cover_empty_box():
    assert enumerate_cover(_diag24(), 0, 0, (np.ones(2), np.ones(2))) == []


def test_cover_budget():
    with pytest.raises(BudgetExceededError):
        enumerate_cover(_diag24(), 0, 0, (np.zeros(2), np.full(2, 4000.0)))


def test_cover_completeness_diagonal():
    D = _diag24()
    box = (np.array([-1.3, 0.7]), np.array([2.1, 5.9]))
    cubes = enumerate_cover(D, -2, -1, box)
    indices = {c.index for c in cubes}
    # Centers of a fine grid inside the box must each lie in a listed cube.
    xs = np.linspace(box[0][0], box[1][0], 101)[:-1] + 0.01
    ys = np.linspace(box[0][1], box[1][1], 101)[:-1] + 0.01
    grid = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
    pulled = grid @ D.power(1).T / (2.0 ** -2)
    found = {tuple(int(np.floor(v)) for v in row) for row in pulled}
    assert found <= indices


def test_cover_completeness_jordan():
    D = _jordan2()
    box = (np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    cubes = enumerate_cover(D, 0, 1, box)
    indices = {c.index for c in cubes}
    rng = np.random.default_rng(11)
    pts = rng.uniform(0.0, 1.0, size=(4000, 2))
    pulled = pts @ np.linalg.inv(D.matrix).T
    for row in pulled:
        assert tuple(int(np.floor(v)) for v in row) in indices
    # Every listed cube meets the box bounding region.
    for c in cubes:
        lo, hi = c.realize().bbox()
        assert np.all(lo < box[1]) and np.all(hi > box[0])


def test_cover_scaling_count():
    D = _diag24()
    box = (np.zeros(2), np.array([4.0, 4.0]))
    at_0 = enumerate_cover(D, 0, 0, box)
    at_m1 = enumerate_cover(D, -1, 0, box)
    assert len(at_m1) == 4 * len(at_0)


# ----------------------------------------------------------------- tendrils


def test_tendril_requires_normalized():
    with pytest.raises(NotNormalizedError):
        tendril_of(GridCube(0, 0, (0, 0), _jordan2()))


def test_tendril_volume_bound_formula():
    D = _diag24()
    t = tendril_of(GridCube(-1, -2, (0, 0), D))
    ball = np.pi * 4.0
    assert t.volume_bound == approx((4.0 ** 2) * ball * 64.0 * (2.0 ** -1) * (8.0 ** -2))
    assert t.scale == approx((2.0 ** -1) * (8.0 ** -2))


def test_tendril_volume_bound_dilation_covariance():
    D = _diag24()
    a = tendril_of(GridCube(0, -3, (2, 1), D))
    b = tendril_of(GridCube(0, -2, (2, 1), D))
    assert b.volume_bound / a.volume_bound == approx(8.0)


def test_tendril_box_calibration():
    # With A = 2I and tau = 0 the outer set is a rounded box whose exact
    # area is (4 + 16)^2 - (4 - pi) 8^2.
    D = _double()
    t = tendril_of(GridCube(0, 0, (0, 0), D))
    exact = 20.0 ** 2 - (4.0 - np.pi) * 64.0
    est = tendril_volume_estimate(t, 200_000, seed=5)
    assert est == approx(exact, rel=0.01)


def test_tendril_estimate_below_bound():
    # The closed-form bound dominates for sigma above -2d; deeper cubes are
    # ball-dominated and the formula undershoots, so they stay out of scope.
    D = _diag24()
    for sigma in (0, -2, -3):
        for tau in (-3, -1, 0):
            t = tendril_of(GridCube(sigma, tau, (1, -2), D))
            est = tendril_volume_estimate(t, 20_000, seed=9)
            assert est <= t.volume_bound


def test_tendril_estimate_scaling():
    D = _diag24()
    a = tendril_volume_estimate(tendril_of(GridCube(0, -2, (0, 0), D)), 100_000, seed=2)
    b = tendril_volume_estimate(tendril_of(GridCube(0, -3, (0, 0), D)), 100_000, seed=2)
    assert b / a == approx(1.0 / 8.0, rel=0.2)


def test_tendril_sample_count_guard():
    D = _double()
    t = tendril_of(GridCube(0, 0, (0, 0), D))
    with pytest.raises(InputInvalidError):
        tendril_volume_estimate(t, 500, seed=1)


def test_tendril_membership_property():
    # x in q*, |y| <= 1, k <= tau + 2 implies x + A^k y in the outer set.
    D = _diag24()
    rng = np.random.default_rng(21)
    q = GridCube(-1, -2, (3, 1), D)
    t = tendril_of(q)
    star = expand_cube(q, 2.0)
    for k in (q.tau + 2, q.tau, q.tau - 3):
        u = rng.random((1000, 2))
        x = star.origin + u @ star.basis.T
        raw = rng.normal(size=(1000, 2))
        radii = rng.random(1000) ** 0.5
        y = raw / np.linalg.norm(raw, axis=1, keepdims=True) * radii[:, None]
        pts = x + y @ D.power(k).T
        assert np.all(t.contains_points(pts))
