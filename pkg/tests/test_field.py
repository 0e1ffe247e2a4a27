import numpy as np
import pytest
from hypothesis import given, strategies as st

from aronsson import Domain, Field, InputError, slope_estimate, slope_limit, slope_minus, slope_plus
from aronsson.field import (aronsson43, circle_points, cone_field, cone_hat_field, monotone_direction, paraboloid,
                            plane, radial_extremes, radial_perturbation)

RADII = [0.05, 0.1, 0.2, 0.4]


def test_field_arithmetic_and_domain(rng):
    u = plane([1.0, 2.0], 0.5) + paraboloid(1.0) * 2.0
    X = rng.normal(size=(10, 2))
    assert np.allclose(u(X), X @ [1.0, 2.0] + 0.5 + 2 * (X ** 2).sum(axis=1))
    assert np.allclose((-u)(X), -u(X))
    d = u.with_domain(Domain(outer=1.0))
    with pytest.raises(InputError):
        d(np.array([[3.0, 0.0]]))


def test_grid_field_interpolates_planes_exactly():
    t = np.linspace(-1, 1, 21)
    X, Y = np.meshgrid(t, t, indexing="ij")
    g = Field.from_grid((-1.0, -1.0), 0.1, 0.3 * X - 0.7 * Y + 1.0)
    pts = np.array([[0.123, -0.456], [0.9, 0.95]])
    assert np.allclose(g(pts), 0.3 * pts[:, 0] - 0.7 * pts[:, 1] + 1.0, atol=1e-12)
    assert g.h == pytest.approx(0.1)


def test_cone_field_gradient(shifted, rng):
    u = cone_field(shifted, 1.4, b=0.3, center=(0.2, -0.1))
    X = rng.normal(size=(20, 2)) + 2.0
    assert np.allclose(shifted(u.gradient(X)), 1.4, rtol=1e-8)


def test_hat_cone_field_is_minus_reflected_cone(shifted, rng):
    X = rng.normal(size=(30, 2))
    from aronsson import cone_values, reflect
    assert np.allclose(cone_hat_field(shifted, 0.9)(X), -cone_values(reflect(shifted), 0.9, X))


@pytest.mark.parametrize("name", ["isotropic", "anisotropic", "shifted"])
def test_plane_slopes_are_constant(builtins, name):
    H = builtins[name]
    p = np.array([0.6, -0.8])
    est = slope_estimate(plane(p, 1.0), H, (0.3, 0.1), RADII)
    assert est.monotone_plus and est.monotone_minus
    # a plane is dominated by the cone of level H(p) on both sides; the
    # 720-sample circle resolves that level to a few parts in 1e6
    assert np.allclose(est.s_plus, H(p), rtol=2e-5)
    assert np.allclose(est.s_minus, H(p), rtol=2e-5)


@pytest.mark.parametrize("name", ["isotropic", "anisotropic", "shifted"])
def test_cone_slopes(builtins, name):
    H = builtins[name]
    est = slope_estimate(cone_field(H, 1.7), H, (0.0, 0.0), RADII)
    assert np.allclose(est.s_plus, 1.7, rtol=1e-6)
    assert np.allclose(est.s_minus, 0.0)


def test_hat_cone_slopes_on_minus_side(shifted):
    est = slope_estimate(cone_hat_field(shifted, 0.8), shifted, (0.0, 0.0), RADII)
    assert np.allclose(est.s_minus, 0.8, rtol=1e-6)
    assert np.allclose(est.s_plus, 0.0)


@pytest.mark.parametrize("x0", [(0.6, 0.3), (-0.5, 0.8), (1.0, -1.2)])
def test_slopes_nondecreasing_on_exact_solution(iso, x0):
    est = slope_estimate(aronsson43(), iso, x0, [0.02, 0.05, 0.1, 0.2])
    assert est.monotone_plus and est.monotone_minus


def test_slope_limit_recovers_gradient_level(aniso):
    u = aronsson43()
    x0 = np.array([0.7, 0.4])
    g = u.gradient(x0[None])[0]
    lim = slope_limit(u, aniso, x0, [4e-3, 2e-3, 1e-3])
    assert lim.s_plus == pytest.approx(aniso(g), abs=1e-3)
    assert lim.s_minus == pytest.approx(aniso(g), abs=1e-3)


def test_slope_inputs_validated(iso):
    with pytest.raises(InputError):
        slope_estimate(plane([1, 0]), iso, (0, 0), [0.2, 0.1])
    with pytest.raises(InputError):
        slope_limit(plane([1, 0]), iso, (0, 0), [0.1, 0.2])


def test_monotone_direction():
    assert monotone_direction([1, 1, 1]) == "constant"
    assert monotone_direction([1, 2, 3]) == "nondecreasing"
    assert monotone_direction([3, 2, 1]) == "nonincreasing"
    assert monotone_direction([1, 3, 2]) == "none"


def test_radial_extremes_of_cone(aniso):
    ex = radial_extremes(cone_field(aniso, 1.0), (0, 0), RADII)
    assert np.all(ex.m < ex.M)
    assert ex.monotone_m == "nondecreasing" and ex.monotone_M == "nondecreasing"


def test_radial_perturbation_scales_with_power():
    f = radial_perturbation(1.0, power=1.5)
    for r in (0.1, 0.01):
        v = f(circle_points((0, 0), r, 64))
        assert np.abs(v).max() == pytest.approx(r ** 1.5, rel=1e-2)


@given(st.floats(0.1, 3.0), st.floats(-2, 2), st.floats(-2, 2))
def test_slope_plus_of_scaled_cone(k, bx, by):
    from aronsson import make_builtin
    H = make_builtin("isotropic")
    u = cone_field(H, k)
    assert slope_plus(u, H, (0, 0), 0.3, N=90) == pytest.approx(k, rel=1e-8)
    assert slope_minus(plane([bx, by]), H, (0, 0), 0.3, N=90) <= 0.5 * (bx * bx + by * by) + 1e-8
