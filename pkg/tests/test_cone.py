import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from aronsson import (InputError, cone_gradient, cone_level, cone_values, eval_cone, eval_cone_hat, level_for_slope,
                      make_builtin, reflect)
from aronsson.cone import cone_batch, cone_gradients, sublevel_boundary

# Reference values from tests/oracles/cone_mpmath.py (40-digit polar
# parametrisation of the level curve, independent of the Newton solver).
FROZEN = [
    ("shifted", 0.3, 0.5, (1.0, 0.0), 1.0539113612893967852),
    ("shifted", 0.3, 0.5, (-1.0, 0.0), 0.95719892200579610976),
    ("shifted", 0.3, 2.0, (-1.0, 0.5), 2.1209422578199349694),
    ("shifted", 0.3, 2.0, (0.3, -2.0), 4.0461584755299532584),
    ("shifted", -0.7, 1.5, (2.0, 1.0), 3.5159949158400082633),
    ("anisotropic", None, 1.3, (1.0, 2.0), 3.2347201786470404778),
    ("anisotropic", None, 0.1, (-3.0, 1.0), 1.3343492064965785337),
]

coord = st.floats(-10, 10, allow_nan=False)
level = st.floats(0.01, 100, allow_nan=False)
names = st.sampled_from(["isotropic", "anisotropic", "shifted"])


def _H(kind, c):
    if kind == "shifted":
        return make_builtin("shifted_smooth", c=c)
    return make_builtin("anisotropic", A=[[2.0, 0.6], [0.6, 1.0]])


@pytest.mark.parametrize("kind,c,k,x,ref", FROZEN)
def test_frozen_reference_values(kind, c, k, x, ref):
    v = eval_cone(_H(kind, c), k, np.array(x))
    assert v.value == pytest.approx(ref, rel=1e-12)
    assert v.kkt_residual <= 1e-12


def test_closed_forms(iso, aniso):
    th = np.linspace(0, 2 * np.pi, 360, endpoint=False)
    X = 3.7 * np.column_stack([np.cos(th), np.sin(th)])
    Ainv = np.linalg.inv([[2.0, 0.6], [0.6, 1.0]])
    for k in (0.05, 1.0, 20.0):
        assert np.allclose(cone_values(iso, k, X), np.sqrt(2 * k) * 3.7, rtol=1e-12)
        exact = np.sqrt(2 * k * np.einsum("ni,ij,nj->n", X, Ainv, X))
        assert np.allclose(cone_values(aniso, k, X), exact, rtol=1e-12)


def test_vertex_is_degenerate(shifted):
    v = eval_cone(shifted, 1.0, np.zeros(2))
    assert v.value == 0.0 and v.maximizer is None


def test_maximizer_is_on_level_set_and_aligned(shifted, rng):
    X = rng.normal(size=(200, 2))
    vals, P, lam, res = cone_batch(shifted, 0.8, X)
    assert np.allclose(shifted(P), 0.8, atol=1e-12)
    assert np.allclose(np.einsum("ni,ni->n", P, X), vals, rtol=1e-12)
    # KKT: grad H parallel to x with a positive multiplier
    g = shifted.grad(P)
    cross = g[:, 0] * X[:, 1] - g[:, 1] * X[:, 0]
    assert np.allclose(cross, 0, atol=1e-10)
    assert np.all(lam > 0)
    assert np.all(res <= 1e-12)


def test_fallback_matches_compiled(builtins, rng):
    X = rng.normal(size=(300, 2))
    for H in builtins.values():
        a = cone_values(H, 1.9, X)
        b = cone_values(H, 1.9, X, force_python=True)
        assert np.allclose(a, b, rtol=1e-13)


@given(names, level, st.tuples(coord, coord), st.floats(0.0, 50.0))
def test_positive_homogeneity(builtins, name, k, x, t):
    H = builtins[name]
    x = np.array(x)
    assert eval_cone(H, k, t * x).value == pytest.approx(t * eval_cone(H, k, x).value, rel=1e-10, abs=1e-12)


@given(names, level, st.tuples(coord, coord), st.tuples(coord, coord))
def test_triangle_inequality(builtins, name, k, x, y):
    H = builtins[name]
    x, y = np.array(x), np.array(y)
    v = cone_values(H, k, np.array([x + y, x, y]))
    assert v[0] <= v[1] + v[2] + 1e-10 * (1 + abs(v[1]) + abs(v[2]))


@given(names, st.tuples(coord, coord), st.floats(0.01, 10), st.floats(1.0, 10.0))
def test_monotone_in_level(builtins, name, x, k, factor):
    H = builtins[name]
    x = np.array(x)
    assert eval_cone(H, k, x).value <= eval_cone(H, k * factor, x).value + 1e-12


@given(names, level, st.tuples(coord, coord))
def test_sandwich_bounds(builtins, name, k, x):
    H = builtins[name]
    x = np.array(x)
    r = np.linalg.norm(x)
    v = eval_cone(H, k, x).value
    assert np.sqrt(2 * k / H.beta) * r - 1e-10 * (1 + r) <= v <= np.sqrt(2 * k / H.alpha) * r + 1e-10 * (1 + r)


@given(names, level, st.tuples(coord, coord))
def test_hat_cone_is_reflection(builtins, name, k, x):
    H = builtins[name]
    x = np.array(x)
    assert eval_cone_hat(H, k, x).value == pytest.approx(eval_cone(H, k, -x).value, rel=1e-12, abs=1e-12)
    assert eval_cone(reflect(H), k, x).value == pytest.approx(eval_cone(H, k, -x).value, rel=1e-12, abs=1e-12)


@given(names, st.floats(0.05, 20), st.tuples(coord, coord))
def test_gradient_lies_on_level_set(builtins, name, k, x):
    H = builtins[name]
    x = np.array(x)
    assume(np.linalg.norm(x) > 1e-3)
    g = cone_gradient(H, k, x)
    assert H(g) == pytest.approx(k, rel=1e-8)
    eps = 1e-6 * max(1.0, np.linalg.norm(x))
    fd = [(eval_cone(H, k, x + d).value - eval_cone(H, k, x - d).value) / (2 * eps)
          for d in (np.array([eps, 0.0]), np.array([0.0, eps]))]
    assert np.allclose(g, fd, atol=1e-6 * (1 + np.abs(g).max()))


@given(names, level, st.tuples(coord, coord), st.floats(0.01, 10))
def test_collinear_pairs_are_additive(builtins, name, k, x, t):
    H = builtins[name]
    x = np.array(x)
    v = cone_values(H, k, np.array([x, t * x, (1 + t) * x]))
    assert v[2] == pytest.approx(v[0] + v[1], rel=1e-10, abs=1e-12)


def test_non_collinear_pairs_are_strict(builtins, rng):
    X = rng.normal(size=(2000, 2))
    Y = rng.normal(size=(2000, 2))
    for H in builtins.values():
        gap = cone_values(H, 1.0, X) + cone_values(H, 1.0, Y) - cone_values(H, 1.0, X + Y)
        cos = np.einsum("ni,ni->n", X, Y) / np.linalg.norm(X, axis=1) / np.linalg.norm(Y, axis=1)
        angle = np.arccos(np.clip(cos, -1, 1))
        assert np.all(angle[gap <= 1e-10] <= 1e-4)


def test_level_continuity(shifted, rng):
    X = rng.normal(size=(100, 2))
    base = cone_values(shifted, 1.0, X)
    diffs = [np.abs(cone_values(shifted, 1.0 + d, X) - base).max() for d in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(a > b for a, b in zip(diffs, diffs[1:]))
    assert diffs[-1] < 1e-3


def test_inverse_cone_recovers_level(builtins, rng):
    X = rng.normal(size=(60, 2))
    for H in builtins.values():
        for k in (0.2, 3.0):
            v = cone_values(H, k, X)
            assert np.allclose(cone_level(H, X, v), k, rtol=1e-9)


def test_inverse_cone_edge_cases(iso):
    X = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    out = cone_level(iso, X, np.array([-1.0, 0.0, 1.0]))
    assert out[0] == 0.0 and out[1] == 0.0 and np.isinf(out[2])


def test_level_for_slope(builtins):
    for H in builtins.values():
        a = 1.3
        kl = level_for_slope(H, a).level
        th = np.linspace(0, 2 * np.pi, 4000, endpoint=False)
        ring = a * np.column_stack([np.cos(th), np.sin(th)])
        assert kl >= H(ring).max() - 1e-12
        assert kl - H(ring).max() < 1e-6
    assert level_for_slope(builtins["isotropic"], 2.0).level == pytest.approx(2.0)


def test_sublevel_boundary_is_unit_level_set(aniso):
    B = sublevel_boundary(aniso, 2.0, N=90)
    assert np.allclose(cone_values(aniso, 2.0, B), 1.0, rtol=1e-12)


def test_gradients_batch_matches_single(shifted, rng):
    X = rng.normal(size=(10, 2))
    G = cone_gradients(shifted, 0.7, X)
    for x, g in zip(X, G):
        assert np.allclose(cone_gradient(shifted, 0.7, x), g, atol=1e-13)


def test_rejects_bad_input(iso):
    with pytest.raises(InputError):
        cone_values(iso, -1.0, np.ones((2, 2)))
    with pytest.raises(InputError):
        cone_values(iso, 1.0, np.ones((2, 3)))
    with pytest.raises(InputError):
        cone_values(iso, 1.0, np.array([[np.nan, 0.0]]))
