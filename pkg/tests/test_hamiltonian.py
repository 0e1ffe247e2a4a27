import numpy as np
import pytest
from hypothesis import given, strategies as st

from aronsson import InputError, estimate_bounds, level_extremes, make_builtin, parse_hamiltonian, reflect, scaled
from aronsson.hamiltonian import QuadSine, radial_level, ratio_constant

finite = st.floats(-5, 5, allow_nan=False)


def test_builtin_bounds_are_exact(iso, aniso, shifted):
    assert (iso.alpha, iso.beta) == (1.0, 1.0)
    ev = np.linalg.eigvalsh(np.array([[2.0, 0.6], [0.6, 1.0]]))
    assert aniso.alpha == pytest.approx(ev[0], rel=1e-14)
    assert aniso.beta == pytest.approx(ev[1], rel=1e-14)
    assert (shifted.alpha, shifted.beta) == pytest.approx((0.7, 1.3), rel=1e-14)


def test_sampled_bounds_sit_inside_exact_ones(builtins):
    for H in builtins.values():
        lo, hi = estimate_bounds(H, samples=5000)
        assert H.alpha - 1e-12 <= lo <= hi <= H.beta + 1e-12


@pytest.mark.parametrize("name", ["isotropic", "anisotropic", "shifted"])
def test_gradient_and_hessian_match_finite_differences(builtins, name, rng):
    H = builtins[name]
    P = rng.normal(scale=2.0, size=(50, 2))
    eps = 1e-6
    for i in range(2):
        d = np.zeros(2)
        d[i] = eps
        fd = (H(P + d) - H(P - d)) / (2 * eps)
        assert np.allclose(H.grad(P)[:, i], fd, atol=1e-7)
        fd2 = (H.grad(P + d) - H.grad(P - d)) / (2 * eps)
        assert np.allclose(H.hess(P)[:, :, i], fd2, atol=1e-7)


def test_scale_parameter_enters_hessian():
    from aronsson.hamiltonian import Hamiltonian
    H = Hamiltonian.from_family(QuadSine(((1.0, 0.0), (0.0, 2.0)), c=0.4, s=1.7), "scaled-family")
    p = np.array([[0.3, -0.8], [1.1, 0.2]])
    eps = 1e-6
    for i in range(2):
        d = np.zeros(2)
        d[i] = eps
        fd2 = (H.grad(p + d) - H.grad(p - d)) / (2 * eps)
        assert np.allclose(H.hess(p)[:, :, i], fd2, atol=1e-6)
    lo, hi = estimate_bounds(H, samples=5000)
    assert H.alpha - 1e-12 <= lo and hi <= H.beta + 1e-12


@given(st.tuples(finite, finite))
def test_reflection_evaluates_at_minus_p(shifted, p):
    p = np.array(p)
    R = reflect(shifted)
    assert R(p) == pytest.approx(shifted(-p), rel=1e-14, abs=1e-14)
    assert np.allclose(R.grad(p), -shifted.grad(-p), atol=1e-13)
    assert (R.alpha, R.beta) == (shifted.alpha, shifted.beta)
    assert reflect(R)(p) == pytest.approx(shifted(p), rel=1e-14, abs=1e-14)


def test_shifted_is_not_even(shifted):
    p = np.array([1.0, 0.0])
    assert shifted(p) != pytest.approx(shifted(-p))


def test_scaled_divides_values(aniso, rng):
    P = rng.normal(size=(20, 2))
    S = scaled(aniso, 4.0)
    assert np.allclose(S(P), aniso(P) / 4.0)
    assert S.alpha == pytest.approx(aniso.alpha / 4.0)
    with pytest.raises(InputError):
        scaled(aniso, 0.0)


@pytest.mark.parametrize("text", ["isotropic", "anisotropic:2,0.6,1", "shifted:0.3", "hat(shifted:0.3)"])
def test_parse_roundtrip(text):
    H = parse_hamiltonian(text)
    assert H.dim == 2
    assert parse_hamiltonian(H.spec())(np.array([0.4, -1.2])) == pytest.approx(H(np.array([0.4, -1.2])))


@pytest.mark.parametrize("text", ["isotrop", "anisotropic:1,2", "anisotropic:1,3,1", "shifted:1.5", "shifted:x",
                                  "anisotropic:1,0,-1"])
def test_parse_rejects_malformed(text):
    with pytest.raises(InputError):
        parse_hamiltonian(text)


def test_builtin_rejects_bad_matrix():
    with pytest.raises(InputError):
        make_builtin("anisotropic", A=[[1.0, 0.2], [0.0, 1.0]])
    with pytest.raises(InputError):
        make_builtin("anisotropic")
    with pytest.raises(InputError):
        make_builtin("nope")


def test_radial_level_hits_level(builtins, rng):
    dirs = rng.normal(size=(40, 2))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    for H in builtins.values():
        r = radial_level(H, 1.7, dirs)
        assert np.allclose(H(r[:, None] * dirs), 1.7, rtol=1e-12)


def test_level_extremes_bracket_radial_samples(builtins):
    th = np.linspace(0, 2 * np.pi, 2000, endpoint=False)
    dirs = np.column_stack([np.cos(th), np.sin(th)])
    for H in builtins.values():
        for k in (0.1, 1.0, 10.0):
            ex = level_extremes(H, k)
            r = radial_level(H, k, dirs)
            assert ex.a_k <= r.min() + 1e-12
            assert ex.A_k >= r.max() - 1e-12
            # the 2000-angle scan resolves the extremes to about (2 pi / 2000)^2 * radius
            assert r.min() - ex.a_k < 1e-4 * k and ex.A_k - r.max() < 1e-4 * k


def test_isotropic_extremes_closed_form(iso):
    ex = level_extremes(iso, 2.0)
    assert ex.a_k == pytest.approx(2.0, rel=1e-12)
    assert ex.A_k == pytest.approx(2.0, rel=1e-12)


def test_ratio_constant(builtins):
    for H in builtins.values():
        assert ratio_constant(H) == pytest.approx(np.sqrt(H.beta / H.alpha))
