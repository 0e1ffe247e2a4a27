import json

import numpy as np
import pytest

from aronsson import InputError
from aronsson.cone import sublevel_boundary
from aronsson.field import Domain, cone_field, cone_hat_field, plane, radial_perturbation
from aronsson.singularity import (ClassifyConfig, blowup_mesh, blowup_sequence, classify, corollary_domain_check,
                                  detect_strict_growth, flow_trace, limit_at_center, ray_equality_check)


def test_limit_of_shifted_cone_is_exact(aniso):
    res = limit_at_center(cone_field(aniso, 1.0, b=2.5), (0, 0))
    assert res.status == "converged"
    assert res.b == pytest.approx(2.5, abs=1e-12)
    # radii are listed largest first
    assert res.monotone_M == "nonincreasing"


def test_limit_rejects_negative_fields(iso):
    with pytest.raises(InputError):
        limit_at_center(plane([1.0, 0.0]), (0, 0))


def test_limit_inconclusive_for_oscillation():
    from aronsson.field import Field
    u = Field(lambda x: 2.0 + 0.5 * np.sin(np.arctan2(x[..., 1], x[..., 0])), name="angular")
    res = limit_at_center(u, (0, 0))
    assert res.status == "inconclusive" and res.b is None


def test_blowup_of_cone_is_scale_invariant(shifted):
    lad = blowup_sequence(cone_field(shifted, 1.5, b=1.0), (0, 0), 1.0, [0.5, 0.25, 0.125], n_r=8, n_theta=36)
    assert lad.values.shape == (3, 8, 36)
    assert np.allclose(lad.values[0], lad.values[2], atol=1e-12)
    assert not lad.truncated


def test_blowup_truncates_outside_domain(iso):
    u = cone_field(iso, 1.0, domain=Domain(outer=0.3))
    lad = blowup_sequence(u, (0, 0), 0.0, [0.5, 0.25, 0.125], n_r=4, n_theta=8)
    assert lad.truncated and list(lad.scales) == [0.25, 0.125]
    r, E, P = blowup_mesh(4, 8)
    assert P.shape == (4, 8, 2) and r[0] == 0.5 and r[-1] == 1.0


@pytest.mark.parametrize("name", ["isotropic", "anisotropic", "shifted"])
def test_classifier_cases(builtins, name):
    H = builtins[name]
    cases = [
        (cone_field(H, 2.0, 3.0), "cone_plus", 2.0, 3.0),
        (cone_hat_field(H, 0.5, 4.0), "cone_minus", 0.5, 4.0),
        (plane([0.3, -0.2], 2.0), "removable", None, 2.0),
        (cone_field(H, 1.0, 3.0) + radial_perturbation(0.5), "cone_plus", 1.0, 3.0),
    ]
    for u, verdict, k, b in cases:
        rep = classify(u, H, (0.0, 0.0), ClassifyConfig(radius=0.25))
        assert rep.verdict == verdict
        assert rep.limit_value == pytest.approx(b, abs=1e-3)
        if k is not None:
            assert rep.fitted_level == pytest.approx(k, rel=1e-2)
        json.dumps(rep.to_dict())


def test_classifier_removable_slope(aniso):
    rep = classify(plane([0.3, -0.2], 2.0), aniso, (0.0, 0.0), ClassifyConfig(radius=0.25))
    assert np.allclose(rep.fitted_slope, [0.3, -0.2], atol=1e-6)


def test_classifier_inconclusive_without_limit(iso):
    from aronsson.field import Field
    u = Field(lambda x: 2.0 + 0.5 * np.sin(np.arctan2(x[..., 1], x[..., 0])), name="angular")
    rep = classify(u, iso, (0, 0))
    assert rep.verdict == "inconclusive" and "reason" in rep.branches


def test_strict_growth_detector(shifted):
    case, det = detect_strict_growth(cone_field(shifted, 1.0, 1.0), (0, 0), u0=1.0)
    assert case == "case_ii" and det["eps"] > 0
    case, _ = detect_strict_growth(cone_hat_field(shifted, 1.0, 1.0), (0, 0), u0=1.0)
    assert case == "case_iii"
    case, _ = detect_strict_growth(plane([0.2, 0.1], 1.0), (0, 0), u0=1.0)
    assert case == "neither"


def test_ray_equality_on_cone(aniso):
    e = np.array([0.6, 0.8])
    u = cone_field(aniso, 1.0, center=(0.0, 0.0))
    x0 = 2.0 * e
    # between the vertex and x0 the cone is linear along the ray
    rep = ray_equality_check(u, aniso, x0, e, -np.linspace(0, 1.5, 16))
    assert rep.max_deviation < 1e-12
    off = ray_equality_check(u, aniso, x0, np.array([0.8, -0.6]), -np.linspace(0, 1.5, 16))
    assert off.max_deviation > 1e-3
    with pytest.raises(InputError):
        ray_equality_check(u, aniso, x0, 2 * e, [-0.1])
    with pytest.raises(InputError):
        ray_equality_check(u, aniso, x0, e, [0.1])


@pytest.mark.parametrize("name", ["isotropic", "anisotropic", "shifted"])
def test_flow_reaches_vertex_of_cone(builtins, name):
    H = builtins[name]
    u = cone_field(H, 1.0)
    start = np.array([0.8, -0.5])
    ft = flow_trace(u, H, start, 1e-3)
    assert ft.status == "arrived"
    assert ft.level_drift < 1e-10
    from aronsson import cone_values
    assert ft.line_integral == pytest.approx(-cone_values(H, 1.0, start[None])[0], rel=1e-8)


def test_flow_exits_domain(iso):
    u = plane([1.0, 0.0], 0.0, domain=Domain(outer=1.0))
    ft = flow_trace(u, iso, (0.5, 0.5), 0.01, x0=(5.0, 5.0))
    assert ft.status == "exited"


def test_domain_check(aniso, shifted):
    for H in (aniso, shifted):
        B = sublevel_boundary(H, 2.0, N=360)
        dc = corollary_domain_check(H, 2.0, B)
        assert dc.passed and dc.k0_error <= 1e-6
        bad = corollary_domain_check(H, 2.0, 1.01 * B)
        assert not bad.passed


def test_domain_check_on_disk(iso):
    th = np.linspace(0, 2 * np.pi, 90, endpoint=False)
    rho = 0.5
    B = rho * np.column_stack([np.cos(th), np.sin(th)])
    dc = corollary_domain_check(iso, 1 / (2 * rho ** 2), B)
    assert dc.passed
    assert dc.k0 == pytest.approx(1 / (2 * rho ** 2), rel=1e-9)
