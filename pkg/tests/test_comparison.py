import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aronsson import InputError
from aronsson.comparison import (Region, boundary_level, check_amle, check_cgca, check_cgcb,
                                 check_extremum_principle, check_harnack, check_kcomparison, check_lipschitz_bound,
                                 check_segment, default_tol, default_vertices, refined_boundary_level,
                                 reproduce_witness)
from aronsson.field import Field, aronsson43, cone_field, cone_hat_field, paraboloid, plane, radial_perturbation

ANN = Region((0.0, 0.0), 0.5, 1.0)
DISK = Region((0.0, 0.0), 0.0, 1.0)
FAST = dict(N=240, n_interior=48)


def exact_family(H):
    return [plane([0.4, -0.3], 1.0), cone_field(H, 1.3), cone_hat_field(H, 0.7, b=2.0)]


@pytest.mark.parametrize("name", ["isotropic", "anisotropic", "shifted"])
def test_exact_solutions_pass_both_cone_checks(builtins, name):
    H = builtins[name]
    for u in exact_family(H):
        assert check_cgca(u, H, ANN, **FAST).status == "pass"
        assert check_cgcb(u, H, ANN, **FAST).status == "pass"


def test_paraboloids_fail_on_one_side(aniso):
    up, down = paraboloid(1.0), paraboloid(-1.0)
    assert check_cgca(up, aniso, DISK, **FAST).passed
    rep = check_cgcb(up, aniso, DISK, **FAST)
    assert rep.status == "violation"
    assert reproduce_witness(rep, up, aniso) == pytest.approx(rep.witness["magnitude"], rel=1e-9)
    rep = check_cgca(down, aniso, DISK, **FAST)
    assert rep.status == "violation"
    assert reproduce_witness(rep, down, aniso) == pytest.approx(rep.witness["magnitude"], rel=1e-9)


def test_report_is_deterministic_and_serialisable(shifted):
    u = cone_field(shifted, 1.0) + radial_perturbation(0.3)
    a = check_cgcb(u, shifted, ANN, **FAST).to_dict()
    b = check_cgcb(u, shifted, ANN, **FAST).to_dict()
    assert a == b
    import json
    json.dumps(a)


def test_vertices_inside_region_rejected(iso):
    with pytest.raises(InputError):
        check_cgca(plane([1, 0]), iso, DISK, vertex_set=[[0.1, 0.0]])
    assert len(default_vertices(ANN)) == 5 and len(default_vertices(DISK)) == 4


def test_region_validation():
    with pytest.raises(InputError):
        Region((0, 0), 1.0, 0.5)
    pts = ANN.interior_points(20)
    assert np.all(ANN.strictly_contains(pts))


def test_boundary_level_of_cone_pairs(aniso):
    B = ANN.boundary_points(90)
    lam, L = boundary_level(cone_field(aniso, 1.5)(B), B, aniso)
    assert lam <= 1.5 + 1e-9
    assert L.shape == (len(B), len(B))


def test_refined_boundary_level_of_plane(shifted):
    p = np.array([0.5, 0.2])
    lam = refined_boundary_level(plane(p), shifted, ANN)
    assert lam == pytest.approx(shifted(p), rel=1e-6)


@pytest.mark.parametrize("name", ["isotropic", "anisotropic", "shifted"])
def test_amle_on_exact_fields(builtins, name):
    H = builtins[name]
    for u in exact_family(H):
        assert check_amle(u, H, ANN).status == "pass"


def test_amle_on_x43(iso):
    # off the axes the field solves the isotropic equation
    R = Region((0.6, 0.6), 0.0, 0.4)
    assert check_amle(aronsson43(), iso, R).status == "pass"


def test_amle_detects_paraboloid(iso):
    u = paraboloid(1.0)
    rep = check_amle(u, iso, DISK)
    assert rep.status == "violation"
    assert reproduce_witness(rep, u, iso) == pytest.approx(rep.witness["magnitude"], rel=1e-6)


def test_amle_vacuous_when_level_too_small(iso):
    rep = check_amle(cone_field(iso, 1.0), iso, ANN, lam=0.5)
    assert rep.status == "vacuous" and rep.passed is None


def test_kcomparison(builtins):
    for H in builtins.values():
        assert check_kcomparison(cone_field(H, 1.2), H, ANN, **FAST).passed
    # a convex paraboloid compares with Euclidean cones from above only
    H = builtins["anisotropic"]
    u = paraboloid(1.0)
    assert check_kcomparison(u, H, DISK, side="above", **FAST).passed
    rep = check_kcomparison(u, H, DISK, side="below", **FAST)
    assert rep.status == "violation" and rep.witness["side"] == "below"
    assert reproduce_witness(rep, u, H) == pytest.approx(rep.witness["magnitude"], rel=1e-6)


def test_segment_inequality(shifted, rng):
    u = cone_field(shifted, 0.9)
    pairs = rng.uniform(-0.7, 0.7, size=(300, 2, 2))
    assert check_segment(u, shifted, 0.9, pairs).status == "pass"
    assert check_segment(u, shifted, 0.5, pairs).status == "precondition_failed"
    with pytest.raises(InputError):
        check_segment(u, shifted, 0.9, pairs[:, 0])


def test_segment_precondition_on_grid_uses_grid_gradient(iso):
    t = np.linspace(-1, 1, 41)
    X, Y = np.meshgrid(t, t, indexing="ij")
    g = Field.from_grid((-1.0, -1.0), 0.05, 0.6 * X + 0.8 * Y)
    pairs = np.array([[[-0.5, -0.5], [0.5, 0.4]], [[0.2, -0.1], [-0.3, 0.6]]])
    assert check_segment(g, iso, 0.5 + 1e-6, pairs).status == "pass"
    assert check_segment(g, iso, 0.4, pairs).status == "precondition_failed"


def test_harnack(builtins):
    for H in builtins.values():
        u = cone_field(H, 1.0, center=(1.5, 0.0))
        rep = check_harnack(u, H, (0.0, 0.0), [0.1, 0.2, 0.4], R=1.0)
        assert rep.passed
        assert rep.details["max_ratio"] <= rep.details["constant"]
    with pytest.raises(InputError):
        check_harnack(plane([1.0, 0.0]), builtins["isotropic"], (0, 0), [0.1])
    with pytest.raises(InputError):
        check_harnack(cone_field(H, 1.0), H, (0, 0), [0.6], R=1.0)


def test_harnack_violation_for_non_solution(iso):
    # a nonnegative field with a deep, narrow well breaks the ratio bound
    u = Field(lambda x: 1e-4 + (x[..., 0] - 0.1) ** 2 + x[..., 1] ** 2, name="well")
    rep = check_harnack(u, iso, (0, 0), [0.1], R=1.0)
    assert rep.status == "violation"
    assert reproduce_witness(rep, u, iso) == pytest.approx(rep.witness["magnitude"], rel=1e-9)


def test_extremum_principle(iso):
    assert check_extremum_principle(cone_field(iso, 1.0), ANN).passed
    assert check_extremum_principle(-paraboloid(1.0), DISK).status == "violation"


def test_lipschitz_bound(builtins):
    for H in builtins.values():
        assert check_lipschitz_bound(plane([0.3, 0.2], 1.0), H, DISK).passed
    with pytest.raises(InputError):
        check_lipschitz_bound(plane([0.3, 0.2]), builtins["isotropic"], ANN)


def test_default_tolerance_depends_on_grid():
    g = Field.from_grid((0.0, 0.0), 0.1, np.zeros((5, 5)))
    assert default_tol(g) == pytest.approx(0.1)
    assert default_tol(plane([0, 0])) == 1e-8


def test_tangent_plane_passes_with_coarse_boundary(iso):
    # |p| = sqrt(2) matches the level-1 cone slope along the diagonal, which no
    # boundary sample hits; the sampled supremum alone is 1e-4 short
    assert check_cgca(plane([1.0, 1.0]), iso, ANN, N=90, n_interior=16).passed


@settings(max_examples=15)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 4.0))
def test_planes_and_cones_always_pass(iso, a, b, k):
    assert check_cgca(plane([a, b]), iso, ANN, N=90, n_interior=16).passed
    assert check_cgcb(cone_field(iso, k), iso, ANN, N=90, n_interior=16).passed
