"""Sampling-based falsifiers for comparison properties.

Each checker searches a finite sample set for a violation of a comparison
property (general cones from above/below, general AMLE, K-comparison with
Euclidean cones, the segment inequality, Harnack, extremum principle).
``passed`` means no violation above ``tol`` was found on the samples; it is
evidence, not proof.  A failed check carries a witness that
:func:`reproduce_witness` re-evaluates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .cone import cone_level, cone_values
from .errors import InputError
from .field import DEFAULT_SAMPLES, Field, circle_points, radial_extremes
from .hamiltonian import Hamiltonian, ratio_constant, reflect

__all__ = [
    "Region",
    "ComparisonReport",
    "default_tol",
    "default_vertices",
    "DEFAULT_K_GRID",
    "check_cgca",
    "check_cgcb",
    "check_amle",
    "check_kcomparison",
    "check_segment",
    "check_harnack",
    "check_extremum_principle",
    "check_lipschitz_bound",
    "reproduce_witness",
]

DEFAULT_K_GRID = tuple(np.geomspace(1e-2, 1e2, 25))
DEFAULT_INTERIOR = 128


@dataclass(frozen=True)
class Region:
    """Open annulus ``inner < |x - center| < outer`` (a disk when inner = 0)."""

    center: tuple = (0.0, 0.0)
    inner: float = 0.0
    outer: float = 1.0

    def __post_init__(self):
        if not (0 <= self.inner < self.outer):
            raise InputError(f"need 0 <= inner < outer, got {self.inner}, {self.outer}")

    @property
    def c(self):
        return np.asarray(self.center, dtype=float)

    def boundary_points(self, N: int = DEFAULT_SAMPLES):
        pts = [circle_points(self.c, self.outer, N)]
        if self.inner > 0:
            pts.append(circle_points(self.c, self.inner, N))
        return np.vstack(pts)

    def interior_points(self, n: int = DEFAULT_INTERIOR):
        """Nodes of an n x n lattice over the bounding box, strictly inside."""
        t = np.linspace(-self.outer, self.outer, n + 2)[1:-1]
        X, Y = np.meshgrid(t, t, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        d = np.hypot(pts[:, 0], pts[:, 1])
        keep = (d > self.inner) & (d < self.outer)
        return pts[keep] + self.c

    def strictly_contains(self, pts):
        d = np.linalg.norm(np.asarray(pts, dtype=float) - self.c, axis=-1)
        return (d > self.inner) & (d < self.outer)


@dataclass
class ComparisonReport:
    property: str
    passed: Optional[bool]
    status: str  # pass | violation | vacuous | precondition_failed
    witness: Optional[dict] = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"property": self.property, "passed": self.passed, "status": self.status,
                "witness": _jsonable(self.witness), "details": _jsonable(self.details)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def default_tol(u: Field) -> float:
    """1e-8 for callable fields, max(1e-8, 10 h^2) for grid fields."""
    return 1e-8 if u.h is None else max(1e-8, 10 * u.h ** 2)


def default_vertices(region: Region):
    """The center (when it is outside the region) plus 4 points at distance 2R."""
    c, R = region.c, region.outer
    ring = c + 2 * R * np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    return np.vstack([c[None], ring]) if region.inner > 0 else ring


def _vertices(region, vertex_set):
    V = default_vertices(region) if vertex_set is None else np.atleast_2d(np.asarray(vertex_set, dtype=float))
    if np.any(region.strictly_contains(V)):
        raise InputError("cone vertices must lie outside the test region")
    return V


def _boundary_sup(region: Region, N: int, vals, f) -> float:
    """Boundary supremum of f: the best of the N-per-circle samples ``vals``,
    polished by a bounded search in angle between its two neighbours.

    Near a tangency (u and the cone agree along a ray) the sampled maximum
    alone falls short by O(N^-2), which would show up as a false violation.
    """
    j = int(np.argmax(vals))
    r = region.outer if j < N else region.inner
    th0 = 2 * np.pi * (j % N) / N
    dth = 2 * np.pi / N

    def neg(th):
        x = region.c + r * np.array([np.cos(th), np.sin(th)])
        return -float(f(x[None])[0])

    res = minimize_scalar(neg, bounds=(th0 - dth, th0 + dth), method="bounded", options={"xatol": 1e-10})
    return max(float(vals[j]), -float(res.fun))


def _report(prop, best, tol, details):
    if best is not None and best["magnitude"] > tol:
        return ComparisonReport(prop, False, "violation", best, details)
    return ComparisonReport(prop, True, "pass", None, details)


def _keep_worst(best, cand):
    if cand is not None and (best is None or cand["magnitude"] > best["magnitude"]):
        return cand
    return best


def _cone_check(u, H, region, vertex_set, k_grid, N, n_interior, tol, sign):
    """Shared body of CGCA (sign=+1) and CGCB (sign=-1)."""
    V = _vertices(region, vertex_set)
    k_grid = np.asarray(DEFAULT_K_GRID if k_grid is None else k_grid, dtype=float)
    tol = default_tol(u) if tol is None else tol
    Hc = H if sign > 0 else reflect(H)
    B = region.boundary_points(N)
    I = region.interior_points(n_interior)
    # sign=-1 is CGCA for -u with H^:  -u <= -b + C^{H^}(x - x0)
    uB, uI = sign * u(B), sign * u(I)
    best = None
    for x0 in V:
        DB, DI = B - x0, I - x0
        for k in k_grid:
            b = _boundary_sup(region, N, uB - cone_values(Hc, k, DB),
                              lambda X: sign * u(X) - cone_values(Hc, k, X - x0))
            viol = uI - b - cone_values(Hc, k, DI)
            j = int(np.argmax(viol))
            cand = {"vertex": x0.copy(), "k": float(k), "b": sign * b, "point": I[j].copy(),
                    "magnitude": float(viol[j])}
            best = _keep_worst(best, cand)
    prop = "CGCA" if sign > 0 else "CGCB"
    return _report(prop, best, tol, {"tol": tol, "n_boundary": len(B), "n_interior": len(I),
                                     "n_vertices": len(V), "n_levels": len(k_grid)})


def check_cgca(u: Field, H: Hamiltonian, region: Region, vertex_set=None, k_grid=None,
               N: int = DEFAULT_SAMPLES, n_interior: int = DEFAULT_INTERIOR, tol: Optional[float] = None):
    """Comparison with general cones from above.

    For every vertex x0 and level k, b = max over boundary samples of
    u - C_k^H(. - x0); a violation is an interior sample with
    u > b + C_k^H(. - x0) + tol.
    """
    return _cone_check(u, H, region, vertex_set, k_grid, N, n_interior, tol, +1)


def check_cgcb(u: Field, H: Hamiltonian, region: Region, vertex_set=None, k_grid=None,
               N: int = DEFAULT_SAMPLES, n_interior: int = DEFAULT_INTERIOR, tol: Optional[float] = None):
    """Comparison with general cones from below (mirror of :func:`check_cgca`)."""
    return _cone_check(u, H, region, vertex_set, k_grid, N, n_interior, tol, -1)


def _pair_excess(u_vals, pts, H, lam, rows=None):
    """max over ordered pairs (y, x) of u(y) - u(x) - C_lam(y - x)."""
    n = len(pts)
    rows = np.arange(n) if rows is None else rows
    best = (-np.inf, None, None)
    for i in rows:
        D = pts[i] - pts
        ex = u_vals[i] - u_vals - cone_values(H, lam, D)
        ex[i] = -np.inf
        j = int(np.argmax(ex))
        if ex[j] > best[0]:
            best = (float(ex[j]), int(i), j)
    return best


def boundary_level(u_vals, pts, H):
    """Smallest lam with u(y) - u(x) <= C_lam(y - x) for all sample pairs.

    Returns ``(lam, levels)`` with the pair levels as an (n, n) array.
    """
    n = len(pts)
    iy, ix = np.nonzero(~np.eye(n, dtype=bool))
    lev = np.zeros((n, n))
    lev[iy, ix] = cone_level(H, pts[iy] - pts[ix], u_vals[iy] - u_vals[ix])
    return float(lev.max()), lev


def refined_boundary_level(u: Field, H: Hamiltonian, region: Region, N: int = 180, starts: int = 4,
                           rounds: int = 14):
    """Boundary level sup over continuous boundary pairs.

    The discrete sup over N samples per circle underestimates the level by
    O((pi/N)^2).  The best discrete pairs are polished by a zoom search over
    the two boundary angles: a 9 x 9 angle lattice around the incumbent that
    shrinks fourfold per round.
    """
    B = region.boundary_points(N)
    lam, lev = boundary_level(u(B), B, H)
    radii = np.array([region.outer] + ([region.inner] if region.inner > 0 else []))
    c = region.c
    order = np.argsort(lev, axis=None, kind="stable")[::-1][:starts]
    a, b = np.unravel_index(order, lev.shape)
    ry, rx = radii[a // N], radii[b // N]
    ty, tx = 2 * np.pi * (a % N) / N, 2 * np.pi * (b % N) / N
    offs = np.linspace(-1.0, 1.0, 9)
    dy, dx = (g.ravel() for g in np.meshgrid(offs, offs, indexing="ij"))
    width = 2 * np.pi / N
    best = np.full(len(order), lam)
    for _ in range(rounds):
        TY = (ty[:, None] + width * dy[None]).ravel()
        TX = (tx[:, None] + width * dx[None]).ravel()
        Y = c + np.repeat(ry, dy.size)[:, None] * np.column_stack([np.cos(TY), np.sin(TY)])
        X = c + np.repeat(rx, dx.size)[:, None] * np.column_stack([np.cos(TX), np.sin(TX)])
        D = Y - X
        vals = cone_level(H, D, u(Y) - u(X))
        # pairs collapsing onto one point only probe the local gradient, which condition (b) covers
        vals[np.linalg.norm(D, axis=1) < 1e-3 * region.outer] = 0.0
        vals = vals.reshape(len(order), -1)
        j = np.argmax(vals, axis=1)
        ty, tx = TY.reshape(len(order), -1)[np.arange(len(order)), j], TX.reshape(len(order), -1)[np.arange(len(order)), j]
        best = np.maximum(best, vals[np.arange(len(order)), j])
        width /= 4
    return float(max(lam, best.max()))


def check_amle(u: Field, H: Hamiltonian, region: Region, lam: Optional[float] = None,
               boundary_N: int = 180, interior_n: int = 24, tol: Optional[float] = None):
    """General AMLE property on ``region``.

    With ``lam=None`` the level realised by the boundary data (the smallest
    lam for which the boundary pair condition holds) is used.  If the
    boundary condition fails for a given ``lam`` the test is vacuous.
    Otherwise checks (a) the pair inequality over all interior and boundary
    samples and (b) H(Du) <= lam + tol at the interior samples.
    """
    tol = default_tol(u) if tol is None else tol
    B = region.boundary_points(boundary_N)
    I = region.interior_points(interior_n)
    uB = u(B)
    realised = refined_boundary_level(u, H, region, boundary_N)
    details = {"tol": tol, "realized_level": realised, "n_boundary": len(B), "n_interior": len(I)}
    if lam is None:
        lam = realised
    lam = float(lam)
    details["level"] = lam
    if lam <= 0:
        # constant boundary data: cones of level 0 are not defined; only (b) applies
        lam_eff = None
    else:
        lam_eff = lam
        pre, _, _ = _pair_excess(uB, B, H, lam)
        details["boundary_excess"] = pre
        if pre > tol:
            return ComparisonReport("AMLE", None, "vacuous", None, details)
    best = None
    S = np.vstack([I, B])
    uS = np.concatenate([u(I), uB])
    if lam_eff is not None:
        ex, i, j = _pair_excess(uS, S, H, lam_eff, rows=np.arange(len(I)))
        ex2, i2, j2 = _pair_excess(uS, S, H, lam_eff, rows=np.arange(len(I), len(S)))
        if ex2 > ex:
            ex, i, j = ex2, i2, j2
        details["pair_excess"] = ex
        best = {"kind": "pair", "y": S[i].copy(), "x": S[j].copy(), "level": lam, "magnitude": ex}
    hv = H.eval(u.gradient(I))
    j = int(np.argmax(hv))
    details["max_H_Du"] = float(hv[j])
    best = _keep_worst(best, {"kind": "gradient", "point": I[j].copy(), "H_Du": float(hv[j]), "level": lam,
                              "magnitude": float(hv[j] - lam)})
    return _report("AMLE", best, tol, details)


def check_kcomparison(u: Field, H: Hamiltonian, region: Region, vertex_set=None, a_grid=None,
                      N: int = DEFAULT_SAMPLES, n_interior: int = DEFAULT_INTERIOR, tol: Optional[float] = None,
                      K: Optional[float] = None, side: str = "both"):
    """K-comparison with Euclidean cones a|x - x0| + b, K = sqrt(beta/alpha) by default.

    ``side`` is 'above', 'below' or 'both'; from below means -u compares
    from above.
    """
    if side not in ("above", "below", "both"):
        raise InputError("side must be above, below or both")
    V = _vertices(region, vertex_set)
    K = ratio_constant(H) if K is None else float(K)
    if K < 1:
        raise InputError("K must be >= 1")
    tol = default_tol(u) if tol is None else tol
    a_grid = np.asarray(np.geomspace(1e-2, 1e2, 25) if a_grid is None else a_grid, dtype=float)
    if np.any(a_grid < 0):
        raise InputError("slopes must be non-negative")
    B = region.boundary_points(N)
    I = region.interior_points(n_interior)
    uB0, uI0 = u(B), u(I)
    best = None
    for sgn in ([1.0] if side == "above" else [-1.0] if side == "below" else [1.0, -1.0]):
        uB, uI = sgn * uB0, sgn * uI0
        for x0 in V:
            rB = np.linalg.norm(B - x0, axis=1)
            rI = np.linalg.norm(I - x0, axis=1)
            for a in a_grid:
                b = _boundary_sup(region, N, uB - a * rB,
                                  lambda X: sgn * u(X) - a * np.linalg.norm(X - x0, axis=1))
                viol = uI - K * a * rI - b
                j = int(np.argmax(viol))
                best = _keep_worst(best, {"side": "above" if sgn > 0 else "below", "vertex": x0.copy(),
                                          "a": float(a), "b": b, "K": K, "point": I[j].copy(),
                                          "magnitude": float(viol[j])})
    return _report("KCOMP", best, tol, {"tol": tol, "K": K, "side": side})


def check_segment(u: Field, H: Hamiltonian, k0: float, pairs, tol: Optional[float] = None,
                  n_grad: int = 64):
    """u(y) - u(x) <= C_{k0}^H(y - x) for point pairs whose segment lies in the domain.

    Precondition: discrete H(Du) <= k0 + tol (at grid nodes for grid fields,
    along the segments otherwise).
    """
    tol = default_tol(u) if tol is None else tol
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 3 or pairs.shape[1:] != (2, 2):
        raise InputError("pairs must have shape (m, 2, 2)")
    t = np.linspace(0.0, 1.0, n_grad)
    seg = pairs[:, 0, None, :] * (1 - t)[None, :, None] + pairs[:, 1, None, :] * t[None, :, None]
    seg = seg.reshape(-1, 2)
    if not np.all(u.domain.contains(seg)):
        raise InputError("a segment leaves the domain of the field")
    if u.grid is not None:
        origin, h, vals = u.grid
        gx = (vals[2:, 1:-1] - vals[:-2, 1:-1]) / (2 * h)
        gy = (vals[1:-1, 2:] - vals[1:-1, :-2]) / (2 * h)
        xs = origin[0] + h * np.arange(1, vals.shape[0] - 1)
        ys = origin[1] + h * np.arange(1, vals.shape[1] - 1)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        inside = u.domain.contains(np.stack([X, Y], axis=-1))
        hv = H.eval(np.stack([gx, gy], axis=-1))[inside]
    else:
        hv = H.eval(u.gradient(seg))
    hmax = float(np.max(hv))
    details = {"tol": tol, "level": float(k0), "max_H_Du": hmax}
    if hmax > k0 + tol:
        return ComparisonReport("SEGMENT", None, "precondition_failed", None, details)
    y, x = pairs[:, 1], pairs[:, 0]
    viol = u(y) - u(x) - cone_values(H, k0, y - x)
    j = int(np.argmax(viol))
    best = {"x": x[j].copy(), "y": y[j].copy(), "level": float(k0), "magnitude": float(viol[j])}
    details["max_excess"] = float(viol[j])
    return _report("SEGMENT", best, tol, details)


def check_harnack(u: Field, H: Hamiltonian, x0, radii, N: int = DEFAULT_SAMPLES, R: Optional[float] = None,
                  tol: Optional[float] = None):
    """M(r) <= e^{K pi} m(r) on circles around x0 for a non-negative u."""
    radii = np.asarray(radii, dtype=float)
    if R is not None and np.any(radii >= R / 2):
        raise InputError("Harnack radii must be below R/2")
    tol = default_tol(u) if tol is None else tol
    ext = radial_extremes(u, x0, radii, N)
    if np.any(ext.m < 0):
        raise InputError("Harnack inequality needs a non-negative field")
    Kt = float(np.exp(ratio_constant(H) * np.pi))
    viol = ext.M - Kt * ext.m
    j = int(np.argmax(viol))
    ratios = np.where(ext.m > 0, ext.M / np.where(ext.m > 0, ext.m, 1.0), np.inf)
    best = {"radius": float(radii[j]), "m": float(ext.m[j]), "M": float(ext.M[j]), "constant": Kt,
            "magnitude": float(viol[j])}
    return _report("HARNACK", best, tol, {"tol": tol, "constant": Kt, "max_ratio": float(np.max(ratios)),
                                          "ratios": ratios})


def check_extremum_principle(u: Field, region: Region, N_boundary: int = DEFAULT_SAMPLES,
                             N_interior: int = DEFAULT_INTERIOR, tol: Optional[float] = None):
    """Interior samples stay within [min, max] of the boundary samples."""
    tol = default_tol(u) if tol is None else tol
    B = region.boundary_points(N_boundary)
    I = region.interior_points(N_interior)
    uB, uI = u(B), u(I)
    over, under = uI - uB.max(), uB.min() - uI
    i, j = int(np.argmax(over)), int(np.argmax(under))
    best = None
    best = _keep_worst(best, {"kind": "max", "point": I[i].copy(), "magnitude": float(over[i])})
    best = _keep_worst(best, {"kind": "min", "point": I[j].copy(), "magnitude": float(under[j])})
    return _report("MAXPRIN", best, tol, {"tol": tol})


def check_lipschitz_bound(u: Field, H: Hamiltonian, region: Region, n_interior: int = 64,
                          slack: float = 0.0, K: Optional[float] = None):
    """|Du(x)| <= 2K sup|u| / dist(x, boundary) + slack at interior samples (disk regions)."""
    if region.inner > 0:
        raise InputError("Lipschitz bound check uses disk regions")
    K = ratio_constant(H) if K is None else float(K)
    I = region.interior_points(n_interior)
    sup = float(max(np.abs(u(I)).max(), np.abs(u(region.boundary_points())).max()))
    dist = region.outer - np.linalg.norm(I - region.c, axis=1)
    bound = 2 * K * sup / dist + slack
    g = np.linalg.norm(u.gradient(I), axis=1)
    viol = g - bound
    j = int(np.argmax(viol))
    best = {"point": I[j].copy(), "grad_norm": float(g[j]), "bound": float(bound[j]), "magnitude": float(viol[j])}
    return _report("LIPSCHITZ", best, 0.0, {"K": K, "sup_abs": sup})


def reproduce_witness(report: ComparisonReport, u: Field, H: Hamiltonian) -> float:
    """Re-evaluate the violation magnitude recorded in ``report.witness``."""
    w = report.witness
    if w is None:
        raise InputError("report has no witness")
    p = report.property
    if p == "CGCA":
        return float(u(w["point"]) - w["b"] - cone_values(H, w["k"], w["point"] - w["vertex"]))
    if p == "CGCB":
        return float(w["b"] - cone_values(reflect(H), w["k"], w["point"] - w["vertex"]) - u(w["point"]))
    if p == "AMLE":
        if w["kind"] == "pair":
            return float(u(w["y"]) - u(w["x"]) - cone_values(H, w["level"], w["y"] - w["x"]))
        return float(H.eval(u.gradient(w["point"])) - w["level"])
    if p == "KCOMP":
        s = 1.0 if w["side"] == "above" else -1.0
        r = float(np.linalg.norm(w["point"] - w["vertex"]))
        return float(s * u(w["point"]) - w["K"] * w["a"] * r - w["b"])
    if p == "SEGMENT":
        return float(u(w["y"]) - u(w["x"]) - cone_values(H, w["level"], w["y"] - w["x"]))
    if p == "HARNACK":
        ext = radial_extremes(u, report.details.get("center", (0.0, 0.0)), [w["radius"]])
        return float(ext.M[0] - w["constant"] * ext.m[0])
    if p == "MAXPRIN":
        raise InputError("extremum-principle witnesses depend on the boundary sample set")
    raise InputError(f"cannot reproduce witness for {p}")
