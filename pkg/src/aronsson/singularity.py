"""Isolated singularities: limits, blow-ups, cone classification and flows.

The classifier reports decay evidence over a ladder of scales; a finite
ladder cannot prove an o(|x|) statement, so every verdict ships with the
per-scale fit residuals it was based on.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cone import cone_values
from .errors import InputError
from .field import DEFAULT_SAMPLES, Field, circle_points, monotone_direction, radial_extremes, slope_minus, \
    slope_plus
from .hamiltonian import Hamiltonian, reflect

__all__ = [
    "LimitResult",
    "limit_at_center",
    "BlowupLadder",
    "blowup_sequence",
    "ClassifyConfig",
    "SingularityReport",
    "classify",
    "detect_strict_growth",
    "RayReport",
    "ray_equality_check",
    "FlowTrace",
    "flow_trace",
    "DomainCheck",
    "corollary_domain_check",
]

MESH_RADII = 64
MESH_ANGLES = 720
DEFAULT_LADDER = tuple(2.0 ** -np.arange(1, 21))


def _ladder(R, radii):
    return np.asarray(R * np.asarray(DEFAULT_LADDER) if radii is None else radii, dtype=float)


# ----------------------------------------------------------------------------
# limit at the puncture


@dataclass
class LimitResult:
    b: Optional[float]
    status: str  # converged | inconclusive
    radii: np.ndarray
    m: np.ndarray
    M: np.ndarray
    gap: float
    monotone_m: str
    monotone_M: str

    def to_dict(self):
        return {"b": self.b, "status": self.status, "radii": self.radii.tolist(), "m": self.m.tolist(),
                "M": self.M.tolist(), "gap": self.gap, "monotone_m": self.monotone_m,
                "monotone_M": self.monotone_M}


def limit_at_center(u: Field, x0, radii=None, N: int = DEFAULT_SAMPLES, R: float = 1.0,
                    rel_gap: float = 1e-3) -> LimitResult:
    """Limit of a non-negative u at x0 from circle minima m(r) and maxima M(r).

    ``radii`` decrease (default R 2^-j, j = 1..20).  The limit is the value
    at r = 0 of the line through the last two midpoints (m + M)/2, which is
    exact when u - b is positively homogeneous near x0.  It is accepted when
    the last gap M - m is at most rel_gap * max(1, b); otherwise the result is
    inconclusive and ``b`` is None.
    """
    radii = _ladder(R, radii)
    if radii.size < 2 or np.any(np.diff(radii) >= 0) or radii[-1] <= 0:
        raise InputError("radii must be positive and decreasing")
    ext = radial_extremes(u, x0, radii, N)
    if np.any(ext.m < 0):
        raise InputError("limit_at_center needs a non-negative field")
    mid = 0.5 * (ext.m + ext.M)
    r1, r2 = radii[-2], radii[-1]
    b = mid[-1] - (mid[-2] - mid[-1]) * r2 / (r1 - r2)
    gap = float(ext.M[-1] - ext.m[-1])
    ok = gap <= rel_gap * max(1.0, abs(b))
    return LimitResult(float(b) if ok else None, "converged" if ok else "inconclusive", radii, ext.m, ext.M,
                       gap, ext.monotone_m, ext.monotone_M)


# ----------------------------------------------------------------------------
# blow-ups


def blowup_mesh(n_r: int = MESH_RADII, n_theta: int = MESH_ANGLES):
    """Polar mesh of the annulus 1/2 <= |x| <= 1: (radii, unit directions, points)."""
    r = np.linspace(0.5, 1.0, n_r)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    E = np.column_stack([np.cos(th), np.sin(th)])
    return r, E, r[:, None, None] * E[None, :, :]


@dataclass
class BlowupLadder:
    scales: np.ndarray
    radii: np.ndarray
    directions: np.ndarray
    values: np.ndarray  # (scales, n_r, n_theta)
    truncated: bool


def blowup_sequence(u: Field, x0, b: float, h_ladder, n_r: int = MESH_RADII,
                    n_theta: int = MESH_ANGLES) -> BlowupLadder:
    """w_h(x) = (u(x0 + h x) - b) / h on the annulus mesh for each scale h.

    Scales whose mesh leaves the domain of u are dropped and flagged.
    """
    x0 = np.asarray(x0, dtype=float)
    hs = np.asarray(h_ladder, dtype=float)
    if np.any(hs <= 0) or np.any(np.diff(hs) >= 0):
        raise InputError("blow-up scales must be positive and decreasing")
    r, E, P = blowup_mesh(n_r, n_theta)
    kept, vals = [], []
    for h in hs:
        pts = x0 + h * P
        if not np.all(u.domain.contains(pts)):
            continue
        kept.append(h)
        vals.append((u(pts) - b) / h)
    return BlowupLadder(np.array(kept), r, E, np.array(vals).reshape(len(kept), n_r, n_theta),
                        len(kept) < len(hs))


def _blowup_field(u: Field, x0, b, h) -> Field:
    x0 = np.asarray(x0, dtype=float)

    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        nz = np.any(x != 0, axis=-1)
        out[nz] = (u(x0 + h * x[nz]) - b) / h
        return out

    return Field(f, name=f"blowup({u.name},{h!r})")


# ----------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ClassifyConfig:
    radius: float = 1.0
    limit_radii: Optional[tuple] = None
    h_ladder: Optional[tuple] = None
    affine_ratio: float = 0.1
    affine_consistency: float = 1e-2
    cone_distance: float = 0.05
    k_stability: float = 0.01
    N: int = DEFAULT_SAMPLES
    n_r: int = MESH_RADII
    n_theta: int = MESH_ANGLES


@dataclass
class SingularityReport:
    center: np.ndarray
    limit_value: Optional[float]
    verdict: str  # removable | cone_plus | cone_minus | inconclusive
    fitted_level: Optional[float]
    fitted_slope: Optional[np.ndarray]
    scales: np.ndarray
    fit_residuals: dict
    limit: LimitResult
    branches: dict = field(default_factory=dict)

    def to_dict(self):
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, dict):
                return {k: conv(w) for k, w in v.items()}
            if isinstance(v, (np.floating, np.bool_)):
                return v.item()
            return v
        return {"center": self.center.tolist(), "limit_value": self.limit_value, "verdict": self.verdict,
                "fitted_level": self.fitted_level,
                "fitted_slope": None if self.fitted_slope is None else self.fitted_slope.tolist(),
                "scales": self.scales.tolist(), "fit_residuals": conv(self.fit_residuals),
                "branches": conv(self.branches), "limit": self.limit.to_dict()}


def _affine_fits(lad: BlowupLadder):
    """Least-squares p per scale (w ~ p.x + c) and sup-residual / sup|w| ratios."""
    P = lad.radii[:, None, None] * lad.directions[None]
    X = np.column_stack([P.reshape(-1, 2), np.ones(P.shape[0] * P.shape[1])])
    ps, ratios = [], []
    for w in lad.values:
        y = w.ravel()
        coef = np.linalg.lstsq(X, y, rcond=None)[0]
        scale = np.max(np.abs(y))
        res = np.max(np.abs(y - X @ coef))
        ps.append(coef[:2])
        ratios.append(0.0 if scale == 0 else res / scale)
    return np.array(ps), np.array(ratios)


def _cone_fits(lad: BlowupLadder, H, u, x0, b, N, sign):
    """Per scale: level k from the r = 1 slope and relative sup distance to the cone."""
    Hc = H if sign > 0 else reflect(H)
    ks, dists = [], []
    for h, w in zip(lad.scales, lad.values):
        wf = _blowup_field(u, x0, b, h)
        k = slope_plus(wf, H, np.zeros(2), 1.0, N) if sign > 0 else slope_minus(wf, H, np.zeros(2), 1.0, N)
        if k <= 0:
            ks.append(0.0)
            dists.append(np.inf)
            continue
        ce = cone_values(Hc, k, lad.directions)  # homogeneity: C(r e) = r C(e)
        cone = sign * lad.radii[:, None] * ce[None, :]
        ks.append(k)
        dists.append(np.max(np.abs(w - cone)) / np.max(np.abs(cone)))
    return np.array(ks), np.array(dists)


# Fit ratios below this are rounding noise: blowing up divides the rounding
# error of u - b by h, so exact fits show ratios growing like eps / h.
FIT_NOISE = 1e-6


def _non_increasing(v, rtol=1e-9, floor=FIT_NOISE):
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        return False
    v = np.maximum(v, floor)
    return bool(np.all(np.diff(v) <= rtol * np.maximum(1.0, np.abs(v[:-1]))))


def classify(u: Field, H: Hamiltonian, x0, config: ClassifyConfig = ClassifyConfig()) -> SingularityReport:
    """Removable point, positive cone or negative cone at x0, from blow-up fits."""
    x0 = np.asarray(x0, dtype=float)
    lim = limit_at_center(u, x0, config.limit_radii, config.N, config.radius)
    empty = np.zeros(0)
    if lim.status != "converged":
        return SingularityReport(x0, None, "inconclusive", None, None, empty, {}, lim,
                                 {"reason": "limit did not converge"})
    b = lim.b
    lad = blowup_sequence(u, x0, b, _ladder(config.radius, config.h_ladder), config.n_r, config.n_theta)
    if lad.scales.size < 2:
        return SingularityReport(x0, b, "inconclusive", None, None, lad.scales, {}, lim,
                                 {"reason": "fewer than two usable blow-up scales"})
    ps, aff = _affine_fits(lad)
    kp, dp = _cone_fits(lad, H, u, x0, b, config.N, +1)
    km, dm = _cone_fits(lad, H, u, x0, b, config.N, -1)

    p_last, p_prev = ps[-1], ps[-2]
    removable = bool(aff[-1] < config.affine_ratio and _non_increasing(aff)
                     and np.linalg.norm(p_last - p_prev) <= config.affine_consistency * max(1.0, np.linalg.norm(p_last)))

    def cone_ok(ks, ds):
        return bool(ks[-1] > 0 and ds[-1] < config.cone_distance
                    and abs(ks[-1] - ks[-2]) <= config.k_stability * ks[-1])

    plus, minus = cone_ok(kp, dp), cone_ok(km, dm)
    branches = {
        "removable": {"ok": removable, "slope": p_last, "ratios": aff, "decreasing": _non_increasing(aff)},
        "cone_plus": {"ok": plus, "levels": kp, "distances": dp, "decreasing": _non_increasing(dp)},
        "cone_minus": {"ok": minus, "levels": km, "distances": dm, "decreasing": _non_increasing(dm)},
    }
    fits = {"affine_ratio": aff, "cone_plus_distance": dp, "cone_minus_distance": dm}
    hits = [name for name, ok in (("removable", removable), ("cone_plus", plus), ("cone_minus", minus)) if ok]
    if lad.truncated:
        branches["truncated"] = True
    if len(hits) != 1:
        if len(hits) > 1:
            branches["reason"] = "conflicting verdicts: " + ", ".join(hits)
        return SingularityReport(x0, b, "inconclusive", None, None, lad.scales, fits, lim, branches)
    v = hits[0]
    k = None if v == "removable" else float((kp if v == "cone_plus" else km)[-1])
    p = p_last if v == "removable" else None
    return SingularityReport(x0, b, v, k, p, lad.scales, fits, lim, branches)


def detect_strict_growth(u: Field, x0, H: Optional[Hamiltonian] = None, radii=None, eps_grid=None,
                         u0: Optional[float] = None, N: int = DEFAULT_SAMPLES, R: float = 1.0):
    """Strict cone growth test: 'case_ii', 'case_iii' or 'neither'.

    Fits p by least squares on the smallest probe circle, then looks for
    eps in the grid (default 2^-j, j = 1..20) with
    u - u0 - p.x >= eps |x| on all samples (case_ii), or the mirror
    u - u0 - p.x <= -eps |x| (case_iii).  ``u0`` defaults to the limit at x0.
    Returns ``(case, details)``.
    """
    x0 = np.asarray(x0, dtype=float)
    radii = _ladder(R, radii)[:10] if radii is None else np.asarray(radii, dtype=float)
    eps = np.asarray(2.0 ** -np.arange(1, 21) if eps_grid is None else eps_grid, dtype=float)
    if u0 is None:
        u0 = float(np.mean(u(circle_points(x0, radii.min() * 1e-6, N))))
    rmin = radii.min()
    D = circle_points(np.zeros(2), rmin, N)
    p = np.linalg.lstsq(D, u(x0 + D) - u0, rcond=None)[0]
    g = []
    for r in radii:
        D = circle_points(np.zeros(2), r, N)
        g.append((u(x0 + D) - u0 - D @ p) / r)
    g = np.concatenate(g)
    lo, hi = float(g.min()), float(g.max())
    ok_ii = eps[eps <= lo]
    ok_iii = eps[eps <= -hi]
    details = {"slope": p, "inf_ratio": lo, "sup_ratio": hi, "u0": u0}
    if ok_ii.size:
        details["eps"] = float(ok_ii.max())
        return "case_ii", details
    if ok_iii.size:
        details["eps"] = float(ok_iii.max())
        return "case_iii", details
    return "neither", details


@dataclass
class RayReport:
    t: np.ndarray
    deviation: np.ndarray
    max_deviation: float
    cone_slope: float


def ray_equality_check(u: Field, H: Hamiltonian, x0, e, t_grid) -> RayReport:
    """Deviation of u(x0 + t e) - u(x0) - t C_1^H(e) over ``t_grid`` (t <= 0)."""
    e = np.asarray(e, dtype=float)
    if abs(np.linalg.norm(e) - 1) > 1e-9:
        raise InputError("e must be a unit vector")
    t = np.asarray(t_grid, dtype=float)
    if np.any(t > 0):
        raise InputError("t_grid must be non-positive")
    x0 = np.asarray(x0, dtype=float)
    c1 = float(cone_values(H, 1.0, e[None])[0])
    dev = u(x0 + t[:, None] * e) - u(x0) - t * c1
    return RayReport(t, dev, float(np.max(np.abs(dev))), c1)


# ----------------------------------------------------------------------------
# characteristic flow


@dataclass
class FlowTrace:
    start: np.ndarray
    step: float
    states: np.ndarray
    levels: np.ndarray
    status: str  # arrived | exited | max_steps | blowup
    level_drift: float
    line_integral: float
    arrival_time: Optional[float]

    def to_dict(self):
        return {"start": self.start.tolist(), "step": self.step, "status": self.status,
                "level_drift": self.level_drift, "line_integral": self.line_integral,
                "arrival_time": self.arrival_time, "n_states": int(len(self.states))}


def flow_trace(u: Field, H: Hamiltonian, start, step: float, max_steps: int = 100_000, x0=(0.0, 0.0),
               arrival_radius: Optional[float] = None, grad_limit: float = 1e8) -> FlowTrace:
    """Integrate xi' = -H_p(Du(xi)) with classical RK4.

    Stops once the trace is within ``arrival_radius`` of x0 (default: one
    step of travel), leaves the domain, or after ``max_steps``.  The line
    integral of Du . xi' (trapezoid rule) is closed by the chord
    Du(xi_end) . (x0 - xi_end) so that for cones it approximates -C(start - x0).
    """
    if not step > 0:
        raise InputError("step must be positive")
    xi = np.asarray(start, dtype=float).copy()
    x0 = np.asarray(x0, dtype=float)
    g0 = u.gradient(xi[None])[0]
    if not np.linalg.norm(g0) > 1e-10:
        raise InputError("flow needs a non-vanishing gradient at the start point")

    def vel(p):
        g = u.gradient(p[None])[0]
        if not np.all(np.isfinite(g)) or np.linalg.norm(g) > grad_limit:
            raise FloatingPointError
        return g, -H.grad(g[None])[0]

    states, levels, integrand = [xi.copy()], [float(H.eval(g0[None])[0])], []
    status, t_arr = "max_steps", None
    g, v = vel(xi)
    integrand.append(float(g @ v))
    for n in range(max_steps):
        radius = arrival_radius if arrival_radius is not None else step * np.linalg.norm(v)
        if np.linalg.norm(xi - x0) <= radius:
            status, t_arr = "arrived", n * step
            break
        try:
            k1 = v
            k2 = vel(xi + 0.5 * step * k1)[1]
            k3 = vel(xi + 0.5 * step * k2)[1]
            k4 = vel(xi + step * k3)[1]
            nxt = xi + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            g, v = vel(nxt)
        except InputError:
            status = "exited"
            break
        except FloatingPointError:
            status = "blowup"
            break
        xi = nxt
        states.append(xi.copy())
        levels.append(float(H.eval(g[None])[0]))
        integrand.append(float(g @ v))
    f = np.asarray(integrand)
    integral = float(step * (f.sum() - 0.5 * (f[0] + f[-1]))) if f.size > 1 else 0.0
    if status == "arrived":
        integral += float(u.gradient(xi[None])[0] @ (x0 - xi))
    lv = np.asarray(levels)
    return FlowTrace(np.asarray(start, dtype=float), float(step), np.asarray(states), lv, status,
                     float(np.max(np.abs(lv - lv[0]))), integral, t_arr)


# ----------------------------------------------------------------------------
# domains that are unit sublevel sets of a cone


@dataclass
class DomainCheck:
    passed: bool
    max_deviation: float
    k0: float
    k0_error: float
    tol: float

    def to_dict(self):
        return dict(self.__dict__)


def corollary_domain_check(H: Hamiltonian, k: float, boundary, x0=(0.0, 0.0), tol: float = 1e-6) -> DomainCheck:
    """Is ``boundary`` the unit level set of C_k^H(. - x0)?

    Checks |C_k^H(x - x0) - 1| <= tol on every sample and that
    k0 = inf{k > 0 : C_k^H(. - x0) >= 1 on the samples} (bisection) equals k.
    """
    if not k > 0:
        raise InputError("k must be positive")
    D = np.atleast_2d(np.asarray(boundary, dtype=float)) - np.asarray(x0, dtype=float)
    dev = float(np.max(np.abs(cone_values(H, k, D) - 1.0)))
    lo, hi = 0.0, 1.0
    while not np.all(cone_values(H, hi, D) >= 1.0):
        lo, hi = hi, 2 * hi
        if hi > 1e300:
            raise InputError("no level reaches 1 on the boundary samples")
    while hi - lo > 1e-12 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if np.all(cone_values(H, mid, D) >= 1.0):
            hi = mid
        else:
            lo = mid
    k0 = hi
    err = abs(k0 - k)
    return DomainCheck(bool(dev <= tol and err <= tol), dev, float(k0), float(err), tol)
