"""General cones C_k^H(x) = max_{H(p) = k} p.x and related maps.

C_k^H is the support function of the convex sublevel set {H <= k}.  For
x != 0 the maximiser p_x^k is unique, H_p(p_x^k) is a positive multiple of
x, and p_x^k is also the gradient of the cone at x.  Everything here is
computed by Newton's method on the KKT system

    H_p(p) = lam * e,   H(p) = k,   e = x / |x|,

vectorised over many points (compiled kernel for the built-in family).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend, _fallback
from .errors import ConvergenceError, InputError
from .hamiltonian import Hamiltonian, level_extremes, radial_level, reflect

__all__ = [
    "KKT_TOL",
    "ConeValue",
    "SlopeLevel",
    "cone_batch",
    "cone_values",
    "eval_cone",
    "eval_cone_hat",
    "cone_hat_values",
    "cone_gradient",
    "cone_gradients",
    "reverse_spherical_image",
    "level_path",
    "level_for_slope",
    "cone_level",
    "sublevel_boundary",
]

KKT_TOL = 1e-12
N_RESTARTS = 8


@dataclass(frozen=True)
class ConeValue:
    value: float
    maximizer: Optional[np.ndarray]
    multiplier: float
    kkt_residual: float


def _as_points(X, n):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[-1] != n:
        raise InputError(f"points must have {n} coordinates, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InputError("points must be finite")
    return X.reshape(-1, n), single


def _newton(H, k, E, P0, lam0, force_python):
    if _backend.use_compiled(H, force_python):
        fam = H.family
        return _backend._kernels.cone_newton_family(
            np.ascontiguousarray(fam.matrix), float(fam.c), float(fam.s),
            np.ascontiguousarray(k, dtype=float), np.ascontiguousarray(E),
            np.ascontiguousarray(P0), np.ascontiguousarray(lam0, dtype=float),
            KKT_TOL, 100, 3, _backend.get_threads(),
        )
    return _fallback.cone_newton(H, k, E, P0, lam0, tol=KKT_TOL)


def cone_batch(H: Hamiltonian, k, X, force_python: bool = False):
    """Cone values, maximisers, multipliers and KKT residuals for rows of ``X``.

    ``k`` is a scalar or one level per row.  Rows with x = 0 get value 0, a
    NaN maximiser, multiplier 0 and residual 0.  The multiplier refers to x
    itself, i.e. H_p(p) = lam * x.
    """
    X, _ = _as_points(X, H.dim)
    m, n = X.shape
    k = np.broadcast_to(np.asarray(k, dtype=float), (m,)).copy()
    if np.any(~(k > 0)):
        raise InputError("cone level k must be positive")
    norms = np.linalg.norm(X, axis=1)
    values = np.zeros(m)
    P = np.full((m, n), np.nan)
    lam = np.zeros(m)
    res = np.zeros(m)
    nz = np.flatnonzero(norms > 0)
    if nz.size == 0:
        return values, P, lam, res
    E = X[nz] / norms[nz, None]
    kk = k[nz]
    P0 = np.sqrt(2 * kk / H.beta)[:, None] * E
    lam0 = np.einsum("ij,ij->i", H.grad(P0), E)
    Pz, lz, rz, ok = _newton(H, kk, E, P0, lam0, force_python)
    Pz, lz, rz = np.array(Pz), np.array(lz), np.array(rz)
    rng = np.random.default_rng(12345)
    for _ in range(N_RESTARTS):
        bad = np.flatnonzero(~ok)
        if bad.size == 0:
            break
        d = E[bad] + 0.5 * rng.standard_normal((bad.size, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        p0 = radial_level(H, kk[bad], d)[:, None] * d
        l0 = np.abs(np.einsum("ij,ij->i", H.grad(p0), E[bad]))
        Pb, lb, rb, okb = _newton(H, kk[bad], np.ascontiguousarray(E[bad]), p0, l0, force_python)
        Pz[bad], lz[bad], rz[bad] = Pb, lb, rb
        ok[bad] = okb
    if not np.all(ok):
        worst = float(np.max(np.where(ok, 0.0, np.nan_to_num(rz, nan=np.inf))))
        raise ConvergenceError(f"cone Newton failed on {np.count_nonzero(~ok)} point(s); residual {worst:.3g}", worst)
    P[nz] = Pz
    lam[nz] = lz / norms[nz]
    res[nz] = rz
    values[nz] = np.einsum("ij,ij->i", Pz, X[nz])
    return values, P, lam, res


def cone_values(H: Hamiltonian, k, X, force_python: bool = False):
    """C_k^H at the rows of ``X`` (a scalar for a single point)."""
    Xa, single = _as_points(X, H.dim)
    v = cone_batch(H, k, Xa, force_python)[0]
    return float(v[0]) if single else v


def cone_hat_values(H: Hamiltonian, k, X, force_python: bool = False):
    """C_k^{H^}(x) = C_k^H(-x)."""
    return cone_values(reflect(H), k, X, force_python)


def eval_cone(H: Hamiltonian, k: float, x) -> ConeValue:
    x = np.asarray(x, dtype=float)
    if x.shape != (H.dim,):
        raise InputError(f"x must have shape ({H.dim},)")
    v, P, lam, res = cone_batch(H, k, x[None])
    p = None if not np.any(x) else P[0]
    return ConeValue(float(v[0]), p, float(lam[0]), float(res[0]))


def eval_cone_hat(H: Hamiltonian, k: float, x) -> ConeValue:
    return eval_cone(reflect(H), k, x)


def cone_gradients(H: Hamiltonian, k, X):
    X, _ = _as_points(X, H.dim)
    if np.any(np.linalg.norm(X, axis=1) == 0):
        raise InputError("cone gradient is undefined at the vertex")
    return cone_batch(H, k, X)[1]


def cone_gradient(H: Hamiltonian, k: float, x):
    """D C_k^H(x) = p_x^k for x != 0."""
    return cone_gradients(H, k, np.asarray(x, dtype=float)[None])[0]


def reverse_spherical_image(H: Hamiltonian, k: float, e):
    """Y_k(e): the point of {H = k} whose outward normal is e (|e| = 1)."""
    E, single = _as_points(e, H.dim)
    if np.any(np.abs(np.linalg.norm(E, axis=1) - 1) > 1e-9):
        raise InputError("reverse_spherical_image needs unit vectors")
    P = cone_batch(H, k, E)[1]
    return P[0] if single else P


def level_path(H: Hamiltonian, x, k_grid):
    """Y_x(k) = p_x^k for each level of the increasing grid ``k_grid``."""
    x = np.asarray(x, dtype=float)
    k_grid = np.asarray(k_grid, dtype=float)
    if not np.any(x):
        raise InputError("level_path needs x != 0")
    if np.any(k_grid <= 0) or np.any(np.diff(k_grid) <= 0):
        raise InputError("k_grid must be positive and increasing")
    return cone_batch(H, k_grid, np.broadcast_to(x, (k_grid.size, H.dim)))[1]


@dataclass(frozen=True)
class SlopeLevel:
    level: float
    degenerate: bool = False


def _sphere_max_newton(H, a, p0, maxiter=60):
    """Stationary point of H on the sphere |p| = a near ``p0``."""
    p = np.array(p0, dtype=float)
    n = p.size
    mu = float(H.grad(p) @ p) / (a * a)
    for _ in range(maxiter):
        g = H.grad(p)
        F = np.concatenate([g - mu * p, [0.5 * (p @ p - a * a)]])
        if np.abs(F).max() <= 1e-14 * max(1.0, a, np.abs(g).max()):
            break
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = H.hess(p) - mu * np.eye(n)
        J[:n, n] = -p
        J[n, :n] = p
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        p, mu = p + step[:n], mu + step[n]
        p *= a / np.linalg.norm(p)
    return p


def level_for_slope(H: Hamiltonian, a: float, scan: int = 720, seed: int = 0) -> SlopeLevel:
    """k_a = max_{|p| <= a} H(p), so that the ball B_a lies in {H <= k_a}.

    The maximum sits on the sphere |p| = a (H is convex); it is located by a
    direction scan refined with Newton on the Lagrange system.  Afterwards
    a = min_{H = k_a} |p| is checked.
    """
    a = float(a)
    if a < 0 or not np.isfinite(a):
        raise InputError("slope must be finite and non-negative")
    if a == 0:
        return SlopeLevel(0.0, True)
    n = H.dim
    if n == 1:
        return SlopeLevel(float(max(H.eval(np.array([a])), H.eval(np.array([-a])))))
    if n == 2:
        th = np.linspace(0, 2 * np.pi, scan, endpoint=False)
        D = np.column_stack([np.cos(th), np.sin(th)])
    else:
        D = np.random.default_rng(seed).standard_normal((scan, n))
        D /= np.linalg.norm(D, axis=1, keepdims=True)
    vals = H.eval(a * D)
    best = float(vals.max())
    for i in np.argsort(vals)[::-1][:4]:
        p = _sphere_max_newton(H, a, a * D[i])
        best = max(best, float(H.eval(p)))
    a_check = level_extremes(H, best).a_k
    if abs(a_check - a) > 1e-8 * max(1.0, a):
        raise ConvergenceError(f"level_for_slope: min |p| on the level set is {a_check!r}, expected {a!r}")
    return SlopeLevel(best)


def cone_level(H: Hamiltonian, X, values, maxiter: int = 100):
    """Smallest level k with C_k^H(x) >= value, row by row (inverse cone).

    Solves H_p(p) = mu e, p.e = value/|x| and returns H(p).  Rows with
    value <= 0 give 0; x = 0 with value > 0 gives inf.
    """
    X, _ = _as_points(X, H.dim)
    m, n = X.shape
    values = np.broadcast_to(np.asarray(values, dtype=float), (m,))
    out = np.zeros(m)
    norms = np.linalg.norm(X, axis=1)
    out[(norms == 0) & (values > 0)] = np.inf
    idx = np.flatnonzero((norms > 0) & (values > 0))
    if idx.size == 0:
        return out
    E = X[idx] / norms[idx, None]
    s = values[idx] / norms[idx]
    p = s[:, None] * E
    mu = np.einsum("ij,ij->i", H.grad(p), E)

    def resid(p, mu, j):
        g = H.grad(p)
        gs = np.maximum(1.0, np.abs(g).max(axis=1))
        r1 = np.abs(g - mu[:, None] * E[j]).max(axis=1) / gs
        r2 = np.abs(np.einsum("ij,ij->i", p, E[j]) - s[j]) / np.maximum(1.0, s[j])
        return np.maximum(r1, r2)

    r = resid(p, mu, slice(None))
    for _ in range(maxiter):
        act = r > 1e-14
        if not act.any():
            break
        j = np.flatnonzero(act)
        g = H.grad(p[j])
        F = np.concatenate([g - mu[j, None] * E[j], (np.einsum("ij,ij->i", p[j], E[j]) - s[j])[:, None]], axis=1)
        J = np.zeros((j.size, n + 1, n + 1))
        J[:, :n, :n] = H.hess(p[j])
        J[:, :n, n] = -E[j]
        J[:, n, :n] = E[j]
        step = np.linalg.solve(J, -F[..., None])[..., 0]
        t = np.ones(j.size)
        for _ in range(30):
            pt = p[j] + t[:, None] * step[:, :n]
            mt = mu[j] + t * step[:, n]
            rt = resid(pt, mt, j)
            good = rt < r[j]
            if good.all():
                break
            t = np.where(good, t, 0.5 * t)
        upd = rt < r[j]
        if not upd.any():
            break
        jj = j[upd]
        p[jj], mu[jj], r[jj] = pt[upd], mt[upd], rt[upd]
    if np.any(r > 1e-10) or np.any(mu <= 0):
        raise ConvergenceError(f"cone_level: Newton failed (residual {float(r.max()):.3g})", float(r.max()))
    out[idx] = H.eval(p)
    return out


def sublevel_boundary(H: Hamiltonian, k: float, N: int = 720, center=None):
    """N points on the boundary of {x : C_k^H(x - center) < 1} (2-D), by angle."""
    if H.dim != 2:
        raise InputError("sublevel_boundary is 2-D")
    th = 2 * np.pi * np.arange(N) / N
    E = np.column_stack([np.cos(th), np.sin(th)])
    pts = E / cone_values(H, k, E)[:, None]
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts
