"""Scalar fields on disks/annuli, circle sampling and slope functionals.

A :class:`Field` wraps either a vectorised callable or node values on a
uniform 2-D grid (bilinear interpolation).  The slope functionals

    S_r^+(u, x0) = inf{k > 0 : u(x) - u(x0) <= C_k^H(x - x0) on |x - x0| = r}
    S_r^-(u, x0) = inf{k > 0 : u(x) - u(x0) >= -C_k^{H^}(x - x0) on |x - x0| = r}

are computed by bisection on k; the predicate is monotone because C_k^H is
nondecreasing in k.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .cone import cone_gradients, cone_values
from .errors import InputError
from .hamiltonian import Hamiltonian, reflect

__all__ = [
    "Domain",
    "Field",
    "SlopeEstimate",
    "SlopeLimit",
    "RadialExtremes",
    "DEFAULT_SAMPLES",
    "circle_points",
    "sample_circle",
    "slope_plus",
    "slope_minus",
    "slope_estimate",
    "slope_limit",
    "radial_extremes",
    "monotone_direction",
    "constant",
    "plane",
    "cone_field",
    "cone_hat_field",
    "paraboloid",
    "aronsson43",
    "radial_perturbation",
]

DEFAULT_SAMPLES = 720
MONOTONE_TOL = 1e-5  # above the 720-sample circle discretisation of the slope predicates


@dataclass(frozen=True)
class Domain:
    """Closed annulus ``inner <= |x - center| <= outer``; ``punctured`` drops the center."""

    center: tuple = (0.0, 0.0)
    inner: float = 0.0
    outer: float = np.inf
    punctured: bool = False
    box: Optional[tuple] = None  # (xmin, xmax, ymin, ymax) for grid data

    def contains(self, pts, tol: float = 1e-12):
        pts = np.asarray(pts, dtype=float)
        d = np.linalg.norm(pts - np.asarray(self.center), axis=-1)
        ok = (d >= self.inner - tol) & (d <= self.outer + tol)
        if self.punctured:
            ok &= d > 0
        if self.box is not None:
            x0, x1, y0, y1 = self.box
            ok &= (pts[..., 0] >= x0 - tol) & (pts[..., 0] <= x1 + tol)
            ok &= (pts[..., 1] >= y0 - tol) & (pts[..., 1] <= y1 + tol)
        return ok


class Field:
    """A scalar function u on a 2-D (or n-D for callables) domain."""

    def __init__(self, func: Callable, domain: Optional[Domain] = None, grad: Optional[Callable] = None,
                 name: str = "field", h: Optional[float] = None, grid=None):
        self._func = func
        self._grad = grad
        self.domain = domain or Domain()
        self.name = name
        self.h = h
        self.grid = grid

    @property
    def kind(self) -> str:
        return "grid" if self.grid is not None else "callable"

    def _check(self, pts):
        pts = np.asarray(pts, dtype=float)
        ok = self.domain.contains(pts)
        if not np.all(ok):
            bad = pts[~ok].reshape(-1, pts.shape[-1])[0]
            raise InputError(f"point {bad.tolist()} lies outside the domain of {self.name}")
        return pts

    def __call__(self, pts):
        pts = self._check(pts)
        return np.asarray(self._func(pts), dtype=float)

    def gradient(self, pts, step: float = 1e-6):
        """Analytic gradient if supplied, else central differences."""
        pts = self._check(pts)
        if self._grad is not None:
            return np.asarray(self._grad(pts), dtype=float)
        n = pts.shape[-1]
        out = np.empty(pts.shape)
        hstep = step * np.maximum(1.0, np.abs(pts).max(axis=-1, keepdims=True))
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            out[..., i] = (self._func(pts + hstep * e) - self._func(pts - hstep * e)) / (2 * hstep[..., 0])
        return out

    def with_domain(self, domain: Domain) -> "Field":
        return Field(self._func, domain, self._grad, self.name, self.h, self.grid)

    def __add__(self, other):
        if isinstance(other, Field):
            g = None
            if self._grad is not None and other._grad is not None:
                g = lambda x: self._grad(x) + other._grad(x)
            return Field(lambda x: self._func(x) + other._func(x), self.domain, g, f"{self.name}+{other.name}", self.h)
        c = float(other)
        return Field(lambda x: self._func(x) + c, self.domain, self._grad, f"{self.name}+{c!r}", self.h, self.grid)

    __radd__ = __add__

    def __neg__(self):
        g = None if self._grad is None else (lambda x: -self._grad(x))
        return Field(lambda x: -self._func(x), self.domain, g, f"-{self.name}", self.h)

    def __mul__(self, a):
        a = float(a)
        g = None if self._grad is None else (lambda x: a * self._grad(x))
        return Field(lambda x: a * self._func(x), self.domain, g, f"{a!r}*{self.name}", self.h)

    __rmul__ = __mul__

    @classmethod
    def from_grid(cls, origin, h: float, values, domain: Optional[Domain] = None, name: str = "grid"):
        """Bilinear interpolant of node values ``values[i, j]`` at origin + (i h, j h)."""
        values = np.asarray(values, dtype=float)
        nx, ny = values.shape
        xs = origin[0] + h * np.arange(nx)
        ys = origin[1] + h * np.arange(ny)
        interp = RegularGridInterpolator((xs, ys), values, method="linear", bounds_error=False, fill_value=None)
        gx, gy = np.gradient(values, h, edge_order=2)
        ix = RegularGridInterpolator((xs, ys), gx, method="linear", bounds_error=False, fill_value=None)
        iy = RegularGridInterpolator((xs, ys), gy, method="linear", bounds_error=False, fill_value=None)

        def func(p):
            p = np.asarray(p, dtype=float)
            return interp(p.reshape(-1, 2)).reshape(p.shape[:-1])

        def grad(p):
            p = np.asarray(p, dtype=float)
            q = p.reshape(-1, 2)
            return np.stack([ix(q), iy(q)], axis=-1).reshape(p.shape)

        box = (xs[0], xs[-1], ys[0], ys[-1])
        if domain is None:
            domain = Domain(box=box)
        elif domain.box is None:
            domain = Domain(domain.center, domain.inner, domain.outer, domain.punctured, box)
        return cls(func, domain, grad, name, h=h, grid=(np.asarray(origin, dtype=float), h, values))


# ----------------------------------------------------------------------------
# built-in fields


def constant(c: float, domain: Optional[Domain] = None) -> Field:
    c = float(c)
    return Field(lambda x: np.full(np.shape(x)[:-1], c), domain, lambda x: np.zeros(np.shape(x)), f"const({c!r})")


def plane(p, b: float = 0.0, domain: Optional[Domain] = None) -> Field:
    p = np.asarray(p, dtype=float)
    b = float(b)
    return Field(lambda x: np.asarray(x) @ p + b, domain,
                 lambda x: np.broadcast_to(p, np.shape(x)).copy(), f"plane({p.tolist()},{b!r})")


def _batched(fn, x, n):
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, n)
    out = fn(flat)
    return out.reshape(x.shape[:-1] + np.shape(out)[1:])


def cone_field(H: Hamiltonian, k: float, b: float = 0.0, center=None, domain: Optional[Domain] = None) -> Field:
    """b + C_k^H(x - center)."""
    c = np.zeros(H.dim) if center is None else np.asarray(center, dtype=float)
    b = float(b)

    def grad(x):
        def g(flat):
            y = flat - c
            out = np.full(y.shape, np.nan)
            nz = np.any(y != 0, axis=1)
            if nz.any():
                out[nz] = cone_gradients(H, k, y[nz])
            return out
        return _batched(g, x, H.dim)

    return Field(lambda x: b + _batched(lambda f: cone_values(H, k, f - c), x, H.dim), domain, grad,
                 f"{b!r}+C[{H.name},{k!r}]")


def cone_hat_field(H: Hamiltonian, k: float, b: float = 0.0, center=None, domain: Optional[Domain] = None) -> Field:
    """b - C_k^{H^}(x - center)."""
    Hh = reflect(H)
    c = np.zeros(H.dim) if center is None else np.asarray(center, dtype=float)
    b = float(b)

    def grad(x):
        def g(flat):
            y = flat - c
            out = np.full(y.shape, np.nan)
            nz = np.any(y != 0, axis=1)
            if nz.any():
                out[nz] = -cone_gradients(Hh, k, y[nz])
            return out
        return _batched(g, x, H.dim)

    return Field(lambda x: b - _batched(lambda f: cone_values(Hh, k, f - c), x, H.dim), domain, grad,
                 f"{b!r}-C[{Hh.name},{k!r}]")


def paraboloid(c: float = 1.0, center=(0.0, 0.0), domain: Optional[Domain] = None) -> Field:
    """c |x - center|^2."""
    x0 = np.asarray(center, dtype=float)
    c = float(c)
    return Field(lambda x: c * np.sum((np.asarray(x) - x0) ** 2, axis=-1), domain,
                 lambda x: 2 * c * (np.asarray(x) - x0), f"{c!r}|x|^2")


def aronsson43(domain: Optional[Domain] = None) -> Field:
    """|x|^{4/3} - |y|^{4/3}, infinity-harmonic off the axes (and C^{1,1/3} across them)."""
    def f(x):
        x = np.asarray(x, dtype=float)
        return np.abs(x[..., 0]) ** (4 / 3) - np.abs(x[..., 1]) ** (4 / 3)

    def g(x):
        x = np.asarray(x, dtype=float)
        return np.stack([4 / 3 * np.sign(x[..., 0]) * np.abs(x[..., 0]) ** (1 / 3),
                         -4 / 3 * np.sign(x[..., 1]) * np.abs(x[..., 1]) ** (1 / 3)], axis=-1)

    return Field(f, domain, g, "x^4/3-y^4/3")


def radial_perturbation(amp: float, power: float = 1.5, freq: int = 3, center=(0.0, 0.0),
                        domain: Optional[Domain] = None) -> Field:
    """amp * r^power * sin(freq * theta) around ``center``."""
    x0 = np.asarray(center, dtype=float)

    def f(x):
        y = np.asarray(x, dtype=float) - x0
        r = np.hypot(y[..., 0], y[..., 1])
        return amp * r ** power * np.sin(freq * np.arctan2(y[..., 1], y[..., 0]))

    return Field(f, domain, None, f"{amp!r}r^{power!r}sin({freq}t)")


# ----------------------------------------------------------------------------
# circle sampling and slopes


def circle_points(x0, r: float, N: int):
    th = 2 * np.pi * np.arange(N) / N
    return np.asarray(x0, dtype=float) + r * np.column_stack([np.cos(th), np.sin(th)])


def sample_circle(u: Field, x0, r: float, N: int = DEFAULT_SAMPLES):
    """u at x0 + r (cos t_j, sin t_j), t_j = 2 pi j / N."""
    if N < 16:
        raise InputError("need at least 16 circle samples")
    if not r > 0:
        raise InputError("radius must be positive")
    return u(circle_points(x0, r, N))


def _bisect_level(pred, what: str, tol: float = 1e-10, max_doublings: int = 60) -> float:
    lo, hi = 0.0, 1.0
    n = 0
    while not pred(hi):
        lo, hi = hi, 2 * hi
        n += 1
        if n > max_doublings:
            raise InputError(f"{what}: slope unbounded (no level up to {hi:.3g} dominates)")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _slope(u, H, x0, r, N, sign):
    x0 = np.asarray(x0, dtype=float)
    pts = circle_points(x0, r, N)
    delta = sign * (u(pts) - u(x0))
    if np.max(delta) <= 0:
        return 0.0
    D = pts - x0
    Hc = H if sign > 0 else reflect(H)
    slack = 1e-13 * max(1.0, float(np.max(np.abs(delta))))
    # the minus predicate u - u0 >= -C^{H^}(D) reads -(u - u0) <= C^{H^}(D)
    return _bisect_level(lambda k: bool(np.all(delta <= cone_values(Hc, k, D) + slack)),
                         "slope_plus" if sign > 0 else "slope_minus")


def slope_plus(u: Field, H: Hamiltonian, x0, r: float, N: int = DEFAULT_SAMPLES) -> float:
    return _slope(u, H, x0, r, N, +1)


def slope_minus(u: Field, H: Hamiltonian, x0, r: float, N: int = DEFAULT_SAMPLES) -> float:
    return _slope(u, H, x0, r, N, -1)


def monotone_direction(values, tol: float = MONOTONE_TOL) -> str:
    """'constant', 'nondecreasing', 'nonincreasing' or 'none' (within ``tol``)."""
    d = np.diff(np.asarray(values, dtype=float))
    up, down = bool(np.all(d >= -tol)), bool(np.all(d <= tol))
    if up and down:
        return "constant"
    return "nondecreasing" if up else ("nonincreasing" if down else "none")


@dataclass
class SlopeEstimate:
    center: np.ndarray
    radii: np.ndarray
    s_plus: np.ndarray
    s_minus: np.ndarray
    angular_samples: int
    monotone_plus: bool
    monotone_minus: bool


def slope_estimate(u: Field, H: Hamiltonian, x0, radii, N: int = DEFAULT_SAMPLES,
                   tol: float = MONOTONE_TOL) -> SlopeEstimate:
    """S_r^+ and S_r^- at increasing ``radii``; flags whether both are nondecreasing."""
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise InputError("radii must be increasing")
    sp = np.array([slope_plus(u, H, x0, r, N) for r in radii])
    sm = np.array([slope_minus(u, H, x0, r, N) for r in radii])
    return SlopeEstimate(np.asarray(x0, dtype=float), radii, sp, sm, N,
                         bool(np.all(np.diff(sp) >= -tol)), bool(np.all(np.diff(sm) >= -tol)))


@dataclass
class SlopeLimit:
    s_plus: float
    s_minus: float
    cauchy_plus: bool
    cauchy_minus: bool
    estimate: SlopeEstimate


def slope_limit(u: Field, H: Hamiltonian, x0, radii, N: int = DEFAULT_SAMPLES) -> SlopeLimit:
    """S^+ and S^- read off at the smallest of the decreasing ``radii``."""
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2 or np.any(np.diff(radii) >= 0) or radii[-1] <= 0:
        raise InputError("radii must be positive, decreasing, and at least two")
    est = slope_estimate(u, H, x0, radii[::-1], N)
    sp, sm = est.s_plus, est.s_minus  # increasing radius order

    def cauchy(s):
        return bool(abs(s[0] - s[1]) <= 1e-4 * max(1.0, abs(s[0])))

    return SlopeLimit(float(sp[0]), float(sm[0]), cauchy(sp), cauchy(sm), est)


@dataclass
class RadialExtremes:
    radii: np.ndarray
    m: np.ndarray
    M: np.ndarray
    monotone_m: str
    monotone_M: str


def radial_extremes(u: Field, x0, radii, N: int = DEFAULT_SAMPLES) -> RadialExtremes:
    """m(r) = min and M(r) = max of u over sampled circles around x0."""
    radii = np.asarray(radii, dtype=float)
    vals = np.array([sample_circle(u, x0, r, N) for r in radii])
    m, M = vals.min(axis=1), vals.max(axis=1)
    return RadialExtremes(radii, m, M, monotone_direction(m), monotone_direction(M))
