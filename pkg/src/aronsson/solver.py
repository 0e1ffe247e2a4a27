"""Discrete Aronsson residuals and pseudo-time relaxation on 2-D grids.

Node ``(i, j)`` of a grid sits at ``origin + (i h, j h)``.  Dirichlet nodes
(the outer rim, everything outside the solve region, and an optional pinned
puncture node) keep their values; the rest are relaxed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _backend, _fallback
from .cone import cone_values
from .errors import ConvergenceError, InputError
from .field import Domain, Field, aronsson43, cone_field, plane
from .hamiltonian import Hamiltonian, make_builtin

__all__ = [
    "GridSpec",
    "Grid2",
    "ResidualStats",
    "residual",
    "relax",
    "midpoint_relax",
    "disk_region",
    "RefineRow",
    "refine_study",
    "REFINE_PROBLEMS",
]

STATUS = {_fallback.CONVERGED: "converged", _fallback.MAX_SWEEPS: "max_sweeps", _fallback.DIVERGED: "diverged"}
DEGENERATE_GRAD = 1e-12


@dataclass(frozen=True)
class GridSpec:
    origin: tuple
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.h > 0:
            raise InputError(f"grid spacing must be positive, got {self.h}")
        if self.nx < 5 or self.ny < 5:
            raise InputError("grids need at least 5 nodes per axis")

    @classmethod
    def square(cls, center=(0.0, 0.0), half_width: float = 1.0, n: int = 65) -> "GridSpec":
        """n x n nodes covering ``center +- half_width`` with nodes on the edges."""
        h = 2.0 * half_width / (n - 1)
        return cls((center[0] - half_width, center[1] - half_width), h, n, n)

    def coords(self):
        xs = self.origin[0] + self.h * np.arange(self.nx)
        ys = self.origin[1] + self.h * np.arange(self.ny)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def nearest(self, x):
        i = int(round((x[0] - self.origin[0]) / self.h))
        j = int(round((x[1] - self.origin[1]) / self.h))
        return i, j


@dataclass
class Grid2:
    """Node values on a grid with their Dirichlet mask and relaxation record."""

    spec: GridSpec
    values: np.ndarray
    fixed: np.ndarray
    pinned: Optional[tuple] = None  # (i, j) of the pinned puncture node
    sweeps: int = 0
    last_update: float = 0.0
    status: str = "sampled"
    log: list = field(default_factory=list)

    def __post_init__(self):
        rim = np.zeros_like(self.fixed)
        rim[0, :] = rim[-1, :] = rim[:, 0] = rim[:, -1] = True
        if not np.all(self.fixed[rim]):
            raise InputError("the Dirichlet mask must cover the outer rim")
        if self.pinned is not None:
            i, j = self.pinned
            if not (1 <= i < self.spec.nx - 1 and 1 <= j < self.spec.ny - 1):
                raise InputError("pinned node must be interior")

    @property
    def h(self):
        return self.spec.h

    @classmethod
    def sample(cls, func: Callable, spec: GridSpec) -> "Grid2":
        """Evaluate ``func`` at every node; only the rim is marked fixed."""
        vals = np.asarray(func(spec.coords().reshape(-1, 2)), dtype=float).reshape(spec.nx, spec.ny)
        fixed = np.zeros((spec.nx, spec.ny), dtype=bool)
        fixed[0, :] = fixed[-1, :] = fixed[:, 0] = fixed[:, -1] = True
        return cls(spec, vals, fixed)

    def to_field(self, domain: Optional[Domain] = None, name: str = "grid") -> Field:
        return Field.from_grid(self.spec.origin, self.spec.h, self.values, domain, name)

    def node_error(self, func: Callable, mask=None) -> float:
        """max |values - func| over ``mask`` (default: free nodes)."""
        mask = ~self.fixed if mask is None else mask
        exact = np.asarray(func(self.spec.coords()[mask]), dtype=float)
        return float(np.max(np.abs(self.values[mask] - exact)))


@dataclass
class ResidualStats:
    max_abs: float
    mean_abs: float
    n_evaluated: int
    excluded_nodes: int
    values: Optional[np.ndarray] = None

    def to_dict(self):
        return {"max_abs": self.max_abs, "mean_abs": self.mean_abs, "n_evaluated": self.n_evaluated,
                "excluded_nodes": self.excluded_nodes}


def residual(u: Grid2, H: Hamiltonian, mask=None, exclude=None) -> ResidualStats:
    """Centred-difference D^2u q.q with q = H_p(grad u) at full-stencil nodes.

    ``mask`` restricts evaluation to selected nodes (default: every node with a
    full stencil).  Nodes in the 3 x 3 block around the pinned node and nodes
    flagged in ``exclude`` are skipped and counted in ``excluded_nodes``.
    Nodes with |grad u| < 1e-12 contribute 0.
    """
    if H.dim != 2:
        raise InputError("grid residuals are 2-D")
    nx, ny = u.values.shape
    if nx < 5 or ny < 5:
        raise InputError("grids need at least 5 nodes per axis")
    r_in, _ = _fallback.aronsson_operator(u.values, u.h, H.grad)
    r = np.zeros((nx, ny))
    r[1:-1, 1:-1] = r_in
    full = np.zeros((nx, ny), dtype=bool)
    full[1:-1, 1:-1] = True
    sel = full if mask is None else full & np.asarray(mask, dtype=bool)
    skip = np.zeros_like(sel)
    if u.pinned is not None:
        i, j = u.pinned
        skip[i - 1:i + 2, j - 1:j + 2] = True
    if exclude is not None:
        skip |= np.asarray(exclude, dtype=bool)
    skip &= sel
    ev = sel & ~skip
    vals = np.abs(r[ev])
    return ResidualStats(float(vals.max()) if vals.size else 0.0, float(vals.mean()) if vals.size else 0.0,
                         int(ev.sum()), int(skip.sum()), np.where(ev, r, np.nan))


def disk_region(center=(0.0, 0.0), radius: float = 1.0) -> Callable:
    """Predicate for the open disk; use as the ``region`` of :func:`relax`."""
    c = np.asarray(center, dtype=float)
    return lambda X: np.linalg.norm(X - c, axis=-1) < radius - 1e-12


def _setup(boundary_data, spec, region, pinned):
    X = spec.coords()
    region = region or disk_region((spec.origin[0] + spec.h * (spec.nx - 1) / 2,
                                    spec.origin[1] + spec.h * (spec.ny - 1) / 2),
                                   spec.h * (min(spec.nx, spec.ny) - 1) / 2)
    free = np.asarray(region(X), dtype=bool)
    free[0, :] = free[-1, :] = free[:, 0] = free[:, -1] = False
    pin = None
    vals = np.zeros((spec.nx, spec.ny))
    fixed = ~free
    if pinned is not None:
        x0, b = pinned
        pin = spec.nearest(x0)
        if not (1 <= pin[0] < spec.nx - 1 and 1 <= pin[1] < spec.ny - 1) or not free[pin]:
            raise InputError("pinned point must be an interior node of the region")
        fixed[pin] = True
        free[pin] = False
    bd = fixed.copy()
    if pin is not None:
        bd[pin] = False
        vals[pin] = float(pinned[1])
    vals[bd] = np.asarray(boundary_data(X[bd]), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise InputError("boundary data must be finite")
    return vals, fixed, free, pin


def laplace_fill(vals, free):
    """Harmonic interpolation of the fixed values into the free nodes."""
    nx, ny = vals.shape
    idx = -np.ones((nx, ny), dtype=np.int64)
    fi, fj = np.nonzero(free)
    m = fi.size
    if m == 0:
        return vals.copy()
    idx[fi, fj] = np.arange(m)
    rows, cols, data = [np.arange(m)], [np.arange(m)], [np.full(m, 4.0)]
    rhs = np.zeros(m)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ni, nj = fi + di, fj + dj
        nb = idx[ni, nj]
        inside = nb >= 0
        rows.append(np.flatnonzero(inside))
        cols.append(nb[inside])
        data.append(-np.ones(inside.sum()))
        np.add.at(rhs, np.flatnonzero(~inside), vals[ni[~inside], nj[~inside]])
    A = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))
    out = vals.copy()
    out[fi, fj] = spla.spsolve(A.tocsc(), rhs)
    return out


def relax(boundary_data: Callable, H: Hamiltonian, spec: GridSpec, region: Optional[Callable] = None,
          pinned=None, tau: float = 0.0, iters: int = 400_000, stop_tol: float = 1e-11,
          cfl: float = 0.9, init: str = "laplace", force_python: bool = False) -> Grid2:
    """Relax the Dirichlet problem A_H[u] = 0 on ``region`` inside the grid.

    Jacobi pseudo-time iteration u <- u + tau * D^2u q.q (simultaneous
    update).  ``tau`` (0 = automatic) is capped every sweep by
    cfl * h^2 / (4 max|q|^2).  Stops when the max update drops below
    ``stop_tol`` or after ``iters`` sweeps.  ``pinned = (x0, b)`` fixes the
    node nearest x0 at b.  Divergence raises :class:`ConvergenceError`.
    """
    if H.dim != 2:
        raise InputError("relaxation is 2-D")
    if not 0 < cfl <= 1:
        raise InputError("cfl must lie in (0, 1]")
    vals, fixed, free, pin = _setup(boundary_data, spec, region, pinned)
    if init == "laplace":
        vals = laplace_fill(vals, free)
    elif init != "zero":
        raise InputError(f"unknown init {init!r}")
    if _backend.use_compiled(H, force_python):
        par = H.family
        u, sweeps, last, status, log = _backend._kernels.jacobi_relax_family(
            np.ascontiguousarray(vals), np.ascontiguousarray(free, dtype=np.uint8), spec.h,
            np.ascontiguousarray(par.matrix), par.c, par.s, tau, cfl, iters, stop_tol, 50, 1000,
            _backend.get_threads())
    else:
        u, sweeps, last, status, log = _fallback.jacobi_relax(vals, free, spec.h, H.grad, tau, cfl,
                                                              iters, stop_tol)
    if status == _fallback.DIVERGED:
        raise ConvergenceError(f"relaxation diverged after {sweeps} sweeps (last update {last!r})", last)
    return Grid2(spec, np.asarray(u), fixed, pin, int(sweeps), float(last), STATUS[status], list(log))


def midpoint_relax(boundary_data: Callable, spec: GridSpec, region: Optional[Callable] = None, pinned=None,
                   iters: int = 400_000, stop_tol: float = 1e-11, init: str = "laplace",
                   force_python: bool = False) -> Grid2:
    """Isotropic cross-check: monotone midpoint iteration on the 8-neighbour ring."""
    vals, fixed, free, pin = _setup(boundary_data, spec, region, pinned)
    if init == "laplace":
        vals = laplace_fill(vals, free)
    if _backend._kernels is not None and not force_python:
        u, sweeps, last, status, log = _backend._kernels.midpoint_relax(
            np.ascontiguousarray(vals), np.ascontiguousarray(free, dtype=np.uint8), iters, stop_tol, 1000,
            _backend.get_threads())
    else:
        u, sweeps, last, status, log = _fallback.midpoint_relax(vals, free, iters, stop_tol)
    return Grid2(spec, np.asarray(u), fixed, pin, int(sweeps), float(last), STATUS[status], list(log))


# ----------------------------------------------------------------------------
# refinement studies


@dataclass
class RefineRow:
    h: float
    n: int
    sweeps: int
    residual_max: float
    error_max: Optional[float]
    residual_order: Optional[float] = None
    error_order: Optional[float] = None

    def to_dict(self):
        return dict(self.__dict__)


ROUNDING_FLOOR = 1e-11
ANNULUS_INNER = 0.25
AXIS_GAP = 0.1


def _problem(name: str, H: Hamiltonian, k: float):
    """(exact, relax kwargs or None, evaluation mask builder) for a named problem."""
    if name == "plane":
        u = plane([0.7, -0.4], 0.2)
        return u, {}, lambda X: np.ones(X.shape[:-1], dtype=bool)
    if name == "cone":
        u = cone_field(H, k)
        return u, {"pinned": ((0.0, 0.0), 0.0)}, lambda X: np.linalg.norm(X, axis=-1) >= ANNULUS_INNER
    if name == "aronsson43":
        u = aronsson43()
        return u, None, lambda X: (np.abs(X[..., 0]) >= AXIS_GAP) & (np.abs(X[..., 1]) >= AXIS_GAP)
    if name == "corollary":
        u = cone_field(H, k)
        region = lambda X: cone_values(H, k, X.reshape(-1, 2)).reshape(X.shape[:-1]) < 1.0
        return u, {"pinned": ((0.0, 0.0), 0.0), "region": region, "data": lambda X: np.ones(len(X))}, \
            lambda X: np.linalg.norm(X, axis=-1) >= ANNULUS_INNER * _radius_of(H, k)
    raise InputError(f"unknown refinement problem {name!r}")


def _radius_of(H, k):
    """Largest distance from 0 to the unit level set of C_k^H (grid sizing)."""
    th = 2 * np.pi * np.arange(360) / 360
    E = np.column_stack([np.cos(th), np.sin(th)])
    return float(np.max(1.0 / cone_values(H, k, E)))


REFINE_PROBLEMS = ("plane", "cone", "aronsson43", "corollary")


def _order(a, b):
    if a is None or b is None or a <= ROUNDING_FLOOR or b <= ROUNDING_FLOOR:
        return None
    return float(np.log2(a / b))


def refine_study(problem: str, h_list, H: Optional[Hamiltonian] = None, k: float = 1.0,
                 **relax_kw) -> list:
    """Residual and nodewise error per spacing, with log2-ratio orders.

    ``aronsson43`` is a sampled exact field (residual only, off the axes);
    the other problems are relaxed on the unit disk (``corollary``: on the
    unit sublevel set of C_k^H with boundary value 1) and compared with the
    exact solution at free nodes selected by the problem mask.
    """
    h_list = [float(h) for h in h_list]
    if len(h_list) < 3 or any(not np.isclose(b, a / 2) for a, b in zip(h_list, h_list[1:])):
        raise InputError("refine_study needs at least 3 spacings, each half the previous")
    H = H or make_builtin("isotropic")
    exact, kw, mask_of = _problem(problem, H, k)
    half = 1.0 if problem != "corollary" else np.ceil(_radius_of(H, k) * 4 + 1) / 4
    rows = []
    for h in h_list:
        n = int(round(2 * half / h)) + 1
        spec = GridSpec.square((0.0, 0.0), half, n)
        X = spec.coords()
        if kw is None:
            g = Grid2.sample(exact, spec)
            stats = residual(g, H, mask=mask_of(X))
            rows.append(RefineRow(h, n, 0, stats.max_abs, None))
            continue
        kw2 = dict(kw)
        data = kw2.pop("data", exact)
        g = relax(data, H, spec, kw2.pop("region", None), kw2.pop("pinned", None), **relax_kw)
        m = mask_of(X) & ~g.fixed
        stats = residual(g, H, mask=m)
        rows.append(RefineRow(h, n, g.sweeps, stats.max_abs, g.node_error(exact, m)))
    for a, b in zip(rows, rows[1:]):
        b.residual_order = _order(a.residual_max, b.residual_max)
        b.error_order = _order(a.error_max, b.error_max)
    return rows
