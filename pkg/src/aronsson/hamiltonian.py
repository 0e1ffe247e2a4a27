"""Uniformly convex Hamiltonians H(p) with H(0) = 0 and H >= 0.

All callables are vectorised: ``eval`` maps ``(..., n)`` to ``(...)``,
``grad`` maps ``(..., n)`` to ``(..., n)`` and ``hess`` maps ``(..., n)``
to ``(..., n, n)``.

The built-in instances all belong to one parametric family,

    H(p) = 1/2 q.A q + c (sin q_1 - q_1),   q = s p,  s in {+1, -1},

which is what the compiled kernels understand (see ``QuadSine``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConvergenceError, InputError

__all__ = [
    "QuadSine",
    "Hamiltonian",
    "LevelExtremes",
    "make_builtin",
    "parse_hamiltonian",
    "estimate_bounds",
    "level_extremes",
    "ratio_constant",
    "reflect",
    "scaled",
    "radial_level",
]


@dataclass(frozen=True)
class QuadSine:
    """Parameters of the built-in family; ``A`` is stored as a tuple of rows."""

    A: tuple
    c: float = 0.0
    s: float = 1.0

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.A, dtype=float)

    def bounds(self) -> tuple[float, float]:
        A = self.matrix
        E = np.zeros_like(A)
        E[0, 0] = abs(self.c)
        # sin attains +-1, so the extreme Hessians are s^2 (A -+ |c| e1 e1^T)
        s2 = self.s * self.s
        return s2 * float(np.linalg.eigvalsh(A - E)[0]), s2 * float(np.linalg.eigvalsh(A + E)[-1])


def _quad_sine_callables(par: QuadSine):
    A = par.matrix
    c, s = float(par.c), float(par.s)
    n = A.shape[0]

    def ev(p):
        q = s * np.asarray(p, dtype=float)
        val = 0.5 * np.einsum("...i,ij,...j->...", q, A, q)
        if c:
            val = val + c * (np.sin(q[..., 0]) - q[..., 0])
        return val

    def grad(p):
        q = s * np.asarray(p, dtype=float)
        g = q @ A
        if c:
            g = g.copy()
            g[..., 0] += c * (np.cos(q[..., 0]) - 1.0)
        return s * g

    def hess(p):
        q = np.asarray(p, dtype=float)
        out = np.broadcast_to(A, q.shape[:-1] + (n, n)).copy()
        if c:
            out[..., 0, 0] -= c * np.sin(s * q[..., 0])
        return s * s * out

    return ev, grad, hess


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    eval: Callable
    grad: Callable
    hess: Callable
    dim: int
    alpha: float
    beta: float
    name: str = "custom"
    family: Optional[QuadSine] = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise InputError("dim must be >= 1")
        if not (self.alpha > 0 and self.beta >= self.alpha):
            raise InputError(f"need beta >= alpha > 0, got alpha={self.alpha}, beta={self.beta}")

    def __call__(self, p):
        return self.eval(p)

    @classmethod
    def from_family(cls, par: QuadSine, name: str) -> "Hamiltonian":
        ev, grad, hess = _quad_sine_callables(par)
        alpha, beta = par.bounds()
        return cls(ev, grad, hess, len(par.A), alpha, beta, name, par)

    def spec(self) -> str:
        """Config-text description (inverse of :func:`parse_hamiltonian`)."""
        return self.name


def make_builtin(name: str, dim: int = 2, A=None, c: float = 0.0) -> Hamiltonian:
    """Build ``isotropic``, ``anisotropic`` (needs SPD ``A``) or ``shifted_smooth``.

    ``shifted_smooth`` is 1/2|p|^2 + c (sin p_1 - p_1): its Hessian is
    diag(1 - c sin p_1, 1, ...), so alpha = 1 - |c| and beta = 1 + |c|, and it
    is not even when c != 0.
    """
    if dim < 1:
        raise InputError("dim must be >= 1")
    if name == "isotropic":
        return Hamiltonian.from_family(QuadSine(tuple(map(tuple, np.eye(dim)))), "isotropic")
    if name == "anisotropic":
        if A is None:
            raise InputError("anisotropic Hamiltonian needs a matrix A")
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape != (dim, dim):
            raise InputError(f"A must have shape ({dim}, {dim}), got {A.shape}")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12):
            raise InputError("A must be symmetric")
        if not np.all(np.isfinite(A)) or np.linalg.eigvalsh(A)[0] <= 0:
            raise InputError("A must be positive definite")
        A = 0.5 * (A + A.T)
        label = "anisotropic:" + ",".join(_fmt(v) for v in A[np.triu_indices(dim)])
        return Hamiltonian.from_family(QuadSine(tuple(map(tuple, A))), label)
    if name in ("shifted_smooth", "shifted"):
        c = float(c)
        if not np.isfinite(c) or abs(c) >= 1.0:
            raise InputError(f"shifted_smooth needs |c| < 1 for uniform convexity, got c={c}")
        H = Hamiltonian.from_family(QuadSine(tuple(map(tuple, np.eye(dim))), c=c), f"shifted:{_fmt(c)}")
        estimate_bounds(H, radius=10.0, samples=2000, seed=0)  # raises if (H3) fails on the probe set
        return H
    raise InputError(f"unknown Hamiltonian {name!r}")


def _fmt(v: float) -> str:
    return repr(float(v))


def parse_hamiltonian(text: str, dim: int = 2) -> Hamiltonian:
    """Parse ``isotropic | anisotropic:a11,a12,a22 | shifted:c``, optionally wrapped in ``hat(...)``."""
    text = text.strip()
    if text.startswith("hat(") and text.endswith(")"):
        return reflect(parse_hamiltonian(text[4:-1], dim))
    head, _, tail = text.partition(":")
    head = head.strip()
    try:
        if head == "isotropic" and not tail:
            return make_builtin("isotropic", dim)
        if head == "anisotropic":
            vals = [float(v) for v in tail.split(",")]
            if dim != 2 or len(vals) != 3:
                raise InputError("anisotropic spec takes exactly a11,a12,a22 (2-D)")
            a11, a12, a22 = vals
            return make_builtin("anisotropic", 2, A=[[a11, a12], [a12, a22]])
        if head in ("shifted", "shifted_smooth"):
            return make_builtin("shifted_smooth", dim, c=float(tail))
    except ValueError as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed hamiltonian spec {text!r}: {exc}") from None
    raise InputError(f"malformed hamiltonian spec {text!r}")


def _hat_name(name: str) -> str:
    if name.startswith("hat(") and name.endswith(")"):
        return name[4:-1]
    return f"hat({name})"


def reflect(H: Hamiltonian) -> Hamiltonian:
    """The reflected Hamiltonian p -> H(-p); ``reflect(reflect(H))`` acts as ``H``."""
    name = _hat_name(H.name)
    if H.family is not None:
        par = QuadSine(H.family.A, H.family.c, -H.family.s)
        ev, grad, hess = _quad_sine_callables(par)
        return Hamiltonian(ev, grad, hess, H.dim, H.alpha, H.beta, name, par)
    return Hamiltonian(
        lambda p: H.eval(-np.asarray(p, dtype=float)),
        lambda p: -H.grad(-np.asarray(p, dtype=float)),
        lambda p: H.hess(-np.asarray(p, dtype=float)),
        H.dim,
        H.alpha,
        H.beta,
        name,
    )


def scaled(H: Hamiltonian, lam: float) -> Hamiltonian:
    """H / lam, which has the same Aronsson solutions as H."""
    lam = float(lam)
    if not lam > 0:
        raise InputError("scale must be positive")
    if H.family is not None:
        A = H.family.matrix / lam
        par = QuadSine(tuple(map(tuple, A)), H.family.c / lam, H.family.s)
        ev, grad, hess = _quad_sine_callables(par)
        return Hamiltonian(ev, grad, hess, H.dim, H.alpha / lam, H.beta / lam, f"({H.name})/{lam!r}", par)
    return Hamiltonian(
        lambda p: H.eval(p) / lam,
        lambda p: H.grad(p) / lam,
        lambda p: H.hess(p) / lam,
        H.dim,
        H.alpha / lam,
        H.beta / lam,
        f"({H.name})/{lam!r}",
    )


def estimate_bounds(H: Hamiltonian, radius: float = 10.0, samples: int = 10_000, seed: int = 0):
    """Min/max Hessian eigenvalue over ``samples`` uniform points of the ball."""
    if not radius > 0:
        raise InputError("radius must be positive")
    if samples < 100:
        raise InputError("need at least 100 samples")
    rng = np.random.default_rng(seed)
    n = H.dim
    d = rng.standard_normal((samples, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    p = d * (radius * rng.random(samples) ** (1.0 / n))[:, None]
    eig = np.linalg.eigvalsh(np.asarray(H.hess(p)).reshape(samples, n, n))
    lo, hi = float(eig[:, 0].min()), float(eig[:, -1].max())
    if lo <= 0:
        raise InputError(f"Hamiltonian is not uniformly convex on the probe set (min eigenvalue {lo:.3g})")
    return lo, hi


def ratio_constant(H: Hamiltonian) -> float:
    """K = sqrt(beta / alpha) >= 1."""
    return float(np.sqrt(H.beta / H.alpha))


def radial_level(H: Hamiltonian, k, dirs, tol: float = 1e-15):
    """Radii r > 0 with H(r d) = k for unit rows ``d``; safeguarded Newton.

    H(r d) is convex in r with its minimum 0 at r = 0, and
    alpha r^2 / 2 <= H(r d) <= beta r^2 / 2 brackets the root.
    """
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    k = np.broadcast_to(np.asarray(k, dtype=float), dirs.shape[:1])
    lo = np.sqrt(2 * k / H.beta) * (1 - 1e-12)
    hi = np.sqrt(2 * k / H.alpha) * (1 + 1e-12)
    r = np.sqrt(lo * hi)
    for _ in range(200):
        f = H.eval(r[:, None] * dirs) - k
        lo = np.where(f < 0, r, lo)
        hi = np.where(f > 0, r, hi)
        df = np.einsum("ij,ij->i", H.grad(r[:, None] * dirs), dirs)
        with np.errstate(divide="ignore", invalid="ignore"):
            rn = r - f / df
        bad = ~np.isfinite(rn) | (rn <= lo) | (rn >= hi)
        rn = np.where(bad, 0.5 * (lo + hi), rn)
        done = np.abs(rn - r) <= tol * np.maximum(r, 1.0)
        r = rn
        if done.all():
            break
    return r


@dataclass(frozen=True)
class LevelExtremes:
    k: float
    a_k: float
    A_k: float
    argmin: np.ndarray = field(repr=False, default=None)
    argmax: np.ndarray = field(repr=False, default=None)


def _lagrange_norm_newton(H, k, p0, maxiter=100, tol=1e-12):
    """Stationary points of |p|^2/2 on {H = k} from start ``p0``."""
    p = np.array(p0, dtype=float)
    n = p.size
    g = H.grad(p)
    mu = float(p @ g / (g @ g))
    res = np.inf
    for _ in range(maxiter):
        g = H.grad(p)
        F = np.concatenate([p - mu * g, [H.eval(p) - k]])
        res = max(np.abs(F[:n]).max() / max(1.0, np.abs(p).max()), abs(F[n]) / max(1.0, k))
        if res <= tol:
            # one polishing step, kept only if it helps
            J = _lagrange_norm_jac(H, p, mu, g)
            try:
                step = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                return p, mu, res
            p2, mu2 = p + step[:n], mu + step[n]
            g2 = H.grad(p2)
            r2 = max(np.abs(p2 - mu2 * g2).max() / max(1.0, np.abs(p2).max()), abs(H.eval(p2) - k) / max(1.0, k))
            return (p2, mu2, r2) if r2 <= res else (p, mu, res)
        J = _lagrange_norm_jac(H, p, mu, g)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        for _ in range(30):
            pt, mut = p + t * step[:n], mu + t * step[n]
            gt = H.grad(pt)
            rt = max(np.abs(pt - mut * gt).max() / max(1.0, np.abs(pt).max()), abs(H.eval(pt) - k) / max(1.0, k))
            if rt < res:
                break
            t *= 0.5
        p, mu = pt, mut
    return p, mu, res


def _lagrange_norm_jac(H, p, mu, g):
    n = p.size
    J = np.zeros((n + 1, n + 1))
    J[:n, :n] = np.eye(n) - mu * H.hess(p)
    J[:n, n] = -g
    J[n, :n] = g
    return J


def level_extremes(H: Hamiltonian, k: float, seed: int = 0, scan: int = 64) -> LevelExtremes:
    """a_k = min |p| and A_k = max |p| over the level set {H = k}.

    Newton on the Lagrange system of |p|^2/2 subject to H(p) = k, started at
    the level-set points along the 2n coordinate directions, 8 seeded random
    directions, and the shortest/longest radial points of a ``scan``-direction
    sweep.
    """
    k = float(k)
    if not k > 0:
        raise InputError("level k must be positive")
    n = H.dim
    rng = np.random.default_rng(seed)
    dirs = [np.eye(n)[i] * sgn for i in range(n) for sgn in (1.0, -1.0)]
    rnd = rng.standard_normal((8, n))
    dirs.extend(rnd / np.linalg.norm(rnd, axis=1, keepdims=True))
    if n == 2:
        th = np.linspace(0, 2 * np.pi, scan, endpoint=False)
        sweep = np.column_stack([np.cos(th), np.sin(th)])
    else:
        sweep = rng.standard_normal((scan, n))
        sweep /= np.linalg.norm(sweep, axis=1, keepdims=True)
    rs = radial_level(H, k, sweep)
    dirs.append(sweep[np.argmin(rs)])
    dirs.append(sweep[np.argmax(rs)])
    dirs = np.array(dirs)
    starts = radial_level(H, k, dirs)[:, None] * dirs

    found, best = [], np.inf
    for p0 in starts:
        p, _, res = _lagrange_norm_newton(H, k, p0)
        best = min(best, res)
        if res <= 1e-10:
            found.append(p)
    if not found:
        raise ConvergenceError(f"level_extremes: no start converged (best residual {best:.3g})", best)
    found = np.array(found)
    norms = np.linalg.norm(found, axis=1)
    i, j = int(np.argmin(norms)), int(np.argmax(norms))
    out = LevelExtremes(k, float(norms[i]), float(norms[j]), found[i], found[j])
    if out.A_k / out.a_k > ratio_constant(H) + 1e-9:
        raise ConvergenceError(
            f"level_extremes: ratio {out.A_k / out.a_k!r} exceeds sqrt(beta/alpha) = {ratio_constant(H)!r}"
        )
    return out
