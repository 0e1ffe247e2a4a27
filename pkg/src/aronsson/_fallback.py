"""Pure numpy implementations of the hot kernels.

Signatures match the compiled module ``_kernels`` except that the cone
Newton here accepts any vectorised Hamiltonian, not just the built-in family.
"""
import numpy as np

CONVERGED, MAX_SWEEPS, DIVERGED = 0, 1, 2

# 8-neighbour ring used by the midpoint (max+min)/2 scheme
RING = np.array([(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)])
RING_LEN = np.hypot(RING[:, 0], RING[:, 1])


def _kkt_residual(g, lam, E, hv, k):
    gs = np.maximum(1.0, np.abs(g).max(axis=1))
    rg = np.abs(g - lam[:, None] * E).max(axis=1) / gs
    rh = np.abs(hv - k) / np.maximum(1.0, k)
    return np.maximum(rg, rh)


def cone_newton(H, k, E, P0, lam0, tol=1e-12, maxiter=100, polish=3):
    """Solve H_p(p) = lam e, H(p) = k for every row of ``E`` (unit vectors).

    Damped Newton on the (n+1)-dimensional KKT system, vectorised over rows.
    Returns ``(P, lam, res, ok)`` with ``ok`` = converged and lam > 0.
    """
    E = np.asarray(E, dtype=float)
    m, n = E.shape
    k = np.broadcast_to(np.asarray(k, dtype=float), (m,)).copy()
    P = np.array(P0, dtype=float)
    lam = np.array(lam0, dtype=float)
    g = H.grad(P)
    res = _kkt_residual(g, lam, E, H.eval(P), k)
    active = np.ones(m, dtype=bool)
    polished = np.zeros(m, dtype=int)
    for _ in range(maxiter + polish):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        p, l, e, kk = P[idx], lam[idx], E[idx], k[idx]
        gi = H.grad(p)
        hv = H.eval(p)
        F = np.concatenate([gi - l[:, None] * e, (hv - kk)[:, None]], axis=1)
        J = np.zeros((idx.size, n + 1, n + 1))
        J[:, :n, :n] = H.hess(p)
        J[:, :n, n] = -e
        J[:, n, :n] = gi
        try:
            step = np.linalg.solve(J, -F[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([_safe_solve(Ji, -Fi) for Ji, Fi in zip(J, F)])
        r0 = res[idx]
        t = np.ones(idx.size)
        new_p, new_l, new_r = p.copy(), l.copy(), r0.copy()
        pending = np.ones(idx.size, dtype=bool)
        for ls in range(31):
            if ls == 1:
                pending &= r0 > tol  # polishing steps take the full step or nothing
            j = np.flatnonzero(pending)
            if j.size == 0:
                break
            pt = p[j] + t[j, None] * step[j, :n]
            lt = l[j] + t[j] * step[j, n]
            rt = _kkt_residual(H.grad(pt), lt, e[j], H.eval(pt), kk[j])
            good = np.isfinite(rt) & (rt < r0[j])
            new_p[j[good]], new_l[j[good]], new_r[j[good]] = pt[good], lt[good], rt[good]
            pending[j[good]] = False
            t[j[~good]] *= 0.5
        improved = ~pending
        P[idx], lam[idx], res[idx] = new_p, new_l, new_r
        conv = r0 <= tol
        polished[idx[conv]] += 1
        stop = (conv & (~improved | (polished[idx] >= polish))) | (~conv & ~improved)
        active[idx[stop]] = False
    ok = (res <= tol) & (lam > 0)
    return P, lam, res, ok


def _safe_solve(J, F):
    try:
        return np.linalg.solve(J, F)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(J, F, rcond=None)[0]


def derivatives(u, h):
    """Centred first and second differences on interior nodes (nx-2, ny-2)."""
    c = u[1:-1, 1:-1]
    ux = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * h)
    uy = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * h)
    uxx = (u[2:, 1:-1] - 2 * c + u[:-2, 1:-1]) / (h * h)
    uyy = (u[1:-1, 2:] - 2 * c + u[1:-1, :-2]) / (h * h)
    uxy = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * h * h)
    return ux, uy, uxx, uyy, uxy


def aronsson_operator(u, h, grad_fn):
    """D^2u q.q with q = H_p(grad u) on interior nodes; also returns |q|^2.

    Nodes with |grad u| < 1e-12 get residual 0 (H_p(0) = 0 there).
    """
    ux, uy, uxx, uyy, uxy = derivatives(u, h)
    q = grad_fn(np.stack([ux, uy], axis=-1))
    q1, q2 = q[..., 0], q[..., 1]
    r = uxx * q1 * q1 + 2 * uxy * q1 * q2 + uyy * q2 * q2
    flat = np.hypot(ux, uy) < 1e-12
    r = np.where(flat, 0.0, r)
    return r, np.where(flat, 0.0, q1 * q1 + q2 * q2)


def jacobi_relax(u, active, h, grad_fn, tau_user, cfl, max_sweeps, stop_tol, div_window=50, log_every=1000):
    """Pseudo-time Jacobi iteration u <- u + tau * D^2u q.q on ``active`` nodes.

    ``tau`` is capped each sweep at cfl * h^2 / (4 max|q|^2 + eps).
    Returns ``(u, sweeps, last_update, status, log)``.
    """
    u = np.array(u, dtype=float)
    act = np.asarray(active, dtype=bool)[1:-1, 1:-1]
    inner = u[1:-1, 1:-1]
    log = []
    last, prev, streak, streak_start = np.inf, np.inf, 0, np.inf
    status = MAX_SWEEPS
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        r, q2 = aronsson_operator(u, h, grad_fn)
        r = np.where(act, r, 0.0)
        qmax = q2[act].max() if act.any() else 0.0
        tau = cfl * h * h / (4.0 * qmax + 1e-300)
        if tau_user > 0:
            tau = min(tau, tau_user)
        upd = tau * r
        inner += upd
        last = float(np.abs(upd).max()) if act.any() else 0.0
        if sweeps % log_every == 0:
            log.append((sweeps, last))
        if not np.isfinite(last):
            status = DIVERGED
            break
        if last < stop_tol:
            status = CONVERGED
            break
        if last > prev:
            if streak == 0:
                streak_start = prev
            streak += 1
            if streak >= div_window and last > 10.0 * streak_start:
                status = DIVERGED
                break
        else:
            streak = 0
        prev = last
    return u, sweeps, last, status, log


def midpoint_relax(u, active, max_sweeps, stop_tol, log_every=1000):
    """Monotone midpoint scheme for the infinity Laplacian on the 8-ring.

    Each active node becomes max_j min_l (d_l u_j + d_j u_l) / (d_j + d_l),
    the root of max_j (u_j - v)/d_j = max_l (v - u_l)/d_l.
    """
    u = np.array(u, dtype=float)
    act = np.asarray(active, dtype=bool)[1:-1, 1:-1]
    nx, ny = u.shape
    log = []
    last = np.inf
    status = MAX_SWEEPS
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        nb = np.stack([u[1 + dx:nx - 1 + dx, 1 + dy:ny - 1 + dy] for dx, dy in RING])
        d = RING_LEN
        best = None
        for j in range(8):
            v = (d[:, None, None] * nb[j][None] + d[j] * nb) / (d[j] + d[:, None, None])
            cand = v.min(axis=0)
            best = cand if best is None else np.maximum(best, cand)
        new = np.where(act, best, u[1:-1, 1:-1])
        last = float(np.abs(new - u[1:-1, 1:-1]).max()) if act.any() else 0.0
        u[1:-1, 1:-1] = new
        if sweeps % log_every == 0:
            log.append((sweeps, last))
        if last < stop_tol:
            status = CONVERGED
            break
    return u, sweeps, last, status, log
