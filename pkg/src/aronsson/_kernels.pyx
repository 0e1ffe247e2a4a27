# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the built-in Hamiltonian family.

H(p) = 1/2 q.A q + c (sin q_1 - q_1) with q = s p.  Same algorithms and
signatures as ``_fallback``; parallel loops touch independent nodes only, so
results do not depend on the thread count.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sin, cos, sqrt, fabs, isfinite, hypot

cnp.import_array()

cdef enum:
    NMAX = 8

cdef struct Fam:
    int n
    double A[NMAX * NMAX]
    double c
    double s


cdef Fam make_fam(double[:, ::1] A, double c, double s) except *:
    cdef Fam f
    cdef int i, j, n = A.shape[0]
    if n > NMAX or A.shape[1] != n:
        raise ValueError("compiled kernels support dimension <= 8")
    f.n = n
    f.c = c
    f.s = s
    for i in range(n):
        for j in range(n):
            f.A[i * n + j] = A[i, j]
    return f


cdef inline double fam_eval(Fam* f, double* p) noexcept nogil:
    cdef int i, j, n = f.n
    cdef double v = 0.0, qi
    for i in range(n):
        qi = f.s * p[i]
        for j in range(n):
            v += qi * f.A[i * n + j] * (f.s * p[j])
    v *= 0.5
    if f.c != 0.0:
        qi = f.s * p[0]
        v += f.c * (sin(qi) - qi)
    return v


cdef inline void fam_grad(Fam* f, double* p, double* g) noexcept nogil:
    cdef int i, j, n = f.n
    cdef double acc, q0
    for j in range(n):
        acc = 0.0
        for i in range(n):
            acc += (f.s * p[i]) * f.A[i * n + j]
        g[j] = acc
    if f.c != 0.0:
        q0 = f.s * p[0]
        g[0] += f.c * (cos(q0) - 1.0)
    for j in range(n):
        g[j] *= f.s


cdef inline void fam_hess(Fam* f, double* p, double* Hm, int ld) noexcept nogil:
    cdef int i, j, n = f.n
    for i in range(n):
        for j in range(n):
            Hm[i * ld + j] = f.A[i * n + j]
    if f.c != 0.0:
        Hm[0] -= f.c * sin(f.s * p[0])


cdef inline int dense_solve(double* J, double* b, int m) noexcept nogil:
    """Gaussian elimination with partial pivoting; solution overwrites b."""
    cdef int i, j, r, piv
    cdef double best, t, fac
    for i in range(m):
        piv = i
        best = fabs(J[i * m + i])
        for r in range(i + 1, m):
            if fabs(J[r * m + i]) > best:
                best = fabs(J[r * m + i])
                piv = r
        if best == 0.0:
            return 1
        if piv != i:
            for j in range(m):
                t = J[i * m + j]
                J[i * m + j] = J[piv * m + j]
                J[piv * m + j] = t
            t = b[i]
            b[i] = b[piv]
            b[piv] = t
        for r in range(i + 1, m):
            fac = J[r * m + i] / J[i * m + i]
            if fac != 0.0:
                for j in range(i, m):
                    J[r * m + j] -= fac * J[i * m + j]
                b[r] -= fac * b[i]
    for i in range(m - 1, -1, -1):
        t = b[i]
        for j in range(i + 1, m):
            t -= J[i * m + j] * b[j]
        b[i] = t / J[i * m + i]
    return 0


cdef inline double kkt_res(Fam* f, double* p, double lam, double* e, double k, double* g) noexcept nogil:
    cdef int i, n = f.n
    cdef double gs = 1.0, rg = 0.0, t
    fam_grad(f, p, g)
    for i in range(n):
        if fabs(g[i]) > gs:
            gs = fabs(g[i])
    for i in range(n):
        t = fabs(g[i] - lam * e[i])
        if t > rg:
            rg = t
    rg /= gs
    t = fabs(fam_eval(f, p) - k) / (k if k > 1.0 else 1.0)
    return rg if rg > t else t


cdef double newton_point(Fam* f, double k, double* e, double* p, double* lam_out,
                         double tol, int maxiter, int polish) noexcept nogil:
    cdef int n = f.n, m = f.n + 1, i, j, it, ls, npol = 0
    cdef double J[(NMAX + 1) * (NMAX + 1)]
    cdef double F[NMAX + 1]
    cdef double g[NMAX]
    cdef double pt[NMAX]
    cdef double gt[NMAX]
    cdef double lam = lam_out[0], res, r0, rt, lt, t
    cdef bint improved
    res = kkt_res(f, p, lam, e, k, g)
    for it in range(maxiter + polish):
        r0 = res
        fam_grad(f, p, g)
        for i in range(n):
            F[i] = -(g[i] - lam * e[i])
        F[n] = -(fam_eval(f, p) - k)
        fam_hess(f, p, J, m)
        for i in range(n):
            J[i * m + n] = -e[i]
            J[n * m + i] = g[i]
        J[n * m + n] = 0.0
        if dense_solve(J, F, m) != 0:
            break
        t = 1.0
        improved = False
        for ls in range(1 if r0 <= tol else 31):
            for i in range(n):
                pt[i] = p[i] + t * F[i]
            lt = lam + t * F[n]
            rt = kkt_res(f, pt, lt, e, k, gt)
            if isfinite(rt) and rt < r0:
                improved = True
                break
            t *= 0.5
        if improved:
            for i in range(n):
                p[i] = pt[i]
            lam = lt
            res = rt
        if r0 <= tol:
            npol += 1
            if not improved or npol >= polish:
                break
        elif not improved:
            break
    lam_out[0] = lam
    return res


def cone_newton_family(double[:, ::1] A, double c, double s, double[::1] k,
                       double[:, ::1] E, double[:, ::1] P0, double[::1] lam0,
                       double tol=1e-12, int maxiter=100, int polish=3, int nthreads=1):
    cdef Fam f = make_fam(A, c, s)
    cdef Py_ssize_t m = E.shape[0], i
    cdef int n = f.n, j
    P = np.array(P0, dtype=np.float64, order="C", copy=True)
    lam = np.array(lam0, dtype=np.float64, copy=True)
    res = np.empty(m, dtype=np.float64)
    cdef double[:, ::1] Pv = P
    cdef double[::1] lv = lam
    cdef double[::1] rv = res
    if E.shape[1] != n:
        raise ValueError("direction dimension does not match Hamiltonian")
    for i in prange(m, nogil=True, num_threads=nthreads, schedule="static"):
        rv[i] = newton_point(&f, k[i], &E[i, 0], &Pv[i, 0], &lv[i], tol, maxiter, polish)
    ok = (res <= tol) & (lam > 0)
    return P, lam, res, ok


cdef inline void grad2(Fam* f, double px, double py, double* q) noexcept nogil:
    cdef double p[2]
    p[0] = px
    p[1] = py
    fam_grad(f, p, q)


def jacobi_relax_family(double[:, ::1] u_in, const unsigned char[:, ::1] active, double h,
                        double[:, ::1] A, double c, double s, double tau_user, double cfl,
                        long max_sweeps, double stop_tol, int div_window=50, int log_every=1000,
                        int nthreads=1):
    cdef Fam f = make_fam(A, c, s)
    if f.n != 2:
        raise ValueError("relaxation kernels are 2-D")
    u_arr = np.array(u_in, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] u = u_arr
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1], i, j
    R_arr = np.zeros((nx, ny))
    Q_arr = np.zeros((nx, ny))
    cdef double[:, ::1] R = R_arr
    cdef double[:, ::1] Q = Q_arr
    # one gradient slot per row: C arrays declared here would be shared
    # between prange threads, scalars assigned in the loop are private
    G_arr = np.zeros((nx, 2))
    cdef double[:, ::1] G = G_arr
    cdef double ux, uy, uxx, uyy, uxy, c0, q0, q1
    cdef double h2 = h * h, qmax, tau, rmax, last = 1e308, prev = 1e308, streak_start = 1e308
    cdef long sweeps = 0, streak = 0
    cdef int status = 1
    log = []
    while sweeps < max_sweeps:
        sweeps += 1
        for i in prange(1, nx - 1, nogil=True, num_threads=nthreads, schedule="static"):
            for j in range(1, ny - 1):
                if not active[i, j]:
                    R[i, j] = 0.0
                    Q[i, j] = 0.0
                    continue
                c0 = u[i, j]
                ux = (u[i + 1, j] - u[i - 1, j]) / (2 * h)
                uy = (u[i, j + 1] - u[i, j - 1]) / (2 * h)
                if hypot(ux, uy) < 1e-12:
                    R[i, j] = 0.0
                    Q[i, j] = 0.0
                    continue
                uxx = (u[i + 1, j] - 2 * c0 + u[i - 1, j]) / h2
                uyy = (u[i, j + 1] - 2 * c0 + u[i, j - 1]) / h2
                uxy = (u[i + 1, j + 1] - u[i + 1, j - 1] - u[i - 1, j + 1] + u[i - 1, j - 1]) / (4 * h2)
                grad2(&f, ux, uy, &G[i, 0])
                q0 = G[i, 0]
                q1 = G[i, 1]
                R[i, j] = uxx * q0 * q0 + 2 * uxy * q0 * q1 + uyy * q1 * q1
                Q[i, j] = q0 * q0 + q1 * q1
        qmax = 0.0
        rmax = 0.0
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                if Q[i, j] > qmax:
                    qmax = Q[i, j]
                if fabs(R[i, j]) > rmax or not isfinite(R[i, j]):
                    rmax = fabs(R[i, j])
        tau = cfl * h2 / (4.0 * qmax + 1e-300)
        if tau_user > 0 and tau_user < tau:
            tau = tau_user
        for i in prange(1, nx - 1, nogil=True, num_threads=nthreads, schedule="static"):
            for j in range(1, ny - 1):
                u[i, j] = u[i, j] + tau * R[i, j]
        last = tau * rmax
        if sweeps % log_every == 0:
            log.append((sweeps, last))
        if not isfinite(last):
            status = 2
            break
        if last < stop_tol:
            status = 0
            break
        if last > prev:
            if streak == 0:
                streak_start = prev
            streak += 1
            if streak >= div_window and last > 10.0 * streak_start:
                status = 2
                break
        else:
            streak = 0
        prev = last
    return u_arr, sweeps, last, status, log


def midpoint_relax(double[:, ::1] u_in, const unsigned char[:, ::1] active, long max_sweeps,
                   double stop_tol, int log_every=1000, int nthreads=1):
    u_arr = np.array(u_in, dtype=np.float64, order="C", copy=True)
    new_arr = u_arr.copy()
    cdef double[:, ::1] u = u_arr
    cdef double[:, ::1] w = new_arr
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1], i, j
    cdef int a, b
    cdef int di[8]
    cdef int dj[8]
    cdef double dl[8]
    cdef double nb[8]
    cdef double best, cand, v, last = 1e308, diff
    cdef long sweeps = 0
    cdef int status = 1
    di[:] = [1, 1, 0, -1, -1, -1, 0, 1]
    dj[:] = [0, 1, 1, 1, 0, -1, -1, -1]
    for a in range(8):
        dl[a] = sqrt(<double>(di[a] * di[a] + dj[a] * dj[a]))
    log = []
    while sweeps < max_sweeps:
        sweeps += 1
        for i in prange(1, nx - 1, nogil=True, num_threads=nthreads, schedule="static"):
            midpoint_row(u, w, active, i, ny, di, dj, dl)
        last = 0.0
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                diff = fabs(w[i, j] - u[i, j])
                if diff > last:
                    last = diff
                u[i, j] = w[i, j]
        if sweeps % log_every == 0:
            log.append((sweeps, last))
        if last < stop_tol:
            status = 0
            break
    return u_arr, sweeps, last, status, log


cdef void midpoint_row(double[:, ::1] u, double[:, ::1] w, const unsigned char[:, ::1] active,
                       Py_ssize_t i, Py_ssize_t ny, int* di, int* dj, double* dl) noexcept nogil:
    cdef Py_ssize_t j
    cdef int a, b
    cdef double nb[8]
    cdef double best, cand, v
    for j in range(1, ny - 1):
        if not active[i, j]:
            w[i, j] = u[i, j]
            continue
        for a in range(8):
            nb[a] = u[i + di[a], j + dj[a]]
        best = -1e308
        for a in range(8):
            cand = 1e308
            for b in range(8):
                v = (dl[b] * nb[a] + dl[a] * nb[b]) / (dl[a] + dl[b])
                if v < cand:
                    cand = v
            if cand > best:
                best = cand
        w[i, j] = best
