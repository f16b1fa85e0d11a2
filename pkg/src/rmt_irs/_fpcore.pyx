# cython: language_level=3
"""Compiled inner loop for the five-parameter fixed point.

Same contract as rmt_irs._fp_fallback.solve_fp; selected at import by
rmt_irs.det_equiv when available. A guarded Newton step on the five-equation
system is attempted every iteration (accepted only when finite, non-negative,
and residual-decreasing), with damped simultaneous substitution as the
globally convergent fallback; near-critical spectra stall every damped
substitution variant at attracting two-cycles, where only the second-order
step reaches tolerance.
"""

from libc.math cimport fabs, isfinite, INFINITY

DEF DAMP_FLOOR = 9.5367431640625e-07  # 2^-20


cdef inline double _trace_sum(double[::1] lam, double c0, double p) noexcept:
    cdef Py_ssize_t k, n = lam.shape[0]
    cdef double s = 0.0
    for k in range(n):
        s += lam[k] / (c0 + p * lam[k])
    return s / n


cdef inline double _sq_sum(double[::1] lam, double c0, double p) noexcept:
    cdef Py_ssize_t k, n = lam.shape[0]
    cdef double s = 0.0, d
    for k in range(n):
        d = c0 + p * lam[k]
        s += lam[k] * lam[k] / (d * d)
    return s / n


cdef inline double _prod_excl(double* h, int skip1, int skip2) noexcept:
    cdef double p = 1.0
    cdef int m
    for m in range(5):
        if m != skip1 and m != skip2:
            p *= h[m]
    return p


cdef inline void _rhs(double[::1] l1, double[::1] l2, double[::1] l3,
                      double[::1] l4, double[::1] l5, double z,
                      double a2, double a3, double a4, double a5,
                      double* h, double* u) noexcept:
    u[0] = _trace_sum(l1, z, _prod_excl(h, 0, -1))
    u[1] = _trace_sum(l2, 1.0, a2 * _prod_excl(h, 1, -1))
    u[2] = _trace_sum(l3, 1.0, a3 * _prod_excl(h, 2, -1))
    u[3] = _trace_sum(l4, 1.0, a4 * _prod_excl(h, 3, -1))
    u[4] = _trace_sum(l5, 1.0, a5 * _prod_excl(h, 4, -1))


cdef inline double _relmax(double* u, double* h) noexcept:
    cdef double res = 0.0, m, r
    cdef int i
    for i in range(5):
        m = fabs(u[i])
        if fabs(h[i]) > m:
            m = fabs(h[i])
        if m > 0.0:
            r = fabs(u[i] - h[i]) / m
            if r > res:
                res = r
    return res


cdef inline int _solve5(double* a, double* b) noexcept:
    """Gaussian elimination with partial pivoting on a 5x5 system (in place)."""
    cdef int col, row, piv, i
    cdef double best, factor, tmp
    for col in range(5):
        piv = col
        best = fabs(a[col * 5 + col])
        for row in range(col + 1, 5):
            if fabs(a[row * 5 + col]) > best:
                best = fabs(a[row * 5 + col])
                piv = row
        if best == 0.0:
            return 0
        if piv != col:
            for i in range(5):
                tmp = a[col * 5 + i]
                a[col * 5 + i] = a[piv * 5 + i]
                a[piv * 5 + i] = tmp
            tmp = b[col]
            b[col] = b[piv]
            b[piv] = tmp
        for row in range(col + 1, 5):
            factor = a[row * 5 + col] / a[col * 5 + col]
            for i in range(col, 5):
                a[row * 5 + i] -= factor * a[col * 5 + i]
            b[row] -= factor * b[col]
    for col in range(4, -1, -1):
        for row in range(col + 1, 5):
            b[col] -= a[col * 5 + row] * b[row]
        b[col] /= a[col * 5 + col]
    return 1


def solve_fp(double[::1] lam1, double[::1] lam2, double[::1] lam3,
             double[::1] lam4, double[::1] lam5,
             double z, double a2, double a3, double a4, double a5,
             double tol, long max_iter,
             double h1, double h2, double h3, double h4, double h5):
    """Solve the five coupled trace equations.

    Returns (h1..h5, iterations, residual, converged). The residual is the
    max componentwise relative gap between the iterate and the re-evaluated
    right-hand sides.
    """
    cdef double h[5]
    cdef double u[5]
    cdef double cand[5]
    cdef double cand_u[5]
    cdef double jac[25]
    cdef double step[5]
    cdef double alpha[4]
    cdef double damp = 1.0
    cdef double best_res = INFINITY
    cdef double res = INFINITY
    cdef double c, p, s, c0
    cdef long bad = 0
    cdef long it
    cdef int i, j, k, ok

    h[0] = h1; h[1] = h2; h[2] = h3; h[3] = h4; h[4] = h5
    alpha[0] = a2; alpha[1] = a3; alpha[2] = a4; alpha[3] = a5

    for it in range(max_iter):
        _rhs(lam1, lam2, lam3, lam4, lam5, z, a2, a3, a4, a5, h, u)
        res = _relmax(u, h)
        if res <= tol:
            return u[0], u[1], u[2], u[3], u[4], it + 1, res, 1

        # Newton on F(h) = rhs(h) - h: own-derivatives are -1, cross entries
        # -c_k * (product of the other three h's) * mean(lam^2/den^2)
        for k in range(5):
            c = 1.0 if k == 0 else alpha[k - 1]
            c0 = z if k == 0 else 1.0
            p = c * _prod_excl(h, k, -1)
            if k == 0:
                s = _sq_sum(lam1, c0, p)
            elif k == 1:
                s = _sq_sum(lam2, c0, p)
            elif k == 2:
                s = _sq_sum(lam3, c0, p)
            elif k == 3:
                s = _sq_sum(lam4, c0, p)
            else:
                s = _sq_sum(lam5, c0, p)
            for j in range(5):
                if j == k:
                    jac[k * 5 + j] = -1.0
                else:
                    jac[k * 5 + j] = -c * _prod_excl(h, k, j) * s
            step[k] = -(u[k] - h[k])
        ok = _solve5(jac, step)
        if ok:
            for i in range(5):
                cand[i] = h[i] + step[i]
                if not isfinite(cand[i]) or cand[i] < 0.0:
                    ok = 0
                    break
        if ok:
            _rhs(lam1, lam2, lam3, lam4, lam5, z, a2, a3, a4, a5, cand, cand_u)
            if _relmax(cand_u, cand) < res:
                for i in range(5):
                    h[i] = cand[i]
                continue

        # damped substitution fallback; the stagnation reference resets after
        # each halving so early transients cannot force runaway halving
        if res >= best_res:
            bad += 1
            if bad >= 10:
                damp *= 0.5
                if damp < DAMP_FLOOR:
                    damp = DAMP_FLOOR
                bad = 0
                best_res = res
        else:
            bad = 0
            best_res = res
        for i in range(5):
            h[i] = (1.0 - damp) * h[i] + damp * u[i]

    return h[0], h[1], h[2], h[3], h[4], max_iter, res, 0
