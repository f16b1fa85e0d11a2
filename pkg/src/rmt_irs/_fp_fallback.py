"""Pure-numpy fixed-point kernel, used when the compiled extension is absent.

Semantics match rmt_irs._fpcore.solve_fp: a guarded Newton step on the
five-equation system is attempted every iteration (accepted only when finite,
non-negative, and residual-decreasing), with damped simultaneous substitution
as the globally convergent fallback. Near-critical spectra turn the plain
substitution map into an oscillation whose damped variants stall at attracting
two-cycles, so the second-order step is what actually reaches tolerance there.
"""

import numpy as np

_DAMP_FLOOR = 2.0 ** -20


def _rhs(h, lam, z, alphas):
    dens = [z + (h[1] * h[2] * h[3] * h[4]) * lam[0]]
    for k in range(1, 5):
        p = np.prod([h[j] for j in range(5) if j != k])
        dens.append(1.0 + alphas[k - 1] * p * lam[k])
    return np.array([np.mean(lam[k] / dens[k]) for k in range(5)])


def _relmax(u, h):
    m = np.maximum(np.abs(u), np.abs(h))
    return float(np.max(np.divide(np.abs(u - h), m, out=np.zeros(5), where=m > 0)))


def _newton_candidate(h, u, lam, z, alphas):
    # F(h) = rhs(h) - h; jacobian of rhs has zero diagonal and entries
    # -c_k * (product of the other three h's) * mean(lam^2 / den^2)
    jac = -np.eye(5)
    for k in range(5):
        c = 1.0 if k == 0 else alphas[k - 1]
        c0 = z if k == 0 else 1.0
        p = c * np.prod([h[j] for j in range(5) if j != k])
        den = c0 + p * lam[k]
        s = np.mean(lam[k] ** 2 / den ** 2)
        for j in range(5):
            if j != k:
                jac[k, j] -= c * np.prod([h[m] for m in range(5) if m not in (k, j)]) * s
    try:
        delta = np.linalg.solve(jac, -(u - h))
    except np.linalg.LinAlgError:
        return None
    cand = h + delta
    if not np.all(np.isfinite(cand)) or np.any(cand < 0):
        return None
    return cand


def solve_fp(lam1, lam2, lam3, lam4, lam5, z, a2, a3, a4, a5, tol, max_iter,
             h1, h2, h3, h4, h5):
    lam = (np.asarray(lam1), np.asarray(lam2), np.asarray(lam3),
           np.asarray(lam4), np.asarray(lam5))
    alphas = (a2, a3, a4, a5)
    h = np.array([h1, h2, h3, h4, h5], dtype=float)
    damp = 1.0
    best_res = np.inf
    res = np.inf
    bad = 0
    for it in range(max_iter):
        u = _rhs(h, lam, z, alphas)
        res = _relmax(u, h)
        if res <= tol:
            return (*u, it + 1, res, 1)

        cand = _newton_candidate(h, u, lam, z, alphas)
        if cand is not None:
            if _relmax(_rhs(cand, lam, z, alphas), cand) < res:
                h = cand
                continue

        # damped substitution fallback; the stagnation reference resets after
        # each halving so early transients cannot force runaway halving
        if res >= best_res:
            bad += 1
            if bad >= 10:
                damp = max(damp * 0.5, _DAMP_FLOOR)
                bad = 0
                best_res = res
        else:
            bad = 0
            best_res = res
        h = (1.0 - damp) * h + damp * u

    return (*h, max_iter, res, 0)
