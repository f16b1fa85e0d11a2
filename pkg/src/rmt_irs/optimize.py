"""Alternating maximization of the deterministic rate approximation.

One outer iteration water-fills the transmit covariance with the most recent
fixed-point parameters, re-solves the fixed point, and takes one Armijo
backtracking ascent step on the IRS phases. Phases are unconstrained reals;
the objective is 2*pi-periodic in each entry, which replaces wrapping logic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import CorrelationProfile, SystemDims
from .det_equiv import (
    FixedPoint,
    FixedPointError,
    build_da_inputs,
    da_objective,
    da_rate,
    solve_fixed_point,
)
from .rate import Covariance, PhaseVector

__all__ = [
    "AoConfig",
    "AoStep",
    "AoTrace",
    "water_fill",
    "phase_gradient",
    "backtracking_step",
    "alternating_optimize",
]


@dataclass(frozen=True)
class AoConfig:
    """Alternating-optimization controls.

    armijo_c is the acceptance constant of the sufficient-increase test (the
    figure presets use 0.005 and 0.0005), shrink the line-search backoff
    factor. init_theta / init_q default to the spiral phase profile and the
    uniform covariance at runtime.
    """

    armijo_c: float = 0.005
    shrink: float = 0.5
    max_outer: int = 200
    max_ls: int = 40
    conv_tol: float = 1e-6
    init_theta: PhaseVector | None = None
    init_q: Covariance | None = None

    def __post_init__(self):
        if not 0.0 < self.armijo_c < 1.0:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if self.max_outer < 1 or self.max_ls < 1:
            raise ValueError("max_outer and max_ls must be >= 1")
        if not self.conv_tol > 0:
            raise ValueError("conv_tol must be positive")


@dataclass(frozen=True)
class AoStep:
    """One outer iteration: objective value after the step, and its evidence.

    da_pre_step is the objective right after the covariance update, i.e. the
    reference value of the sufficient-increase test, so accepted steps can be
    re-verified from the trace alone:
    da_nats >= da_pre_step + armijo_c * step_size * grad_norm.
    """

    iteration: int
    da_nats: float
    da_pre_step: float
    step_size: float
    grad_norm: float
    h: tuple[float, float, float, float, float]


@dataclass
class AoTrace:
    steps: list[AoStep] = field(default_factory=list)
    reason: str = "max_outer"

    @property
    def da_values(self) -> np.ndarray:
        return np.array([s.da_nats for s in self.steps])

    def __len__(self) -> int:
        return len(self.steps)


def water_fill(d2_eigs: tuple[np.ndarray, np.ndarray], kappa: float,
               budget: float) -> Covariance:
    """Capacity-optimal covariance for the concave per-mode subproblem.

    Parameters
    ----------
    d2_eigs : (eigenvalues, eigenvectors) of the transmit correlation;
        eigenvalues must be non-negative (tiny eigh round-off is clamped).
    kappa : effective channel-gain coefficient multiplying the correlation
        eigenvalues. kappa = 0 means the objective is covariance-independent;
        the uniform allocation is returned as the canonical optimum.
    budget : total power n * P.

    The water level is found exactly from the sorted inverse-gain floors
    (largest active set whose level clears its highest floor), then the
    allocation is compensated so the trace meets the budget to ~1e-16
    relative even when the floors dwarf the budget.
    """
    lam, vecs = d2_eigs
    lam = np.asarray(lam, dtype=float)
    if budget < 0:
        raise ValueError("budget must be non-negative")
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    n = lam.shape[0]
    if np.any(lam < -1e-10 * max(float(lam.max(initial=0.0)), 0.0)):
        raise ValueError("d2 eigenvalues must be non-negative")
    lam = np.clip(lam, 0.0, None)
    power = budget / n
    if kappa == 0.0:
        return Covariance.uniform(n, power)
    positive = lam > 0.0
    if budget > 0 and not np.any(positive):
        raise ValueError("all modes have zero gain; no usable mode for a positive budget")

    floors = np.full(n, np.inf)
    floors[positive] = 1.0 / (kappa * lam[positive])
    order = np.argsort(floors, kind="stable")
    sorted_floors = floors[order]

    k_active = 0
    cumulative = 0.0
    for k in range(1, n + 1):
        a_k = sorted_floors[k - 1]
        if not np.isfinite(a_k):
            break
        cumulative += a_k
        if (budget + cumulative) / k > a_k:
            k_active = k
    alloc = np.zeros(n)
    if k_active > 0:
        active = order[:k_active]
        level = (budget + np.sum(floors[active])) / k_active
        alloc[active] = level - floors[active]
        # compensate rounding so Tr equals the budget exactly
        alloc[active] += (budget - alloc.sum()) / k_active
        alloc = np.clip(alloc, 0.0, None)
    q = (vecs * alloc) @ vecs.conj().T
    q = (q + q.conj().T) / 2.0
    return Covariance(q=q, power_budget=power)


def phase_gradient(theta, fp: FixedPoint, corr: CorrelationProfile,
                   dims: SystemDims) -> np.ndarray:
    """Gradient of the deterministic rate with respect to each phase shift.

    The fixed-point parameters are held constant (their partials vanish at
    the solution). Differentiating the phase-coupled log-det term gives, per
    entry i, a trace against a matrix supported on row/column i only, so the
    whole gradient reduces to the imaginary diagonal of one matrix product:

        grad_i = -(2 c / n_r1) * Im[(M W)_ii],
        M = Phi R2 Phi^H,  W = (I + c D1 M)^{-1} D1,  c = alpha_t1 h1 h2 h4 h5.
    """
    th = theta.theta if isinstance(theta, PhaseVector) else np.asarray(theta, dtype=float)
    n_l = corr.d1.shape[0]
    if th.shape != (n_l,):
        raise ValueError(f"theta must have length {n_l}")
    c = dims.alpha_t1 * fp.h1 * fp.h2 * fp.h4 * fp.h5
    if c == 0.0:
        return np.zeros(n_l)
    phi = np.exp(1j * th)
    m = phi[:, None] * corr.r2 * np.conj(phi)[None, :]
    w = np.linalg.solve(np.eye(n_l) + c * (corr.d1 @ m), corr.d1)
    diag_mw = np.einsum("ij,ji->i", m, w)
    return -(2.0 * c / dims.n_r1) * np.imag(diag_mw)


def backtracking_step(theta, grad: np.ndarray, objective: Callable[[np.ndarray], float],
                      cfg: AoConfig, current: float | None = None
                      ) -> tuple[PhaseVector, float, float]:
    """Largest step gamma = shrink^k whose ascent clears the sufficient-increase bar.

    Accepts the first k = 0, 1, ... with
    objective(theta + gamma*grad) >= objective(theta) + c*gamma*||grad||
    (Euclidean norm, first power). Exhausting max_ls trials, or a zero
    gradient, returns theta unchanged with gamma = 0 — the stationary signal
    for the outer loop.
    """
    th = theta.theta if isinstance(theta, PhaseVector) else np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise ValueError("gradient must be finite")
    base = objective(th) if current is None else float(current)
    grad_norm = float(np.linalg.norm(grad))
    if grad_norm == 0.0:
        return PhaseVector(th), 0.0, base
    for k in range(cfg.max_ls):
        gamma = cfg.shrink ** k
        candidate = th + gamma * grad
        value = objective(candidate)
        if value >= base + cfg.armijo_c * gamma * grad_norm:
            return PhaseVector(candidate), gamma, value
    return PhaseVector(th), 0.0, base


def alternating_optimize(dims: SystemDims, corr: CorrelationProfile, noise_var: float,
                         power: float, cfg: AoConfig, fp_tol: float = 1e-10,
                         fp_max_iter: int = 50000
                         ) -> tuple[PhaseVector, Covariance, AoTrace]:
    """Alternating water-filling / phase-ascent maximization of the rate approximation.

    Per outer iteration: (1) water-fill the covariance using the most recent
    fixed-point parameters (an initial solve precedes iteration 0), (2)
    re-solve the fixed point at the new covariance, (3) take one backtracking
    gradient step on the phases. Stops when the relative objective
    improvement over a full iteration drops below conv_tol, when the phase
    step stalls with the covariance also unchanged, or at max_outer.
    """
    corr.require_match(dims)
    if not noise_var > 0:
        raise ValueError("noise_var must be positive")
    if power < 0:
        raise ValueError("power must be non-negative")
    theta = cfg.init_theta if cfg.init_theta is not None else PhaseVector.spiral(dims.n_d1)
    if len(theta) != dims.n_d1:
        raise ValueError(f"init_theta must have length {dims.n_d1}")
    q = cfg.init_q if cfg.init_q is not None else Covariance.uniform(dims.n_d2, power)
    if q.q.shape != (dims.n_d2, dims.n_d2):
        raise ValueError(f"init_q must be {dims.n_d2} x {dims.n_d2}")

    lam_d2, vecs_d2 = np.linalg.eigh(corr.d2)
    lam_d2 = np.clip(lam_d2, 0.0, None)
    budget = dims.n_d2 * power

    def solve_at(theta_pv: PhaseVector, q_cov: Covariance, stage: str):
        inp = build_da_inputs(theta_pv, q_cov, corr, dims, z=noise_var)
        try:
            return inp, solve_fixed_point(inp, tol=fp_tol, max_iter=fp_max_iter)
        except FixedPointError as err:
            raise FixedPointError(f"{stage}: {err}", residual=err.residual,
                                  iterations=err.iterations) from None

    def coupling_of(theta_pv: PhaseVector) -> np.ndarray:
        phi = theta_pv.phi
        return corr.d1 @ (phi[:, None] * corr.r2 * np.conj(phi)[None, :])

    inp0, fp = solve_at(theta, q, "initial fixed point")
    prev_value = da_objective(fp.h, inp0, coupling_of(theta))

    trace = AoTrace(steps=[], reason="max_outer")
    for t in range(cfg.max_outer):
        kappa = dims.alpha_t2 * fp.h1 * fp.h2 * fp.h3 * fp.h4
        q_new = water_fill((lam_d2, vecs_d2), kappa, budget)
        q_moved = bool(
            np.linalg.norm(q_new.q - q.q) > 1e-12 * max(1.0, np.linalg.norm(q.q))
        )
        q = q_new

        inp, fp = solve_at(theta, q, f"outer iteration {t}")
        grad = phase_gradient(theta, fp, corr, dims)
        base = da_objective(fp.h, inp, coupling_of(theta))

        def objective(th: np.ndarray) -> float:
            try:
                return da_rate(th, q, corr, dims, noise_var, tol=fp_tol, max_iter=fp_max_iter)
            except FixedPointError as err:
                raise FixedPointError(f"outer iteration {t} (line search): {err}",
                                      residual=err.residual, iterations=err.iterations) from None

        theta, gamma, value = backtracking_step(theta, grad, objective, cfg, current=base)
        trace.steps.append(AoStep(iteration=t, da_nats=value, da_pre_step=base,
                                  step_size=gamma, grad_norm=float(np.linalg.norm(grad)),
                                  h=tuple(fp.h)))

        if gamma == 0.0 and not q_moved:
            trace.reason = "stationary"
            break
        if (value - prev_value) / max(abs(prev_value), 1e-300) < cfg.conv_tol:
            trace.reason = "improvement_below_tol"
            break
        prev_value = value

    return theta, q, trace
