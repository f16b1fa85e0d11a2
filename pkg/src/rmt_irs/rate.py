"""Monte Carlo ground truth for the normalized ergodic rate.

Rates are in nats per receive antenna throughout; the harness converts to
bits for reporting. Every trial is a pure function of its derived seed, so
results are reproducible and independent of worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .channel import (
    ChannelRealization,
    CorrelationProfile,
    SystemDims,
    _draw_hops,
    _draw_hops_rayleigh,
    psd_sqrt,
)

__all__ = [
    "PhaseVector",
    "Covariance",
    "RateEstimate",
    "instantaneous_rate",
    "mc_ergodic_rate",
    "empirical_stieltjes",
]

_DRAWERS = {
    "double-scattering": _draw_hops,
    "rayleigh": _draw_hops_rayleigh,
}


@dataclass(frozen=True)
class PhaseVector:
    """IRS phase shifts in radians; the induced diagonal has unit-modulus entries."""

    theta: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=float)
        if t.ndim != 1:
            raise ValueError(f"theta must be a vector, got shape {t.shape}")
        if not np.all(np.isfinite(t)):
            raise ValueError("theta entries must be finite")
        object.__setattr__(self, "theta", t)

    def __len__(self) -> int:
        return self.theta.shape[0]

    @property
    def phi(self) -> np.ndarray:
        return np.exp(1j * self.theta)

    @classmethod
    def spiral(cls, n: int) -> "PhaseVector":
        """Default initializer theta_l = 2*pi*l/n, l = 0..n-1."""
        return cls(2.0 * np.pi * np.arange(n) / n)


@dataclass(frozen=True)
class Covariance:
    """Transmit signal covariance with its per-antenna power budget P.

    Feasibility constraint: Tr(q) <= n * P (checked with 1e-9 slack).
    """

    q: np.ndarray
    power_budget: float

    def __post_init__(self):
        q = np.asarray(self.q, dtype=complex)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError(f"q must be square, got shape {q.shape}")
        scale = np.linalg.norm(q, 2) if q.size > 1 else abs(complex(q.reshape(-1)[0]))
        if np.linalg.norm(q - q.conj().T, 2) > 1e-12 * max(scale, 1e-300):
            raise ValueError("q is not Hermitian")
        w = np.linalg.eigvalsh(q)
        if w[0] < -1e-10 * max(float(w[-1]), 0.0):
            raise ValueError(f"q is not PSD: min eigenvalue {w[0]:.3e}")
        tr = float(np.real(np.trace(q)))
        if tr > q.shape[0] * self.power_budget + 1e-9:
            raise ValueError(
                f"trace {tr:.12g} exceeds power budget {q.shape[0]} * {self.power_budget:.12g}"
            )
        object.__setattr__(self, "q", q)

    @classmethod
    def uniform(cls, n: int, power: float) -> "Covariance":
        return cls(q=power * np.eye(n), power_budget=power)

    @cached_property
    def sqrt(self) -> np.ndarray:
        return psd_sqrt(self.q)


@dataclass(frozen=True)
class RateEstimate:
    """Sample mean / standard error of the normalized rate over channel draws."""

    mean_nats: float
    stderr_nats: float
    n_trials: int
    noise_var: float

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.mean_nats < 0 or self.stderr_nats < 0:
            raise ValueError("rate statistics must be non-negative")


def _as_phase(theta) -> PhaseVector:
    return theta if isinstance(theta, PhaseVector) else PhaseVector(np.asarray(theta, dtype=float))


def _q_sqrt(q) -> np.ndarray:
    # Covariance carries a cached square root; plain arrays get factored here.
    if isinstance(q, Covariance):
        return q.sqrt
    return psd_sqrt(np.asarray(q, dtype=complex))


def _effective(real: ChannelRealization, phi: np.ndarray, q_sqrt: np.ndarray) -> np.ndarray:
    # H1 Phi H2 Q^(1/2); forming the Gram factor keeps I + W W^H / s2 exactly
    # Hermitian positive definite, so the Cholesky below cannot spuriously fail.
    return real.h1 @ (phi[:, None] * real.h2) @ q_sqrt


def instantaneous_rate(real: ChannelRealization, theta, q, noise_var: float) -> float:
    """log-det rate (nats/antenna) of one channel realization.

    Computed as (1/n_r1) logdet(I + W W^H / noise_var) through a Cholesky
    factorization, which fails loudly if positive-definiteness is ever lost.
    """
    if not noise_var > 0:
        raise ValueError("noise_var must be positive")
    pv = _as_phase(theta)
    w = _effective(real, pv.phi, _q_sqrt(q))
    n_r1 = real.h1.shape[0]
    a = np.eye(n_r1) + (w @ w.conj().T) / noise_var
    chol = np.linalg.cholesky(a)
    return float(2.0 * np.sum(np.log(np.real(np.diagonal(chol)))) / n_r1)


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    # Per-trial stream keyed by (seed, trial index): reproducible and
    # order-independent under any parallel schedule.
    return np.random.default_rng(np.random.SeedSequence((seed, trial)))


def mc_ergodic_rate(dims: SystemDims, corr: CorrelationProfile, theta, q,
                    noise_var: float, n_trials: int, seed: int,
                    threads: int = 1, model: str = "double-scattering") -> RateEstimate:
    """Monte Carlo estimate of the normalized ergodic rate.

    Parameters
    ----------
    n_trials : independent channel draws (a figure-preset default is 2000).
    seed : base seed; trial t uses the derived stream (seed, t).
    threads : worker threads across trials; the estimate is bit-identical
        for any value because each trial writes its own slot and the
        reduction is a fixed-order pairwise sum.
    model : "double-scattering" or the full-rank "rayleigh" baseline.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    if not noise_var > 0:
        raise ValueError("noise_var must be positive")
    try:
        draw = _DRAWERS[model]
    except KeyError:
        raise ValueError(f"unknown channel model {model!r}") from None
    corr.require_match(dims)
    pv = _as_phase(theta)
    q_sqrt = _q_sqrt(q)
    phi = pv.phi

    rates = np.empty(n_trials)
    eye = np.eye(dims.n_r1)
    inv_nv = 1.0 / noise_var
    n_r1 = dims.n_r1

    def run_block(lo: int, hi: int) -> None:
        # same arithmetic as instantaneous_rate, with the per-trial shape
        # validation and identity allocation hoisted out of the loop
        for t in range(lo, hi):
            h1, h2 = draw(dims, corr, _trial_rng(seed, t))
            w = h1 @ (phi[:, None] * h2) @ q_sqrt
            chol = np.linalg.cholesky(eye + (w @ w.conj().T) * inv_nv)
            rates[t] = 2.0 * np.sum(np.log(np.real(np.diagonal(chol)))) / n_r1

    workers = max(1, int(threads))
    if workers == 1:
        run_block(0, n_trials)
    else:
        step = -(-n_trials // workers)
        bounds = [(lo, min(lo + step, n_trials)) for lo in range(0, n_trials, step)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for fut in [pool.submit(run_block, lo, hi) for lo, hi in bounds]:
                fut.result()

    mean = float(np.mean(rates))
    stderr = float(np.std(rates, ddof=1) / np.sqrt(n_trials)) if n_trials > 1 else 0.0
    return RateEstimate(mean_nats=mean, stderr_nats=stderr, n_trials=n_trials,
                        noise_var=noise_var)


def empirical_stieltjes(real: ChannelRealization, theta, q, corr: CorrelationProfile,
                        z: float) -> float:
    """Resolvent trace (1/n_r1) Tr (zI + B)^-1 of one realization's Gram matrix."""
    if not z > 0:
        raise ValueError("z must be positive")
    pv = _as_phase(theta)
    if len(pv) != corr.d1.shape[0] or real.h1.shape[1] != corr.d1.shape[0]:
        raise ValueError("phase vector, realization, and correlation profile disagree on the IRS dimension")
    w = _effective(real, pv.phi, _q_sqrt(q))
    lam = np.clip(np.linalg.eigvalsh(w @ w.conj().T), 0.0, None)
    return float(np.mean(1.0 / (z + lam)))
