"""Shared fixtures and oracle helpers for the test suite."""

import numpy as np
import pytest

from rmt_irs.channel import CorrelationProfile, SystemDims, sample_channel


def rand_psd(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    """Random Hermitian PSD matrix with spectral scale of order `scale`."""
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (g @ g.conj().T) / n


def rand_profile(rng: np.random.Generator, dims: SystemDims) -> CorrelationProfile:
    return CorrelationProfile(
        r1=rand_psd(rng, dims.n_r1),
        s1=rand_psd(rng, dims.n_s1),
        d1=rand_psd(rng, dims.n_d1),
        r2=rand_psd(rng, dims.n_d1),
        s2=rand_psd(rng, dims.n_s2),
        d2=rand_psd(rng, dims.n_d2),
    )


def identity_profile(dims: SystemDims) -> CorrelationProfile:
    return CorrelationProfile(
        r1=np.eye(dims.n_r1, dtype=complex),
        s1=np.eye(dims.n_s1, dtype=complex),
        d1=np.eye(dims.n_d1, dtype=complex),
        r2=np.eye(dims.n_d1, dtype=complex),
        s2=np.eye(dims.n_s2, dtype=complex),
        d2=np.eye(dims.n_d2, dtype=complex),
    )


def second_moment_deviation(n_samples: int, seed: int = 99
                            ) -> tuple[np.ndarray, np.ndarray, SystemDims, int]:
    """Empirical-vs-closed-form gap of E[H1 H1^H] plus batched hop ranks.

    Returns (|mean - expected| split re/im stacked, 3*stderr bound per part,
    dims, max numerical rank over both hops). Closed form:
    E[H1 H1^H] = (Tr S1 / n_s1)(Tr D1 / n_d1) R1.
    """
    rng = np.random.default_rng(seed)
    dims = SystemDims(3, 2, 4, 2, 3)
    prof = rand_profile(rng, dims)
    h1s = np.empty((n_samples, dims.n_r1, dims.n_d1), dtype=complex)
    h2s = np.empty((n_samples, dims.n_d1, dims.n_d2), dtype=complex)
    outer = np.zeros((dims.n_r1, dims.n_r1), dtype=complex)
    outer_sq = np.zeros((2, dims.n_r1, dims.n_r1))
    for t in range(n_samples):
        real = sample_channel(dims, prof, rng)
        h1s[t] = real.h1
        h2s[t] = real.h2
        g = real.h1 @ real.h1.conj().T
        outer += g
        outer_sq[0] += g.real ** 2
        outer_sq[1] += g.imag ** 2
    mean = outer / n_samples
    var = outer_sq / n_samples - np.stack([mean.real ** 2, mean.imag ** 2])
    stderr = np.sqrt(np.clip(var, 0.0, None) / n_samples)
    expected = (np.trace(prof.s1).real / dims.n_s1) * (np.trace(prof.d1).real / dims.n_d1) * prof.r1
    gap = np.stack([np.abs(mean.real - expected.real), np.abs(mean.imag - expected.imag)])

    def max_rank(stack, limit_tol=1e-8):
        svals = np.linalg.svd(stack, compute_uv=False)
        return int(np.max(np.sum(svals > limit_tol * svals[:, :1], axis=1)))

    worst_rank = max(max_rank(h1s), max_rank(h2s))
    return gap, 3.0 * stderr, dims, worst_rank


def random_da_instance(rng: np.random.Generator, z: float | None = None,
                       n_d1_max: int = 7):
    """Random dims + PSD operands + decision variables for fixed-point tests."""
    from rmt_irs.det_equiv import build_da_inputs

    dims = SystemDims(int(rng.integers(2, 7)), int(rng.integers(2, 7)),
                      int(rng.integers(2, n_d1_max)), int(rng.integers(2, 7)),
                      int(rng.integers(2, 7)))
    prof = rand_profile(rng, dims)
    theta = rng.uniform(0, 2 * np.pi, dims.n_d1)
    q = rand_psd(rng, dims.n_d2)
    q *= dims.n_d2 / np.real(np.trace(q))  # trace budget n * P with P = 1
    z = float(rng.uniform(0.05, 5.0)) if z is None else z
    inp = build_da_inputs(theta, q, prof, dims, z)
    return dims, prof, theta, q, inp


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
