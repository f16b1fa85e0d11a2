"""Double-scattering channel model: correlation matrices, sampling, effective transforms.

The two-hop link is H1 * Phi * H2 with each hop drawn from the double-scattering
model H_i = R_i^(1/2) X_i S_i^(1/2) Y_i D_i^(1/2). The scatterer stage makes
rank(H_i) <= n_s_i, which is the rank-deficiency mechanism the rest of the
package analyzes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "SystemDims",
    "AngularParams",
    "CorrelationProfile",
    "ChannelRealization",
    "build_correlation",
    "psd_sqrt",
    "sample_channel",
    "sample_rayleigh_channel",
    "effective_transforms",
]

# Matrices are accepted as Hermitian/PSD up to these relative tolerances
# (scaled by the spectral norm / largest eigenvalue).
HERMITIAN_RTOL = 1e-12
PSD_RTOL = 1e-10


@dataclass(frozen=True)
class SystemDims:
    """Antenna / scatterer / IRS element counts for the two-hop link.

    n_r1 : receive antennas, n_d2 : transmit antennas, n_d1 : IRS elements
    (shared by the two hops), n_s1 / n_s2 : scatterer counts per hop.
    """

    n_r1: int
    n_s1: int
    n_d1: int
    n_s2: int
    n_d2: int

    def __post_init__(self):
        for name in ("n_r1", "n_s1", "n_d1", "n_s2", "n_d2"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    def alpha(self, num: str, den: str) -> float:
        """Dimension ratio n_num / n_den, e.g. alpha('r1', 's1')."""
        return self._dim(num) / self._dim(den)

    def _dim(self, key: str) -> int:
        try:
            return getattr(self, f"n_{key}")
        except AttributeError:
            raise KeyError(f"unknown dimension key {key!r}") from None

    # Ratios appearing in the five-parameter fixed point; t1/t2 share the
    # dimensions of the IRS and transmit arrays respectively.
    @property
    def alpha_s1(self) -> float:
        return self.n_r1 / self.n_s1

    @property
    def alpha_t1(self) -> float:
        return self.n_r1 / self.n_d1

    @property
    def alpha_s2(self) -> float:
        return self.n_r1 / self.n_s2

    @property
    def alpha_t2(self) -> float:
        return self.n_r1 / self.n_d2


@dataclass(frozen=True)
class AngularParams:
    """Inputs of the angular-spread correlation generator.

    phi is the angular spread in radians, dim the matrix dimension, n_paths
    the number of summed path angles, d the antenna spacing in wavelengths.
    """

    phi: float
    dim: int
    n_paths: int
    d: float

    def __post_init__(self):
        if not 0.0 < self.phi < 2.0 * np.pi:
            raise ValueError(f"phi must lie in (0, 2*pi), got {self.phi}")
        if self.n_paths < 2:
            raise ValueError("n_paths must be >= 2 (the path-angle grid degenerates at 1)")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.d > 0:
            raise ValueError("d must be positive")


def build_correlation(p: AngularParams) -> np.ndarray:
    """Correlation matrix with entries averaged over n_paths plane-wave angles.

    Entry (l, m) is (1/N) * sum_n exp(j*2*pi*d*(l-m)*sin(n*phi/(1-N))) where n
    runs over the N symmetric values (1-N)/2, ..., (N-1)/2 (half-integers for
    even N). Built as (1/N) A A^H with steering-vector columns, so the result
    is exactly Hermitian PSD with unit diagonal and rank <= min(dim, N).
    """
    n = np.arange(p.n_paths) + (1.0 - p.n_paths) / 2.0
    sines = np.sin(n * p.phi / (1.0 - p.n_paths))
    steering = np.exp(2j * np.pi * p.d * np.outer(np.arange(p.dim), sines))
    return (steering @ steering.conj().T) / p.n_paths


def _check_hermitian(a: np.ndarray, name: str) -> None:
    scale = np.linalg.norm(a, 2) if a.size > 1 else abs(complex(a.reshape(-1)[0]))
    dev = np.linalg.norm(a - a.conj().T, 2)
    if dev > HERMITIAN_RTOL * max(scale, 1e-300):
        raise ValueError(f"{name} is not Hermitian (relative deviation {dev / max(scale, 1e-300):.3e})")


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition.

    Eigenvalues in [-PSD_RTOL * lam_max, 0) are clamped to zero before the
    square root; anything below that is rejected as non-PSD. Correlation
    matrices from the angular generator are numerically rank-deficient, so
    the clamp is load-bearing, not cosmetic.
    """
    a = np.asarray(a, dtype=complex)
    _check_hermitian(a, "psd_sqrt input")
    w, v = np.linalg.eigh(a)
    lam_max = max(float(w[-1]), 0.0)
    if w[0] < -PSD_RTOL * lam_max:
        raise ValueError(f"matrix is not PSD: min eigenvalue {w[0]:.3e} vs max {lam_max:.3e}")
    w = np.clip(w, 0.0, None)
    b = (v * np.sqrt(w)) @ v.conj().T
    return (b + b.conj().T) / 2.0


@dataclass(frozen=True)
class CorrelationProfile:
    """The six correlation matrices of the two-hop double-scattering model.

    d1 and r2 share the IRS dimension n_d1. Square-root factors are
    eigendecomposed once and cached, since samplers reuse them per trial.
    """

    r1: np.ndarray
    s1: np.ndarray
    d1: np.ndarray
    r2: np.ndarray
    s2: np.ndarray
    d2: np.ndarray

    def __post_init__(self):
        for name in ("r1", "s1", "d1", "r2", "s2", "d2"):
            m = np.asarray(getattr(self, name), dtype=complex)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"{name} must be square, got shape {m.shape}")
            _check_hermitian(m, name)
            w = np.linalg.eigvalsh(m)
            if w[0] < -PSD_RTOL * max(float(w[-1]), 0.0):
                raise ValueError(f"{name} is not PSD: min eigenvalue {w[0]:.3e}")
            object.__setattr__(self, name, m)
        if self.d1.shape[0] != self.r2.shape[0]:
            raise ValueError("d1 and r2 must share the IRS dimension")

    @classmethod
    def from_angular(cls, dims: SystemDims, r: AngularParams, s: AngularParams,
                     d: AngularParams, r2: AngularParams, s2: AngularParams,
                     d2: AngularParams) -> "CorrelationProfile":
        return cls(*(build_correlation(p) for p in (r, s, d, r2, s2, d2)))

    def matches(self, dims: SystemDims) -> bool:
        expected = (dims.n_r1, dims.n_s1, dims.n_d1, dims.n_d1, dims.n_s2, dims.n_d2)
        actual = tuple(getattr(self, k).shape[0] for k in ("r1", "s1", "d1", "r2", "s2", "d2"))
        return expected == actual

    def require_match(self, dims: SystemDims) -> None:
        if not self.matches(dims):
            raise ValueError(
                f"correlation profile dimensions {[getattr(self, k).shape[0] for k in ('r1', 's1', 'd1', 'r2', 's2', 'd2')]} "
                f"do not match dims {dims}"
            )

    @cached_property
    def sqrt_r1(self) -> np.ndarray:
        return psd_sqrt(self.r1)

    @cached_property
    def sqrt_s1(self) -> np.ndarray:
        return psd_sqrt(self.s1)

    @cached_property
    def sqrt_d1(self) -> np.ndarray:
        return psd_sqrt(self.d1)

    @cached_property
    def sqrt_r2(self) -> np.ndarray:
        return psd_sqrt(self.r2)

    @cached_property
    def sqrt_s2(self) -> np.ndarray:
        return psd_sqrt(self.s2)

    @cached_property
    def sqrt_d2(self) -> np.ndarray:
        return psd_sqrt(self.d2)


@dataclass(frozen=True)
class ChannelRealization:
    """One joint draw of the two hop matrices (h1: n_r1 x n_d1, h2: n_d1 x n_d2)."""

    h1: np.ndarray
    h2: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.h1.real)) and np.all(np.isfinite(self.h1.imag))
                and np.all(np.isfinite(self.h2.real)) and np.all(np.isfinite(self.h2.imag))):
            raise ValueError("channel realization contains non-finite entries")
        if self.h1.shape[1] != self.h2.shape[0]:
            raise ValueError(f"hop shapes {self.h1.shape} and {self.h2.shape} do not chain")


def _complex_gaussian(rng: np.random.Generator, rows: int, cols: int, var: float) -> np.ndarray:
    # CN(0, var): independent real/imag parts, each variance var/2.
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols)))


def _draw_hops(dims: SystemDims, corr: CorrelationProfile,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    # Fixed draw order X1, Y1, X2, Y2 so one generator state maps to one
    # bit-identical realization; shared by the public sampler and the Monte
    # Carlo hot loop.
    x1 = _complex_gaussian(rng, dims.n_r1, dims.n_s1, 1.0 / dims.n_s1)
    y1 = _complex_gaussian(rng, dims.n_s1, dims.n_d1, 1.0 / dims.n_d1)
    x2 = _complex_gaussian(rng, dims.n_d1, dims.n_s2, 1.0 / dims.n_s2)
    y2 = _complex_gaussian(rng, dims.n_s2, dims.n_d2, 1.0 / dims.n_d2)
    h1 = corr.sqrt_r1 @ x1 @ corr.sqrt_s1 @ y1 @ corr.sqrt_d1
    h2 = corr.sqrt_r2 @ x2 @ corr.sqrt_s2 @ y2 @ corr.sqrt_d2
    return h1, h2


def _draw_hops_rayleigh(dims: SystemDims, corr: CorrelationProfile,
                        rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    x1 = _complex_gaussian(rng, dims.n_r1, dims.n_d1, 1.0 / dims.n_d1)
    x2 = _complex_gaussian(rng, dims.n_d1, dims.n_d2, 1.0 / dims.n_d2)
    return corr.sqrt_r1 @ x1 @ corr.sqrt_d1, corr.sqrt_r2 @ x2 @ corr.sqrt_d2


def sample_channel(dims: SystemDims, corr: CorrelationProfile,
                   rng: np.random.Generator) -> ChannelRealization:
    """Draw H_i = R_i^(1/2) X_i S_i^(1/2) Y_i D_i^(1/2) for both hops.

    X_i is n_r_i x n_s_i with i.i.d. CN(0, 1/n_s_i) entries and Y_i is
    n_s_i x n_d_i with i.i.d. CN(0, 1/n_d_i) entries; X1, Y1, X2, Y2 are
    mutually independent and the draw is fully determined by the generator
    state.
    """
    corr.require_match(dims)
    h1, h2 = _draw_hops(dims, corr, rng)
    return ChannelRealization(h1=h1, h2=h2)


def sample_rayleigh_channel(dims: SystemDims, corr: CorrelationProfile,
                            rng: np.random.Generator) -> ChannelRealization:
    """Full-rank Kronecker-correlated baseline: H_i = R_i^(1/2) X_i D_i^(1/2).

    X_i is n_r_i x n_d_i with i.i.d. CN(0, 1/n_d_i) entries, so the per-hop
    second moment matches the double-scattering sampler with the scatterer
    stage removed. The scatterer matrices/counts in `corr`/`dims` are unused.
    """
    corr.require_match(dims)
    h1, h2 = _draw_hops_rayleigh(dims, corr, rng)
    return ChannelRealization(h1=h1, h2=h2)


def effective_transforms(theta: np.ndarray, q: np.ndarray,
                         corr: CorrelationProfile) -> tuple[np.ndarray, np.ndarray]:
    """The two Hermitian PSD transforms absorbed into the hop endpoints.

    t1 = Phi^H D1 Phi (IRS correlation seen through the phase configuration)
    and t2 = D2^(1/2) Q D2^(1/2) (transmit correlation loaded with the signal
    covariance).
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (corr.d1.shape[0],):
        raise ValueError(f"theta must have length {corr.d1.shape[0]}, got shape {theta.shape}")
    phi = np.exp(1j * theta)
    t1 = np.conj(phi)[:, None] * corr.d1 * phi[None, :]
    sq = corr.sqrt_d2
    t2 = sq @ np.asarray(q, dtype=complex) @ sq
    return (t1 + t1.conj().T) / 2.0, (t2 + t2.conj().T) / 2.0
