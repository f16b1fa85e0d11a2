"""Benchmark: compiled fixed-point kernel vs the pure-numpy fallback.

Times solve_fixed_point on representative workloads (figure-preset operands
at several sizes and SNRs) under both kernels. Run:

    python benchmarks/bench_fixed_point.py
"""

import time

import numpy as np

from rmt_irs import _fp_fallback
from rmt_irs.det_equiv import build_da_inputs, fixed_point_rhs
from rmt_irs.harness import build_profile, preset_variants

try:
    from rmt_irs import _fpcore
except ImportError:
    _fpcore = None


def workloads():
    cases = []
    for preset_name, idx in (("fig2", 0), ("fig2", 1), ("fig2", 3), ("fig4", 0)):
        cfg = preset_variants(preset_name)[idx]
        prof = build_profile(cfg.correlation, cfg.dims)
        for snr in (0.0, 20.0):
            inp = build_da_inputs(cfg.theta0(), cfg.q0(), prof, cfg.dims, cfg.noise_var(snr))
            label = f"{cfg.label} snr={snr:g}dB (n_L={cfg.dims.n_d1})"
            cases.append((label, inp))
    return cases


def time_kernel(kernel, inp, repeats: int) -> tuple[float, int]:
    lam = inp.spectra
    args = (lam[0], lam[1], lam[2], lam[3], lam[4], inp.z,
            inp.dims.alpha_s1, inp.dims.alpha_t1, inp.dims.alpha_s2, inp.dims.alpha_t2,
            1e-10, 50000, 1.0, 1.0, 1.0, 1.0, 1.0)
    out = kernel.solve_fp(*args)
    if not out[7]:
        raise RuntimeError("benchmark instance did not converge")
    start = time.perf_counter()
    for _ in range(repeats):
        out = kernel.solve_fp(*args)
    elapsed = (time.perf_counter() - start) / repeats
    h = np.array(out[:5])
    residual = np.max(np.abs(fixed_point_rhs(h, inp) - h) / np.maximum(h, 1e-300))
    assert residual < 1e-8
    return elapsed, out[5]


def main() -> None:
    kernels = [("python", _fp_fallback)]
    if _fpcore is not None:
        kernels.insert(0, ("compiled", _fpcore))
    else:
        print("compiled kernel not available; timing the fallback only\n")

    print(f"{'workload':42s} {'kernel':9s} {'iters':>6s} {'time/solve':>12s} {'speedup':>8s}")
    for label, inp in workloads():
        base = None
        for name, kernel in kernels:
            repeats = 200 if name == "compiled" else 20
            elapsed, iters = time_kernel(kernel, inp, repeats)
            if base is None:
                base = elapsed
            speed = "" if name == kernels[-1][0] else f"{'':8s}"
            ratio = f"{elapsed / base:8.1f}x" if name != kernels[0][0] else f"{'1.0x':>9s}"
            print(f"{label:42s} {name:9s} {iters:6d} {elapsed * 1e6:9.1f} us {ratio}")
    print("\nspeedup column is time relative to the first kernel listed")


if __name__ == "__main__":
    main()
