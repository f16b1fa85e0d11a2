"""Experiment harness: JSON configs, figure presets, SNR sweeps, CSV emission.

Rates are computed in nats internally and reported in bits here
(rate_bits_total = n_r1 * rate_bits_per_antenna). SNR maps to noise power as
sigma^2 = P / 10^(snr_db/10). Every Monte Carlo cell draws from a seed stream
derived from (seed, method, snr value), so adding or removing SNR points
never perturbs the other rows.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import AngularParams, CorrelationProfile, SystemDims, build_correlation
from .det_equiv import FixedPointError, build_da_inputs, da_rate_at, phase_coupling
from .optimize import AoConfig, alternating_optimize
from .rate import Covariance, PhaseVector, mc_ergodic_rate

__all__ = [
    "ConfigError",
    "AngularSpec",
    "CorrelationSpec",
    "ExperimentConfig",
    "SweepRecord",
    "CSV_HEADER",
    "load_config",
    "save_config",
    "config_hash",
    "derive_cell_seed",
    "build_profile",
    "preset",
    "preset_variants",
    "PRESET_NAMES",
    "run_sweep",
    "write_csv",
    "parse_records",
    "resolve_threads",
]

LN2 = math.log(2.0)
CSV_HEADER = [
    "config_hash", "snr_db", "method", "rate_bits_per_antenna",
    "rate_bits_total", "stderr", "wall_time_ms", "iterations",
]
METHODS = ("ao", "da", "mc")
CHANNEL_MODELS = ("double-scattering", "rayleigh")
SNR_DEFINITION = "P_over_sigma2"
PRESET_NAMES = ("fig2", "fig3", "fig4")

ENV_THREADS = "RMT_IRS_THREADS"


class ConfigError(ValueError):
    """Configuration problem, reported with the offending field path."""


def _expect(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {msg}")


@dataclass(frozen=True)
class AngularSpec:
    """Angular-generator inputs for one correlation matrix (dimension comes from dims)."""

    phi: float
    n_paths: int
    d: float


@dataclass(frozen=True)
class CorrelationSpec:
    """Either per-matrix angular parameters or an .npz file of explicit matrices."""

    kind: str
    angular: dict[str, AngularSpec] | None = None
    path: str | None = None


_ROLE_DIM = {"r1": "n_r1", "s1": "n_s1", "d1": "n_d1", "r2": "n_d1", "s2": "n_s2", "d2": "n_d2"}
_ROLES = ("r1", "s1", "d1", "r2", "s2", "d2")


def build_profile(spec: CorrelationSpec, dims: SystemDims) -> CorrelationProfile:
    """Materialize the six correlation matrices described by a CorrelationSpec."""
    if spec.kind == "angular":
        mats = {}
        for role in _ROLES:
            entry = spec.angular[role]
            dim = getattr(dims, _ROLE_DIM[role])
            mats[role] = build_correlation(AngularParams(phi=entry.phi, dim=dim,
                                                         n_paths=entry.n_paths, d=entry.d))
        return CorrelationProfile(**mats)
    if spec.kind == "npz":
        if not os.path.exists(spec.path):
            raise ConfigError(f"correlation.path: file not found: {spec.path}")
        with np.load(spec.path) as data:
            missing = [r for r in _ROLES if r not in data]
            if missing:
                raise ConfigError(f"correlation.path: {spec.path} is missing arrays {missing}")
            profile = CorrelationProfile(**{r: np.asarray(data[r], dtype=complex) for r in _ROLES})
        profile.require_match(dims)
        return profile
    raise ConfigError(f"correlation.kind: unknown kind {spec.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep configuration: dimensions, correlations, SNR grid, methods."""

    dims: SystemDims
    correlation: CorrelationSpec
    snr_db: tuple[float, ...]
    seed: int
    methods: tuple[str, ...]
    power: float = 1.0
    snr_definition: str = SNR_DEFINITION
    trials: int = 2000
    channel_model: str = "double-scattering"
    init_theta: tuple[float, ...] | None = None
    optimizer: AoConfig = field(default_factory=AoConfig)
    output: str | None = None
    label: str | None = None

    def __post_init__(self):
        _expect(len(self.snr_db) > 0, "snr_db", "must be non-empty")
        _expect(self.power > 0, "power", "must be positive")
        _expect(self.snr_definition == SNR_DEFINITION, "snr_definition",
                f"only {SNR_DEFINITION!r} is supported")
        _expect(self.seed >= 0, "seed", "must be a non-negative integer")
        _expect(len(self.methods) > 0, "methods", "must be non-empty")
        for m in self.methods:
            _expect(m in METHODS, "methods", f"unknown method {m!r}")
        _expect(self.channel_model in CHANNEL_MODELS, "channel_model",
                f"must be one of {CHANNEL_MODELS}")
        if self.channel_model == "rayleigh":
            _expect(set(self.methods) <= {"mc"}, "methods",
                    "the rayleigh baseline supports Monte Carlo only")
        if "mc" in self.methods:
            _expect(self.trials >= 1, "trials", "must be >= 1 when mc is requested")
        if self.init_theta is not None:
            _expect(len(self.init_theta) == self.dims.n_d1, "init_theta",
                    f"must have length n_d1 = {self.dims.n_d1}")

    def noise_var(self, snr_db: float) -> float:
        return self.power / 10.0 ** (snr_db / 10.0)

    def theta0(self) -> PhaseVector:
        if self.init_theta is None:
            return PhaseVector.spiral(self.dims.n_d1)
        return PhaseVector(np.array(self.init_theta, dtype=float))

    def q0(self) -> Covariance:
        return Covariance.uniform(self.dims.n_d2, self.power)

    def to_dict(self) -> dict:
        d = {
            "label": self.label,
            "dims": {k: getattr(self.dims, k) for k in ("n_r1", "n_s1", "n_d1", "n_s2", "n_d2")},
            "correlation": _correlation_to_dict(self.correlation),
            "channel_model": self.channel_model,
            "snr_db": list(self.snr_db),
            "power": self.power,
            "snr_definition": self.snr_definition,
            "trials": self.trials,
            "seed": self.seed,
            "methods": list(self.methods),
            "init_theta": "spiral" if self.init_theta is None else list(self.init_theta),
            "optimizer": {
                "armijo_c": self.optimizer.armijo_c,
                "shrink": self.optimizer.shrink,
                "max_outer": self.optimizer.max_outer,
                "max_ls": self.optimizer.max_ls,
                "conv_tol": self.optimizer.conv_tol,
            },
            "output": self.output,
        }
        if self.label is None:
            d.pop("label")
        if self.output is None:
            d.pop("output")
        return d


def _correlation_to_dict(spec: CorrelationSpec) -> dict:
    if spec.kind == "angular":
        return {"kind": "angular", **{
            role: {"phi": e.phi, "n_paths": e.n_paths, "d": e.d}
            for role, e in ((r, spec.angular[r]) for r in _ROLES)
        }}
    return {"kind": "npz", "path": spec.path}


def _require_keys(payload: dict, path: str, required: tuple[str, ...],
                  optional: tuple[str, ...] = ()) -> None:
    _expect(isinstance(payload, dict), path, "must be an object")
    for key in required:
        _expect(key in payload, path, f"missing required field {key!r}")
    for key in payload:
        _expect(key in required or key in optional, f"{path}.{key}", "unknown field")


def _as_int(value, path: str, minimum: int | None = None) -> int:
    _expect(isinstance(value, int) and not isinstance(value, bool), path, "must be an integer")
    if minimum is not None:
        _expect(value >= minimum, path, f"must be >= {minimum}")
    return value


def _as_number(value, path: str) -> float:
    _expect(isinstance(value, (int, float)) and not isinstance(value, bool),
            path, "must be a number")
    _expect(math.isfinite(float(value)), path, "must be finite")
    return float(value)


def _correlation_from_dict(payload, base_dir: Path | None) -> CorrelationSpec:
    _require_keys(payload, "correlation", ("kind",), _ROLES + ("path",))
    kind = payload["kind"]
    if kind == "angular":
        angular = {}
        for role in _ROLES:
            _expect(role in payload, "correlation", f"missing angular entry {role!r}")
            entry = payload[role]
            _require_keys(entry, f"correlation.{role}", ("phi", "n_paths", "d"))
            angular[role] = AngularSpec(
                phi=_as_number(entry["phi"], f"correlation.{role}.phi"),
                n_paths=_as_int(entry["n_paths"], f"correlation.{role}.n_paths", minimum=2),
                d=_as_number(entry["d"], f"correlation.{role}.d"),
            )
        return CorrelationSpec(kind="angular", angular=angular)
    if kind == "npz":
        _expect("path" in payload, "correlation", "npz kind requires 'path'")
        raw = payload["path"]
        _expect(isinstance(raw, str), "correlation.path", "must be a string")
        path = Path(raw)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        _expect(path.exists(), "correlation.path", f"file not found: {path}")
        return CorrelationSpec(kind="npz", path=str(path))
    raise ConfigError(f"correlation.kind: unknown kind {kind!r}")


def config_from_dict(payload: dict, base_dir: Path | None = None) -> ExperimentConfig:
    _require_keys(
        payload, "config",
        required=("dims", "correlation", "snr_db", "seed", "methods"),
        optional=("label", "channel_model", "power", "snr_definition", "trials",
                  "init_theta", "optimizer", "output"),
    )
    dims_payload = payload["dims"]
    _require_keys(dims_payload, "dims", ("n_r1", "n_s1", "n_d1", "n_s2", "n_d2"))
    dims = SystemDims(**{k: _as_int(dims_payload[k], f"dims.{k}", minimum=1)
                         for k in ("n_r1", "n_s1", "n_d1", "n_s2", "n_d2")})

    snr = payload["snr_db"]
    _expect(isinstance(snr, list) and snr, "snr_db", "must be a non-empty list")
    snr_db = tuple(_as_number(v, f"snr_db[{i}]") for i, v in enumerate(snr))

    methods = payload["methods"]
    _expect(isinstance(methods, list) and methods, "methods", "must be a non-empty list")
    for i, m in enumerate(methods):
        _expect(isinstance(m, str) and m in METHODS, f"methods[{i}]",
                f"must be one of {list(METHODS)}")

    init_theta = payload.get("init_theta", "spiral")
    if init_theta == "spiral":
        init_theta_val = None
    else:
        _expect(isinstance(init_theta, list), "init_theta", "must be 'spiral' or a list of radians")
        init_theta_val = tuple(_as_number(v, f"init_theta[{i}]") for i, v in enumerate(init_theta))

    opt_payload = payload.get("optimizer", {})
    _require_keys(opt_payload, "optimizer", (),
                  ("armijo_c", "shrink", "max_outer", "max_ls", "conv_tol"))
    defaults = AoConfig()
    try:
        optimizer = AoConfig(
            armijo_c=_as_number(opt_payload.get("armijo_c", defaults.armijo_c), "optimizer.armijo_c"),
            shrink=_as_number(opt_payload.get("shrink", defaults.shrink), "optimizer.shrink"),
            max_outer=_as_int(opt_payload.get("max_outer", defaults.max_outer), "optimizer.max_outer", 1),
            max_ls=_as_int(opt_payload.get("max_ls", defaults.max_ls), "optimizer.max_ls", 1),
            conv_tol=_as_number(opt_payload.get("conv_tol", defaults.conv_tol), "optimizer.conv_tol"),
        )
    except ValueError as err:
        raise ConfigError(f"optimizer: {err}") from None

    label = payload.get("label")
    if label is not None:
        _expect(isinstance(label, str), "label", "must be a string")
    output = payload.get("output")
    if output is not None:
        _expect(isinstance(output, str), "output", "must be a string")
        if base_dir is not None and not Path(output).is_absolute():
            output = str(base_dir / output)

    try:
        return ExperimentConfig(
            dims=dims,
            correlation=_correlation_from_dict(payload["correlation"], base_dir),
            channel_model=payload.get("channel_model", "double-scattering"),
            snr_db=snr_db,
            power=_as_number(payload.get("power", 1.0), "power"),
            snr_definition=payload.get("snr_definition", SNR_DEFINITION),
            trials=_as_int(payload.get("trials", 2000), "trials", minimum=1),
            seed=_as_int(payload["seed"], "seed", minimum=0),
            methods=tuple(methods),
            init_theta=init_theta_val,
            optimizer=optimizer,
            output=output,
            label=label,
        )
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(str(err)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config_from_dict(payload, base_dir=path.parent)


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def config_hash(cfg: ExperimentConfig) -> str:
    """Stable 12-hex-digit digest of everything that affects the numbers."""
    payload = cfg.to_dict()
    payload.pop("output", None)
    payload.pop("label", None)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def derive_cell_seed(seed: int, method: str, snr_db: float) -> int:
    """Disjoint per-cell seed stream keyed by the SNR value, not its list index."""
    blob = f"{seed}|{method}|{format(float(snr_db), '.17g')}".encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


# --- figure presets -------------------------------------------------------

_SPREAD_ENDPOINT = math.pi / 7
_SPREAD_SCATTER = math.pi / 16
_SPACING = 25.0
_PRESET_SEED = 2024


def _preset_correlation(n_paths_1: int, n_paths_2: int) -> CorrelationSpec:
    return CorrelationSpec(kind="angular", angular={
        "r1": AngularSpec(_SPREAD_ENDPOINT, n_paths_1, _SPACING),
        "s1": AngularSpec(_SPREAD_SCATTER, n_paths_1, _SPACING),
        "d1": AngularSpec(_SPREAD_ENDPOINT, n_paths_1, _SPACING),
        "r2": AngularSpec(_SPREAD_ENDPOINT, n_paths_2, _SPACING),
        "s2": AngularSpec(_SPREAD_SCATTER, n_paths_2, _SPACING),
        "d2": AngularSpec(_SPREAD_ENDPOINT, n_paths_2, _SPACING),
    })


def preset_variants(name: str) -> list[ExperimentConfig]:
    """All labeled configurations of a figure preset (one CSV per variant)."""
    if name == "fig2":
        # endpoint dims fixed at 5, IRS size swept; accuracy-of-approximation sweep
        return [
            ExperimentConfig(
                label=f"fig2_nL{n_l}",
                dims=SystemDims(n_r1=5, n_s1=5, n_d1=n_l, n_s2=5, n_d2=5),
                correlation=_preset_correlation(5, 5),
                snr_db=(0.0, 5.0, 10.0, 15.0, 20.0),
                seed=_PRESET_SEED,
                methods=("mc", "da"),
                output=f"fig2_nL{n_l}.csv",
            )
            for n_l in (5, 15, 25, 75)
        ]
    if name == "fig3":
        # rank-deficiency comparison at n = 15 plus the full-rank baseline
        variants = [
            ExperimentConfig(
                label=f"fig3_nS{n_s}",
                dims=SystemDims(n_r1=15, n_s1=n_s, n_d1=15, n_s2=n_s, n_d2=15),
                correlation=_preset_correlation(n_s, n_s),
                snr_db=(0.0, 5.0, 10.0, 15.0, 20.0, 25.0),
                seed=_PRESET_SEED,
                methods=("mc", "da"),
                output=f"fig3_nS{n_s}.csv",
            )
            for n_s in (3, 7, 15)
        ]
        variants.append(ExperimentConfig(
            label="fig3_rayleigh",
            dims=SystemDims(n_r1=15, n_s1=15, n_d1=15, n_s2=15, n_d2=15),
            correlation=_preset_correlation(15, 15),
            channel_model="rayleigh",
            snr_db=(0.0, 5.0, 10.0, 15.0, 20.0, 25.0),
            seed=_PRESET_SEED,
            methods=("mc",),
            output="fig3_rayleigh.csv",
        ))
        return variants
    if name == "fig4":
        # optimized vs unoptimized rates at n = 9 with the small ascent constant
        return [
            ExperimentConfig(
                label=f"fig4_nS{n_s}",
                dims=SystemDims(n_r1=9, n_s1=n_s, n_d1=9, n_s2=n_s, n_d2=9),
                correlation=_preset_correlation(n_s, n_s),
                snr_db=(0.0, 5.0, 10.0, 15.0, 20.0),
                seed=_PRESET_SEED,
                methods=("mc", "da", "ao"),
                optimizer=AoConfig(armijo_c=0.0005),
                output=f"fig4_nS{n_s}.csv",
            )
            for n_s in (3, 5, 9)
        ]
    raise ConfigError(f"unknown preset {name!r} (expected one of {list(PRESET_NAMES)})")


def preset(name: str) -> ExperimentConfig:
    """Base configuration of a figure preset (its first variant)."""
    return preset_variants(name)[0]


# --- sweep execution ------------------------------------------------------


@dataclass(frozen=True)
class SweepRecord:
    """One (config, SNR, method) result row of the output CSV."""

    config_hash: str
    snr_db: float
    method: str
    rate_bits_per_antenna: float
    rate_bits_total: float
    stderr: float | None
    wall_time_ms: float | None
    iterations: int | None

    def __post_init__(self):
        if self.rate_bits_per_antenna < 0 or self.rate_bits_total < 0:
            raise ValueError("rates must be non-negative")


def resolve_threads(threads: int | None = None) -> int:
    """Explicit argument, else the RMT_IRS_THREADS environment variable, else 1."""
    if threads is None:
        raw = os.environ.get(ENV_THREADS)
        if raw is None:
            return 1
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(f"{ENV_THREADS}: not an integer: {raw!r}") from None
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    return threads


def run_sweep(cfg: ExperimentConfig, threads: int | None = None,
              out: str | Path | None = None, measure_time: bool = True
              ) -> list[SweepRecord]:
    """Evaluate every (method, SNR) cell of a configuration.

    Cells run in a thread pool of `threads` workers (default: the
    RMT_IRS_THREADS environment variable, else serial); all numeric output is
    bit-identical for any worker count. Rows come back in (method, snr)
    order. Solver failures abort the sweep with the failing cell named.
    """
    workers = resolve_threads(threads)
    profile = build_profile(cfg.correlation, cfg.dims)
    profile.require_match(cfg.dims)
    theta0 = cfg.theta0()
    q0 = cfg.q0()
    chash = config_hash(cfg)
    ao_cfg = replace(cfg.optimizer, init_theta=theta0, init_q=q0)
    cells = sorted((m, s) for m in dict.fromkeys(cfg.methods) for s in cfg.snr_db)
    if "da" in cfg.methods:
        # operands depend on (theta, q) only; the z=1 template is re-used
        # across the SNR grid, sharing its cached spectra
        da_template = build_da_inputs(theta0, q0, profile, cfg.dims, z=1.0)
        da_coupling = phase_coupling(theta0, profile)

    def run_cell(cell: tuple[str, float]) -> SweepRecord:
        method, snr = cell
        start = time.perf_counter()
        noise_var = cfg.noise_var(snr)
        stderr_bits = None
        iterations = None
        try:
            if method == "mc":
                est = mc_ergodic_rate(cfg.dims, profile, theta0, q0, noise_var,
                                      cfg.trials, derive_cell_seed(cfg.seed, method, snr),
                                      threads=1, model=cfg.channel_model)
                nats = est.mean_nats
                stderr_bits = est.stderr_nats / LN2
            elif method == "da":
                nats = da_rate_at(da_template.with_z(noise_var), da_coupling)
            else:
                _, _, trace = alternating_optimize(cfg.dims, profile, noise_var,
                                                   cfg.power, ao_cfg)
                nats = trace.steps[-1].da_nats
                iterations = len(trace)
        except FixedPointError as err:
            raise FixedPointError(
                f"sweep cell (method={method}, snr_db={snr:g}): {err}",
                residual=err.residual, iterations=err.iterations,
            ) from None
        wall_ms = (time.perf_counter() - start) * 1e3 if measure_time else None
        bits = nats / LN2
        return SweepRecord(
            config_hash=chash, snr_db=float(snr), method=method,
            rate_bits_per_antenna=bits, rate_bits_total=cfg.dims.n_r1 * bits,
            stderr=stderr_bits, wall_time_ms=wall_ms, iterations=iterations,
        )

    if workers == 1:
        records = [run_cell(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_cell, cells))

    target = out if out is not None else cfg.output
    if target is not None:
        write_csv(records, target)
    return records


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(records: list[SweepRecord], path: str | Path) -> None:
    """Emit records with the fixed header, '.' decimals, 17 significant digits."""
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([
                r.config_hash,
                _fmt(r.snr_db),
                r.method,
                _fmt(r.rate_bits_per_antenna),
                _fmt(r.rate_bits_total),
                "" if r.stderr is None else _fmt(r.stderr),
                "" if r.wall_time_ms is None else _fmt(r.wall_time_ms),
                "" if r.iterations is None else str(r.iterations),
            ])


def parse_records(path: str | Path) -> list[SweepRecord]:
    """Read an emitted CSV back into records (exact round trip)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty CSV") from None
        if header != CSV_HEADER:
            raise ConfigError(f"{path}: unexpected header {header!r}")
        records = []
        for i, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise ConfigError(f"{path}: line {i}: expected {len(CSV_HEADER)} fields")
            records.append(SweepRecord(
                config_hash=row[0],
                snr_db=float(row[1]),
                method=row[2],
                rate_bits_per_antenna=float(row[3]),
                rate_bits_total=float(row[4]),
                stderr=None if row[5] == "" else float(row[5]),
                wall_time_ms=None if row[6] == "" else float(row[6]),
                iterations=None if row[7] == "" else int(row[7]),
            ))
    return records
