"""Synthetic environmental data and the estimator benchmark harness.

The generator mimics a year of hourly structural monitoring data:

* four covariate processes, each an annual sine plus a daily sine whose
  amplitude is redrawn once per day from a season-dependent uniform
  interval (so days differ, and the daily swing itself has a seasonal
  envelope);
* a latent bivariate normal output whose mean, variances, and
  correlation are smooth closed-form surfaces over the first two
  covariates (the remaining covariates are pure distractors);
* additive AR(1) measurement noise per output column, scaled so its
  marginal variance is constant over time.

The benchmark fits both conditional-covariance estimators per
replication and scores the estimated output covariance against the
truth surface at the observed covariates. Every cell (q, replication)
derives its own counter-based random stream from the master seed, so
results are reproducible cell by cell and independent of scheduling.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit

from ._version import __version__
from .core import Dataset
from .errors import CholeskyFailure, ConfigError, CondcovError, DimensionMismatch
from .forest import ForestConfig, fit_forest, predict_cov_batch
from .kernel import (
    DEFAULT_FOLDS,
    DEFAULT_GRID_SPAN,
    BandwidthSearch,
    CombineRule,
    fit,
    nw_covariance_batch,
    select_bandwidth,
)

HOURS_PER_DAY = 24
DAYS_PER_YEAR = 365

# Annual form of each covariate process: amplitude, phase day, offset in
# z_k = amplitude * sin((d - phase) * 2*pi/365) - zeta_kd * sin(pi*eta/12 + 0.3) + offset
COVARIATE_FORMS = (
    (12.0, 141.0, 9.5),
    (11.0, 150.0, 7.5),
    (3.0, 270.0, 85.0),
    (5.5, 360.0, 5.5),
)
_DAILY_PHASE = 0.3


@dataclass(frozen=True)
class ZetaInterval:
    """Seasonal envelope of one covariate's daily-amplitude draw.

    On day ``d`` the amplitude is uniform on ``[a(d), a(d) + span]``
    with ``a(d) = a_min + (a_max - a_min) * w(d)`` and ``w`` the annual
    weight ``(1 + sin((d - 141) * 2*pi/365)) / 2``.
    """

    a_min: float
    a_max: float
    span: float

    def __post_init__(self):
        if self.a_max < self.a_min:
            raise ConfigError(
                f"a_max must be >= a_min, got [{self.a_min}, {self.a_max}]"
            )
        if self.span < 0.0:
            raise ConfigError(f"span must be non-negative, got {self.span}")


DEFAULT_ZETA_INTERVALS = (
    ZetaInterval(1.0, 5.0, 3.0),
    ZetaInterval(1.0, 4.0, 3.0),
    ZetaInterval(0.5, 2.0, 1.0),
    ZetaInterval(0.5, 3.0, 1.5),
)


@dataclass(frozen=True)
class NoiseSpec:
    """AR(1) measurement noise per output column.

    ``phi`` is the lag-1 coefficient shared by both columns; ``nu_sq``
    the stationary marginal variance of each column's noise. Innovation
    variance is ``nu_sq * (1 - phi**2)`` so the marginal variance stays
    ``nu_sq`` at every time step.
    """

    phi: float = 0.8
    nu_sq: tuple[float, float] = (0.02, 0.017)

    def __post_init__(self):
        if not 0.0 <= self.phi < 1.0:
            raise ConfigError(f"phi must be in [0, 1), got {self.phi}")
        object.__setattr__(self, "nu_sq", tuple(float(v) for v in self.nu_sq))
        if any(v < 0.0 for v in self.nu_sq):
            raise ConfigError(
                f"noise variances must be non-negative, got {self.nu_sq}"
            )


@dataclass(frozen=True)
class TruthParams:
    """Parameters of the closed-form truth surfaces over (z1, z2).

    Means are affine, variances are ``base + gain * s(z)``, and the
    correlation is ``amplitude * logistic((center - (z1+z2)/2) / scale)``
    with the shared shape ``s(z) = logistic((center - (z1+z2)/2) / scale)``
    from the ``shape`` entry. Defaults put strong output correlation at
    cold-weather covariate values and keep the truth strictly positive
    definite everywhere.
    """

    mean1: tuple[float, float, float] = (14.0, -0.02, -0.01)
    mean2: tuple[float, float, float] = (12.0, -0.015, -0.005)
    var1: tuple[float, float] = (0.05, 0.04)
    var2: tuple[float, float] = (0.04, 0.03)
    rho: tuple[float, float, float] = (0.8, 10.0, 4.0)
    shape: tuple[float, float] = (15.0, 5.0)


@dataclass(frozen=True)
class TruthSurfaces:
    """Callable truth surfaces: means, variances, and covariance.

    Each callable maps broadcastable arrays ``(z1, z2)`` to an array.
    ``params`` is kept when the surfaces came from
    :class:`TruthParams`, for configuration echo; hand-built callables
    leave it ``None``.
    """

    mu1: Callable
    mu2: Callable
    var1: Callable
    var2: Callable
    cov12: Callable
    params: TruthParams | None = None

    @classmethod
    def from_params(cls, params: TruthParams) -> "TruthSurfaces":
        a1, b1, c1 = params.mean1
        a2, b2, c2 = params.mean2
        v1_base, v1_gain = params.var1
        v2_base, v2_gain = params.var2
        r_amp, r_center, r_scale = params.rho
        s_center, s_scale = params.shape

        def shape(z1, z2):
            return expit((s_center - (z1 + z2) / 2.0) / s_scale)

        def rho(z1, z2):
            return r_amp * expit((r_center - (z1 + z2) / 2.0) / r_scale)

        def var1(z1, z2):
            return v1_base + v1_gain * shape(z1, z2)

        def var2(z1, z2):
            return v2_base + v2_gain * shape(z1, z2)

        return cls(
            mu1=lambda z1, z2: a1 + b1 * z1 + c1 * z2,
            mu2=lambda z1, z2: a2 + b2 * z1 + c2 * z2,
            var1=var1,
            var2=var2,
            cov12=lambda z1, z2: rho(z1, z2)
            * np.sqrt(var1(z1, z2) * var2(z1, z2)),
            params=params,
        )


def validate_surfaces(
    surfaces: TruthSurfaces,
    z1_bounds: tuple[float, float],
    z2_bounds: tuple[float, float],
    n_grid: int = 81,
    tol: float = 1e-12,
) -> None:
    """Check positive definiteness of the truth on a dense (z1, z2) grid.

    Raises :class:`ConfigError` when any grid point yields a
    non-positive variance or a determinant below ``-tol`` times the
    variance product.
    """
    g1 = np.linspace(*z1_bounds, n_grid)
    g2 = np.linspace(*z2_bounds, n_grid)
    z1, z2 = np.meshgrid(g1, g2, indexing="ij")
    v1 = np.asarray(surfaces.var1(z1, z2), dtype=np.float64)
    v2 = np.asarray(surfaces.var2(z1, z2), dtype=np.float64)
    c = np.asarray(surfaces.cov12(z1, z2), dtype=np.float64)
    if np.any(v1 <= 0.0) or np.any(v2 <= 0.0):
        raise ConfigError("truth variances must be positive over the covariate range")
    det = v1 * v2 - c * c
    if np.any(det < -tol * v1 * v2):
        raise ConfigError(
            "truth covariance is indefinite somewhere over the covariate range"
        )


@dataclass(frozen=True)
class NWSettings:
    """Kernel estimator settings used inside the benchmark.

    ``bandwidth=None`` cross-validates per replication on a log-spaced
    grid of ``cv_grid_points`` candidates spanning ``cv_span`` times the
    median pairwise covariate distance.
    """

    bandwidth: float | None = None
    cv_grid_points: int = 9
    cv_span: tuple[float, float] = DEFAULT_GRID_SPAN
    cv_folds: int = DEFAULT_FOLDS
    combine: CombineRule = CombineRule.GEOMEAN_OF_MINIMIZERS
    standardize_covariates: bool = False

    def __post_init__(self):
        if self.bandwidth is not None and not self.bandwidth > 0.0:
            raise ConfigError(f"bandwidth must be positive, got {self.bandwidth}")
        object.__setattr__(self, "combine", CombineRule(self.combine))
        object.__setattr__(self, "cv_span", tuple(float(v) for v in self.cv_span))


@dataclass(frozen=True)
class SimConfig:
    """Full benchmark configuration.

    ``q_values`` lists how many covariates each estimator sees (the
    first two always carry the signal; columns three and four are
    distractors). One dataset is generated per (q, replication) cell
    from a stream derived from ``seed``, ``q``, and the replication
    index alone.
    """

    n_hours: int = DAYS_PER_YEAR * HOURS_PER_DAY
    q_values: tuple[int, ...] = (2, 3, 4)
    replications: int = 50
    seed: int = 0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    zeta: tuple[ZetaInterval, ...] = DEFAULT_ZETA_INTERVALS
    truth: TruthParams = field(default_factory=TruthParams)
    nw: NWSettings = field(default_factory=NWSettings)
    forest: ForestConfig = field(default_factory=ForestConfig)

    def __post_init__(self):
        if self.n_hours < 2:
            raise ConfigError(f"n_hours must be at least 2, got {self.n_hours}")
        if self.n_hours > DAYS_PER_YEAR * HOURS_PER_DAY:
            raise ConfigError(
                f"n_hours is capped at one year "
                f"({DAYS_PER_YEAR * HOURS_PER_DAY}), got {self.n_hours}"
            )
        q_values = tuple(int(q) for q in self.q_values)
        if not q_values:
            raise ConfigError("q_values must not be empty")
        if any(q < 1 or q > len(COVARIATE_FORMS) for q in q_values):
            raise ConfigError(
                f"each q must be in [1, {len(COVARIATE_FORMS)}], got {q_values}"
            )
        object.__setattr__(self, "q_values", q_values)
        if self.replications < 1:
            raise ConfigError(
                f"replications must be at least 1, got {self.replications}"
            )
        zeta = tuple(self.zeta)
        if len(zeta) != len(COVARIATE_FORMS):
            raise ConfigError(
                f"expected {len(COVARIATE_FORMS)} zeta intervals, got {len(zeta)}"
            )
        object.__setattr__(self, "zeta", zeta)

    @classmethod
    def from_toml(cls, path) -> "SimConfig":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        sim = dict(raw.get("simulation", {}))
        kwargs = {}
        for key in ("n_hours", "replications", "seed"):
            if key in sim:
                kwargs[key] = int(sim.pop(key))
        if "q_values" in sim:
            kwargs["q_values"] = tuple(int(q) for q in sim.pop("q_values"))
        if sim:
            raise ConfigError(f"unknown [simulation] keys: {sorted(sim)}")
        if "noise" in raw:
            noise = dict(raw["noise"])
            kwargs["noise"] = NoiseSpec(
                phi=float(noise.get("phi", NoiseSpec.phi)),
                nu_sq=tuple(noise.get("nu_sq", NoiseSpec.nu_sq)),
            )
        if "zeta" in raw:
            zeta = []
            for i in range(len(COVARIATE_FORMS)):
                key = f"z{i + 1}"
                vals = raw["zeta"].get(key)
                if vals is None:
                    zeta.append(DEFAULT_ZETA_INTERVALS[i])
                else:
                    zeta.append(ZetaInterval(*(float(v) for v in vals)))
            kwargs["zeta"] = tuple(zeta)
        if "truth" in raw:
            fields = {
                k: tuple(float(v) for v in vals)
                for k, vals in raw["truth"].items()
            }
            kwargs["truth"] = TruthParams(**fields)
        if "nw" in raw:
            nw = dict(raw["nw"])
            if "cv_span" in nw:
                nw["cv_span"] = tuple(float(v) for v in nw["cv_span"])
            kwargs["nw"] = NWSettings(**nw)
        if "forest" in raw:
            forest = dict(raw["forest"])
            if forest.get("max_cutpoints") == "all":
                forest["max_cutpoints"] = None
            kwargs["forest"] = ForestConfig(**forest)
        return cls(**kwargs)


def covariate_bounds(zeta=DEFAULT_ZETA_INTERVALS) -> np.ndarray:
    """Hard range of each covariate process, ``(4, 2)`` low/high.

    Every generated value satisfies
    ``|z_k - offset_k| <= amplitude_k + a_max_k + span_k``.
    """
    out = np.empty((len(COVARIATE_FORMS), 2))
    for k, ((amp, _, off), zi) in enumerate(zip(COVARIATE_FORMS, zeta)):
        reach = amp + zi.a_max + zi.span
        out[k] = (off - reach, off + reach)
    return out


def gen_covariates(config: SimConfig, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generate the hourly covariate matrix.

    Returns ``(Z, days, hours)`` where ``Z`` is ``(n_hours, 4)``,
    ``days`` holds the day-of-year (1-based) of each row and ``hours``
    the hour-of-day (1..24). Consumes one uniform draw per day per
    covariate, in a single vectorized call.
    """
    n = config.n_hours
    n_days = -(-n // HOURS_PER_DAY)
    d = np.arange(1, n_days + 1, dtype=np.float64)
    w = 0.5 * (1.0 + np.sin((d - 141.0) * 2.0 * np.pi / DAYS_PER_YEAR))
    a = np.column_stack(
        [zi.a_min + (zi.a_max - zi.a_min) * w for zi in config.zeta]
    )
    b = a + np.array([zi.span for zi in config.zeta])
    zeta_daily = rng.uniform(a, b)

    days = np.repeat(np.arange(1, n_days + 1), HOURS_PER_DAY)[:n]
    hours = np.tile(np.arange(1, HOURS_PER_DAY + 1), n_days)[:n]
    daily = np.sin(np.pi * hours / 12.0 + _DAILY_PHASE)
    zeta_rows = np.repeat(zeta_daily, HOURS_PER_DAY, axis=0)[:n]

    Z = np.empty((n, len(COVARIATE_FORMS)))
    for k, (amp, phase, offset) in enumerate(COVARIATE_FORMS):
        annual = amp * np.sin((days - phase) * 2.0 * np.pi / DAYS_PER_YEAR)
        Z[:, k] = annual - zeta_rows[:, k] * daily + offset
    return Z, days, hours


def _ar1_noise(n: int, phi: float, nu_sq: float, rng) -> np.ndarray:
    """Stationary AR(1) sample with marginal variance ``nu_sq``."""
    innov = rng.standard_normal(n)
    innov[0] *= math.sqrt(nu_sq)
    if n > 1:
        innov[1:] *= math.sqrt(nu_sq * (1.0 - phi * phi))
    return lfilter([1.0], [1.0, -phi], innov)


def gen_outputs(
    Z12: np.ndarray, truth: TruthSurfaces, noise: NoiseSpec, rng
) -> tuple[np.ndarray, np.ndarray]:
    """Draw outputs at the given (z1, z2) rows.

    Returns ``(X, Sigma)``: the ``(n, 2)`` observed outputs (latent
    bivariate normal plus AR(1) noise) and the ``(n, 2, 2)`` true
    latent covariance at each row. Raises
    :class:`~condcov.errors.CholeskyFailure` when the configured truth
    is indefinite at any observed point.
    """
    Z12 = np.asarray(Z12, dtype=np.float64)
    if Z12.ndim != 2 or Z12.shape[1] != 2:
        raise DimensionMismatch(
            f"expected (n, 2) signal covariates, got shape {Z12.shape}"
        )
    z1, z2 = Z12[:, 0], Z12[:, 1]
    n = Z12.shape[0]
    mu = np.column_stack([truth.mu1(z1, z2), truth.mu2(z1, z2)])
    v1 = np.asarray(truth.var1(z1, z2), dtype=np.float64)
    v2 = np.asarray(truth.var2(z1, z2), dtype=np.float64)
    c12 = np.asarray(truth.cov12(z1, z2), dtype=np.float64)
    if np.any(v1 < 0.0) or np.any(v2 < 0.0):
        raise CholeskyFailure("truth variance is negative at an observed point")
    l11 = np.sqrt(v1)
    positive = l11 > 0.0
    if np.any(~positive & (c12 != 0.0)):
        raise CholeskyFailure(
            "truth covariance is indefinite at an observed point "
            "(zero variance with nonzero covariance)"
        )
    l21 = np.where(positive, c12 / np.where(positive, l11, 1.0), 0.0)
    rem = v2 - l21 * l21
    if np.any(rem < -1e-12 * v2):
        raise CholeskyFailure("truth covariance is indefinite at an observed point")
    l22 = np.sqrt(np.clip(rem, 0.0, None))
    eps = rng.standard_normal((n, 2))
    latent = mu + np.column_stack(
        [l11 * eps[:, 0], l21 * eps[:, 0] + l22 * eps[:, 1]]
    )
    delta = np.column_stack(
        [_ar1_noise(n, noise.phi, noise.nu_sq[j], rng) for j in range(2)]
    )
    X = latent + delta
    Sigma = np.empty((n, 2, 2))
    Sigma[:, 0, 0] = v1
    Sigma[:, 1, 1] = v2
    Sigma[:, 0, 1] = c12
    Sigma[:, 1, 0] = c12
    return X, Sigma


def rmse_cov12(estimate, truth) -> float:
    """Root mean squared error between two aligned value sequences."""
    est = np.asarray(estimate, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if est.shape != tru.shape or est.ndim != 1:
        raise DimensionMismatch(
            f"expected two equal-length vectors, got {est.shape} and {tru.shape}"
        )
    return float(np.sqrt(np.mean((est - tru) ** 2)))


@dataclass(frozen=True)
class BenchRecord:
    """One benchmark cell outcome for one method."""

    method: str
    q: int
    replication: int
    rmse: float
    wall_time: float = 0.0
    error: str = ""


@dataclass(frozen=True)
class SummaryRow:
    method: str
    q: int
    n_ok: int
    n_failed: int
    median_rmse: float
    iqr_low: float
    iqr_high: float


@dataclass(frozen=True)
class BenchmarkResult:
    """All cell records (sorted by method, q, replication) plus config."""

    records: tuple[BenchRecord, ...]
    config: SimConfig

    def summary_rows(self) -> list[SummaryRow]:
        rows = []
        for method in sorted({r.method for r in self.records}):
            for q in self.config.q_values:
                cell = [r for r in self.records if r.method == method and r.q == q]
                ok = [r.rmse for r in cell if not r.error and math.isfinite(r.rmse)]
                if ok:
                    med = float(np.median(ok))
                    lo = float(np.quantile(ok, 0.25))
                    hi = float(np.quantile(ok, 0.75))
                else:
                    med = lo = hi = math.nan
                rows.append(
                    SummaryRow(
                        method=method,
                        q=q,
                        n_ok=len(ok),
                        n_failed=len(cell) - len(ok),
                        median_rmse=med,
                        iqr_low=lo,
                        iqr_high=hi,
                    )
                )
        return rows


def _cell_records(
    config: SimConfig, q: int, rep: int, record_timing: bool
) -> list[BenchRecord]:
    root = np.random.SeedSequence([config.seed, q, rep])
    data_entropy, forest_entropy = root.spawn(2)
    rng = np.random.Generator(np.random.Philox(data_entropy))
    surfaces = TruthSurfaces.from_params(config.truth)
    Z, _, _ = gen_covariates(config, rng)
    X, Sigma = gen_outputs(Z[:, :2], surfaces, config.noise, rng)
    data = Dataset(
        Z[:, :q],
        X,
        timestamps=np.arange(config.n_hours, dtype=np.float64),
    )
    truth12 = Sigma[:, 0, 1]
    records = []

    started = time.perf_counter() if record_timing else 0.0
    model = None
    try:
        settings = config.nw
        if settings.bandwidth is None:
            search = BandwidthSearch.for_dataset(
                data,
                n_points=settings.cv_grid_points,
                span=settings.cv_span,
                folds=settings.cv_folds,
                combine=settings.combine,
                standardize_covariates=settings.standardize_covariates,
            )
            h = select_bandwidth(data, search).h_opt
        else:
            h = settings.bandwidth
        model = fit(
            data, h, h, standardize_covariates=settings.standardize_covariates
        )
        stack = nw_covariance_batch(model, data.Z)
        est12 = stack[:, 0, 1] * model.sigma_hat[0] * model.sigma_hat[1]
        rmse = rmse_cov12(est12, truth12)
        err = ""
    except CondcovError as exc:
        rmse, err = math.nan, f"{type(exc).__name__}: {exc}"
    wall = (time.perf_counter() - started) if record_timing else 0.0
    records.append(BenchRecord("nw", q, rep, rmse, wall, err))

    started = time.perf_counter() if record_timing else 0.0
    if model is None:
        records.append(
            BenchRecord(
                "forest",
                q,
                rep,
                math.nan,
                0.0,
                "standardized residuals unavailable (kernel fit failed)",
            )
        )
        return records
    try:
        forest_seed = int(forest_entropy.generate_state(1, dtype=np.uint64)[0])
        cfg = replace(config.forest, seed=forest_seed)
        forest = fit_forest(data, model.residuals, cfg)
        stack = predict_cov_batch(forest, data.Z)
        est12 = stack[:, 0, 1] * model.sigma_hat[0] * model.sigma_hat[1]
        rmse = rmse_cov12(est12, truth12)
        err = ""
    except CondcovError as exc:
        rmse, err = math.nan, f"{type(exc).__name__}: {exc}"
    wall = (time.perf_counter() - started) if record_timing else 0.0
    records.append(BenchRecord("forest", q, rep, rmse, wall, err))
    return records


def _cell_records_star(args):
    return args[1], args[2], _cell_records(*args)


def run_benchmark(
    config: SimConfig | None = None,
    *,
    n_jobs: int = 1,
    record_timing: bool = False,
) -> BenchmarkResult:
    """Run the full (method x q x replication) benchmark.

    ``record_timing=False`` (the default) reports every wall time as
    0.0 so output files are byte-identical across machines and worker
    counts; pass ``True`` for local profiling. Estimator failures are
    recorded per cell (``rmse`` NaN plus an error string), never
    raised.
    """
    if config is None:
        config = SimConfig()
    bounds = covariate_bounds(config.zeta)
    validate_surfaces(
        TruthSurfaces.from_params(config.truth),
        tuple(bounds[0]),
        tuple(bounds[1]),
    )
    cells = [
        (config, q, rep, record_timing)
        for q in config.q_values
        for rep in range(config.replications)
    ]
    by_cell: dict[tuple[int, int], list[BenchRecord]] = {}
    if n_jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=min(n_jobs, len(cells))) as pool:
            for q, rep, recs in pool.map(_cell_records_star, cells):
                by_cell[(q, rep)] = recs
    else:
        for args in cells:
            by_cell[(args[1], args[2])] = _cell_records(*args)
    records = [rec for key in sorted(by_cell) for rec in by_cell[key]]
    records.sort(key=lambda r: (r.method, r.q, r.replication))
    return BenchmarkResult(records=tuple(records), config=config)


def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return ""
    return repr(float(value))


def write_results_csv(result: BenchmarkResult, path) -> None:
    """Flat per-cell table: method, q, replication, rmse, wall_time, error."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "q", "replication", "rmse", "wall_time", "error"])
        for r in result.records:
            writer.writerow(
                [r.method, r.q, r.replication, _fmt(r.rmse), _fmt(r.wall_time), r.error]
            )


def write_summary_csv(result: BenchmarkResult, path) -> None:
    """Per (method, q) medians and quartiles of the RMSE."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["method", "q", "n_ok", "n_failed", "median_rmse", "iqr_low", "iqr_high"]
        )
        for s in result.summary_rows():
            writer.writerow(
                [
                    s.method,
                    s.q,
                    s.n_ok,
                    s.n_failed,
                    _fmt(s.median_rmse),
                    _fmt(s.iqr_low),
                    _fmt(s.iqr_high),
                ]
            )


def write_benchmark_meta(result: BenchmarkResult, path) -> None:
    """JSON sidecar: format tag, package version, and the full config."""
    meta = {
        "format": "condcov.benchmark-meta/1",
        "package_version": __version__,
        "config": asdict(result.config),
        "n_records": len(result.records),
    }
    with open(path, "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")
