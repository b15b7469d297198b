"""Nadaraya-Watson conditional moments and cross-validated bandwidths.

The estimator smooths outer products of standardized residuals with a
Gaussian kernel over covariate distance:

* each output column is centered by a kernel-smoothed conditional mean
  and scaled by its whole-sample standard deviation;
* the conditional covariance at a query point is the kernel-weighted
  average of the residual outer products, which is PSD by construction
  for a single shared bandwidth;
* bandwidths are chosen by blocked K-fold cross-validation under a
  Frobenius loss and a trace (pseudoinverse quadratic form) loss, with
  several rules for combining the two.

Weight matrices are built in bounded-size row chunks, and reductions
against them avoid BLAS-order dependence where results feed byte-exact
reproducibility guarantees downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.spatial.distance import pdist

from .core import Dataset, SymMatrix, cov_to_corr
from .errors import (
    AllCandidatesInfeasible,
    ConfigError,
    DegenerateColumn,
    DimensionMismatch,
    ZeroWeightSum,
)

GAUSS_COEF = 1.0 / math.sqrt(2.0 * math.pi)

# A kernel weight sum at or below this is treated as total underflow.
WEIGHT_SUM_FLOOR = 1e-300

DEFAULT_PINV_TOL = 1e-8
DEFAULT_FOLDS = 5
DEFAULT_GRID_POINTS = 25
# Default search grid spans these multiples of the median pairwise
# covariate distance, log-spaced.
DEFAULT_GRID_SPAN = (0.05, 2.0)

_CHUNK_BYTES = 64 * 2**20


class KernelFamily(str, Enum):
    GAUSSIAN = "gaussian"


class CombineRule(str, Enum):
    """How the two cross-validation losses pick one bandwidth."""

    FROBENIUS_ONLY = "frobenius-only"
    TRACE_ONLY = "trace-only"
    GEOMEAN_OF_MINIMIZERS = "geomean-of-minimizers"
    MIN_GEOMEAN_LOSS = "min-geomean-loss"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus covariance bandwidth.

    ``bandwidth`` is either one positive scalar shared by all output
    pairs (the default, PSD-preserving mode) or a symmetric positive
    matrix with one bandwidth per output pair, in which case estimates
    are assembled entrywise and carry no PSD guarantee.
    """

    bandwidth: float | SymMatrix
    family: KernelFamily = KernelFamily.GAUSSIAN

    def __post_init__(self):
        bw = self.bandwidth
        if isinstance(bw, SymMatrix):
            pass
        elif isinstance(bw, np.ndarray) and bw.ndim == 2:
            object.__setattr__(self, "bandwidth", SymMatrix(bw))
        else:
            object.__setattr__(self, "bandwidth", float(bw))
        bw = self.bandwidth
        if isinstance(bw, SymMatrix):
            if not np.all(bw.values > 0.0):
                raise ConfigError("per-pair bandwidths must all be positive")
        elif not bw > 0.0:
            raise ConfigError(f"bandwidth must be positive, got {bw!r}")
        object.__setattr__(self, "family", KernelFamily(self.family))

    @property
    def per_pair(self) -> bool:
        return isinstance(self.bandwidth, SymMatrix)


def gaussian_kernel(u, h: float):
    """Gaussian kernel ``(1/h) * (2*pi)**-0.5 * exp(-u**2 / (2*h**2))``.

    ``u`` may be a scalar or an array of distances; ``h`` must be a
    positive scalar. Symmetric in ``u`` and maximal at ``u = 0``.
    """
    if not h > 0.0:
        raise ConfigError(f"bandwidth must be positive, got {h!r}")
    arr = np.asarray(u, dtype=np.float64)
    out = (GAUSS_COEF / h) * np.exp(-0.5 * np.square(arr / h))
    if arr.ndim == 0:
        return float(out)
    return out


def _row_chunks(m: int, n: int, width: int):
    """Yield (start, stop) bounds keeping an (rows, n) float64 scratch
    block of ``width`` row-elements under the chunk budget."""
    rows = max(1, _CHUNK_BYTES // (8 * max(n * width, 1)))
    for start in range(0, m, rows):
        yield start, min(start + rows, m)


def _sq_dists(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, ``(m, q) x (n, q) -> (m, n)``.

    Computed by explicit differencing (not the usual GEMM expansion) so
    results are exact for coincident points and independent of BLAS
    threading.
    """
    m, n = queries.shape[0], points.shape[0]
    out = np.empty((m, n))
    for start, stop in _row_chunks(m, n, queries.shape[1]):
        diff = queries[start:stop, None, :] - points[None, :, :]
        np.einsum("ijk,ijk->ij", diff, diff, out=out[start:stop])
    return out


def _weights_from_sq(sq: np.ndarray, h: float) -> np.ndarray:
    """Turn squared distances into Gaussian kernel weights, in place."""
    sq = sq * (-0.5 / (h * h))
    np.exp(sq, out=sq)
    sq *= GAUSS_COEF / h
    return sq


def _nw_smooth(
    queries: np.ndarray,
    points: np.ndarray,
    values: np.ndarray,
    h: float,
    on_zero: str = "raise",
):
    """Kernel-weighted averages of ``values`` rows at each query point.

    Returns ``(averages, weight_sums)``. Weights are normalized before
    the multiply, so a query reached by a single training point returns
    that point's value row exactly. A query whose weights all underflow
    raises :class:`ZeroWeightSum` when ``on_zero="raise"``; with
    ``on_zero="nan"`` its average row is NaN instead and the caller
    inspects ``weight_sums``.
    """
    m = queries.shape[0]
    out = np.empty((m, values.shape[1]))
    wsum = np.empty(m)
    for start, stop in _row_chunks(m, points.shape[0], values.shape[1] + 1):
        w = _weights_from_sq(_sq_dists(queries[start:stop], points), h)
        totals = w.sum(axis=1)
        wsum[start:stop] = totals
        alive = totals > WEIGHT_SUM_FLOOR
        w[alive] /= totals[alive, None]
        out[start:stop] = w @ values
    dead = wsum <= WEIGHT_SUM_FLOOR
    if np.any(dead):
        if on_zero == "raise":
            first = int(np.argmax(dead))
            raise ZeroWeightSum(
                f"all kernel weights underflowed at {int(dead.sum())} "
                f"query point(s), first at index {first}: "
                f"z={queries[first].tolist()} with h={h!r}"
            )
        out[dead] = np.nan
    return out, wsum


def _outer_rows(Y: np.ndarray) -> np.ndarray:
    """Flattened outer products ``y_i y_i^T`` as an ``(n, p*p)`` array."""
    n, p = Y.shape
    return (Y[:, :, None] * Y[:, None, :]).reshape(n, p * p)


@dataclass(frozen=True)
class KernelModel:
    """Fitted smoother state: training data plus standardized residuals.

    ``sigma_hat`` holds the whole-sample standard deviation (divisor
    ``n - 1``) of each raw output column; ``residuals`` are the
    mean-centered, scale-divided outputs the covariance smoother
    averages. ``covariate_scale`` is all ones unless the model was fit
    with ``standardize_covariates=True``.
    """

    training: Dataset
    spec: KernelSpec
    mean_bandwidth: float
    sigma_hat: np.ndarray
    residuals: np.ndarray
    mean_at_train: np.ndarray
    covariate_scale: np.ndarray

    @property
    def n(self) -> int:
        return self.training.n

    @property
    def p(self) -> int:
        return self.training.p

    @property
    def q(self) -> int:
        return self.training.q

    def scaled_covariates(self) -> np.ndarray:
        if np.all(self.covariate_scale == 1.0):
            return self.training.Z
        return self.training.Z / self.covariate_scale

    def scale_queries(self, queries: np.ndarray) -> np.ndarray:
        queries = np.asarray(queries, dtype=np.float64)
        if queries.ndim != 2 or queries.shape[1] != self.q:
            raise DimensionMismatch(
                f"expected (m, {self.q}) query points, got shape {queries.shape}"
            )
        if np.all(self.covariate_scale == 1.0):
            return queries
        return queries / self.covariate_scale

    def rescale_covariance(self, cov: np.ndarray) -> np.ndarray:
        """Map residual-scale covariance back to raw output units."""
        return cov * np.outer(self.sigma_hat, self.sigma_hat)


def _column_scales(arr: np.ndarray, names, what: str) -> np.ndarray:
    scales = arr.std(axis=0, ddof=1)
    if np.any(scales == 0.0):
        j = int(np.argmax(scales == 0.0))
        raise DegenerateColumn(
            f"{what} column {names[j]!r} is constant and cannot be standardized"
        )
    return scales


def fit(
    data: Dataset,
    mean_bandwidth: float,
    spec: KernelSpec | float,
    *,
    standardize_covariates: bool = False,
) -> KernelModel:
    """Standardize outputs against kernel-smoothed means and keep state.

    Each output column is centered by its Nadaraya-Watson conditional
    mean (bandwidth ``mean_bandwidth``) and divided by its whole-sample
    standard deviation. ``spec`` carries the covariance bandwidth; a
    bare positive number is accepted as shorthand for a Gaussian
    ``KernelSpec``. With ``standardize_covariates=True``, covariate
    distances are measured after dividing each covariate by its sample
    standard deviation.
    """
    if not isinstance(spec, KernelSpec):
        spec = KernelSpec(bandwidth=spec)
    mean_bandwidth = float(mean_bandwidth)
    if not mean_bandwidth > 0.0:
        raise ConfigError(
            f"mean bandwidth must be positive, got {mean_bandwidth!r}"
        )
    if spec.per_pair and spec.bandwidth.dim != data.p:
        raise DimensionMismatch(
            f"per-pair bandwidth matrix is {spec.bandwidth.dim}x"
            f"{spec.bandwidth.dim} but the dataset has p={data.p} outputs"
        )
    if standardize_covariates:
        covariate_scale = _column_scales(data.Z, data.covariate_names, "covariate")
        Zs = data.Z / covariate_scale
    else:
        covariate_scale = np.ones(data.q)
        Zs = data.Z
    sigma_hat = _column_scales(data.X, data.output_names, "output")
    mean_at_train, _ = _nw_smooth(Zs, Zs, data.X, mean_bandwidth)
    residuals = (data.X - mean_at_train) / sigma_hat
    for arr in (sigma_hat, residuals, mean_at_train, covariate_scale):
        arr.flags.writeable = False
    return KernelModel(
        training=data,
        spec=spec,
        mean_bandwidth=mean_bandwidth,
        sigma_hat=sigma_hat,
        residuals=residuals,
        mean_at_train=mean_at_train,
        covariate_scale=covariate_scale,
    )


def nw_mean(data: Dataset, z, h: float) -> np.ndarray:
    """Kernel-weighted mean of the raw outputs at covariate point ``z``.

    A convex combination of the output rows: every component lies
    within the column-wise min/max of ``X``.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (data.q,):
        raise DimensionMismatch(
            f"expected a length-{data.q} covariate point, got shape {z.shape}"
        )
    out, _ = _nw_smooth(z[None, :], data.Z, data.X, float(h))
    return out[0]


def nw_covariance_batch(model: KernelModel, queries) -> np.ndarray:
    """Conditional covariance of the standardized residuals at each of
    ``(m, q)`` query points, returned as an ``(m, p, p)`` stack.

    Requires context on failure: a query point beyond kernel reach
    raises :class:`ZeroWeightSum` naming the first such row.
    """
    q = model.scale_queries(queries)
    if not model.spec.per_pair:
        h = model.spec.bandwidth
        flat, _ = _nw_smooth(q, model.scaled_covariates(), _outer_rows(model.residuals), h)
        return flat.reshape(q.shape[0], model.p, model.p)
    out = np.empty((q.shape[0], model.p, model.p))
    for i in range(q.shape[0]):
        out[i] = _per_pair_covariance(model, q[i]).values
    return out


def _per_pair_covariance(model: KernelModel, z_scaled: np.ndarray) -> SymMatrix:
    d = np.sqrt(_sq_dists(z_scaled[None, :], model.scaled_covariates())[0])
    H = model.spec.bandwidth.values
    Y = model.residuals
    p = model.p
    S = np.zeros((p, p))
    for j in range(p):
        for k in range(j, p):
            w = gaussian_kernel(d, H[j, k])
            wsum = float(w.sum())
            if wsum <= WEIGHT_SUM_FLOOR:
                raise ZeroWeightSum(
                    f"all kernel weights underflowed for output pair "
                    f"({j}, {k}) at z={z_scaled.tolist()} with h={H[j, k]!r}"
                )
            S[j, k] = float(w @ (Y[:, j] * Y[:, k])) / wsum
    return SymMatrix(S, entrywise=True)


def nw_covariance(model: KernelModel, z) -> SymMatrix:
    """Conditional covariance of the standardized residuals at ``z``.

    With a scalar bandwidth the result is a weighted average of rank-one
    outer products, hence positive semidefinite; with a per-pair
    bandwidth matrix the result is assembled entrywise and flagged as
    such.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (model.q,):
        raise DimensionMismatch(
            f"expected a length-{model.q} covariate point, got shape {z.shape}"
        )
    if model.spec.per_pair:
        return _per_pair_covariance(model, model.scale_queries(z[None, :])[0])
    return SymMatrix(nw_covariance_batch(model, z[None, :])[0])


def nw_correlation(model: KernelModel, z) -> SymMatrix:
    """Conditional correlation at ``z``; see :func:`nw_covariance`."""
    return cov_to_corr(nw_covariance(model, z))


def _pinv_quadform(stack: np.ndarray, ys: np.ndarray, rel_tol: float) -> np.ndarray:
    """``y_i^T pinv(S_i) y_i`` for an ``(m, p, p)`` symmetric stack.

    Eigenvalues not strictly above ``rel_tol`` times the largest
    per-matrix eigenvalue magnitude are treated as zero, matching a
    singular-value cutoff pseudoinverse for symmetric PSD input.
    """
    vals, vecs = np.linalg.eigh(stack)
    cutoff = rel_tol * np.abs(vals).max(axis=1, keepdims=True)
    keep = vals > cutoff
    inv_vals = np.where(keep, 1.0 / np.where(keep, vals, 1.0), 0.0)
    proj = np.einsum("mpk,mp->mk", vecs, ys)
    return np.einsum("mk,mk->m", inv_vals, proj**2)


def _cv_losses(
    data: Dataset,
    h: float,
    folds: int,
    pseudoinverse_tol: float,
    mean_bandwidth: float | None,
    standardize_covariates: bool,
) -> tuple[float, float]:
    """Blocked K-fold Frobenius and trace losses for one bandwidth.

    Outputs are standardized once on the full sample (the conditional
    mean uses ``mean_bandwidth``, defaulting to the candidate ``h``
    itself); each held-out block is then scored against covariances
    smoothed from the remaining rows only. Folds are contiguous row
    blocks, which respects serial correlation in time-ordered data. A
    held-out point beyond kernel reach of its training rows makes the
    candidate infeasible: both losses come back infinite.
    """
    h = float(h)
    if not h > 0.0:
        raise ConfigError(f"bandwidth must be positive, got {h!r}")
    n = data.n
    if not 2 <= folds <= n:
        raise ConfigError(f"folds must be in [2, {n}], got {folds}")
    if standardize_covariates:
        Zs = data.Z / _column_scales(data.Z, data.covariate_names, "covariate")
    else:
        Zs = data.Z
    sigma_hat = _column_scales(data.X, data.output_names, "output")
    mb = h if mean_bandwidth is None else float(mean_bandwidth)
    mean_at_train, _ = _nw_smooth(Zs, Zs, data.X, mb)
    Y = (data.X - mean_at_train) / sigma_hat
    P = _outer_rows(Y)

    frob = 0.0
    trace = 0.0
    p = data.p
    for block in np.array_split(np.arange(n), folds):
        mask = np.ones(n, dtype=bool)
        mask[block] = False
        flat, wsum = _nw_smooth(Zs[block], Zs[mask], P[mask], h, on_zero="nan")
        if np.any(wsum <= WEIGHT_SUM_FLOOR):
            return math.inf, math.inf
        stack = flat.reshape(len(block), p, p)
        yb = Y[block]
        diff = yb[:, :, None] * yb[:, None, :] - stack
        frob += float(np.sum(diff**2))
        trace += float(np.sum(_pinv_quadform(stack, yb, pseudoinverse_tol)))
    return frob, trace


def cv_loss(
    data: Dataset,
    h: float,
    folds: int = DEFAULT_FOLDS,
    kind: str = "frobenius",
    pseudoinverse_tol: float = DEFAULT_PINV_TOL,
    *,
    mean_bandwidth: float | None = None,
    standardize_covariates: bool = False,
) -> float:
    """Blocked K-fold cross-validation loss for one bandwidth candidate.

    ``kind`` selects the per-point loss: ``"frobenius"`` is the squared
    Frobenius distance between the held-out residual outer product and
    the training-fold covariance; ``"trace"`` is the quadratic form of
    the held-out residual under the pseudoinverse of that covariance.
    Returns ``inf`` when any held-out point is beyond kernel reach.
    """
    if kind not in ("frobenius", "trace"):
        raise ConfigError(f'kind must be "frobenius" or "trace", got {kind!r}')
    frob, trace = _cv_losses(
        data, h, folds, pseudoinverse_tol, mean_bandwidth, standardize_covariates
    )
    return frob if kind == "frobenius" else trace


def median_pairwise_distance(Z: np.ndarray, cap: int = 2000) -> float:
    """Median Euclidean distance among rows of ``Z``.

    For more than ``cap`` rows, an evenly strided subsample of ``cap``
    rows stands in (deterministic, no RNG).
    """
    Z = np.asarray(Z, dtype=np.float64)
    n = Z.shape[0]
    if n > cap:
        Z = Z[np.unique(np.linspace(0, n - 1, cap).astype(np.int64))]
    return float(np.median(pdist(Z)))


@dataclass(frozen=True)
class BandwidthSearch:
    """Candidate grid and scoring settings for bandwidth selection."""

    grid: tuple[float, ...]
    folds: int = DEFAULT_FOLDS
    combine: CombineRule = CombineRule.GEOMEAN_OF_MINIMIZERS
    pseudoinverse_tol: float = DEFAULT_PINV_TOL
    mean_bandwidth: float | None = None
    standardize_covariates: bool = False

    def __post_init__(self):
        grid = tuple(float(h) for h in self.grid)
        if len(grid) == 0:
            raise ConfigError("bandwidth grid is empty")
        if any(not h > 0.0 for h in grid):
            raise ConfigError("bandwidth candidates must all be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("bandwidth grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "combine", CombineRule(self.combine))

    @classmethod
    def for_dataset(
        cls,
        data: Dataset,
        *,
        n_points: int = DEFAULT_GRID_POINTS,
        span: tuple[float, float] = DEFAULT_GRID_SPAN,
        standardize_covariates: bool = False,
        **settings,
    ) -> "BandwidthSearch":
        """Log-spaced grid spanning ``span`` times the median pairwise
        covariate distance of ``data``."""
        if standardize_covariates:
            Z = data.Z / _column_scales(data.Z, data.covariate_names, "covariate")
        else:
            Z = data.Z
        med = median_pairwise_distance(Z)
        if not med > 0.0:
            raise ConfigError(
                "median pairwise covariate distance is zero; "
                "supply an explicit bandwidth grid"
            )
        grid = np.geomspace(span[0] * med, span[1] * med, n_points)
        return cls(
            grid=tuple(float(h) for h in grid),
            standardize_covariates=standardize_covariates,
            **settings,
        )


@dataclass(frozen=True)
class CandidateLoss:
    """One bandwidth candidate with both cross-validation losses."""

    bandwidth: float
    frobenius_loss: float
    trace_loss: float


@dataclass(frozen=True)
class BandwidthSelection:
    """Outcome of a bandwidth search.

    ``h_frobenius`` and ``h_trace`` are the per-loss minimizers (ties
    resolved toward the smaller bandwidth); ``h_opt`` is the combined
    choice under ``combine``. ``candidates`` lists every grid point
    with both losses, in grid order.
    """

    h_opt: float
    combine: CombineRule
    h_frobenius: float
    h_trace: float
    candidates: tuple[CandidateLoss, ...]

    def format_table(self) -> str:
        lines = [f"{'bandwidth':>14}  {'frobenius_loss':>16}  {'trace_loss':>16}"]
        for c in self.candidates:
            lines.append(
                f"{c.bandwidth:>14.6g}  {c.frobenius_loss:>16.8g}  "
                f"{c.trace_loss:>16.8g}"
            )
        lines.append(
            f"h_frobenius={self.h_frobenius!r} h_trace={self.h_trace!r} "
            f"combine={self.combine.value} h_opt={self.h_opt!r}"
        )
        return "\n".join(lines)


def _argmin_first(values: list[float]) -> int:
    """Index of the smallest value; earliest index wins ties."""
    best = 0
    for i in range(1, len(values)):
        if values[i] < values[best]:
            best = i
    return best


def select_bandwidth(
    data: Dataset, search: BandwidthSearch | None = None
) -> BandwidthSelection:
    """Score every candidate bandwidth and combine the two losses.

    With no ``search``, a default grid is built from the median pairwise
    covariate distance (see :meth:`BandwidthSearch.for_dataset`).
    Candidates with infinite losses are excluded; should every candidate
    be infeasible, :class:`AllCandidatesInfeasible` is raised. Loss ties
    resolve toward the smaller bandwidth.
    """
    if search is None:
        search = BandwidthSearch.for_dataset(data)
    rows = []
    for h in search.grid:
        frob, trace = _cv_losses(
            data,
            h,
            search.folds,
            search.pseudoinverse_tol,
            search.mean_bandwidth,
            search.standardize_covariates,
        )
        rows.append(CandidateLoss(bandwidth=h, frobenius_loss=frob, trace_loss=trace))
    feasible = [c for c in rows if math.isfinite(c.frobenius_loss)]
    if not feasible:
        raise AllCandidatesInfeasible(
            f"all {len(rows)} bandwidth candidates produced infinite "
            "validation loss (held-out points beyond kernel reach)"
        )
    h1 = feasible[_argmin_first([c.frobenius_loss for c in feasible])].bandwidth
    h2 = feasible[_argmin_first([c.trace_loss for c in feasible])].bandwidth
    rule = search.combine
    if rule is CombineRule.FROBENIUS_ONLY:
        h_opt = h1
    elif rule is CombineRule.TRACE_ONLY:
        h_opt = h2
    elif rule is CombineRule.GEOMEAN_OF_MINIMIZERS:
        h_opt = math.sqrt(h1 * h2)
    else:
        geo = [math.sqrt(c.frobenius_loss * c.trace_loss) for c in feasible]
        h_opt = feasible[_argmin_first(geo)].bandwidth
    return BandwidthSelection(
        h_opt=h_opt,
        combine=rule,
        h_frobenius=h1,
        h_trace=h2,
        candidates=tuple(rows),
    )
