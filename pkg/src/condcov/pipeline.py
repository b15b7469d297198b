"""End-to-end fitting runs: evaluation grids, masking, export, replay.

A run takes an ingested dataset, fits one estimator, evaluates
covariance and correlation over a covariate grid restricted to the
region supported by data, and writes:

* a long-format grid CSV (one row per grid point, masked points with
  empty value fields),
* a JSON metadata sidecar describing the columns and the run,
* a JSON run manifest with everything needed to reproduce the run
  byte for byte (resolved parameters, seeds, data fingerprint),
* optionally the fitted forest in its binary container.

Support masking uses the convex hull of the observed covariates for
two covariates, and a nearest-neighbor distance threshold (95th
percentile of the data's own nearest-neighbor distances) in higher
dimension, where hull tests are unavailable.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

from ._version import __version__
from .core import Dataset, QueryGrid, dataset_fingerprint
from .errors import (
    ConfigError,
    NonPositiveDiagonal,
    ParseError,
    UnsupportedGrid,
    ZeroWeightSum,
)
from .forest import ForestConfig, fit_forest, load_forest, predict_cov_batch, save_forest
from .ingest import IngestSpec, ingest
from .kernel import (
    BandwidthSearch,
    KernelSpec,
    fit,
    nw_covariance_batch,
    select_bandwidth,
)

GRID_FORMAT = "condcov.grid/1"
MANIFEST_FORMAT = "condcov.manifest/1"
DEFAULT_GRID_SIZE = 60
MASK_NN_PERCENTILE = 95.0

GRID_CSV_NAME = "grid.csv"
GRID_META_NAME = "grid_meta.json"
MANIFEST_NAME = "manifest.json"
MODEL_NAME = "model.forest"


def auto_grid(data: Dataset, grid_size: int = DEFAULT_GRID_SIZE) -> QueryGrid:
    """Rectangular grid spanning the observed covariate ranges.

    Only defined for exactly two covariates; more raise
    :class:`~condcov.errors.UnsupportedGrid` (supply explicit points
    instead).
    """
    if data.q != 2:
        raise UnsupportedGrid(
            f"automatic rectangular grids need exactly 2 covariates, "
            f"the dataset has {data.q}; supply explicit grid points"
        )
    if grid_size < 2:
        raise ConfigError(f"grid_size must be at least 2, got {grid_size}")
    lows = data.Z.min(axis=0)
    highs = data.Z.max(axis=0)
    return QueryGrid.rectangular(lows, highs, (grid_size, grid_size))


def support_mask(grid: QueryGrid, data: Dataset) -> np.ndarray:
    """Boolean array, True where a grid point is OUTSIDE data support.

    Two covariates: outside the convex hull of the observed points
    (falling back to the distance rule for degenerate point sets).
    Otherwise: farther from the nearest observation than the 95th
    percentile of the data's own nearest-neighbor distances.
    """
    if grid.q != data.q:
        raise ConfigError(
            f"grid has {grid.q} covariates but the dataset has {data.q}"
        )
    if data.q == 2:
        try:
            hull = Delaunay(data.Z)
        except QhullError:
            return _distance_mask(grid.points, data.Z)
        return hull.find_simplex(grid.points) < 0
    return _distance_mask(grid.points, data.Z)


def _distance_mask(points: np.ndarray, Z: np.ndarray) -> np.ndarray:
    tree = cKDTree(Z)
    self_nn = tree.query(Z, k=2)[0][:, 1]
    threshold = float(np.percentile(self_nn, MASK_NN_PERCENTILE))
    return tree.query(points)[0] > threshold


def _stack_to_corr(cov: np.ndarray, where: np.ndarray) -> np.ndarray:
    """Correlations for an (m, p, p) covariance stack.

    ``where`` maps stack rows back to grid indices for error context.
    Mirrors the scalar conversion: snaps rounding-noise excesses over
    +-1 back, exact unit diagonal.
    """
    diag = np.einsum("mii->mi", cov)
    if np.any(diag <= 0.0):
        row, col = np.argwhere(diag <= 0.0)[0]
        raise NonPositiveDiagonal(
            f"estimated variance of output {col + 1} is not positive at "
            f"grid point {int(where[row])}"
        )
    sd = np.sqrt(diag)
    corr = cov / (sd[:, :, None] * sd[:, None, :])
    over = np.abs(corr) - 1.0
    snap = (over > 0.0) & (over <= 1e-8)
    corr[snap] = np.sign(corr[snap])
    ii = np.arange(cov.shape[1])
    corr[:, ii, ii] = 1.0
    return corr


@dataclass(frozen=True)
class FitParams:
    """Resolved estimator parameters for one run.

    For the kernel method ``bandwidth`` may be the string ``"cv"`` on
    input; it is replaced by the selected value before the manifest is
    written. ``mean_bandwidth`` defaults to the covariance bandwidth.
    The forest method uses ``forest`` and standardizes residuals with
    the kernel conditional mean at ``mean_bandwidth`` (also accepting
    ``"cv"``).
    """

    method: str
    bandwidth: float | str | None = None
    mean_bandwidth: float | str | None = None
    standardize_covariates: bool = False
    forest: ForestConfig | None = None

    def __post_init__(self):
        if self.method not in ("nw", "forest"):
            raise ConfigError(f'method must be "nw" or "forest", got {self.method!r}')
        if self.method == "forest" and self.forest is None:
            object.__setattr__(self, "forest", ForestConfig())


@dataclass(frozen=True)
class RunResult:
    """Paths and manifest of one completed run."""

    out_dir: str
    grid_csv: str
    grid_meta: str
    manifest_path: str
    model_path: str | None
    manifest: dict


def _resolve_bandwidth(value, data: Dataset, standardize: bool) -> float:
    if value == "cv":
        search = BandwidthSearch.for_dataset(
            data, standardize_covariates=standardize
        )
        return float(select_bandwidth(data, search).h_opt)
    out = float(value)
    if not out > 0.0:
        raise ConfigError(f"bandwidth must be positive, got {out!r}")
    return out


def fit_and_export(
    data: Dataset,
    params: FitParams,
    out_dir,
    *,
    grid: QueryGrid | None = None,
    grid_size: int = DEFAULT_GRID_SIZE,
    save_model: bool = False,
    n_jobs: int = 1,
    provenance: dict | None = None,
) -> RunResult:
    """Fit one estimator and export its grid of estimates.

    ``grid=None`` builds the automatic rectangular grid (two covariates
    only). ``provenance`` (typically the ingest spec as a dict) is
    embedded in the manifest so the run can be replayed from the
    manifest alone. Returns file paths plus the manifest dict.
    """
    os.makedirs(out_dir, exist_ok=True)
    explicit_grid = grid is not None
    if grid is None:
        grid = auto_grid(data, grid_size)
    masked = support_mask(grid, data)
    keep = ~masked
    kept_idx = np.nonzero(keep)[0]

    bandwidth = params.bandwidth
    mean_bandwidth = params.mean_bandwidth
    if params.method == "nw":
        if bandwidth is None:
            raise ConfigError('the kernel method needs a bandwidth (or "cv")')
        bandwidth = _resolve_bandwidth(
            bandwidth, data, params.standardize_covariates
        )
        if mean_bandwidth is None:
            mean_bandwidth = bandwidth
        else:
            mean_bandwidth = _resolve_bandwidth(
                mean_bandwidth, data, params.standardize_covariates
            )
    else:
        if mean_bandwidth is None:
            mean_bandwidth = "cv" if bandwidth is None else bandwidth
        mean_bandwidth = _resolve_bandwidth(
            mean_bandwidth, data, params.standardize_covariates
        )
        bandwidth = None
    resolved = replace(
        params, bandwidth=bandwidth, mean_bandwidth=mean_bandwidth
    )

    model = fit(
        data,
        mean_bandwidth,
        KernelSpec(bandwidth=bandwidth if bandwidth is not None else mean_bandwidth),
        standardize_covariates=params.standardize_covariates,
    )
    model_path = None
    if resolved.method == "nw":
        try:
            cov_kept = nw_covariance_batch(model, grid.points[kept_idx])
        except ZeroWeightSum as exc:
            raise ZeroWeightSum(
                f"unmasked grid point beyond kernel reach: {exc}"
            ) from exc
    else:
        forest = fit_forest(data, model.residuals, resolved.forest, n_jobs=n_jobs)
        cov_kept = predict_cov_batch(forest, grid.points[kept_idx])
        if save_model:
            model_path = os.path.join(out_dir, MODEL_NAME)
            save_forest(forest, model_path)
    cov_kept = cov_kept * np.outer(model.sigma_hat, model.sigma_hat)
    corr_kept = _stack_to_corr(cov_kept, kept_idx)

    grid_csv = os.path.join(out_dir, GRID_CSV_NAME)
    _write_grid_csv(grid_csv, grid, data, masked, kept_idx, cov_kept, corr_kept)

    p = data.p
    meta = {
        "format": GRID_FORMAT,
        "package_version": __version__,
        "covariate_names": list(data.covariate_names),
        "output_names": list(data.output_names),
        "method": resolved.method,
        "grid": {
            "mode": "explicit" if explicit_grid else "auto",
            "m": grid.m,
            "axes": [list(a) for a in grid.axes] if grid.axes else None,
            "masked_points": int(masked.sum()),
        },
        "mask_rule": "convex-hull" if data.q == 2 else "nn-distance-p95",
        "columns": {
            "cov_j_k": "covariance of outputs j and k (1-based, j <= k)",
            "corr_j_k": "correlation of outputs j and k (1-based, j < k)",
            "masked": "true when the point is outside data support",
        },
        "n_outputs": p,
        "n_training_rows": data.n,
    }
    grid_meta = os.path.join(out_dir, GRID_META_NAME)
    _write_json(grid_meta, meta)

    manifest = {
        "format": MANIFEST_FORMAT,
        "package_version": __version__,
        "command": "fit",
        "method": resolved.method,
        "params": {
            "bandwidth": resolved.bandwidth,
            "mean_bandwidth": resolved.mean_bandwidth,
            "standardize_covariates": resolved.standardize_covariates,
            "forest": asdict(resolved.forest) if resolved.forest else None,
        },
        "grid": {
            "mode": "explicit" if explicit_grid else "auto",
            "grid_size": None if explicit_grid else grid_size,
            "axes": [list(a) for a in grid.axes] if grid.axes else None,
        },
        "ingest": provenance,
        "dataset_fingerprint": dataset_fingerprint(data),
        "save_model": bool(model_path),
        "outputs": {
            "grid_csv": GRID_CSV_NAME,
            "grid_meta": GRID_META_NAME,
            "model": MODEL_NAME if model_path else None,
        },
    }
    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    _write_json(manifest_path, manifest)
    return RunResult(
        out_dir=str(out_dir),
        grid_csv=grid_csv,
        grid_meta=grid_meta,
        manifest_path=manifest_path,
        model_path=model_path,
        manifest=manifest,
    )


def _write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_grid_csv(path, grid, data, masked, kept_idx, cov, corr) -> None:
    p = data.p
    pairs_cov = [(j, k) for j in range(p) for k in range(j, p)]
    pairs_corr = [(j, k) for j in range(p) for k in range(j + 1, p)]
    header = list(data.covariate_names)
    header.append("masked")
    header += [f"cov_{j + 1}_{k + 1}" for j, k in pairs_cov]
    header += [f"corr_{j + 1}_{k + 1}" for j, k in pairs_corr]
    back = {int(g): i for i, g in enumerate(kept_idx)}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for g in range(grid.m):
            row = [repr(float(v)) for v in grid.points[g]]
            if masked[g]:
                row.append("true")
                row += [""] * (len(pairs_cov) + len(pairs_corr))
            else:
                i = back[g]
                row.append("false")
                row += [repr(float(cov[i, j, k])) for j, k in pairs_cov]
                row += [repr(float(corr[i, j, k])) for j, k in pairs_corr]
            writer.writerow(row)


def run_from_spec(
    spec: IngestSpec,
    params: FitParams,
    out_dir,
    *,
    grid: QueryGrid | None = None,
    grid_size: int = DEFAULT_GRID_SIZE,
    save_model: bool = False,
    n_jobs: int = 1,
) -> RunResult:
    """Ingest a CSV per ``spec`` and run :func:`fit_and_export`.

    The ingest spec is embedded in the manifest, making the run
    replayable with :func:`replay`.
    """
    result = ingest(spec)
    prov = asdict(spec)
    prov["missing"] = spec.missing.value
    return fit_and_export(
        result.dataset,
        params,
        out_dir,
        grid=grid,
        grid_size=grid_size,
        save_model=save_model,
        n_jobs=n_jobs,
        provenance=prov,
    )


def replay(manifest_path, out_dir, *, n_jobs: int = 1) -> RunResult:
    """Re-run a manifest written by :func:`fit_and_export`.

    The manifest must embed its ingest spec. With the input file
    unchanged, outputs are byte-identical to the original run.
    """
    with open(manifest_path) as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{manifest_path}: {exc}") from exc
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ParseError(
            f"{manifest_path}: expected format {MANIFEST_FORMAT!r}, "
            f"got {manifest.get('format')!r}"
        )
    if not manifest.get("ingest"):
        raise ConfigError(
            f"{manifest_path}: manifest has no embedded ingest spec; "
            "it cannot be replayed"
        )
    spec = IngestSpec(**manifest["ingest"])
    raw = manifest["params"]
    forest_cfg = ForestConfig(**raw["forest"]) if raw.get("forest") else None
    params = FitParams(
        method=manifest["method"],
        bandwidth=raw.get("bandwidth"),
        mean_bandwidth=raw.get("mean_bandwidth"),
        standardize_covariates=bool(raw.get("standardize_covariates", False)),
        forest=forest_cfg,
    )
    grid_info = manifest.get("grid", {})
    grid = None
    if grid_info.get("mode") == "explicit":
        if not grid_info.get("axes"):
            raise ConfigError(
                f"{manifest_path}: explicit grid without axes cannot be replayed"
            )
        axes = [tuple(a) for a in grid_info["axes"]]
        grid = QueryGrid.rectangular(
            [a[0] for a in axes], [a[1] for a in axes], [a[2] for a in axes]
        )
    return run_from_spec(
        spec,
        params,
        out_dir,
        grid=grid,
        grid_size=grid_info.get("grid_size") or DEFAULT_GRID_SIZE,
        save_model=bool(manifest.get("save_model")),
        n_jobs=n_jobs,
    )
