"""Numeric foundation: symmetric matrices, datasets, and query grids.

Every covariance or correlation estimate in this package is a dense
symmetric float64 matrix of small dimension (tens of outputs at most),
so storage is a plain ndarray with the upper triangle authoritative.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import (
    DimensionMismatch,
    NonMonotoneTimestamps,
    NonPositiveDiagonal,
    TooFewRows,
)

# Default positive semidefiniteness slack, relative to the largest
# diagonal entry of the matrix under test.
PSD_REL_TOL = 1e-10

# Off-diagonal correlations derived from a PSD covariance may poke past
# +-1 by floating point noise; excesses up to this much are snapped back.
CORR_CLIP_GUARD = 1e-8


class SymMatrix:
    """Dense symmetric matrix with the upper triangle authoritative.

    The constructor mirrors the upper triangle (diagonal included) onto
    the lower one, so ``values`` is exactly symmetric no matter how the
    input was produced. The backing array is read-only.

    Parameters
    ----------
    values : array_like
        Square ``(p, p)`` array. Only its upper triangle is read.
    entrywise : bool
        Marks a matrix assembled entry by entry from separately tuned
        smoothers (one bandwidth per output pair). Such estimates carry
        no positive semidefiniteness guarantee, and correlation
        conversion will not snap out-of-range entries back into
        ``[-1, 1]`` for them.
    """

    __slots__ = ("_values", "entrywise")

    def __init__(self, values, entrywise: bool = False):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise DimensionMismatch(
                f"expected a square matrix, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr[np.triu_indices(arr.shape[0])])):
            raise ValueError("matrix entries must be finite")
        full = np.triu(arr) + np.triu(arr, 1).T
        full.flags.writeable = False
        self._values = full
        self.entrywise = bool(entrywise)

    @property
    def values(self) -> np.ndarray:
        """Read-only ``(p, p)`` ndarray."""
        return self._values

    @property
    def dim(self) -> int:
        return self._values.shape[0]

    def __getitem__(self, key):
        return self._values[key]

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self._values.astype(dtype)
        return self._values

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue, from a full symmetric eigendecomposition."""
        return float(np.linalg.eigvalsh(self._values)[0])

    def is_psd(self, tol: float | None = None) -> bool:
        """True when the smallest eigenvalue is ``>= -tol``.

        ``tol`` defaults to ``PSD_REL_TOL`` times the largest diagonal
        entry (clamped at zero), so the test scales with the matrix.
        """
        if tol is None:
            tol = PSD_REL_TOL * max(float(np.max(np.diag(self._values))), 0.0)
        return self.min_eigenvalue() >= -tol

    def __repr__(self) -> str:
        tag = ", entrywise=True" if self.entrywise else ""
        return f"SymMatrix(dim={self.dim}{tag})"


def cov_to_corr(cov: SymMatrix, *, tol: float = 0.0) -> SymMatrix:
    """Convert a covariance matrix to the matching correlation matrix.

    Diagonal entries at or below ``tol`` raise
    :class:`~condcov.errors.NonPositiveDiagonal`. The result has an exact
    unit diagonal. For matrices that are not marked ``entrywise``,
    off-diagonal values whose magnitude exceeds 1 by at most
    ``CORR_CLIP_GUARD`` (pure rounding noise on a PSD input) are snapped
    to ``+-1``; larger excesses are left alone so genuinely indefinite
    input stays visible.
    """
    arr = cov.values
    d = np.diag(arr)
    if np.any(d <= tol):
        j = int(np.argmax(d <= tol))
        raise NonPositiveDiagonal(
            f"diagonal entry {j} is {d[j]!r}, not above {tol!r}"
        )
    sd = np.sqrt(d)
    corr = arr / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    if not cov.entrywise:
        over = np.abs(corr) - 1.0
        fix = (over > 0.0) & (over <= CORR_CLIP_GUARD)
        np.fill_diagonal(fix, False)
        corr[fix] = np.sign(corr[fix])
    return SymMatrix(corr, entrywise=cov.entrywise)


def euclidean_dist(a, b) -> float:
    """Euclidean distance between two equal-length vectors."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape or av.ndim != 1:
        raise DimensionMismatch(
            f"expected two vectors of equal length, got {av.shape} and {bv.shape}"
        )
    return float(np.sqrt(np.sum((av - bv) ** 2)))


def _sample_cov(rows: np.ndarray) -> np.ndarray:
    """Mean-centered sample covariance with the n-1 divisor, as an array."""
    centered = rows - rows.mean(axis=0)
    return (centered.T @ centered) / (rows.shape[0] - 1)


def sample_cov(rows) -> SymMatrix:
    """Sample covariance of ``(k, p)`` rows, ``k >= 2``, with divisor k-1."""
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d array, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise TooFewRows(
            f"sample covariance needs at least 2 rows, got {arr.shape[0]}"
        )
    return SymMatrix(_sample_cov(arr))


class Dataset:
    """Aligned covariates and outputs, optionally timestamped.

    ``Z`` is ``(n, q)`` covariates, ``X`` is ``(n, p)`` outputs, rows
    aligned. All values must be finite and ``n >= 2``. When timestamps
    are given they must be strictly increasing, and rows are assumed to
    be in time order. Arrays are copied to contiguous float64 and made
    read-only.
    """

    __slots__ = ("Z", "X", "timestamps", "covariate_names", "output_names")

    def __init__(
        self,
        Z,
        X,
        timestamps=None,
        covariate_names: tuple[str, ...] | None = None,
        output_names: tuple[str, ...] | None = None,
    ):
        Z = np.ascontiguousarray(Z, dtype=np.float64)
        X = np.ascontiguousarray(X, dtype=np.float64)
        if Z.ndim != 2 or X.ndim != 2:
            raise DimensionMismatch(
                f"Z and X must be 2-d, got shapes {Z.shape} and {X.shape}"
            )
        if Z.shape[0] != X.shape[0]:
            raise DimensionMismatch(
                f"Z has {Z.shape[0]} rows but X has {X.shape[0]}"
            )
        if Z.shape[0] < 2:
            raise TooFewRows(f"need at least 2 rows, got {Z.shape[0]}")
        if Z.shape[1] == 0 or X.shape[1] == 0:
            raise DimensionMismatch("Z and X need at least one column each")
        if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(X))):
            raise ValueError("Z and X must be finite")
        if timestamps is not None:
            timestamps = np.ascontiguousarray(timestamps, dtype=np.float64)
            if timestamps.shape != (Z.shape[0],):
                raise DimensionMismatch(
                    f"timestamps shape {timestamps.shape} does not match n={Z.shape[0]}"
                )
            if not np.all(np.diff(timestamps) > 0):
                raise NonMonotoneTimestamps(
                    "timestamps must be strictly increasing"
                )
            timestamps.flags.writeable = False
        if covariate_names is None:
            covariate_names = tuple(f"z{j + 1}" for j in range(Z.shape[1]))
        else:
            covariate_names = tuple(str(s) for s in covariate_names)
            if len(covariate_names) != Z.shape[1]:
                raise DimensionMismatch(
                    f"{len(covariate_names)} covariate names for {Z.shape[1]} columns"
                )
        if output_names is None:
            output_names = tuple(f"x{j + 1}" for j in range(X.shape[1]))
        else:
            output_names = tuple(str(s) for s in output_names)
            if len(output_names) != X.shape[1]:
                raise DimensionMismatch(
                    f"{len(output_names)} output names for {X.shape[1]} columns"
                )
        Z.flags.writeable = False
        X.flags.writeable = False
        self.Z = Z
        self.X = X
        self.timestamps = timestamps
        self.covariate_names = covariate_names
        self.output_names = output_names

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def q(self) -> int:
        return self.Z.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def __repr__(self) -> str:
        ts = "timestamped" if self.timestamps is not None else "untimestamped"
        return f"Dataset(n={self.n}, q={self.q}, p={self.p}, {ts})"


def dataset_fingerprint(data: Dataset) -> str:
    """SHA-256 over shapes, names, and raw bytes of a dataset.

    Stable across processes and platforms of equal endianness; used to
    tie saved models and run manifests to their training data.
    """
    digest = hashlib.sha256()
    for part in (
        repr(data.Z.shape),
        repr(data.X.shape),
        ",".join(data.covariate_names),
        ",".join(data.output_names),
    ):
        digest.update(part.encode())
        digest.update(b"\x00")
    digest.update(data.Z.tobytes())
    digest.update(data.X.tobytes())
    if data.timestamps is not None:
        digest.update(data.timestamps.tobytes())
    return digest.hexdigest()


class QueryGrid:
    """Covariate points at which estimates are evaluated.

    Either an arbitrary ``(m, q)`` point set, or a full rectangular grid
    built by :meth:`rectangular`, in which case ``axes`` holds one
    ``(low, high, count)`` descriptor per covariate and the stored
    points are exactly the row-major cartesian product of the implied
    ``linspace`` axes (first axis slowest).
    """

    __slots__ = ("points", "axes")

    def __init__(self, points, axes=None):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise DimensionMismatch(
                f"expected a non-empty (m, q) point array, got shape {pts.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if axes is not None:
            axes = tuple(
                (float(lo), float(hi), int(count)) for lo, hi, count in axes
            )
            if len(axes) != pts.shape[1]:
                raise DimensionMismatch(
                    f"{len(axes)} axis descriptors for {pts.shape[1]} columns"
                )
            rebuilt = _cartesian_grid(axes)
            if rebuilt.shape != pts.shape or not np.array_equal(rebuilt, pts):
                raise ValueError(
                    "axis descriptors do not reproduce the stored points"
                )
        pts.flags.writeable = False
        self.points = pts
        self.axes = axes

    @classmethod
    def rectangular(cls, lows, highs, counts) -> "QueryGrid":
        """Full rectangular grid from per-axis bounds and point counts."""
        lows = np.atleast_1d(np.asarray(lows, dtype=np.float64))
        highs = np.atleast_1d(np.asarray(highs, dtype=np.float64))
        counts = np.atleast_1d(np.asarray(counts, dtype=np.int64))
        if not (lows.shape == highs.shape == counts.shape) or lows.ndim != 1:
            raise DimensionMismatch(
                "lows, highs, and counts must be 1-d and equally long"
            )
        if np.any(counts < 1):
            raise ValueError("each axis needs at least one point")
        if np.any(highs < lows):
            raise ValueError("axis bounds must satisfy low <= high")
        axes = tuple(
            (float(lo), float(hi), int(c))
            for lo, hi, c in zip(lows, highs, counts)
        )
        return cls(_cartesian_grid(axes), axes=axes)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def q(self) -> int:
        return self.points.shape[1]

    def __repr__(self) -> str:
        kind = "rectangular" if self.axes is not None else "points"
        return f"QueryGrid(m={self.m}, q={self.q}, {kind})"


def _cartesian_grid(axes) -> np.ndarray:
    axes_1d = [np.linspace(lo, hi, count) for lo, hi, count in axes]
    mesh = np.meshgrid(*axes_1d, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])
