"""Deliberately naive reference implementations used as test oracles.

Everything here is written with explicit loops and textbook formulas,
independent of the production code paths, so agreement is evidence and
not tautology. Performance is irrelevant; clarity is everything.
"""

from __future__ import annotations

import math

import numpy as np

WEIGHT_FLOOR = 1e-300


def naive_sample_cov(Y):
    """Textbook sample covariance with divisor k - 1, entry by entry."""
    Y = np.asarray(Y, dtype=np.float64)
    k, p = Y.shape
    means = [sum(Y[i, j] for i in range(k)) / k for j in range(p)]
    S = np.zeros((p, p))
    for a in range(p):
        for b in range(p):
            acc = 0.0
            for i in range(k):
                acc += (Y[i, a] - means[a]) * (Y[i, b] - means[b])
            S[a, b] = acc / (k - 1)
    return S


def naive_gauss(u, h):
    return math.exp(-(u * u) / (2.0 * h * h)) / (h * math.sqrt(2.0 * math.pi))


def naive_weights(Z, z, h):
    """Kernel weights of every training row against one query point."""
    Z = np.asarray(Z, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    w = np.empty(Z.shape[0])
    for i in range(Z.shape[0]):
        dist = math.sqrt(sum((Z[i, k] - z[k]) ** 2 for k in range(Z.shape[1])))
        w[i] = naive_gauss(dist, h)
    return w


def naive_nw_mean(Z, X, z, h):
    """Explicit-loop locally weighted average of the output rows."""
    X = np.asarray(X, dtype=np.float64)
    w = naive_weights(Z, z, h)
    total = w.sum()
    out = np.zeros(X.shape[1])
    for i in range(X.shape[0]):
        out += w[i] * X[i]
    return out / total


def naive_nw_cov(Z, Y, z, h):
    """Explicit-loop locally weighted average of residual outer products."""
    Y = np.asarray(Y, dtype=np.float64)
    w = naive_weights(Z, z, h)
    total = w.sum()
    p = Y.shape[1]
    S = np.zeros((p, p))
    for i in range(Y.shape[0]):
        S += w[i] * np.outer(Y[i], Y[i])
    return S / total


def naive_standardize(Z, X, mean_h):
    """Marginal-deviation standardization against smoothed means.

    sigma_j is the plain empirical (divisor n - 1) standard deviation of
    the raw column; the centering mean is the locally weighted average
    evaluated at each training point.
    """
    Z = np.asarray(Z, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    sigma = np.empty(p)
    for j in range(p):
        mean_j = sum(X[i, j] for i in range(n)) / n
        sigma[j] = math.sqrt(
            sum((X[i, j] - mean_j) ** 2 for i in range(n)) / (n - 1)
        )
    Y = np.empty_like(X)
    for i in range(n):
        m = naive_nw_mean(Z, X, Z[i], mean_h)
        Y[i] = (X[i] - m) / sigma
    return Y, sigma


def contiguous_blocks(n, folds):
    """Index blocks in row order: the first n % folds blocks get one extra."""
    sizes = [n // folds + (1 if i < n % folds else 0) for i in range(folds)]
    blocks, start = [], 0
    for size in sizes:
        blocks.append(np.arange(start, start + size))
        start += size
    return blocks


def naive_cv_losses(Z, X, h, folds=5, pinv_tol=1e-8, mean_h=None):
    """Fold-by-fold recomputation of both cross-validation losses.

    Standardization uses the full sample (mean bandwidth tied to the
    candidate h unless given); the held-out covariance is smoothed from
    the training folds only. A held-out point whose training weights all
    underflow makes the candidate infeasible (both losses infinite).
    """
    Z = np.asarray(Z, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    Y, _ = naive_standardize(Z, X, h if mean_h is None else mean_h)
    frob_total, trace_total = 0.0, 0.0
    for block in contiguous_blocks(n, folds):
        train = np.setdiff1d(np.arange(n), block)
        for i in block:
            w = naive_weights(Z[train], Z[i], h)
            if w.sum() <= WEIGHT_FLOOR:
                return math.inf, math.inf
            S = naive_nw_cov(Z[train], Y[train], Z[i], h)
            outer = np.outer(Y[i], Y[i])
            frob_total += float(np.sum((outer - S) ** 2))
            pinv = np.linalg.pinv(S, rcond=pinv_tol)
            trace_total += float(np.trace(pinv @ outer))
    return frob_total, trace_total


def naive_vech(S, include_diagonal=True):
    """Upper-triangular entries of a symmetric matrix as a flat vector."""
    p = S.shape[0]
    out = []
    for a in range(p):
        for b in range(a if include_diagonal else a + 1, p):
            out.append(S[a, b])
    return np.array(out)


def naive_split_criterion(left, right, include_diagonal=True):
    SL = naive_sample_cov(left)
    SR = naive_sample_cov(right)
    d = naive_vech(SL, include_diagonal) - naive_vech(SR, include_diagonal)
    kL, kR = len(left), len(right)
    return math.sqrt(kL * kR) * math.sqrt(float(np.dot(d, d)))


def brute_force_best_split(
    rows, Y, Z, min_node, include_diagonal=True, features=None
):
    """Exhaustive scan over every (covariate, midpoint) candidate.

    Mirrors the documented conventions: rows with covariate value <=
    cutpoint go left; both children need at least min_node rows;
    candidate cutpoints are midpoints between consecutive distinct
    values; ties resolve to the lowest covariate index, then the
    smallest cutpoint (strictly-better-only updates while scanning
    covariates and cutpoints in ascending order).

    Returns (covariate_index, cutpoint, criterion) or None.
    """
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size < 2 * min_node:
        return None
    if features is None:
        features = range(Z.shape[1])
    best = None
    for f in features:
        vals = sorted(set(float(Z[i, f]) for i in rows))
        for lo, hi in zip(vals, vals[1:]):
            cut = 0.5 * (lo + hi)
            left = [i for i in rows if Z[i, f] <= cut]
            right = [i for i in rows if Z[i, f] > cut]
            if len(left) < min_node or len(right) < min_node:
                continue
            crit = naive_split_criterion(
                Y[np.array(left)], Y[np.array(right)], include_diagonal
            )
            if best is None or crit > best[2]:
                best = (f, cut, crit)
    return best


def naive_rmse(estimate, truth):
    """Spreadsheet-style RMSE: accumulate squared differences, then root."""
    acc, count = 0.0, 0
    for e, t in zip(estimate, truth):
        acc += (float(e) - float(t)) ** 2
        count += 1
    return math.sqrt(acc / count)
