"""Kernel-smoothed conditional means, covariances, and correlations.

A single environmental covariate drives both the level and the
dependence of two outputs. The demo fits the Nadaraya-Watson estimator
and reads the conditional structure off at a few covariate values,
then shows the two bandwidth extremes: a huge bandwidth recovers the
global second-moment matrix, a tiny one collapses onto the nearest
training point.

Run from the repository root:

    python3 demos/01_kernel_smoothing.py
"""

import numpy as np

from condcov import Dataset, KernelSpec, fit, nw_correlation, nw_covariance, nw_mean

rng = np.random.default_rng(42)

# Outputs share a correlation that decays as the covariate z grows:
# strongly coupled when z is small, nearly independent when z is large.
n = 600
z = np.sort(rng.uniform(0.0, 10.0, n))
true_mean = np.column_stack([0.5 * z, 2.0 - 0.1 * z])
true_rho = 0.9 / (1.0 + np.exp(z - 5.0))

noise = np.empty((n, 2))
for i in range(n):
    cov = np.array([[1.0, true_rho[i]], [true_rho[i], 1.0]])
    noise[i] = rng.multivariate_normal([0.0, 0.0], cov)
X = true_mean + noise
data = Dataset(z[:, None], X)

# Conditional means: a locally weighted average of the output rows.
print("conditional means (bandwidth 0.8):")
for point in (2.0, 5.0, 8.0):
    m = nw_mean(data, [point], 0.8)
    truth = (0.5 * point, 2.0 - 0.1 * point)
    print(
        f"  z={point:.0f}: estimate ({m[0]:+.3f}, {m[1]:+.3f}), "
        f"truth ({truth[0]:+.3f}, {truth[1]:+.3f})"
    )

# fit() standardizes each output by its smoothed conditional mean and
# its whole-sample standard deviation, then the covariance smoother
# averages outer products of those residuals.
model = fit(data, 0.8, KernelSpec(bandwidth=0.8))
print("\nconditional correlation of the standardized outputs:")
for point in (2.0, 5.0, 8.0):
    corr = nw_correlation(model, [point]).values
    expected = 0.9 / (1.0 + np.exp(point - 5.0))
    print(f"  z={point:.0f}: estimate {corr[0, 1]:+.3f}, truth {expected:+.3f}")

# Bandwidth limits. With h far above the data diameter every training
# point gets the same weight, so the estimate is the global average of
# the residual outer products.
Y = model.residuals
global_moment = Y.T @ Y / n
wide = fit(data, 0.8, KernelSpec(bandwidth=1e6))
wide_cov = nw_covariance(wide, [5.0]).values
print("\nhuge bandwidth vs global second moment:")
print(f"  max deviation {np.max(np.abs(wide_cov - global_moment)):.2e}")

# With h far below the point spacing only the nearest training point
# keeps weight, so the estimate is that point's own outer product.
narrow = fit(data, 0.8, KernelSpec(bandwidth=1e-7))
k = 300
narrow_cov = nw_covariance(narrow, data.Z[k]).values
own = np.outer(narrow.residuals[k], narrow.residuals[k])
print("tiny bandwidth vs nearest outer product:")
print(f"  max deviation {np.max(np.abs(narrow_cov - own)):.2e}")
