"""End-to-end monitoring pipeline: CSV in, correlation maps out.

A structure instrumented with vibration sensors produces hourly
natural-frequency estimates alongside weather readings, with the
usual sensor dropouts. This demo fabricates such a CSV (the pair
correlation strengthens below freezing, a stand-in for ice or bearing
stiffening), then walks the full pipeline: ingest with gap handling,
grid export for both estimators, and a byte-exact replay from the run
manifest.

Run from the repository root:

    python3 demos/05_bridge_pipeline.py
"""

import filecmp
import os
import tempfile

import numpy as np
import pandas as pd

from condcov import FitParams, ForestConfig, IngestSpec, ingest, replay, run_from_spec

# ---------------------------------------------------------------------------
# Fabricate two months of hourly monitoring data with dropouts.
# ---------------------------------------------------------------------------
rng = np.random.default_rng(12)
n = 1440
hour_of_day = np.arange(n) % 24
day = np.arange(n) / 24.0

temp = (
    4.0
    + 10.0 * np.sin(2.0 * np.pi * day / 60.0)
    + 5.0 * np.sin(2.0 * np.pi * (hour_of_day - 9) / 24.0)
    + rng.normal(0.0, 1.5, n)
)
humidity = np.clip(72.0 - 1.1 * temp + rng.normal(0.0, 6.0, n), 15.0, 100.0)

# Below freezing the two modes move together much more strongly.
rho = np.where(temp < 0.0, 0.85, 0.25)
e1 = rng.normal(0.0, 1.0, n)
e2 = rho * e1 + np.sqrt(1.0 - rho**2) * rng.normal(0.0, 1.0, n)
freq_1 = 2.44 - 0.0030 * temp + 0.012 * e1
freq_2 = 3.86 - 0.0045 * temp + 0.015 * e2

frame = pd.DataFrame(
    {
        "timestamp": pd.date_range("2020-01-01", periods=n, freq="h").strftime(
            "%Y-%m-%d %H:%M:%S"
        ),
        "temp_c": temp,
        "rel_humidity": humidity,
        "freq_1": freq_1,
        "freq_2": freq_2,
    }
)
# Sensor dropouts: a dead afternoon, scattered single losses, ragged edges.
frame.loc[300:306, "freq_1"] = np.nan
frame.loc[rng.choice(n, size=25, replace=False), "rel_humidity"] = np.nan
frame.loc[:1, ["freq_1", "freq_2"]] = np.nan
frame.loc[n - 1, "temp_c"] = np.nan

work = tempfile.mkdtemp(prefix="condcov_bridge_demo_")
csv_path = os.path.join(work, "monitoring.csv")
frame.to_csv(csv_path, index=False)
print(f"fabricated monitoring CSV: {csv_path} ({n} rows)")

# ---------------------------------------------------------------------------
# Ingest: window filter, edge trimming, linear interpolation of gaps.
# ---------------------------------------------------------------------------
spec = IngestSpec(
    path=csv_path,
    covariate_columns=("temp_c", "rel_humidity"),
    output_columns=("freq_1", "freq_2"),
    missing="interpolate",
)
result = ingest(spec)
print("\ngap report:")
for line in result.report.summary_lines():
    print(f"  {line}")

# ---------------------------------------------------------------------------
# Kernel export: correlation over a temperature x humidity grid.
# ---------------------------------------------------------------------------
nw_dir = os.path.join(work, "nw_run")
nw_run = run_from_spec(
    spec,
    FitParams(method="nw", bandwidth=5.0),
    nw_dir,
    grid_size=25,
)
print(f"\nkernel run wrote: {sorted(os.listdir(nw_dir))}")

grid = pd.read_csv(nw_run.grid_csv)
kept = grid[~grid["masked"]]
cold = kept.loc[kept["temp_c"].idxmin()]
warm = kept.loc[kept["temp_c"].idxmax()]
print(
    f"corr(freq_1, freq_2) at {cold['temp_c']:+.1f} C: {cold['corr_1_2']:.3f}"
    f"   at {warm['temp_c']:+.1f} C: {warm['corr_1_2']:.3f}"
)
print("the cold end of the grid should show the stronger coupling")

# ---------------------------------------------------------------------------
# Forest export of the same data, model saved alongside the grid.
# ---------------------------------------------------------------------------
forest_dir = os.path.join(work, "forest_run")
run_from_spec(
    spec,
    FitParams(
        method="forest",
        mean_bandwidth=5.0,
        forest=ForestConfig(n_trees=40, min_node_size=80, seed=7),
    ),
    forest_dir,
    grid_size=25,
    save_model=True,
)
print(f"\nforest run wrote: {sorted(os.listdir(forest_dir))}")

# ---------------------------------------------------------------------------
# Replay: the manifest alone reproduces the run byte for byte.
# ---------------------------------------------------------------------------
replay_dir = os.path.join(work, "nw_replay")
replay(nw_run.manifest_path, replay_dir)
same = filecmp.cmp(
    nw_run.grid_csv, os.path.join(replay_dir, "grid.csv"), shallow=False
)
print(f"\nreplayed the kernel manifest; grid.csv byte-identical: {same}")
assert same
