"""Deterministic synthetic monitoring CSV in the KW51 column schema.

Generates hourly rows of steel temperature (tBD31A, deg C), relative
humidity (rhBD31A, %) and eight tracked natural frequencies (mode_1 ..
mode_8, Hz) with seasonal and daily structure, measurement noise whose
cross-mode correlation rises in cold weather, and injected missing
cells that exercise interpolation and the no-extrapolation rule.

Everything is driven by one seed so repeated generation is
byte-identical; tests rely on that.
"""

from __future__ import annotations

import csv
import math
from datetime import datetime, timedelta

import numpy as np

COVARIATE_COLUMNS = ("tBD31A", "rhBD31A")
MODE_COLUMNS = tuple(f"mode_{k}" for k in range(1, 9))
START = datetime(2018, 10, 2, 0, 0, 0)
MODE_BASE_HZ = (2.43, 2.72, 3.01, 3.58, 3.88, 4.15, 4.35, 4.68)

# Injected gap layout (row indices, 0-based, before any ingest filtering).
LEADING_GAP_ROWS = (0, 1, 2, 3)          # mode_1 missing -> leading drop
TRAILING_GAP_ROWS = 1                     # last row rhBD31A missing
INTERIOR_TEMP_GAP_ROW = 500               # single-hour hole in temperature
INTERIOR_MODE_GAP = (1000, 1003)          # 3-hour hole in mode_5 [start, stop)
N_SCATTERED_GAPS = 20


def _ar1(n, phi, sd, rng):
    innov = rng.standard_normal(n) * sd * math.sqrt(1.0 - phi * phi)
    out = np.empty(n)
    acc = rng.standard_normal() * sd
    for i in range(n):
        acc = phi * acc + innov[i]
        out[i] = acc
    return out


def generate_kw51_like(n_hours=2160, seed=20181002):
    """Return (timestamps, column dict) of synthetic monitoring data."""
    rng = np.random.default_rng(seed)
    stamps = [START + timedelta(hours=i) for i in range(n_hours)]
    doy = np.array([t.timetuple().tm_yday for t in stamps], dtype=float)
    hod = np.array([t.hour for t in stamps], dtype=float)

    temp = (
        12.0
        + 14.0 * np.sin((doy - 130.0) * 2.0 * np.pi / 365.0)
        + 3.5 * np.sin((hod - 9.0) * np.pi / 12.0)
        + _ar1(n_hours, 0.9, 1.2, rng)
    )
    rh = np.clip(
        72.0
        + 14.0 * np.sin((doy - 250.0) * 2.0 * np.pi / 365.0)
        + 4.0 * np.sin((hod - 15.0) * np.pi / 12.0)
        + _ar1(n_hours, 0.85, 4.0, rng),
        25.0,
        100.0,
    )

    # Mode frequencies: linear temperature and humidity effects plus
    # equicorrelated noise whose common-factor share grows as the
    # temperature drops below ~2 degC (frost stiffening surrogate).
    rho = 0.15 + 0.65 / (1.0 + np.exp(temp - 2.0))
    common = rng.standard_normal(n_hours)
    cols = {"tBD31A": temp, "rhBD31A": rh}
    for k, (name, base) in enumerate(zip(MODE_COLUMNS, MODE_BASE_HZ)):
        own = rng.standard_normal(n_hours)
        noise = np.sqrt(rho) * common + np.sqrt(1.0 - rho) * own
        cols[name] = (
            base
            - (0.0008 + 0.0001 * k) * base * temp
            + 0.0004 * base * (rh - 70.0) / 30.0
            + 0.004 * base * noise
        )
    return stamps, cols


def inject_gaps(cols, n_hours, seed=77):
    """Blank out a deterministic set of cells (NaN) in place."""
    rng = np.random.default_rng(seed)
    for i in LEADING_GAP_ROWS:
        cols["mode_1"][i] = np.nan
    cols["rhBD31A"][n_hours - TRAILING_GAP_ROWS :] = np.nan
    cols["tBD31A"][INTERIOR_TEMP_GAP_ROW] = np.nan
    cols["mode_5"][INTERIOR_MODE_GAP[0] : INTERIOR_MODE_GAP[1]] = np.nan
    names = list(cols)
    interior = np.arange(24, n_hours - 24)
    for _ in range(N_SCATTERED_GAPS):
        col = names[int(rng.integers(len(names)))]
        cols[col][int(rng.choice(interior))] = np.nan


def write_kw51_like_csv(path, n_hours=2160, seed=20181002, gaps=True):
    """Write the synthetic CSV; returns the path for convenience."""
    stamps, cols = generate_kw51_like(n_hours=n_hours, seed=seed)
    if gaps:
        inject_gaps(cols, n_hours)
    header = ["timestamp", *COVARIATE_COLUMNS, *MODE_COLUMNS]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, stamp in enumerate(stamps):
            row = [stamp.strftime("%Y-%m-%d %H:%M:%S")]
            for name in header[1:]:
                v = cols[name][i]
                row.append("" if math.isnan(v) else repr(float(v)))
            writer.writerow(row)
    return path
