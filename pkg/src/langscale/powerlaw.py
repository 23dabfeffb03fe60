"""Least-squares power-law fits in log-log space."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateFitError, DomainError, FormatError


@dataclass(frozen=True)
class PowerLawFit:
    """``y = coefficient * z ** exponent`` with log-space RMS error."""

    exponent: float
    coefficient: float
    rms_error: float
    n_points: int

    def predict(self, z):
        return self.coefficient * np.asarray(z, dtype=float) ** self.exponent

    def to_dict(self):
        return {
            "exponent": self.exponent,
            "coefficient": self.coefficient,
            "rms_error": self.rms_error,
            "n_points": self.n_points,
        }


def _as_points(z, y=None):
    if y is None:
        arr = np.asarray(z, dtype=float)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("points must be an (n, 2) array of (z, y) pairs")
        return arr[:, 0], arr[:, 1]
    return np.asarray(z, dtype=float).ravel(), np.asarray(y, dtype=float).ravel()


def fit_power_law(z, y=None):
    """Fit ``y ~ c * z**k`` by ordinary least squares of ``ln y`` on ``ln z``.

    Accepts either two coordinate sequences or a single sequence of ``(z, y)``
    pairs. The returned RMS error is ``sqrt(mean((ln y - ln(c z^k))**2))``.
    """
    z, y = _as_points(z, y)
    if z.shape != y.shape:
        raise ValueError("z and y must have the same length")
    bad = np.flatnonzero(~((z > 0) & (y > 0)))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"point {i} (z={z[i]!r}, y={y[i]!r}) is not strictly positive")
    if np.unique(z).size < 2:
        raise DegenerateFitError("need at least two distinct abscissae")

    lz = np.log(z)
    ly = np.log(y)
    mz = lz.mean()
    my = ly.mean()
    dz = lz - mz
    slope = float(np.dot(dz, ly - my) / np.dot(dz, dz))
    intercept = float(my - slope * mz)
    resid = ly - (intercept + slope * lz)
    rms = math.sqrt(float(np.dot(resid, resid)) / z.size)
    return PowerLawFit(slope, math.exp(intercept), rms, int(z.size))


def write_points(path, z, y, header=None):
    """Write a two-column ``z<TAB>y`` point file."""
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    lines.extend(f"{float(a)!r}\t{float(b)!r}" for a, b in zip(z, y))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_points(path):
    zs, ys = [], []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected two tab-separated columns")
        try:
            zs.append(float(parts[0]))
            ys.append(float(parts[1]))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric value") from None
    return np.array(zs), np.array(ys)
