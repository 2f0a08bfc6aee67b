"""Small regression helpers shared by the diagnostics."""
from __future__ import annotations

import numpy as np

from .exceptions import ArgumentError, NumericalError


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``.

    Returns
    -------
    slope, intercept : float
        ``y ~ exp(intercept) * x**slope``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or x.shape != y.shape:
        raise ArgumentError("need at least two matching samples")
    if np.any(x <= 0) or np.any(y <= 0):
        raise NumericalError("log-log fit needs positive data")
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(intercept)
