"""C-infinity cutoffs shared by the solver and the probes."""

from __future__ import annotations

import numpy as np


def _f(u):
    u = np.asarray(u, float)
    pos = u > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, u, 1.0)), 0.0)


def _df(u):
    u = np.asarray(u, float)
    pos = u > 0
    safe = np.where(pos, u, 1.0)
    return np.where(pos, np.exp(-1.0 / safe) / safe**2, 0.0)


def plateau(x):
    """1 for x <= 1, 0 for x >= 2, smooth and monotone in between."""
    a = _f(2.0 - np.asarray(x, float))
    b = _f(np.asarray(x, float) - 1.0)
    return a / (a + b)


def plateau_deriv(x):
    x = np.asarray(x, float)
    a, b = _f(2.0 - x), _f(x - 1.0)
    da, db = -_df(2.0 - x), _df(x - 1.0)
    return (da * b - a * db) / (a + b) ** 2


def annulus(t):
    """Dyadic bump plateau(|t|) - plateau(2|t|), supported in 1/2 <= |t| <= 2.

    sum_j annulus(2^-j t) = 1 for every t != 0.
    """
    a = np.abs(np.asarray(t, float))
    return plateau(a) - plateau(2 * a)


def annulus_deriv(t):
    t = np.asarray(t, float)
    a = np.abs(t)
    return np.sign(t) * (plateau_deriv(a) - 2 * plateau_deriv(2 * a))


def ramp(x, lo, hi):
    """0 for x <= lo, 1 for x >= hi."""
    return 1.0 - plateau(1.0 + (np.asarray(x, float) - lo) / (hi - lo))
