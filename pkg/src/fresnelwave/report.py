"""Structured experiment results shared by all suites."""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__


def jsonable(value: Any) -> Any:
    """Recursively convert numpy scalars/arrays and tuples to plain JSON types."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if math.isnan(v) or math.isinf(v):
            return repr(v)
        return v
    if isinstance(value, complex):
        return [value.real, value.imag]
    if hasattr(value, "to_dict"):
        return jsonable(value.to_dict())
    if value is None or isinstance(value, (str, int)):
        return value
    return repr(value)


@dataclass
class Fit:
    """A fitted exponent with its fit range and residual."""

    slope: float
    half_width: float
    intercept: float
    fit_range: tuple[float, float]
    residual: float
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)

    def curve(self):
        """Rows (x, y, fit, lo, hi) in log-space for plotting."""
        rows = []
        for xv, yv in zip(self.x, self.y):
            lx = math.log(xv)
            fit = self.intercept + self.slope * lx
            spread = self.half_width * abs(lx - math.log(self.fit_range[0]))
            rows.append((xv, yv, math.exp(fit), math.exp(fit - spread), math.exp(fit + spread)))
        return rows

    def to_dict(self):
        return {
            "slope": self.slope,
            "half_width": self.half_width,
            "intercept": self.intercept,
            "fit_range": list(self.fit_range),
            "residual": self.residual,
            "x": list(self.x),
            "y": list(self.y),
        }


def loglog_fit(x, y) -> Fit:
    """Least-squares slope of log y against log x with a 2-sigma half-width."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ coef
    resid = ly - pred
    n = len(x)
    if n > 2:
        s2 = float(resid @ resid) / (n - 2)
        se = math.sqrt(s2 / float(((lx - lx.mean()) ** 2).sum()))
    else:
        se = 0.0
    return Fit(
        slope=float(coef[0]),
        half_width=2.0 * se,
        intercept=float(coef[1]),
        fit_range=(float(x.min()), float(x.max())),
        residual=float(np.max(np.abs(resid))) if n else 0.0,
        x=x.tolist(),
        y=y.tolist(),
    )


@dataclass
class ProbeReport:
    experiment: str
    parameters: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.flags.values())

    def to_dict(self) -> dict:
        return jsonable(
            {
                "experiment": self.experiment,
                "parameters": self.parameters,
                "fits": self.fits,
                "residuals": self.residuals,
                "flags": self.flags,
                "info": self.info,
                "provenance": self.provenance,
                "tables": self.tables,
                "passed": self.passed,
            }
        )


@dataclass
class ReportEnvelope:
    config: dict
    reports: list = field(default_factory=list)
    version: str = __version__
    timestamp: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def to_dict(self) -> dict:
        return jsonable(
            {
                "tool_version": self.version,
                "config": self.config,
                "timestamp_utc": self.timestamp,
                "reports": [r.to_dict() for r in self.reports],
                "passed": self.passed,
            }
        )
