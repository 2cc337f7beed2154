"""Least-squares scaling-exponent fits."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .errors import PreconditionError


@dataclass(frozen=True)
class DecayFit:
    """Slope of log(value) against log(scale), with residual statistics.

    For decay profiles the scale is r^m, so ``slope`` is the exponent a in
    value ~ C r^{a m}.
    """

    slope: float
    intercept: float
    stderr: float
    n_points: int
    dropped: tuple[int, ...] = field(default=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dropped"] = list(self.dropped)
        return d


def loglog_fit(x, y, min_points: int = 3) -> DecayFit:
    """Fit log|y| = intercept + slope * log x, dropping zero entries of y."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    keep = y > 0
    dropped = tuple(int(i) for i in np.flatnonzero(~keep))
    if keep.sum() < min_points:
        raise PreconditionError(
            f"need at least {min_points} positive values to fit, got {int(keep.sum())}"
        )
    lx, ly = np.log(x[keep]), np.log(y[keep])
    res = stats.linregress(lx, ly)
    stderr = float(res.stderr) if keep.sum() > 2 else math.nan
    return DecayFit(float(res.slope), float(res.intercept), stderr, int(keep.sum()), dropped)


def fit_decay(levels, values, r: float) -> DecayFit:
    """Exponent a in values ~ C r^{a m} over the given levels m."""
    levels = np.asarray(levels, dtype=float)
    return loglog_fit(float(r) ** levels, values)
