"""Small argument checks shared by the estimators and the CLI."""

from numbers import Real

import numpy as np


def check_exponent(p, name="p", low=1.0, high=np.inf, low_closed=False):
    """Return ``p`` as a float after checking it lies in the given interval."""
    if not isinstance(p, Real) or isinstance(p, bool) or np.isnan(p):
        raise ValueError(f"{name} must be a real number, got {p!r}")
    p = float(p)
    ok_low = p >= low if low_closed else p > low
    if not (ok_low and p < high):
        lb = "[" if low_closed else "("
        raise ValueError(f"{name} must lie in {lb}{low:g}, {high:g}), got {p:g}")
    return p


def check_positive(x, name):
    if not isinstance(x, Real) or isinstance(x, bool) or not np.isfinite(x) or x <= 0:
        raise ValueError(f"{name} must be a finite number > 0, got {x!r}")
    return float(x)
