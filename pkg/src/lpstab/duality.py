"""Pointwise gradient kernel of the lp regularizer and the lq duality map."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "ONE",
    "DualVector",
    "conjugate_exponent",
    "g_p",
    "g_inverse",
    "duality_map",
]

# Flag for the q -> 1 limit (primal p = inf).
ONE = "one"


def conjugate_exponent(p: float) -> float:
    """Return ``q`` with ``1/p + 1/q = 1``; ``inf`` maps to 1 and 1 to ``inf``."""
    if p == np.inf:
        return 1.0
    if p == 1:
        return np.inf
    if p < 1:
        raise ValueError(f"exponent must be >= 1, got {p}")
    return p / (p - 1.0)


def g_p(x: ArrayLike, p: float):
    """``sign(x) |x|^(p-1)`` elementwise, with ``sign(0) = 0``.

    ``p * g_p`` is the gradient of ``|x|^p``. Scalars in, scalars out.
    """
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    x = np.asarray(x, dtype=np.float64)
    out = np.sign(x) * np.abs(x) ** (p - 1.0)
    return float(out) if out.ndim == 0 else out


def g_inverse(x: ArrayLike, p: float):
    """Inverse of :func:`g_p`; equal to ``g_q`` with ``q = p / (p - 1)``."""
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    x = np.asarray(x, dtype=np.float64)
    out = np.sign(x) * np.abs(x) ** (1.0 / (p - 1.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DualVector:
    """Element of lq, the dual of lp.

    ``q`` is a float in ``(1, inf)`` or :data:`ONE` for the limit case.
    """

    values: NDArray[np.float64]
    q: Union[float, str]

    def __post_init__(self):
        v = np.array(getattr(self.values, "values", self.values), dtype=np.float64)
        if v.ndim != 1:
            raise ValueError(f"dual vector must be 1-dimensional, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("dual vector has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        q = self.q
        if q != ONE:
            q = float(q)
            if q == 1.0:
                q = ONE
            elif not (1.0 < q < np.inf):
                raise ValueError(f"q must lie in (1, inf) or be {ONE!r}, got {self.q}")
        object.__setattr__(self, "q", q)

    @classmethod
    def for_primal(cls, values: ArrayLike, p: float) -> "DualVector":
        """Dual vector paired with the primal space lp (``p = inf`` allowed)."""
        q = conjugate_exponent(p)
        return cls(values, ONE if q == 1.0 else q)

    @property
    def p(self) -> float:
        return np.inf if self.q == ONE else conjugate_exponent(self.q)


def duality_map(nu: DualVector) -> NDArray[np.float64]:
    """Duality map from lq to lp.

    For ``q`` in ``(1, inf)``::

        J(nu) = |nu|^(q-1) sign(nu) / ||nu||_q^(q-2)

    so that ``||J(nu)||_p = ||nu||_q`` and ``<nu, J(nu)> = ||nu||_q^2``. For
    ``q = ONE`` the limit ``sign(nu) ||nu||_1`` is returned. ``nu = 0`` maps
    to 0.
    """
    if not isinstance(nu, DualVector):
        raise TypeError("duality_map expects a DualVector")
    v = nu.values
    if nu.q == ONE:
        return np.sign(v) * np.sum(np.abs(v))
    q = nu.q
    a = np.abs(v)
    scale = a.max(initial=0.0)
    if scale == 0.0:
        return np.zeros_like(v)
    norm = scale * np.sum((a / scale) ** q) ** (1.0 / q)
    # ||nu|| (|nu| / ||nu||)^(q-1) is the same quantity without overflow
    return np.sign(v) * norm * (a / norm) ** (q - 1.0)
