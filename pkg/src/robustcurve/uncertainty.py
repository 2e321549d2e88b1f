"""Homogeneous star-shaped uncertainty sets built from weighted norms.

``B_r = {X : gauge(X) <= r}`` with ``gauge(X) = || w * (X - center) ||_p`` for
p in {1, 2, inf}.  Membership is closed.  Sampling works in *normalized*
coordinates ``Z = w * (X - center) / r`` where the set is the plain unit
ball; a unit draw can be rescaled to any radius, which is what lets the
sample-reuse engine pre-draw directions before it knows the radius.

RNG consumption order for a block of ``n`` unit draws is fixed:

* ``l2``:   ``n`` radial uniforms, then ``n*d`` standard normals;
* ``l1``:   ``n`` radial uniforms, then ``n*d`` standard exponentials,
            then ``n*d`` uniforms for the signs;
* ``linf``: ``n*d`` uniforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InputError, NumericalError
from .grid import RadiusGrid


class Shape(str, Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"


_ALIASES = {
    "l1": Shape.L1,
    "1": Shape.L1,
    "l2": Shape.L2,
    "2": Shape.L2,
    "linf": Shape.LINF,
    "inf": Shape.LINF,
    "box": Shape.LINF,
}


def parse_shape(value) -> Shape:
    if isinstance(value, Shape):
        return value
    try:
        return _ALIASES[str(value).lower()]
    except KeyError:
        raise InputError(f"unknown norm family {value!r}; use l1, l2 or linf") from None


@dataclass(frozen=True, eq=False)
class UncertaintySet:
    """Centered weighted-norm ball family ``B_r``.

    ``weights`` has units of 1/parameter so that ``w * (X - center)`` is
    dimensionless; unit weights give the plain norm ball.
    """

    center: np.ndarray
    shape: Shape
    weights: np.ndarray

    def __post_init__(self):
        center = np.array(self.center, dtype=float).reshape(-1)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if center.size < 1:
            raise InputError("dimension d must be at least 1")
        if weights.shape != center.shape:
            raise InputError(
                f"weights have length {weights.size}, center has length {center.size}"
            )
        if not np.all(np.isfinite(center)):
            raise InputError("center must be finite")
        if not (np.all(np.isfinite(weights)) and np.all(weights > 0)):
            raise InputError("weights must be finite and strictly positive")
        center.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "shape", parse_shape(self.shape))

    @classmethod
    def ball(cls, center, shape="linf", weights=None):
        center = np.asarray(center, dtype=float).reshape(-1)
        if weights is None:
            weights = np.ones_like(center)
        return cls(center, shape, weights)

    @property
    def d(self) -> int:
        return int(self.center.size)

    def __eq__(self, other):
        if not isinstance(other, UncertaintySet):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.center, other.center)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.shape, self.center.tobytes(), self.weights.tobytes()))


def _norm(z: np.ndarray, shape: Shape) -> np.ndarray:
    if shape is Shape.LINF:
        return np.max(np.abs(z), axis=-1)
    if shape is Shape.L1:
        return np.sum(np.abs(z), axis=-1)
    return np.linalg.norm(z, axis=-1)


def _as_points(uset: UncertaintySet, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1:] != (uset.d,):
        raise InputError(f"point has dimension {X.shape[-1:]}, set has d={uset.d}")
    return X


def gauge(uset: UncertaintySet, X) -> float:
    """Minkowski functional of ``X``: the radius of the ball whose boundary holds ``X``."""
    X = _as_points(uset, X)
    if X.ndim != 1:
        raise InputError("gauge takes a single point; use gauges() for arrays")
    return float(_norm(uset.weights * (X - uset.center), uset.shape))


def gauges(uset: UncertaintySet, X) -> np.ndarray:
    """Vectorized gauge over the leading axes of ``X``."""
    X = _as_points(uset, X)
    return _norm(uset.weights * (X - uset.center), uset.shape)


def contains(uset: UncertaintySet, r: float, X) -> bool:
    if not r > 0:
        raise InputError(f"radius must be positive, got {r}")
    return gauge(uset, X) <= r


def sample_unit(uset: UncertaintySet, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` uniform draws from the unit ball in normalized coordinates, shape ``(n, d)``."""
    d = uset.d
    shape = uset.shape
    if shape is Shape.LINF:
        z = 2.0 * rng.random((n, d)) - 1.0
    elif shape is Shape.L2:
        radial = rng.random(n) ** (1.0 / d)
        g = rng.standard_normal((n, d))
        z = g / np.linalg.norm(g, axis=1, keepdims=True) * radial[:, None]
    else:
        radial = rng.random(n) ** (1.0 / d)
        e = rng.standard_exponential((n, d))
        signs = np.where(rng.random((n, d)) < 0.5, -1.0, 1.0)
        z = signs * e / np.sum(e, axis=1, keepdims=True) * radial[:, None]
    if not np.all(np.isfinite(z)):
        raise NumericalError("random stream produced a non-finite draw")
    return z


def to_points(uset: UncertaintySet, r, z: np.ndarray) -> np.ndarray:
    """Map normalized unit draws to parameter space at radius ``r`` (scalar or per row)."""
    r = np.asarray(r, dtype=float)
    if r.ndim == 1:
        r = r[:, None]
    return uset.center + r * z / uset.weights


def sample_uniform(uset: UncertaintySet, r: float, rng: np.random.Generator, size=None):
    """Uniform draw(s) from ``B_r``; a single vector when ``size`` is None."""
    if not r > 0:
        raise InputError(f"radius must be positive, got {r}")
    n = 1 if size is None else int(size)
    pts = to_points(uset, r, sample_unit(uset, rng, n))
    return pts[0] if size is None else pts


def radius_index(grid: RadiusGrid, gauge_value: float):
    """Smallest 1-based index ``j`` with ``r_j >= gauge_value``; ``None`` if outside ``B_{r_m}``.

    Uniform and geometric grids invert their defining formula directly; the
    candidate is then nudged until the closed-membership test agrees, which
    absorbs rounding in the inverse.
    """
    if gauge_value < 0 or math.isnan(gauge_value):
        raise InputError(f"gauge value must be nonnegative, got {gauge_value}")
    radii = grid.radii
    m = radii.size
    if gauge_value > radii[-1]:
        return None
    if gauge_value <= radii[0]:
        return 1
    a, lam = grid.a, grid.lam
    if grid.scheme == "uniform":
        pos = m - (a - gauge_value) * (m - 1) * lam / ((lam - 1) * a)
        j = math.ceil(pos)
    elif grid.scheme == "geometric":
        pos = m + (m - 1) * math.log(gauge_value / a) / math.log(lam)
        j = math.ceil(pos)
    else:
        j = int(np.searchsorted(radii, gauge_value, side="left")) + 1
    j = min(max(j, 1), m)
    while j > 1 and radii[j - 2] >= gauge_value:
        j -= 1
    while radii[j - 1] < gauge_value:
        j += 1
    return j
