"""Radius grids over ``[a/lambda, a]`` and their analytic complexity quantities.

Two certified schemes are supported (uniform and geometric spacing) plus
user supplied ``explicit`` radii.  Everything that depends only on the grid
and the dimension ``d`` lives here: grid sizing for a discretization
tolerance, the equivalent number of grid points (ENGP) of the sample-reuse
algorithm, its upper bounds, reuse factors and per-radius expected draw
counts.

Sizing rules are evaluated in exact rational arithmetic (or 50-digit
floating point for the logarithmic rule) because the quantities routinely
exceed 2**53.  Float arguments are read as the decimal literal they print as,
so ``1e-5`` means exactly 1/100000.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction

import mpmath
import numpy as np

from .errors import CapExceeded, InputError

SCHEMES = ("uniform", "geometric", "explicit")

#: Largest m for which plan-only helpers will iterate over individual radii.
DEFAULT_PLAN_CAP = 10**8

_CHUNK = 1 << 22


@dataclass(frozen=True, eq=False)
class RadiusGrid:
    """Strictly increasing radii ``r_1 < ... < r_m`` with ``r_1 = a/lam``, ``r_m = a``.

    ``m == 1`` is the degenerate single-radius grid and requires ``lam == 1``.
    Grid indices used by the engine are 1-based to match the run-length rows.
    """

    radii: np.ndarray
    a: float
    lam: float
    scheme: str

    def __post_init__(self):
        radii = np.array(self.radii, dtype=float)
        radii.setflags(write=False)
        object.__setattr__(self, "radii", radii)
        if radii.ndim != 1 or radii.size == 0:
            raise InputError("a grid needs at least one radius")
        if self.scheme not in SCHEMES:
            raise InputError(f"unknown grid scheme {self.scheme!r}")
        if not np.all(np.isfinite(radii)) or radii[0] <= 0:
            raise InputError("radii must be finite and positive")
        if radii.size > 1 and not np.all(np.diff(radii) > 0):
            raise InputError("radii must be strictly increasing")
        if radii.size == 1 and self.lam != 1:
            raise InputError("a single-radius grid requires lambda == 1")
        if radii.size > 1 and not self.lam > 1:
            raise InputError("lambda must exceed 1 when m >= 2")

    @property
    def m(self) -> int:
        return int(self.radii.size)

    def __len__(self):
        return self.m

    def __eq__(self, other):
        if not isinstance(other, RadiusGrid):
            return NotImplemented
        return (
            self.scheme == other.scheme
            and self.a == other.a
            and self.lam == other.lam
            and np.array_equal(self.radii, other.radii)
        )

    def __hash__(self):
        return hash((self.scheme, self.a, self.lam, self.radii.tobytes()))


@dataclass(frozen=True)
class ComplexityReport:
    m: int
    engp: float
    engp_bound: float
    reuse_factor: float
    expected_samples: np.ndarray
    max_gap: float


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def _check_range(a, lam, m):
    if not (math.isfinite(a) and a > 0):
        raise InputError(f"a must be positive and finite, got {a}")
    if not (math.isfinite(lam) and lam >= 1):
        raise InputError(f"lambda must be >= 1, got {lam}")
    if int(m) != m or m < 1:
        raise InputError(f"m must be a positive integer, got {m}")
    if lam > 1 and m < 2:
        raise InputError("m >= 2 is required when lambda > 1")
    if lam == 1 and m != 1:
        raise InputError("lambda == 1 admits only the single-radius grid")


def uniform_grid(a: float, lam: float, m: int) -> RadiusGrid:
    """Evenly spaced radii ``r_i = a - (m-i)(lam-1) a / ((m-1) lam)``."""
    _check_range(a, lam, m)
    if m == 1:
        return RadiusGrid(np.array([float(a)]), float(a), 1.0, "uniform")
    i = np.arange(1, m + 1, dtype=float)
    radii = a - (m - i) * (lam - 1) / ((m - 1) * lam) * a
    radii[-1] = a
    return RadiusGrid(radii, float(a), float(lam), "uniform")


def geometric_grid(a: float, lam: float, m: int) -> RadiusGrid:
    """Radii in geometric progression, ``r_i = a * lam ** (-(m-i)/(m-1))``."""
    _check_range(a, lam, m)
    if m == 1:
        return RadiusGrid(np.array([float(a)]), float(a), 1.0, "geometric")
    i = np.arange(1, m + 1, dtype=float)
    radii = a * (1.0 / lam) ** ((m - i) / (m - 1))
    radii[-1] = a
    return RadiusGrid(radii, float(a), float(lam), "geometric")


def explicit_grid(radii) -> RadiusGrid:
    """Grid from user radii; ``lam`` is inferred as ``r_m / r_1``."""
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise InputError("explicit grids need a non-empty 1-d list of radii")
    lam = float(radii[-1] / radii[0]) if radii.size > 1 else 1.0
    return RadiusGrid(radii, float(radii[-1]), lam, "explicit")


def make_grid(scheme: str, a: float, lam: float, m: int) -> RadiusGrid:
    if scheme == "uniform":
        return uniform_grid(a, lam, m)
    if scheme == "geometric":
        return geometric_grid(a, lam, m)
    raise InputError(f"make_grid cannot build scheme {scheme!r}; use explicit_grid")


# ---------------------------------------------------------------------------
# sizing for a discretization tolerance
# ---------------------------------------------------------------------------


def _exact(x) -> Fraction:
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, Decimal):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(Decimal(x))
    if isinstance(x, float):
        if not math.isfinite(x):
            raise InputError(f"non-finite value {x}")
        return Fraction(Decimal(repr(x)))
    return Fraction(Decimal(str(x)))


def _sizing_args(lam, d, eps):
    lam_q, eps_q = _exact(lam), _exact(eps)
    if not lam_q >= 1:
        raise InputError(f"sizing needs lambda >= 1, got {lam}")
    if int(d) != d or d < 1:
        raise InputError(f"d must be a positive integer, got {d}")
    if not (0 < eps_q < 1):
        raise InputError(f"eps must lie in (0, 1), got {eps}")
    return lam_q, int(d), eps_q


def size_uniform(lam, d: int, eps) -> int:
    """Grid size ``2 + floor((lam-1) d / (2 eps))`` for the uniform scheme."""
    lam_q, d, eps_q = _sizing_args(lam, d, eps)
    if lam_q == 1:
        return 1
    return 2 + math.floor((lam_q - 1) * d / (2 * eps_q))


def size_barmish(lam, d: int, eps) -> int:
    """Smallest m with ``m >= 1 + 2 (lam-1) d / eps`` (no interpolation, no reuse)."""
    lam_q, d, eps_q = _sizing_args(lam, d, eps)
    if lam_q == 1:
        return 1
    return math.ceil(1 + 2 * (lam_q - 1) * d / eps_q)


def size_geometric(lam, d: int, eps) -> int:
    """Grid size ``2 + floor(ln lam / ln(1 + 2 eps/d))`` for the geometric scheme."""
    lam_q, d, eps_q = _sizing_args(lam, d, eps)
    if lam_q == 1:
        return 1
    with mpmath.workdps(60):
        lam_m = mpmath.mpf(lam_q.numerator) / lam_q.denominator
        eps_m = mpmath.mpf(eps_q.numerator) / eps_q.denominator
        ratio = mpmath.log(lam_m) / mpmath.log1p(2 * eps_m / d)
        return 2 + int(mpmath.floor(ratio))


def size_for_scheme(scheme: str, lam, d: int, eps) -> int:
    if scheme == "uniform":
        return size_uniform(lam, d, eps)
    if scheme == "geometric":
        return size_geometric(lam, d, eps)
    raise InputError(f"no sizing rule certifies the {scheme!r} scheme")


# ---------------------------------------------------------------------------
# equivalent number of grid points and friends
# ---------------------------------------------------------------------------


def _check_d(d):
    if int(d) != d or d < 1:
        raise InputError(f"d must be a positive integer, got {d}")
    return int(d)


def _hit_fractions(radii: np.ndarray, d: int) -> np.ndarray:
    # 1 - (r_i / r_{i+1})**d without cancellation
    return -np.expm1(d * np.log(radii[:-1] / radii[1:]))


def engp(grid: RadiusGrid, d: int) -> float:
    """Equivalent number of grid points ``m - sum_i (r_i/r_{i+1})**d``.

    Evaluated as ``1 + sum_i [1 - (r_i/r_{i+1})**d]``, the same quantity
    written so that no two large numbers are subtracted.
    """
    d = _check_d(d)
    if grid.m == 1:
        return 1.0
    return 1.0 + math.fsum(_hit_fractions(grid.radii, d))


def engp_uniform(lam: float, m: int, d: int, cap: int = DEFAULT_PLAN_CAP) -> float:
    """ENGP of the uniform scheme without building the grid.

    Uses ``r_i / r_{i+1} = 1 - 1/((m-1)/(lam-1) + i)`` and sums in chunks.
    Refuses (``CapExceeded``) when ``m`` exceeds ``cap``.
    """
    d = _check_d(d)
    _check_range(1.0, lam, m)
    if m == 1:
        return 1.0
    if m > cap:
        raise CapExceeded(
            f"uniform ENGP needs a sum over m={m} terms, above the cap {cap}", value=m, cap=cap
        )
    offset = (m - 1) / (lam - 1)
    partials = []
    for start in range(1, m, _CHUNK):
        i = np.arange(start, min(start + _CHUNK, m), dtype=float)
        partials.append(float(np.sum(-np.expm1(d * np.log1p(-1.0 / (offset + i))))))
    return 1.0 + math.fsum(partials)


def engp_geometric(lam: float, m: int, d: int) -> float:
    """Closed form ``m - (m-1) lam**(-d/(m-1))`` of the geometric scheme ENGP."""
    d = _check_d(d)
    _check_range(1.0, lam, m)
    if m == 1:
        return 1.0
    return 1.0 + (m - 1) * -math.expm1(-d * math.log(lam) / (m - 1))


def engp_bound(d: int, lam: float) -> float:
    """Upper bound ``1 + d ln lam`` valid for every grid over ``[a/lam, a]``."""
    d = _check_d(d)
    if not lam >= 1:
        raise InputError(f"lambda must be >= 1, got {lam}")
    return 1.0 + d * math.log(lam)


def engp_bound_random_upper(d: int, gamma: float, expected_U: float) -> float:
    """ENGP bound ``1 + d ln(E[U]/gamma)`` when the upper radius ``U`` is random.

    Valid only if ``U`` was estimated from samples independent of the ones
    drawn on ``[gamma, U]``.
    """
    d = _check_d(d)
    if not (gamma > 0 and expected_U >= gamma):
        raise InputError("need 0 < gamma <= expected_U")
    return 1.0 + d * math.log(expected_U / gamma)


def reuse_factor(grid: RadiusGrid, d: int) -> float:
    return grid.m / engp(grid, d)


def expected_samples_per_radius(grid: RadiusGrid, d: int, N: int) -> np.ndarray:
    """Expected draws issued at each radius: ``[1 - (r_j/r_{j+1})**d] N``, and ``N`` at ``r_m``."""
    d = _check_d(d)
    if int(N) != N or N < 1:
        raise InputError(f"N must be a positive integer, got {N}")
    out = np.empty(grid.m)
    out[:-1] = N * _hit_fractions(grid.radii, d)
    out[-1] = N
    return out


def max_gap(grid: RadiusGrid) -> float:
    if grid.m == 1:
        return 0.0
    return float(np.max(np.diff(grid.radii)))


def complexity_report(grid: RadiusGrid, d: int, N: int = 1) -> ComplexityReport:
    e = engp(grid, d)
    return ComplexityReport(
        m=grid.m,
        engp=e,
        engp_bound=engp_bound(d, grid.lam),
        reuse_factor=grid.m / e,
        expected_samples=expected_samples_per_radius(grid, d, N),
        max_gap=max_gap(grid),
    )


def scheme_engp(scheme: str, lam: float, m: int, d: int, cap: int = DEFAULT_PLAN_CAP) -> float:
    """ENGP for a named scheme without materializing the radii."""
    if scheme == "geometric":
        return engp_geometric(lam, m, d)
    if scheme == "uniform":
        return engp_uniform(lam, m, d, cap=cap)
    raise InputError(f"no closed-form ENGP for scheme {scheme!r}")


def scheme_max_gap(scheme: str, a: float, lam: float, m: int) -> float:
    if m == 1:
        return 0.0
    if scheme == "uniform":
        return (lam - 1) * a / ((m - 1) * lam)
    if scheme == "geometric":
        return a * -math.expm1(-math.log(lam) / (m - 1))
    raise InputError(f"no closed-form gap for scheme {scheme!r}")
