"""Robustness curves from run results: interpolation error, confidence bands, memory bounds.

Between neighbouring grid radii ``r_i < r_{i+1}`` the estimate is the linear
interpolant ``P*``.  For any requirement and any homogeneous star-shaped
family the gap ``|P(r) - P*(r)|`` is at most ``1 - g(r*) / (r_{i+1} - r_i)``,
where ``g(r) = (r_{i+1} - r)(r_i/r)^d + (r - r_i)(r/r_{i+1})^d`` and ``r*`` is
the unique stationary point of ``g``.  The derivative ``g'(r) = Phi(r) - Psi(r)``
is increasing, so ``r*`` is found by bisection.  We bisect on
``log Phi - log Psi`` so that large ``d`` does not underflow both terms to 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InputError, NumericalError
from .grid import RadiusGrid

MAX_BISECTIONS = 200


# ---------------------------------------------------------------------------
# interpolation and its error bounds
# ---------------------------------------------------------------------------


def interpolate(r_i: float, r_ip1: float, P_i: float, P_ip1: float, r):
    """Linear interpolant through ``(r_i, P_i)`` and ``(r_ip1, P_ip1)``."""
    if not r_i < r_ip1:
        raise InputError(f"need r_i < r_ip1, got {r_i}, {r_ip1}")
    r = np.asarray(r, dtype=float)
    if np.any(r < r_i) or np.any(r > r_ip1):
        raise InputError("r must lie in [r_i, r_ip1]")
    out = ((r - r_i) * P_ip1 + (r_ip1 - r) * P_i) / (r_ip1 - r_i)
    return float(out) if out.ndim == 0 else out


def _check_d(d):
    if int(d) != d or d < 1:
        raise InputError(f"dimension d must be a positive integer, got {d}")


def _log_phi(r, r_i, r_ip1, d):
    return d * np.log(r / r_ip1) + np.log1p(d * (1.0 - r_i / r))


def _log_psi(r, r_i, r_ip1, d):
    return d * np.log(r_i / r) + np.log1p(d * (r_ip1 / r - 1.0))


def phi(r, r_i, r_ip1, d):
    """Increasing part of ``g'``: ``(r/r_{i+1})^d [1 + d (1 - r_i/r)]``."""
    return np.exp(_log_phi(np.asarray(r, dtype=float), r_i, r_ip1, d))


def psi(r, r_i, r_ip1, d):
    """Decreasing part of ``g'``: ``(r_i/r)^d [1 + d (r_{i+1}/r - 1)]``."""
    return np.exp(_log_psi(np.asarray(r, dtype=float), r_i, r_ip1, d))


def g_normalized(r, r_i, r_ip1, d):
    """``g(r) / (r_{i+1} - r_i)``, the convex combination of the two power ratios."""
    r = np.asarray(r, dtype=float)
    zeta = (r - r_i) / (r_ip1 - r_i)
    return (1.0 - zeta) * np.exp(d * np.log(r_i / r)) + zeta * np.exp(d * np.log(r / r_ip1))


def _r_star_vec(r_i, r_ip1, d, tol):
    """Vectorized bisection for ``Phi = Psi`` on each interval; returns ``(r*, converged)``."""
    lo = np.array(r_i, dtype=float, copy=True)
    hi = np.array(r_ip1, dtype=float, copy=True)
    lo_fixed = np.asarray(r_i, dtype=float)
    hi_fixed = np.asarray(r_ip1, dtype=float)
    done = hi - lo <= tol * lo
    for _ in range(MAX_BISECTIONS):
        if np.all(done):
            break
        mid = 0.5 * (lo + hi)
        # interval already at float resolution
        stuck = (mid <= lo) | (mid >= hi)
        done |= stuck
        diff = _log_phi(mid, lo_fixed, hi_fixed, d) - _log_psi(mid, lo_fixed, hi_fixed, d)
        go_up = diff < 0
        lo = np.where(~done & go_up, mid, lo)
        hi = np.where(~done & ~go_up, mid, hi)
        done |= hi - lo <= tol * lo
    return 0.5 * (lo + hi), done


def find_r_star(r_i: float, r_ip1: float, d: int, tol: float = 1e-12) -> float:
    """Stationary point of ``g`` on ``(r_i, r_ip1)``, to relative width ``tol``."""
    _check_d(d)
    if not (0 < r_i < r_ip1 and math.isfinite(r_ip1)):
        raise InputError(f"need 0 < r_i < r_ip1, got {r_i}, {r_ip1}")
    if not tol >= 0:
        raise InputError(f"tol must be nonnegative, got {tol}")
    r, ok = _r_star_vec(np.float64(r_i), np.float64(r_ip1), d, tol)
    if not bool(ok):
        raise NumericalError(f"bisection for r* on [{r_i}, {r_ip1}] did not converge")
    return float(r)


def loose_bound(r_i, r_ip1, d):
    """``d (r_{i+1} - r_i) / (2 r_i)``."""
    return d * (np.asarray(r_ip1, dtype=float) - r_i) / (2.0 * np.asarray(r_i, dtype=float))


def _tight_at(r, r_i, r_ip1, d):
    # 1 - g(r)/(r_{i+1}-r_i), written with expm1 to keep small gaps accurate
    zeta = (r - r_i) / (r_ip1 - r_i)
    return (1.0 - zeta) * -np.expm1(d * np.log(r_i / r)) + zeta * -np.expm1(d * np.log(r / r_ip1))


def interp_error_bounds(r_i, r_ip1, d: int, tol: float = 1e-12):
    """Vectorized ``(tight, loose)`` over arrays of intervals.

    Intervals whose bisection fails get ``tight = loose``; degenerate
    intervals (``r_ip1 == r_i``) get zeros.
    """
    _check_d(d)
    r_i = np.asarray(r_i, dtype=float)
    r_ip1 = np.asarray(r_ip1, dtype=float)
    if np.any(r_i <= 0) or np.any(r_ip1 < r_i):
        raise InputError("need 0 < r_i <= r_ip1")
    loose = loose_bound(r_i, r_ip1, d)
    tight = np.zeros_like(loose)
    live = r_ip1 > r_i
    if np.any(live):
        rs, ok = _r_star_vec(r_i[live], r_ip1[live], d, tol)
        t = _tight_at(rs, r_i[live], r_ip1[live], d)
        tight[live] = np.where(ok, t, loose[live])
    return tight, loose


def interp_error_bound(r_i: float, r_ip1: float, d: int, tol: float = 1e-12):
    """``(tight, loose)`` bounds on ``|P(r) - P*(r)|`` over ``[r_i, r_ip1]``."""
    _check_d(d)
    if not 0 < r_i <= r_ip1:
        raise InputError(f"need 0 < r_i <= r_ip1, got {r_i}, {r_ip1}")
    if r_ip1 == r_i:
        return 0.0, 0.0
    r_star = find_r_star(r_i, r_ip1, d, tol)
    return float(_tight_at(r_star, r_i, r_ip1, d)), float(loose_bound(r_i, r_ip1, d))


def lipschitz_bound(r: float, delta_r: float, d: int) -> float:
    """``1 - (1 + delta_r/r)^(-d)``, a bound on ``|P(r + delta_r) - P(r)|``."""
    _check_d(d)
    if not r > 0 or not delta_r >= 0:
        raise InputError(f"need r > 0 and delta_r >= 0, got {r}, {delta_r}")
    return float(-math.expm1(-d * math.log1p(delta_r / r)))


# ---------------------------------------------------------------------------
# confidence limits and bands
# ---------------------------------------------------------------------------


def theta(delta: float) -> float:
    """``9 / (8 ln(2/delta))``."""
    if not 0 < delta < 1:
        raise InputError(f"delta must lie in (0, 1), got {delta}")
    return 9.0 / (8.0 * math.log(2.0 / delta))


def confidence_limits(k, N: int, delta: float):
    """Lower and upper limits ``(L(k), U(k))`` for a success count ``k`` out of ``N``.

    ``k`` may be an integer array; results are clamped to ``[0, 1]``.
    """
    if int(N) != N or N < 1:
        raise InputError(f"N must be a positive integer, got {N}")
    th = theta(delta)
    k_arr = np.asarray(k)
    if k_arr.dtype.kind not in "iu" and not np.all(k_arr == np.round(k_arr)):
        raise InputError("k must be an integer count")
    k_arr = k_arr.astype(float)
    if np.any(k_arr < 0) or np.any(k_arr > N):
        raise InputError(f"k must lie in [0, {N}]")
    p = k_arr / N
    root = np.sqrt(1.0 + 4.0 * th * k_arr * (1.0 - p))
    denom = 1.0 + th * N
    lower = np.clip(p + 0.75 * (1.0 - 2.0 * p - root) / denom, 0.0, 1.0)
    upper = np.clip(p + 0.75 * (1.0 - 2.0 * p + root) / denom, 0.0, 1.0)
    if lower.ndim == 0:
        return float(lower), float(upper)
    return lower, upper


def chernoff_sample_size(eps: float, delta: float) -> int:
    """Standard a-priori ``N >= ln(2/delta) / (2 eps^2)``, reported for comparison."""
    if not (0 < eps < 1 and 0 < delta < 1):
        raise InputError("need eps, delta in (0, 1)")
    return int(math.ceil(math.log(2.0 / delta) / (2.0 * eps * eps)))


@dataclass(frozen=True)
class BandParams:
    delta: float
    N: int
    d: int
    theta: Optional[float] = None

    def __post_init__(self):
        th = theta(self.delta)
        if int(self.N) != self.N or self.N < 1:
            raise InputError(f"N must be a positive integer, got {self.N}")
        _check_d(self.d)
        if self.theta is None:
            object.__setattr__(self, "theta", th)
        elif abs(self.theta - th) > 1e-15 * th:
            raise InputError(f"theta={self.theta} does not match delta={self.delta}")


def running_min(values) -> np.ndarray:
    """Prefix minimum, the grid estimate of the robustness function."""
    return np.minimum.accumulate(np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class RobustnessCurve:
    """Estimates on a grid plus a piecewise-linear confidence band.

    ``lower_nodes`` / ``upper_nodes`` are ``(m-1, 2)`` arrays of the left and
    right endpoint values of each interval's band before slack; ``slack`` is
    the per-interval interpolation bound.
    """

    grid: RadiusGrid
    estimates: np.ndarray
    running_min: np.ndarray
    limits_lower: np.ndarray
    limits_upper: np.ndarray
    slack: np.ndarray
    pairing: str = "consistent"
    params: Optional[BandParams] = field(default=None, repr=False)

    def _interval(self, r: float) -> int:
        radii = self.grid.radii
        if not radii[0] <= r <= radii[-1]:
            raise InputError(f"r={r} outside [{radii[0]}, {radii[-1]}]")
        return min(int(np.searchsorted(radii, r, side="right")) - 1, radii.size - 2)

    def interpolant(self, r: float) -> float:
        radii = self.grid.radii
        if radii.size == 1:
            if r != radii[0]:
                raise InputError("single-radius curve is only defined at r_1")
            return float(self.estimates[0])
        i = self._interval(r)
        return interpolate(radii[i], radii[i + 1], self.estimates[i], self.estimates[i + 1], r)

    def band(self, r: float, interval: Optional[int] = None):
        """``(lower, upper)`` at ``r``; ``interval`` (0-based) picks the side at a shared node."""
        radii = self.grid.radii
        if radii.size == 1:
            if r != radii[0]:
                raise InputError("single-radius curve is only defined at r_1")
            return float(self.limits_lower[0]), float(self.limits_upper[0])
        i = self._interval(r) if interval is None else int(interval)
        if not (0 <= i < radii.size - 1 and radii[i] <= r <= radii[i + 1]):
            raise InputError(f"r={r} is not in interval {interval}")
        zeta = (r - radii[i]) / (radii[i + 1] - radii[i])
        lo, up = self.limits_lower, self.limits_upper
        if self.pairing == "consistent":
            a, b = i, i + 1
        else:
            a, b = i + 1, i
        lower = (1.0 - zeta) * lo[a] + zeta * lo[b] - self.slack[i]
        upper = (1.0 - zeta) * up[a] + zeta * up[b] + self.slack[i]
        return float(min(1.0, max(0.0, lower))), float(min(1.0, max(0.0, upper)))

    def band_arrays(self, r, interval: int):
        """Vectorized ``band`` over points ``r`` of one interval."""
        return np.array([self.band(float(x), interval) for x in np.asarray(r, dtype=float)]).T

    def node_band(self):
        """Band at each grid radius, taken from the interval to its right (last: its left)."""
        m = self.grid.m
        lower = np.empty(m)
        upper = np.empty(m)
        for k in range(m):
            if m == 1:
                lower[k], upper[k] = self.band(self.grid.radii[0])
            else:
                i = min(k, m - 2)
                lower[k], upper[k] = self.band(self.grid.radii[k], i)
        return lower, upper


PAIRINGS = ("consistent", "literal")


def build_band(result, params: BandParams, pairing: str = "consistent") -> RobustnessCurve:
    """Confidence band around the interpolated estimates of a finished run.

    ``pairing="consistent"`` weights the right endpoint's limits by
    ``zeta = (r - r_i)/(r_{i+1} - r_i)``, matching the interpolant; ``"literal"``
    swaps the two and is kept only for comparison studies.
    """
    if pairing not in PAIRINGS:
        raise InputError(f"pairing must be one of {PAIRINGS}")
    if params.N != result.N:
        raise InputError(f"band N={params.N} does not match run N={result.N}")
    grid = result.grid
    K = params.N - np.asarray(result.violations_final, dtype=np.int64)
    lower, upper = confidence_limits(K, params.N, params.delta)
    lower = np.atleast_1d(lower)
    upper = np.atleast_1d(upper)
    radii = grid.radii
    if radii.size > 1:
        slack, _ = interp_error_bounds(radii[:-1], radii[1:], params.d)
    else:
        slack = np.zeros(0)
    est = np.asarray(result.estimates, dtype=float)
    return RobustnessCurve(
        grid=grid,
        estimates=est,
        running_min=running_min(est),
        limits_lower=lower,
        limits_upper=upper,
        slack=slack,
        pairing=pairing,
        params=params,
    )


# ---------------------------------------------------------------------------
# memory bound for the violation matrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MemoryBoundReport:
    rho0: float
    hbar: float
    pe_a: float
    bound_integral: float
    bound_loose: float
    bound_grid: Optional[float] = None


def memory_bound_loose(pe_a: float, hbar: float, d: int, N: int) -> float:
    """``1 + N P_e(a) (1 + 2 d ln hbar)``."""
    if not (0 <= pe_a <= 1 and hbar >= 1):
        raise InputError("need P_e(a) in [0, 1] and hbar >= 1")
    return 1.0 + N * pe_a * (1.0 + 2.0 * d * math.log(hbar))


def _vectorize(P: Callable) -> Callable:
    def f(x):
        x = np.asarray(x, dtype=float)
        return np.array([P(float(v)) for v in x.ravel()], dtype=float).reshape(x.shape)

    return f


def _pe_envelope(Pv: Callable, lo: float, a: float, n: int):
    """Log-spaced abscissae on ``[lo, a]`` and ``P_e`` from the running minimum there."""
    x = np.exp(np.linspace(math.log(lo), math.log(a), n))
    x[0], x[-1] = lo, a
    return x, 1.0 - np.minimum.accumulate(Pv(x))


def find_rho0(P: Callable, lo: float, a: float) -> float:
    """``sup {r in [lo, a] : P = 1 on [lo, r]}``; ``lo`` if ``P(lo) < 1``, ``a`` if ``P(a) = 1``."""
    if P(lo) < 1.0:
        return lo
    if P(a) >= 1.0:
        return a
    left, right = lo, a
    for _ in range(MAX_BISECTIONS):
        if right - left <= 1e-9 * a:
            return left
        mid = 0.5 * (left + right)
        if P(mid) >= 1.0:
            left = mid
        else:
            right = mid
    raise NumericalError("bisection for rho0 did not converge")


def memory_bound(
    P: Callable,
    a: float,
    lam: float,
    d: int,
    N: int,
    grid: Optional[RadiusGrid] = None,
    rtol: float = 1e-8,
    max_points: int = 1 << 21,
) -> MemoryBoundReport:
    """Bounds on the expected number of rows in the final violation matrix.

    ``P`` is the true proportion ``r -> P(r)``, only evaluated on
    ``[a/lam, a]``.  The integral is computed in ``log x`` by trapezoid
    rules on successively doubled grids until two estimates agree to
    ``rtol``.  When ``grid`` is given, the grid-level sum that the integral
    approximates is also reported as ``bound_grid``.
    """
    _check_d(d)
    if not (a > 0 and lam >= 1):
        raise InputError("need a > 0 and lam >= 1")
    if int(N) != N or N < 1:
        raise InputError(f"N must be a positive integer, got {N}")
    Pv = _vectorize(P)
    lo = a / lam
    pe_a = float(_pe_envelope(Pv, lo, a, 257)[1][-1]) if lam > 1 else 1.0 - P(a)
    rho0 = find_rho0(P, lo, a) if lam > 1 else (a if P(a) >= 1.0 else lo)
    hbar = max(min(lam, a / rho0), 1.0)

    integral = 0.0
    if lam > 1 and hbar > 1:
        # P_e vanishes on [a/lam, a/hbar], so integrate over the whole log range
        n = 65
        prev = None
        while True:
            x, pe = _pe_envelope(Pv, lo, a, n)
            u = np.log(x)
            est = float(np.sum(0.5 * (pe[1:] + pe[:-1]) * np.diff(u)))
            if prev is not None and abs(est - prev) <= rtol * max(abs(est), 1e-300):
                integral = est
                break
            if est == 0.0 and prev == 0.0:
                break
            prev = est
            if n > max_points:
                raise NumericalError(
                    f"memory-bound quadrature did not reach rtol={rtol} with {n} points"
                )
            n = 2 * n - 1
        # the refined envelope also gives the most accurate P_e(a)
        pe_a = float(pe[-1])

    bound_integral = 1.0 + N * (pe_a + 2.0 * d * integral)
    bound_loose = memory_bound_loose(pe_a, hbar, d, N)

    bound_grid = None
    if grid is not None:
        radii = grid.radii
        if not (math.isclose(radii[-1], a) and math.isclose(grid.lam, lam)):
            raise InputError("grid does not span [a/lam, a]")
        pe_nodes = 1.0 - np.minimum.accumulate(Pv(radii))
        gaps = -np.expm1(d * np.log(radii[:-1] / radii[1:]))
        bound_grid = float(1.0 + N * pe_nodes[-1] + 2.0 * N * np.sum(pe_nodes[:-1] * gaps))

    return MemoryBoundReport(
        rho0=float(rho0),
        hbar=float(hbar),
        pe_a=pe_a,
        bound_integral=float(bound_integral),
        bound_loose=float(bound_loose),
        bound_grid=bound_grid,
    )
