"""Violation predicates, and the two-controller feedback example with closed forms.

The example plant is ``G(s) = q / (s - p)`` with uncertain ``(q, p)`` in the box
``|q - q0| <= r, |p - p0| <= r``.  Controller A is ``K_A / (s + sigma)``,
controller B is the static gain ``K_B``; the requirement is closed-loop
stability.  Points are ordered ``(q, p)`` everywhere.

Roots on the imaginary axis count as violations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InputError, PredicateError
from .uncertainty import Shape, UncertaintySet


@dataclass(frozen=True)
class ViolationPredicate:
    """Deterministic indicator of "the robustness requirement fails at X".

    ``evaluator`` maps one point (length-``dimension`` array) to a bool.  When
    ``vectorized`` is true it must also accept an ``(n, dimension)`` array
    and return ``n`` bools; the engine then evaluates whole blocks at once.
    """

    dimension: int
    evaluator: Callable
    vectorized: bool = False
    name: str = "predicate"

    def __call__(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise InputError(f"predicate {self.name} expects a point of length {self.dimension}")
        return bool(self.evaluate(x[None, :])[0])

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        """Bool array, one entry per row of ``X``."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dimension:
            raise InputError(f"predicate {self.name} expects shape (n, {self.dimension})")
        if self.vectorized:
            try:
                out = np.asarray(self.evaluator(X))
            except Exception as exc:
                raise PredicateError(f"predicate {self.name} failed on a block: {exc}") from exc
            if out.shape != (X.shape[0],) or out.dtype != np.bool_:
                raise PredicateError(
                    f"predicate {self.name} must return {X.shape[0]} booleans, got {out.dtype} {out.shape}"
                )
            return out
        out = np.empty(X.shape[0], dtype=bool)
        for k, x in enumerate(X):
            try:
                val = self.evaluator(x)
            except Exception as exc:
                raise PredicateError(
                    f"predicate {self.name} failed at point {x.tolist()}: {exc}", point=x
                ) from exc
            if not isinstance(val, (bool, np.bool_)):
                raise PredicateError(
                    f"predicate {self.name} returned {val!r} at {x.tolist()}, expected a bool",
                    point=x,
                )
            out[k] = val
        return out


# ---------------------------------------------------------------------------
# the two-controller example
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeedbackExampleParams:
    p0: float = -10.0
    q0: float = 50.0
    sigma: float = 40.0
    K_A: float = 4000.0
    K_B: float = 10.0

    def __post_init__(self):
        if not (self.p0 < 0 and self.q0 > 0 and self.sigma > 0 and self.K_A > 0 and self.K_B > 0):
            raise InputError("need p0 < 0 < q0 and positive sigma, K_A, K_B")
        if not (1 < self.K_B < self.K_A / self.sigma):
            raise InputError("need 1 < K_B < K_A / sigma")
        rho_A = (self.K_A * self.q0 - self.sigma * self.p0) / (self.K_A + self.sigma)
        if not rho_A < self.sigma - self.p0:
            raise InputError("need (K_A q0 - sigma p0)/(K_A + sigma) < sigma - p0")


DEFAULT_PARAMS = FeedbackExampleParams()


def feedback_set(params: FeedbackExampleParams = DEFAULT_PARAMS) -> UncertaintySet:
    """The box ``|q - q0| <= r, |p - p0| <= r`` as an unweighted l-infinity family."""
    return UncertaintySet(np.array([params.q0, params.p0]), Shape.LINF, np.ones(2))


def predicate_A(params: FeedbackExampleParams = DEFAULT_PARAMS) -> ViolationPredicate:
    """Violated unless ``s^2 + (sigma - p) s + (K_A q - sigma p)`` is Hurwitz."""
    sigma, K = params.sigma, params.K_A

    def unstable(X):
        X = np.asarray(X, dtype=float)
        q, p = X[..., 0], X[..., 1]
        return ~((sigma - p > 0) & (K * q - sigma * p > 0))

    return ViolationPredicate(2, unstable, vectorized=True, name="feedback_A")


def predicate_B(params: FeedbackExampleParams = DEFAULT_PARAMS) -> ViolationPredicate:
    """Violated iff ``K_B q - p <= 0`` (first-order loop ``s + K_B q - p``)."""
    K = params.K_B

    def unstable(X):
        X = np.asarray(X, dtype=float)
        return K * X[..., 0] - X[..., 1] <= 0

    return ViolationPredicate(2, unstable, vectorized=True, name="feedback_B")


def margins(params: FeedbackExampleParams = DEFAULT_PARAMS):
    """Deterministic margins and upper branch points ``(rho_A, rho_B, rho_A*, rho_B*)``."""
    num_A = params.K_A * params.q0 - params.sigma * params.p0
    num_B = params.K_B * params.q0 - params.p0
    return (
        num_A / (params.K_A + params.sigma),
        num_B / (params.K_B + 1),
        num_A / (params.K_A - params.sigma),
        num_B / (params.K_B - 1),
    )


def _check_r(r):
    if not r > 0:
        raise InputError(f"radius must be positive, got {r}")


def closed_form_P_A(params: FeedbackExampleParams, r: float) -> float:
    """Exact stable fraction of the box of radius ``r`` under controller A."""
    _check_r(r)
    p0, q0, s, K = params.p0, params.q0, params.sigma, params.K_A
    rho, _, rho_star, _ = margins(params)
    if r < rho:
        return 1.0
    beta = min(s, p0 + r)
    if r <= rho_star:
        val = 0.5 - K * (r + s * beta / K - q0) ** 2 / (8 * s * r * r) - (p0 - beta) / (2 * r)
    else:
        val = (
            0.5
            - (r + beta - p0) * (r + s * (beta + p0 - r) / (2 * K) - q0) / (4 * r * r)
            - (p0 - beta) / (2 * r)
        )
    return min(1.0, max(0.0, val))


def closed_form_P_B(params: FeedbackExampleParams, r: float) -> float:
    """Exact stable fraction of the box of radius ``r`` under controller B."""
    _check_r(r)
    p0, q0, K = params.p0, params.q0, params.K_B
    _, rho, _, rho_star = margins(params)
    if r < rho:
        return 1.0
    if r <= rho_star:
        val = 1 - K * (r + (p0 + r) / K - q0) ** 2 / (8 * r * r)
    else:
        val = 0.5 - (p0 / K - q0) / (2 * r)
    return min(1.0, max(0.0, val))


def closed_form(system: str, params: FeedbackExampleParams = DEFAULT_PARAMS) -> Callable[[float], float]:
    """``r -> P(r)`` for ``"feedback_A"`` or ``"feedback_B"``."""
    if system == "feedback_A":
        return lambda r: closed_form_P_A(params, r)
    if system == "feedback_B":
        return lambda r: closed_form_P_B(params, r)
    raise InputError(f"no closed form for system {system!r}")


def feedback_predicate(system: str, params: FeedbackExampleParams = DEFAULT_PARAMS) -> ViolationPredicate:
    if system == "feedback_A":
        return predicate_A(params)
    if system == "feedback_B":
        return predicate_B(params)
    raise InputError(f"unknown feedback system {system!r}")


# ---------------------------------------------------------------------------
# generic polynomial stability
# ---------------------------------------------------------------------------


def routh_hurwitz_stable(coeffs) -> bool:
    """True iff every root of the real polynomial has negative real part.

    ``coeffs`` run from the highest power down.  Any zero or sign change in
    the first column of the Routh array (which covers imaginary-axis roots)
    reports *not* stable.
    """
    c = [float(x) for x in coeffs]
    if not all(math.isfinite(x) for x in c):
        raise InputError("polynomial coefficients must be finite")
    while c and c[0] == 0.0:
        c.pop(0)
    if not c:
        return False
    n = len(c) - 1
    if n == 0:
        return True
    if c[0] < 0:
        c = [-x for x in c]
    # necessary condition, and it keeps the recursion free of zero pivots
    if any(x <= 0 for x in c):
        return False
    prev = c[0::2]
    cur = c[1::2]
    for _ in range(n - 1):
        if cur[0] <= 0:
            return False
        nxt = []
        for k in range(len(prev) - 1):
            b = cur[k + 1] if k + 1 < len(cur) else 0.0
            nxt.append((cur[0] * prev[k + 1] - prev[0] * b) / cur[0])
        if not nxt:
            nxt = [0.0]
        prev, cur = cur, nxt
    return cur[0] > 0


def hurwitz_predicate(coefficient_map: Callable, d: int, name: str = "hurwitz") -> ViolationPredicate:
    """Predicate that fails wherever ``coefficient_map(x)`` is not a Hurwitz polynomial."""

    def unstable(x):
        return not routh_hurwitz_stable(coefficient_map(x))

    return ViolationPredicate(int(d), unstable, vectorized=False, name=name)
