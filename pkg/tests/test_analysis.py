import math

import numpy as np
import pytest

from robustcurve import analysis as A
from robustcurve import grid as G
from robustcurve.engine import RunResult, run
from robustcurve.errors import InputError
from robustcurve.systems import DEFAULT_PARAMS, closed_form_P_A, closed_form_P_B, feedback_set, predicate_B


class TestInterpolate:
    def test_endpoints(self):
        assert A.interpolate(1, 2, 0.9, 0.5, 1) == 0.9
        assert A.interpolate(1, 2, 0.9, 0.5, 2) == 0.5

    def test_midpoint(self):
        assert A.interpolate(1, 3, 0.8, 0.4, 2) == pytest.approx(0.6)

    def test_outside(self):
        with pytest.raises(InputError):
            A.interpolate(1, 2, 0.9, 0.5, 2.1)

    def test_closed_form_B_within_loose_bound(self):
        ri, rj = 46.0, 47.0
        Pi, Pj = closed_form_P_B(DEFAULT_PARAMS, ri), closed_form_P_B(DEFAULT_PARAMS, rj)
        r = np.linspace(ri, rj, 2001)
        P = np.array([closed_form_P_B(DEFAULT_PARAMS, x) for x in r])
        tight, loose = A.interp_error_bound(ri, rj, 2)
        err = np.max(np.abs(P - A.interpolate(ri, rj, Pi, Pj, r)))
        assert err <= tight <= loose


class TestRStar:
    def test_cubic_root(self):
        # d = 1: g' = 0 reduces to r^3 - r^2/2 - 2 = 0
        r = A.find_r_star(1, 2, 1)
        assert abs(r**3 - r**2 / 2 - 2) < 1e-10
        assert round(r, 4) == 1.4505

    @pytest.mark.parametrize("d", [1, 2, 7, 100, 2048])
    @pytest.mark.parametrize("ratio", [1.0001, 1.1, 2.0, 10.0])
    def test_sign_change(self, d, ratio):
        ri, rj = 3.0, 3.0 * ratio
        dlo = A._log_phi(ri, ri, rj, d) - A._log_psi(ri, ri, rj, d)
        dhi = A._log_phi(rj, ri, rj, d) - A._log_psi(rj, ri, rj, d)
        assert dlo < 0 < dhi

    @pytest.mark.parametrize("d", [1, 3, 30, 500])
    def test_dense_scan_minimum(self, d):
        ri, rj = 2.0, 2.6
        rs = A.find_r_star(ri, rj, d)
        r = np.linspace(ri, rj, 1000)
        assert A.g_normalized(rs, ri, rj, d) <= np.min(A.g_normalized(r, ri, rj, d)) + 1e-9

    def test_bad_inputs(self):
        with pytest.raises(InputError):
            A.find_r_star(2, 1, 1)
        with pytest.raises(InputError):
            A.find_r_star(1, 2, 0)


class TestErrorBounds:
    def test_degenerate(self):
        assert A.interp_error_bound(1.5, 1.5, 4) == (0.0, 0.0)
        t, loose = A.interp_error_bound(1.0, 1.0 + 1e-12, 4)
        assert 0 <= t <= loose < 1e-11

    def test_loose_value(self):
        assert A.interp_error_bound(1, 1.001, 2)[1] == pytest.approx(0.001, rel=1e-12)

    def test_tight_below_loose(self):
        t, loose = A.interp_error_bound(1, 2, 3)
        assert 0 < t < loose

    def test_tight_high_dimension(self):
        t, loose = A.interp_error_bound(1.0, 1.0 + 1e-6, 2048)
        assert 0 < t <= loose and math.isfinite(t)

    def test_vectorized_matches_scalar(self):
        ri = np.array([1.0, 2.0, 5.0, 7.0])
        rj = np.array([1.5, 2.0, 9.0, 7.01])
        tight, loose = A.interp_error_bounds(ri, rj, 5)
        for k in range(4):
            t, lo = A.interp_error_bound(ri[k], rj[k], 5)
            assert tight[k] == pytest.approx(t, rel=1e-9, abs=1e-15)
            assert loose[k] == pytest.approx(lo, rel=1e-15)

    def test_bounds_hold_for_worst_case_power_law(self):
        # P(r) = (r_i/r)^d on [r_i, inf) attains the slope limit at the left end
        ri, rj, d = 1.0, 1.3, 4
        r = np.linspace(ri, rj, 5001)
        P = (ri / r) ** d
        err = np.max(np.abs(P - A.interpolate(ri, rj, P[0], P[-1], r)))
        tight, _ = A.interp_error_bound(ri, rj, d)
        assert err <= tight + 1e-12


class TestLipschitz:
    def test_values(self):
        assert A.lipschitz_bound(1, 0, 3) == 0.0
        assert A.lipschitz_bound(1, 1, 1) == pytest.approx(0.5)

    def test_closed_forms_satisfy(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            r = rng.uniform(1, 200)
            dr = rng.uniform(0, 50)
            b = A.lipschitz_bound(r, dr, 2)
            for f in (closed_form_P_A, closed_form_P_B):
                assert abs(f(DEFAULT_PARAMS, r + dr) - f(DEFAULT_PARAMS, r)) <= b + 1e-12


class TestConfidenceLimits:
    def test_theta(self):
        assert round(A.theta(0.05), 5) == 0.30497

    def test_all_successes(self):
        N, delta = 1000, 0.05
        L, U = A.confidence_limits(N, N, delta)
        assert U == 1.0
        assert L == pytest.approx(1 - 1.5 / (1 + A.theta(delta) * N), rel=1e-12)

    def test_symmetry(self):
        L, U = A.confidence_limits(500, 1000, 0.05)
        assert L + U == pytest.approx(1.0, abs=1e-14)

    def test_worked_case(self):
        L, U = A.confidence_limits(900, 1000, 0.05)
        assert 0.85 < L < 0.9 < U < 0.95

    def test_array_input(self):
        L, U = A.confidence_limits(np.array([0, 5, 10]), 10, 0.1)
        assert L[0] == 0.0 and U[-1] == 1.0 and np.all(L <= U)

    def test_binomial_coverage(self):
        rng = np.random.default_rng(1)
        N, delta = 1000, 0.05
        for p in (0.02, 0.3, 0.5, 0.9, 0.995):
            k = rng.binomial(N, p, size=20_000)
            L, U = A.confidence_limits(k, N, delta)
            assert np.mean((L <= p) & (p <= U)) >= 0.95

    @pytest.mark.parametrize("bad", [(-1, 10, 0.1), (11, 10, 0.1), (1, 10, 1.0), (1, 0, 0.1), (1.5, 10, 0.1)])
    def test_invalid(self, bad):
        with pytest.raises(InputError):
            A.confidence_limits(*bad)

    def test_chernoff(self):
        assert A.chernoff_sample_size(0.01, 0.05) == math.ceil(math.log(40) / 2e-4)


class TestBandParams:
    def test_theta_filled(self):
        assert A.BandParams(0.05, 100, 2).theta == A.theta(0.05)

    def test_theta_mismatch(self):
        with pytest.raises(InputError):
            A.BandParams(0.05, 100, 2, theta=0.5)


def _fake_result(grid, N, violations):
    v = np.asarray(violations, dtype=np.int64)
    return RunResult(
        grid=grid,
        N=N,
        violations_final=v,
        estimates=1.0 - v / N,
        total_draws=N,
        per_radius_draws=np.zeros(grid.m, dtype=np.int64),
        empirical_engp=1.0,
        max_S_rows=1,
        max_V_rows=1,
        update_count=0,
        seed=0,
    )


class TestBand:
    def test_no_violations_upper_one(self):
        g = G.geometric_grid(10, 2, 6)
        curve = A.build_band(_fake_result(g, 100, [0] * 6), A.BandParams(0.05, 100, 2))
        lo, up = curve.node_band()
        assert np.all(up == 1.0) and np.all(lo < 1.0)

    def test_node_reduces_to_limits(self):
        g = G.geometric_grid(10, 2, 6)
        v = [0, 1, 3, 10, 30, 60]
        curve = A.build_band(_fake_result(g, 100, v), A.BandParams(0.05, 100, 2))
        for i in range(5):
            lo, up = curve.band(g.radii[i], i)
            assert lo == pytest.approx(max(0.0, curve.limits_lower[i] - curve.slack[i]))
            assert up == pytest.approx(min(1.0, curve.limits_upper[i] + curve.slack[i]))

    def test_contains_interpolant(self):
        u = feedback_set()
        g = G.geometric_grid(100, 3, 20)
        res = run(u, g, 500, predicate_B(), seed=3)
        for pairing in A.PAIRINGS:
            curve = A.build_band(res, A.BandParams(0.05, 500, 2), pairing)
            for i in range(g.m - 1):
                for r in np.linspace(g.radii[i], g.radii[i + 1], 7):
                    lo, up = curve.band(r, i)
                    assert lo <= curve.interpolant(r) + 1e-12 and curve.interpolant(r) <= up + 1e-12

    def test_pairings_agree_at_nodes(self):
        g = G.geometric_grid(10, 2, 4)
        res = _fake_result(g, 50, [0, 2, 5, 9])
        a = A.build_band(res, A.BandParams(0.1, 50, 3), "consistent")
        b = A.build_band(res, A.BandParams(0.1, 50, 3), "literal")
        mid = 0.5 * (g.radii[1] + g.radii[2])
        assert a.band(g.radii[1], 1) != b.band(g.radii[1], 1)
        assert a.band(mid, 1) == pytest.approx(b.band(mid, 1))

    def test_N_mismatch(self):
        g = G.geometric_grid(10, 2, 3)
        with pytest.raises(InputError):
            A.build_band(_fake_result(g, 100, [0, 0, 0]), A.BandParams(0.05, 99, 2))

    def test_unknown_pairing(self):
        g = G.geometric_grid(10, 2, 3)
        with pytest.raises(InputError):
            A.build_band(_fake_result(g, 10, [0, 0, 0]), A.BandParams(0.05, 10, 2), "other")

    def test_running_min(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(size=300)
        ref = [min(x[: k + 1]) for k in range(300)]
        assert A.running_min(x).tolist() == ref


class TestMemoryBound:
    def test_all_stable(self):
        rep = A.memory_bound(lambda r: 1.0, 10.0, 5.0, 3, 1000)
        assert rep.rho0 >= 10.0 and rep.hbar == 1.0
        assert rep.bound_integral == rep.bound_loose == 1.0

    def test_worked_numbers(self):
        bound = A.memory_bound_loose(0.001, 1.5, 1800, 10**6)
        assert 4 * bound < 6.2e6

    def test_integral_below_loose(self):
        u = feedback_set()
        for f in (closed_form_P_A, closed_form_P_B):
            rep = A.memory_bound(lambda r: f(DEFAULT_PARAMS, r), 100.0, 10.0, 2, 500)
            assert rep.bound_integral <= rep.bound_loose
            assert 30 < rep.rho0 < 60 and u.d == 2

    def test_rho0_matches_margin(self):
        rep = A.memory_bound(lambda r: closed_form_P_B(DEFAULT_PARAMS, r), 100.0, 10.0, 2, 500)
        assert rep.rho0 == pytest.approx(46.363636, rel=1e-6)

    def test_grid_sum_close_to_integral(self):
        P = lambda r: closed_form_P_B(DEFAULT_PARAMS, r)  # noqa: E731
        g = G.geometric_grid(100.0, 10.0, 4000)
        rep = A.memory_bound(P, 100.0, 10.0, 2, 500, grid=g)
        assert rep.bound_grid == pytest.approx(rep.bound_integral, rel=1e-3)

    def test_grid_mismatch(self):
        with pytest.raises(InputError):
            A.memory_bound(lambda r: 1.0, 10.0, 5.0, 3, 10, grid=G.geometric_grid(9.0, 5.0, 4))
