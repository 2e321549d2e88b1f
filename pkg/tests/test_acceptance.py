"""Numbered acceptance criteria; the conftest prints one PASS/FAIL line per criterion."""

import math

import numpy as np
import pytest

from robustcurve import analysis, cli, engine, grid, systems
from robustcurve.uncertainty import UncertaintySet, gauges

P_A = systems.closed_form("feedback_A")
P_B = systems.closed_form("feedback_B")


# 1 -------------------------------------------------------------------------


def test_criterion_01_margins(detail):
    rho_A, rho_B, _, _ = systems.margins(systems.DEFAULT_PARAMS)
    detail(f"rho_A={rho_A:.6f} rho_B={rho_B:.6f}")
    assert abs(rho_A - 49.6040) <= 5e-5
    assert abs(rho_B - 46.3636) <= 5e-5


# 2 -------------------------------------------------------------------------


def _random_grid(rng):
    lam = float(np.exp(rng.uniform(np.log(1.5), np.log(1000.0))))
    m = int(rng.integers(2, 5001))
    a = float(np.exp(rng.uniform(-3, 6)))
    kind = rng.integers(3)
    if kind == 0:
        return grid.uniform_grid(a, lam, m)
    if kind == 1:
        return grid.geometric_grid(a, lam, m)
    inner = np.sort(rng.uniform(a / lam, a, m - 2))
    return grid.explicit_grid(np.concatenate([[a / lam], inner, [a]]))


def test_criterion_02_engp_bound(detail):
    rng = np.random.default_rng(2)
    failures = 0
    worst = 0.0
    for _ in range(1000):
        g = _random_grid(rng)
        d = int(rng.integers(1, 201))
        e, b = grid.engp(g, d), grid.engp_bound(d, g.lam)
        failures += not e < b
        worst = max(worst, e / b)
    detail(f"1000 grids, failures={failures}, max engp/bound={worst:.6f}")
    assert failures == 0


# 3 -------------------------------------------------------------------------


def test_criterion_03_grid_sizing(detail):
    mb = grid.size_barmish(10, 1800, 1e-5)
    mu = grid.size_uniform(10, 1800, 1e-5)
    detail(f"barmish={mb} uniform={mu} ratio={mu / mb:.6f}")
    assert mb == 3_240_000_001
    assert mu == 810_000_002
    assert 0.24 <= mu / mb <= 0.26


# 4 -------------------------------------------------------------------------


def _geometric_reuse(lam, d, eps):
    m = grid.size_geometric(lam, d, eps)
    return m / grid.engp_geometric(lam, m, d)


def test_criterion_04_reuse_lower_bound(detail):
    bad = []
    for d in (2, 5, 50):
        for eps in (1e-2, 1e-3, 1e-4):
            f = _geometric_reuse(10, d, eps)
            lower = (1 / (2 * eps)) * (1 - 1 / (1 + d * math.log(10)))
            if not f > lower:
                bad.append((d, eps, f, lower))
    detail(f"reuse > (1/2eps)(1 - 1/(1+d ln lam)) on 9 configs, failures={len(bad)}")
    assert not bad


@pytest.mark.parametrize("d", [2, 5, 50])
def test_criterion_04_factor_above_4900(d, detail):
    f = _geometric_reuse(10, d, 1e-4)
    detail(f"d={d}: reuse at eps=1e-4 is {f:.1f}")
    assert f > 4900


# 5 -------------------------------------------------------------------------


def _oracle_case(rng):
    d = int(rng.integers(1, 6))
    shape = ["l1", "l2", "linf"][rng.integers(3)]
    center = rng.normal(size=d)
    weights = np.exp(rng.normal(size=d) * 0.5)
    uset = UncertaintySet(center, shape, weights)
    lam = float(np.exp(rng.uniform(0.05, np.log(50))))
    m = int(rng.integers(1, 51))
    if m == 1:
        lam = 1.0
    a = float(np.exp(rng.uniform(-1, 2)))
    kind = rng.integers(3)
    if m == 1 or kind == 0:
        g = grid.geometric_grid(a, lam, m)
    elif kind == 1:
        g = grid.uniform_grid(a, lam, m)
    else:
        g = grid.explicit_grid(np.sort(rng.uniform(a / lam, a, m)))
    N = int(rng.integers(1, 201))
    if rng.random() < 0.7:
        thr = float(rng.uniform(0.5 * g.radii[0], 1.2 * g.radii[-1]))
        pred = systems.ViolationPredicate(
            d, lambda X, u=uset, t=thr: gauges(u, X) > t, vectorized=True, name="gauge_threshold"
        )
    else:
        # non-monotone predicate: violations scattered across the radii
        w = rng.normal(size=d)
        pred = systems.ViolationPredicate(
            d, lambda X, w=w: np.sin(7.0 * (X @ w)) > 0.3, vectorized=True, name="scattered"
        )
    return uset, g, N, pred


def _oracle_runs():
    rng = np.random.default_rng(5)
    for case in range(200):
        uset, g, N, pred = _oracle_case(rng)
        S_hist, V_hist = [], []

        def hook(j, S, V):
            S_hist.append(engine.decompress(S, g.m))
            V_hist.append(engine.decompress(V, g.m))

        res = engine.run(uset, g, N, pred, seed=case, audit=True, on_step=hook)
        yield g, N, res, np.array(S_hist), np.array(V_hist)


@pytest.fixture(scope="module")
def oracle_runs():
    return list(_oracle_runs())


def test_criterion_05_oracle_equivalence(oracle_runs, detail):
    mismatches = 0
    steps = 0
    for g, N, res, S_hist, V_hist in oracle_runs:
        s_or, v_or = engine.oracle_trajectory(res.audit_log, g, N)
        if not (np.array_equal(S_hist, s_or) and np.array_equal(V_hist, v_or)):
            mismatches += 1
        steps += len(S_hist)
    detail(f"200 runs, {steps} steps, trajectory mismatches={mismatches}")
    assert mismatches == 0


def test_criterion_05_sample_rows_at_most_N(oracle_runs, detail):
    over = [(N, res.max_S_rows) for _, N, res, *_ in oracle_runs if res.max_S_rows > N]
    detail(f"rows(S) > N in {len(over)} runs (N, rows) = {over}")
    assert not over


# 6 -------------------------------------------------------------------------


def test_criterion_06_empirical_engp(detail):
    g = grid.geometric_grid(100, 10, 50)
    N, d = 2000, 2
    uset, pred = systems.feedback_set(), systems.predicate_B()
    engps, per = [], []
    for seed in range(50):
        res = engine.run(uset, g, N, pred, seed=seed)
        engps.append(res.empirical_engp)
        per.append(res.per_radius_draws)
    expected = grid.engp(g, d)
    rel = abs(np.mean(engps) - expected) / expected
    exp_per = grid.expected_samples_per_radius(g, d, N)
    worst = float(np.max(np.abs(np.mean(per, axis=0) - exp_per) / exp_per))
    detail(f"mean engp {np.mean(engps):.4f} vs {expected:.4f} (rel {rel:.4f}), worst per-radius rel {worst:.4f}")
    assert rel <= 0.05
    assert worst <= 0.10


# 7 -------------------------------------------------------------------------


def test_criterion_07_curve_accuracy(detail):
    g = grid.geometric_grid(100, 10, 50)
    N = 10_000
    res = engine.run(systems.feedback_set(), g, N, systems.predicate_B(), seed=7)
    truth = np.array([P_B(r) for r in g.radii])
    tol = 4 * np.sqrt(truth * (1 - truth) / N)
    ok = np.abs(res.estimates - truth) <= tol
    detail(f"{int(ok.sum())}/{g.m} grid points within 4 sigma")
    assert ok.mean() >= 0.96


# 8 -------------------------------------------------------------------------


def _interval_coverage(g, results, params, r_target, n_dense=201):
    i = int(np.searchsorted(g.radii, r_target)) - 1
    rs = np.linspace(g.radii[i], g.radii[i + 1], n_dense)
    truth = np.array([P_B(r) for r in rs])
    covered = 0
    for res in results:
        curve = analysis.build_band(res, params)
        lo, up = curve.band_arrays(rs, i)
        covered += bool(np.all((lo <= truth) & (truth <= up)))
    return covered, (g.radii[i], g.radii[i + 1])


def test_criterion_08_band_coverage(detail):
    N, delta = 1000, 0.05
    g = grid.geometric_grid(60, 1.5, 200)
    params = analysis.BandParams(delta, N, 2)
    results = [engine.run(systems.feedback_set(), g, N, systems.predicate_B(), seed=s) for s in range(200)]
    rho_B = systems.margins()[1]
    steep, (lo_r, hi_r) = _interval_coverage(g, results, params, 1.02 * rho_B)
    at_margin, _ = _interval_coverage(g, results, params, rho_B)
    detail(
        f"steep interval [{lo_r:.3f},{hi_r:.3f}] covered in {steep}/200; "
        f"interval at rho_B covered in {at_margin}/200"
    )
    assert steep >= 186
    assert at_margin >= 186


# 9 -------------------------------------------------------------------------


def test_criterion_09_interpolation_bounds(detail):
    rng = np.random.default_rng(9)
    violations = 0
    chain = 0
    stationarity = 0
    worst_ratio = 0.0
    for _ in range(1000):
        d = int(rng.integers(2, 65))
        r_i = float(rng.uniform(20, 150))
        r_ip1 = r_i * float(np.exp(rng.uniform(1e-4, 0.4)))
        tight, loose = analysis.interp_error_bound(r_i, r_ip1, d)
        r_star = analysis.find_r_star(r_i, r_ip1, d)
        resid = abs(analysis.phi(r_star, r_i, r_ip1, d) - analysis.psi(r_star, r_i, r_ip1, d))
        stationarity += resid > 1e-10 * max(1.0, analysis.psi(r_i, r_i, r_ip1, d))
        chain += tight > loose + 1e-12
        rs = np.linspace(r_i, r_ip1, 41)
        for P in (P_A, P_B):
            Pi, Pj = P(r_i), P(r_ip1)
            err = max(abs(P(r) - analysis.interpolate(r_i, r_ip1, Pi, Pj, r)) for r in rs)
            violations += err > tight + 1e-12
            if tight > 0:
                worst_ratio = max(worst_ratio, err / tight)
    detail(
        f"1000 intervals: |P-P*|>tight {violations}, tight>loose {chain}, "
        f"stationarity misses {stationarity}, max err/tight {worst_ratio:.3f}"
    )
    assert violations == 0 and chain == 0 and stationarity == 0


# 10 ------------------------------------------------------------------------


def test_criterion_10_lipschitz(detail):
    rng = np.random.default_rng(10)
    r = rng.uniform(1, 200, 10_000)
    dr = rng.uniform(0, 100, 10_000)
    bad = 0
    for P in (P_A, P_B):
        for x, h in zip(r, dr):
            bad += abs(P(x + h) - P(x)) > analysis.lipschitz_bound(x, h, 2) + 1e-12
    detail(f"2 x 10^4 pairs, violations={bad}")
    assert bad == 0


# 11 ------------------------------------------------------------------------


def test_criterion_11_memory_bound(detail):
    a, lam, d, N, m = 80.0, 10.0, 2, 200, 2000
    g = grid.geometric_grid(a, lam, m)
    report = analysis.memory_bound(P_B, a, lam, d, N, grid=g)
    uset, pred = systems.feedback_set(), systems.predicate_B()
    rows = [engine.run(uset, g, N, pred, seed=s).max_V_rows for s in range(100)]
    worked = 4 * analysis.memory_bound_loose(1 - 0.999, 1.5, 1800, 10**6)
    detail(
        f"P_e(a)={report.pe_a:.4f}, mean max_V_rows={np.mean(rows):.2f} <= "
        f"bound_integral={report.bound_integral:.2f}; worked bound {worked:.4g} bytes"
    )
    assert report.pe_a <= 0.2
    assert np.mean(rows) <= report.bound_integral
    assert worked < 6.2e6


# 12 ------------------------------------------------------------------------


def test_criterion_12_demo_crossover(tmp_path, detail):
    assert cli.main(["demo", "--out", str(tmp_path), "--seed", "0"]) == 0
    kv = dict(
        line.split(" = ", 1) for line in (tmp_path / "demo.kv").read_text().splitlines()
    )
    rows = np.genfromtxt(tmp_path / "demo_closed_form.csv", delimiter=",", names=True)
    above = rows["radius"][rows["P_B"] > rows["P_A"]]
    rho_A, rho_B = float(kv["rho_A"]), float(kv["rho_B"])
    cross = float(kv["crossover_radius"])
    detail(f"rho_A={rho_A:.4f} > rho_B={rho_B:.4f}; P_B > P_A from r={cross:.4f}")
    assert rho_A > rho_B
    assert above.size > 0
    assert P_B(cross + 1e-9) > P_A(cross + 1e-9)
