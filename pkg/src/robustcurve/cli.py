"""Command-line front end: ``plan``, ``run``, ``compare`` and ``demo``.

Settings come from built-in defaults, then an optional flat ``key = value``
config file (``--config``), then command-line flags, later sources winning.
Every number written to a file uses 17 significant digits so that repeated
runs with the same seed can be compared byte for byte.

Exit codes: 0 success, 2 input or config error, 3 cap exceeded, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import importlib
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import analysis, engine, grid as gridmod, systems
from .errors import CapExceeded, InputError, NumericalError, RobustCurveError
from .uncertainty import UncertaintySet, parse_shape

DEFAULTS = {
    "system": "feedback_B",
    "shape": None,
    "center": None,
    "weights": None,
    "d": None,
    "a": 100.0,
    "lam": 10.0,
    "scheme": "geometric",
    "m": None,
    "radii": None,
    "eps": 0.01,
    "eps_list": "0.1,0.05,0.02,0.01,0.005,0.002,0.001,0.0005,0.0002,0.0001",
    "N": 10_000,
    "delta": 0.05,
    "seed": 0,
    "engine": "reuse",
    "pairing": "consistent",
    "max_m": 1_000_000,
    "max_draws": 1_000_000_000,
    "out": ".",
    "repeats": 1,
    "workers": 1,
    "audit": None,
}

_INT_KEYS = {"d", "m", "N", "seed", "max_m", "max_draws", "repeats", "workers"}
_FLOAT_KEYS = {"a", "lam", "eps", "delta"}
ENGINES = ("reuse", "conventional", "both")
FEEDBACK = ("feedback_A", "feedback_B")

CURVE_HEADER = ["radius", "estimate", "running_min", "band_lower", "band_upper", "draws_at_radius"]
BAND_HEADER = [
    "interval",
    "r_left",
    "r_right",
    "slack",
    "lower_left",
    "lower_right",
    "upper_left",
    "upper_right",
]
COMPARE_HEADER = [
    "eps",
    "m_uniform",
    "m_geometric",
    "engp_uniform",
    "engp_geometric",
    "reuse_uniform",
    "reuse_geometric",
    "bound",
]


def fmt(x) -> str:
    """17 significant digits for floats, plain digits for integers."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _parse_int(key, value):
    try:
        f = float(value)
    except ValueError:
        raise InputError(f"{key}: expected an integer, got {value!r}") from None
    if not math.isfinite(f) or f != int(f):
        raise InputError(f"{key}: expected an integer, got {value!r}")
    return int(f) if abs(f) < 2**53 else int(str(value))


def _parse_float(key, value):
    try:
        f = float(value)
    except ValueError:
        raise InputError(f"{key}: expected a number, got {value!r}") from None
    if not math.isfinite(f):
        raise InputError(f"{key}: must be finite, got {value!r}")
    return f


def coerce(key: str, value):
    """Convert a raw string setting to its typed value."""
    if value is None or not isinstance(value, str):
        return value
    if key in _INT_KEYS:
        return _parse_int(key, value)
    if key in _FLOAT_KEYS:
        return _parse_float(key, value)
    return value.strip()


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise InputError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = coerce(key, value)
    return out


def _floats(key, text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [_parse_float(key, p) for p in text]
    parts = [p for p in str(text).replace(";", ",").split(",") if p.strip()]
    if not parts:
        raise InputError(f"{key}: empty list")
    return [_parse_float(key, p) for p in parts]


@dataclass(frozen=True)
class RunConfig:
    system: str
    shape: Optional[str]
    center: Optional[tuple]
    weights: Optional[tuple]
    d: Optional[int]
    a: float
    lam: float
    scheme: str
    m: Optional[int]
    radii: Optional[tuple]
    eps: float
    eps_list: tuple
    N: int
    delta: float
    seed: int
    engine: str
    pairing: str
    max_m: int
    max_draws: int
    out: str
    repeats: int
    workers: int
    audit: Optional[str]

    @classmethod
    def from_mapping(cls, raw: dict) -> "RunConfig":
        vals = dict(DEFAULTS)
        vals.update({k: v for k, v in raw.items() if v is not None})
        vals = {k: coerce(k, v) for k, v in vals.items()}
        center = _floats("center", vals["center"])
        weights = _floats("weights", vals["weights"])
        radii = _floats("radii", vals["radii"])
        eps_list = _floats("eps_list", vals["eps_list"])
        cfg = cls(
            system=vals["system"],
            shape=vals["shape"],
            center=tuple(center) if center else None,
            weights=tuple(weights) if weights else None,
            d=vals["d"],
            a=vals["a"],
            lam=vals["lam"],
            scheme=vals["scheme"],
            m=vals["m"],
            radii=tuple(radii) if radii else None,
            eps=vals["eps"],
            eps_list=tuple(eps_list),
            N=vals["N"],
            delta=vals["delta"],
            seed=vals["seed"],
            engine=vals["engine"],
            pairing=vals["pairing"],
            max_m=vals["max_m"],
            max_draws=vals["max_draws"],
            out=vals["out"],
            repeats=vals["repeats"],
            workers=vals["workers"],
            audit=vals["audit"],
        )
        cfg.validate()
        return cfg

    def validate(self):
        if self.scheme not in gridmod.SCHEMES:
            raise InputError(f"scheme must be one of {gridmod.SCHEMES}")
        if self.scheme == "explicit" and not self.radii:
            raise InputError("scheme = explicit needs radii")
        if self.engine not in ENGINES:
            raise InputError(f"engine must be one of {ENGINES}")
        if self.pairing not in analysis.PAIRINGS:
            raise InputError(f"pairing must be one of {analysis.PAIRINGS}")
        if not self.a > 0:
            raise InputError("a must be positive")
        if not self.lam >= 1:
            raise InputError("lam must be >= 1")
        if not 0 < self.eps < 1 or not all(0 < e < 1 for e in self.eps_list):
            raise InputError("eps values must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise InputError("delta must lie in (0, 1)")
        if self.N < 1:
            raise InputError("N must be positive")
        if self.d is not None and self.d < 1:
            raise InputError("d must be positive")
        if self.m is not None and self.m < 1:
            raise InputError("m must be positive")
        if self.max_m < 1 or self.max_draws < 1:
            raise InputError("caps must be positive")
        if self.repeats < 1 or self.workers < 1:
            raise InputError("repeats and workers must be positive")
        if self.seed < 0:
            raise InputError("seed must be nonnegative")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in DEFAULTS}


# ---------------------------------------------------------------------------
# building blocks from a config
# ---------------------------------------------------------------------------


def load_plugin(ref: str) -> systems.ViolationPredicate:
    """Resolve ``"package.module:attr"`` to a predicate (or a zero-argument factory of one)."""
    if ":" not in ref:
        raise InputError(f"system {ref!r} is neither {FEEDBACK} nor a 'module:attr' reference")
    mod_name, attr = ref.split(":", 1)
    try:
        obj = importlib.import_module(mod_name)
        for part in attr.split("."):
            obj = getattr(obj, part)
    except (ImportError, AttributeError) as exc:
        raise InputError(f"cannot load plugin {ref!r}: {exc}") from None
    if not isinstance(obj, systems.ViolationPredicate) and callable(obj):
        try:
            obj = obj()
        except Exception as exc:
            raise InputError(f"plugin factory {ref!r} failed: {exc}") from None
    if not isinstance(obj, systems.ViolationPredicate):
        raise InputError(f"plugin {ref!r} did not provide a ViolationPredicate")
    return obj


def build_problem(cfg: RunConfig):
    """``(uncertainty set, predicate, closed-form P or None)`` for the configured system."""
    if cfg.system in FEEDBACK:
        uset = systems.feedback_set()
        if cfg.center or cfg.weights or (cfg.shape and parse_shape(cfg.shape).value != "linf"):
            raise InputError("the feedback systems fix their own uncertainty box")
        return uset, systems.feedback_predicate(cfg.system), systems.closed_form(cfg.system)
    pred = load_plugin(cfg.system)
    if cfg.center is None:
        raise InputError("plugin systems need a center")
    weights = cfg.weights if cfg.weights is not None else (1.0,) * len(cfg.center)
    uset = UncertaintySet(np.array(cfg.center), cfg.shape or "linf", np.array(weights))
    return uset, pred, None


def problem_dimension(cfg: RunConfig) -> int:
    if cfg.d is not None:
        return cfg.d
    if cfg.system in FEEDBACK:
        return 2
    if cfg.center is not None:
        return len(cfg.center)
    raise InputError("set d, or give a center, so the dimension is known")


def resolve_m(cfg: RunConfig, d: int) -> int:
    if cfg.radii:
        return len(cfg.radii)
    if cfg.m is not None:
        return cfg.m
    return gridmod.size_for_scheme(cfg.scheme, cfg.lam, d, cfg.eps)


def build_grid(cfg: RunConfig, d: int) -> gridmod.RadiusGrid:
    m = resolve_m(cfg, d)
    if m > cfg.max_m:
        raise CapExceeded(f"grid size m={m} exceeds max_m={cfg.max_m}", value=m, cap=cfg.max_m)
    if cfg.radii:
        return gridmod.explicit_grid(cfg.radii)
    return gridmod.make_grid(cfg.scheme, cfg.a, cfg.lam, m)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def write_kv(path, items) -> None:
    with open(path, "w") as fh:
        for k, v in items:
            fh.write(f"{k} = {fmt(v) if not isinstance(v, str) else v}\n")


def _print_kv(items, stream=None) -> None:
    stream = stream or sys.stdout
    for k, v in items:
        stream.write(f"{k} = {fmt(v) if not isinstance(v, str) else v}\n")


def write_curve(path, curve: analysis.RobustnessCurve, per_radius_draws) -> None:
    lower, upper = curve.node_band()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for k, r in enumerate(curve.grid.radii):
            w.writerow(
                [
                    fmt(r),
                    fmt(curve.estimates[k]),
                    fmt(curve.running_min[k]),
                    fmt(lower[k]),
                    fmt(upper[k]),
                    fmt(per_radius_draws[k]),
                ]
            )


def write_band(path, curve: analysis.RobustnessCurve) -> None:
    radii = curve.grid.radii
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BAND_HEADER)
        for i in range(radii.size - 1):
            lo_l, up_l = curve.band(radii[i], i)
            lo_r, up_r = curve.band(radii[i + 1], i)
            w.writerow([i + 1, fmt(radii[i]), fmt(radii[i + 1]), fmt(curve.slack[i]),
                        fmt(lo_l), fmt(lo_r), fmt(up_l), fmt(up_r)])


def _nan_on_cap(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except CapExceeded:
        return float("nan")


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------


def plan_items(cfg: RunConfig):
    """Key-value rows of the plan report, and whether the selected grid is within caps."""
    d = problem_dimension(cfg)
    lam, eps, a = cfg.lam, cfg.eps, cfg.a
    m_b = gridmod.size_barmish(lam, d, eps)
    m_u = gridmod.size_uniform(lam, d, eps)
    m_g = gridmod.size_geometric(lam, d, eps)
    bound = gridmod.engp_bound(d, lam)
    e_u = _nan_on_cap(gridmod.engp_uniform, lam, m_u, d)
    e_g = gridmod.engp_geometric(lam, m_g, d)
    items = [
        ("a", a), ("lam", lam), ("d", d), ("eps", eps), ("N", cfg.N),
        ("m_barmish", m_b), ("m_uniform", m_u), ("m_geometric", m_g),
        ("ratio_uniform_barmish", m_u / m_b),
        ("engp_uniform", e_u), ("engp_geometric", e_g), ("engp_bound", bound),
        ("reuse_uniform", m_u / e_u), ("reuse_geometric", m_g / e_g),
        ("max_gap_uniform", gridmod.scheme_max_gap("uniform", a, lam, m_u)),
        ("max_gap_geometric", gridmod.scheme_max_gap("geometric", a, lam, m_g)),
    ]
    if cfg.radii or cfg.scheme == "explicit":
        g = gridmod.explicit_grid(cfg.radii)
        m_sel, e_sel = g.m, gridmod.engp(g, d)
        per = gridmod.expected_samples_per_radius(g, d, cfg.N)[:-1] if g.m > 1 else np.zeros(0)
        gap = gridmod.max_gap(g)
    else:
        m_sel = cfg.m if cfg.m is not None else {"uniform": m_u, "geometric": m_g}[cfg.scheme]
        e_sel = _nan_on_cap(gridmod.scheme_engp, cfg.scheme, lam, m_sel, d)
        gap = gridmod.scheme_max_gap(cfg.scheme, a, lam, m_sel)
        per = _expected_below_top(cfg.scheme, lam, m_sel, d, cfg.N)
    items += [
        ("scheme", cfg.scheme), ("m", m_sel), ("engp", e_sel), ("reuse_factor", m_sel / e_sel),
        ("expected_draws", e_sel * cfg.N), ("conventional_draws", m_sel * cfg.N),
        ("expected_samples_top", cfg.N),
        ("expected_samples_min", float(np.min(per)) if len(per) else float("nan")),
        ("expected_samples_max", float(np.max(per)) if len(per) else float("nan")),
        ("max_gap", gap),
        ("chernoff_N", analysis.chernoff_sample_size(eps, cfg.delta)),
    ]
    if cfg.system in FEEDBACK and lam > 1 and d == 2:
        mb = analysis.memory_bound(systems.closed_form(cfg.system), a, lam, d, cfg.N)
        items += [
            ("rho0", mb.rho0), ("hbar", mb.hbar), ("pe_a", mb.pe_a),
            ("memory_bound_integral", mb.bound_integral), ("memory_bound_loose", mb.bound_loose),
            ("max_S_rows_bound", cfg.N),
        ]
    ok = m_sel <= cfg.max_m
    items += [("max_m", cfg.max_m), ("status", "ok" if ok else "refused")]
    return items, ok, m_sel


def _expected_below_top(scheme, lam, m, d, N):
    """Min and max expected draws over radii below the top, without building the grid."""
    if m == 1:
        return np.zeros(0)
    if scheme == "geometric":
        v = N * -math.expm1(-d * math.log(lam) / (m - 1))
        return np.array([v])
    # uniform: the hit fraction decreases along the grid, so the extremes are the ends
    offset = (m - 1) / (lam - 1)
    ends = np.array([1.0, m - 1.0])
    return N * -np.expm1(d * np.log1p(-1.0 / (offset + ends)))


def cmd_plan(cfg: RunConfig) -> int:
    items, ok, m_sel = plan_items(cfg)
    _print_kv(items)
    os.makedirs(cfg.out, exist_ok=True)
    write_kv(os.path.join(cfg.out, "plan.kv"), items)
    if not ok:
        sys.stderr.write(f"refused: m={m_sel} exceeds max_m={cfg.max_m}\n")
        return CapExceeded.exit_code
    return 0


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _execute(cfg: RunConfig, eng: str, seed: int, audit: bool = False):
    uset, pred, _ = build_problem(cfg)
    g = build_grid(cfg, uset.d)
    if eng == "conventional":
        if g.m * cfg.N > cfg.max_draws:
            raise CapExceeded(
                f"conventional run needs {g.m * cfg.N} draws, above max_draws={cfg.max_draws}",
                value=g.m * cfg.N, cap=cfg.max_draws,
            )
        return engine.run_conventional(uset, g, cfg.N, pred, seed=seed)
    return engine.run(uset, g, cfg.N, pred, seed=seed, audit=audit, max_draws=cfg.max_draws)


def _band_coverage(curve: analysis.RobustnessCurve, P) -> int:
    lower, upper = curve.node_band()
    truth = np.array([P(float(r)) for r in curve.grid.radii])
    return int(np.count_nonzero((lower <= truth) & (truth <= upper)))


def _batch_task(cfg_dict: dict, seed: int):
    cfg = RunConfig.from_mapping(cfg_dict)
    eng = "reuse" if cfg.engine == "both" else cfg.engine
    res = _execute(cfg, eng, seed)
    _, _, P = build_problem(cfg)
    d = problem_dimension(cfg)
    curve = analysis.build_band(res, analysis.BandParams(cfg.delta, cfg.N, d), cfg.pairing)
    covered = _band_coverage(curve, P) if P is not None else None
    return {
        "seed": seed,
        "total_draws": res.total_draws,
        "empirical_engp": res.empirical_engp,
        "max_S_rows": res.max_S_rows,
        "max_V_rows": res.max_V_rows,
        "update_count": res.update_count,
        "band_covers_nodes": covered,
    }


def run_batch(cfg: RunConfig):
    """Seed-parallel repeats; seeds are ``seed, seed+1, ...`` and results come back in seed order."""
    seeds = [cfg.seed + k for k in range(cfg.repeats)]
    raw = cfg.as_dict()
    if cfg.workers == 1:
        return [_batch_task(raw, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_batch_task, [raw] * len(seeds), seeds))


def cmd_run(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    uset, _, P = build_problem(cfg)
    d = problem_dimension(cfg)
    if uset.d != d:
        raise InputError(f"d={d} does not match the set dimension {uset.d}")
    g = build_grid(cfg, d)

    if cfg.repeats > 1:
        t0 = time.perf_counter()
        rows = run_batch(cfg)
        wall = time.perf_counter() - t0
        cols = ["seed", "total_draws", "empirical_engp", "max_S_rows", "max_V_rows", "update_count", "band_covers_nodes"]
        with open(os.path.join(cfg.out, "batch.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in rows:
                w.writerow([fmt(row[c]) for c in cols])
        mean_engp = float(np.mean([r["empirical_engp"] for r in rows]))
        items = [
            ("repeats", cfg.repeats), ("workers", cfg.workers), ("first_seed", cfg.seed), ("m", g.m),
            ("engp_analytic", gridmod.engp(g, d)), ("engp_mean_measured", mean_engp),
            ("max_S_rows_max", max(r["max_S_rows"] for r in rows)), ("max_S_rows_bound", cfg.N),
            ("max_V_rows_mean", float(np.mean([r["max_V_rows"] for r in rows]))),
            ("wall_time_s", wall),
        ]
        if P is not None:
            covers = np.array([r["band_covers_nodes"] for r in rows])
            items += [("band_covers_nodes_mean", float(covers.mean())),
                      ("band_covers_all_nodes_fraction", float(np.mean(covers == g.m)))]
        _write_reports(cfg, items)
        return 0

    engines = ["reuse", "conventional"] if cfg.engine == "both" else [cfg.engine]
    items = [("system", cfg.system), ("seed", cfg.seed), ("N", cfg.N), ("delta", cfg.delta),
             ("d", d), ("m", g.m), ("scheme", g.scheme), ("a", g.a), ("lam", g.lam)]
    params = analysis.BandParams(cfg.delta, cfg.N, d)
    for eng in engines:
        t0 = time.perf_counter()
        res = _execute(cfg, eng, cfg.seed, audit=bool(cfg.audit) and eng == "reuse")
        wall = time.perf_counter() - t0
        curve = analysis.build_band(res, params, cfg.pairing)
        suffix = "" if eng == engines[0] else f"_{eng}"
        write_curve(os.path.join(cfg.out, f"curve{suffix}.csv"), curve, res.per_radius_draws)
        write_band(os.path.join(cfg.out, f"band{suffix}.csv"), curve)
        if res.audit_log is not None:
            engine.write_audit_log(cfg.audit, res.audit_log)
        p = f"{eng}_"
        items += [
            (p + "total_draws", res.total_draws),
            (p + "conventional_draws", g.m * cfg.N),
            (p + "engp_measured", res.empirical_engp),
            (p + "engp_analytic", gridmod.engp(g, d) if eng == "reuse" else float(g.m)),
            (p + "engp_bound", gridmod.engp_bound(d, g.lam)),
            (p + "max_S_rows", res.max_S_rows),
            (p + "max_S_rows_bound", cfg.N),
            (p + "max_V_rows", res.max_V_rows),
            (p + "update_count", res.update_count),
            (p + "update_count_conventional", g.m * cfg.N),
        ]
        if P is not None and eng == "reuse" and g.lam > 1 and g.scheme != "explicit":
            mb = analysis.memory_bound(P, g.a, g.lam, d, cfg.N, grid=g)
            items += [(p + "max_V_rows_bound_integral", mb.bound_integral),
                      (p + "max_V_rows_bound_grid", mb.bound_grid)]
        if P is not None:
            items.append((p + "band_covers_nodes", _band_coverage(curve, P)))
        items.append((p + "wall_time_s", wall))
    _write_reports(cfg, items)
    return 0


def _write_reports(cfg: RunConfig, items) -> None:
    write_kv(os.path.join(cfg.out, "report.kv"), items)
    width = max(len(k) for k, _ in items)
    with open(os.path.join(cfg.out, "report.txt"), "w") as fh:
        fh.write("robustness curve run report\n\n")
        for k, v in items:
            fh.write(f"{k.ljust(width)}  {fmt(v) if not isinstance(v, str) else v}\n")
    _print_kv(items)


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def compare_rows(lam: float, d: int, eps_list, cap: int = gridmod.DEFAULT_PLAN_CAP):
    rows = []
    bound = gridmod.engp_bound(d, lam)
    for eps in eps_list:
        m_u = gridmod.size_uniform(lam, d, eps)
        m_g = gridmod.size_geometric(lam, d, eps)
        e_u = _nan_on_cap(gridmod.engp_uniform, lam, m_u, d, cap=cap)
        e_g = gridmod.engp_geometric(lam, m_g, d)
        rows.append([eps, m_u, m_g, e_u, e_g, m_u / e_u, m_g / e_g, bound])
    return rows


def cmd_compare(cfg: RunConfig) -> int:
    d = problem_dimension(cfg)
    rows = compare_rows(cfg.lam, d, cfg.eps_list)
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, "compare.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARE_HEADER)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    with open(path) as fh:
        sys.stdout.write(fh.read())
    return 0


# ---------------------------------------------------------------------------
# demo
# ---------------------------------------------------------------------------


def crossover_radius(lo: float, hi: float, n: int = 4001, params=systems.DEFAULT_PARAMS):
    """Smallest radius in ``[lo, hi]`` where controller B's curve is strictly above A's."""
    PA = lambda r: systems.closed_form_P_A(params, r)
    PB = lambda r: systems.closed_form_P_B(params, r)
    rs = np.linspace(lo, hi, n)
    above = [PB(r) > PA(r) for r in rs]
    if not any(above):
        return None
    k = above.index(True)
    if k == 0:
        return float(rs[0])
    left, right = float(rs[k - 1]), float(rs[k])
    for _ in range(100):
        mid = 0.5 * (left + right)
        if PB(mid) > PA(mid):
            right = mid
        else:
            left = mid
    return right


def cmd_demo(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    params = systems.DEFAULT_PARAMS
    rho_A, rho_B, rho_A_star, rho_B_star = systems.margins(params)
    lo, hi = 20.0, 150.0
    rs = np.linspace(lo, hi, 1301)
    PA = np.array([systems.closed_form_P_A(params, r) for r in rs])
    PB = np.array([systems.closed_form_P_B(params, r) for r in rs])
    with open(os.path.join(cfg.out, "demo_closed_form.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["radius", "P_A", "P_B", "robustness_A", "robustness_B"])
        for r, a_, b_, ra, rb in zip(rs, PA, PB, analysis.running_min(PA), analysis.running_min(PB)):
            w.writerow([fmt(r), fmt(a_), fmt(b_), fmt(ra), fmt(rb)])

    N = min(cfg.N, 2000)
    g = gridmod.geometric_grid(hi, hi / lo, 60)
    uset = systems.feedback_set(params)
    band_params = analysis.BandParams(cfg.delta, N, 2)
    items = [("rho_A", rho_A), ("rho_B", rho_B), ("rho_A_star", rho_A_star), ("rho_B_star", rho_B_star)]
    for tag in FEEDBACK:
        res = engine.run(uset, g, N, systems.feedback_predicate(tag, params), seed=cfg.seed)
        curve = analysis.build_band(res, band_params, cfg.pairing)
        write_curve(os.path.join(cfg.out, f"demo_mc_{tag[-1]}.csv"), curve, res.per_radius_draws)
        items.append((f"mc_{tag[-1]}_total_draws", res.total_draws))
    cross = crossover_radius(lo, hi)
    b_wins = rs[PB > PA]
    items += [
        ("margin_order", "rho_A > rho_B" if rho_A > rho_B else "rho_A <= rho_B"),
        ("crossover_radius", cross if cross is not None else "none"),
        ("B_above_A_points", int(b_wins.size)),
        ("P_A_at_crossover_plus_5", systems.closed_form_P_A(params, cross + 5) if cross else "none"),
        ("P_B_at_crossover_plus_5", systems.closed_form_P_B(params, cross + 5) if cross else "none"),
        ("mc_N", N), ("mc_seed", cfg.seed), ("mc_m", g.m),
    ]
    write_kv(os.path.join(cfg.out, "demo.kv"), items)
    _print_kv(items)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat 'key = value' settings file")
    p.add_argument("--system", help="feedback_A, feedback_B or a 'module:attr' plugin")
    p.add_argument("--shape", help="norm family of the uncertainty set: l1, l2, linf")
    p.add_argument("--center", help="comma-separated nominal point (plugins)")
    p.add_argument("--weights", help="comma-separated per-coordinate weights (plugins)")
    p.add_argument("-d", "--dim", dest="d", help="uncertainty dimension")
    p.add_argument("--a", help="largest radius")
    p.add_argument("--lam", "--lambda", dest="lam", help="range ratio r_m / r_1")
    p.add_argument("--scheme", help="uniform, geometric or explicit")
    p.add_argument("--m", help="grid size (overrides eps sizing)")
    p.add_argument("--radii", help="comma-separated explicit radii")
    p.add_argument("--eps", help="discretization tolerance")
    p.add_argument("--eps-list", dest="eps_list", help="comma-separated tolerances for compare")
    p.add_argument("-N", "--N", dest="N", help="samples per radius")
    p.add_argument("--delta", help="confidence parameter")
    p.add_argument("--seed")
    p.add_argument("--engine", help="reuse, conventional or both")
    p.add_argument("--pairing", help="band interpolation pairing: consistent or literal")
    p.add_argument("--max-m", dest="max_m")
    p.add_argument("--max-draws", dest="max_draws")
    p.add_argument("--out", help="output directory")
    p.add_argument("--repeats", help="independent runs with seeds seed, seed+1, ...")
    p.add_argument("--workers", help="processes for --repeats")
    p.add_argument("--audit", help="write the draw-by-draw audit log to this file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robustcurve", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("plan", "grid sizes, ENGP and bounds for a tolerance"),
        ("run", "estimate the robustness curve with confidence band"),
        ("compare", "uniform vs geometric scheme sweep over tolerances"),
        ("demo", "two-controller example: closed forms and Monte Carlo overlays"),
    ]:
        _add_common(sub.add_parser(name, help=help_))
    return parser


COMMANDS = {"plan": cmd_plan, "run": cmd_run, "compare": cmd_compare, "demo": cmd_demo}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    raw = read_config(ns.config) if ns.config else {}
    for key in DEFAULTS:
        val = getattr(ns, key, None)
        if val is not None:
            raw[key] = coerce(key, val)
    return RunConfig.from_mapping(raw)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        return COMMANDS[ns.command](cfg)
    except RobustCurveError as exc:
        sys.stderr.write(f"robustcurve: {exc}\n")
        return exc.exit_code
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"robustcurve: {exc}\n")
        return InputError.exit_code
    except (ArithmeticError, FloatingPointError) as exc:
        sys.stderr.write(f"robustcurve: numerical failure: {exc}\n")
        return NumericalError.exit_code


if __name__ == "__main__":
    sys.exit(main())
