"""Sample-reuse estimation of ``P(r_i)`` on a whole radius grid.

State is kept as two run-length compressed two-column tables:

* the sample-size matrix ``S``: rows ``(grid_index, count)`` where ``count`` is
  the number of accumulated uniform samples for every radius from
  ``grid_index`` up to the next row's index (the last row extends to ``m``);
* the violation matrix ``V``: rows ``(grid_index, violations)``, same layout.

Grid indices are 1-based.  Samples are drawn from the largest radius whose
accumulated count is still below ``N``; a draw from ``B_{r_t}`` landing in
``B_{r_i}`` (``i >= j*``) counts as a uniform sample for every such radius.
Counts saturate at ``N``: later hits at an already complete radius are
ignored, so each ``v(i, .)`` counts violations among exactly the first ``N``
samples that reached radius ``r_i``.

Scheduling depends only on gauges, never on predicate outcomes, so the
engine pre-draws a block of unit-ball directions, runs the ``S`` state
machine over the whole block, evaluates the predicate on the block in one
call, and then folds the violations into ``V`` in draw order.  Results are
independent of how the predicate is batched.
"""

from __future__ import annotations

import csv
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import CapExceeded, InputError, NumericalError
from .grid import RadiusGrid
from .systems import ViolationPredicate
from .uncertainty import UncertaintySet, _norm, radius_index, sample_unit, to_points

#: Unit draws generated per RNG call.  Part of the determinism contract.
BLOCK = 256


class _RunLength:
    """Two parallel lists of row indices and row values."""

    __slots__ = ("index", "value")

    def __init__(self, rows=((1, 0),)):
        rows = list(rows)
        self.index = [int(i) for i, _ in rows]
        self.value = [int(v) for _, v in rows]
        self._validate()

    def _validate(self):
        if not self.index or self.index[0] != 1:
            raise InputError("the first row must start at grid index 1")
        if any(b <= a for a, b in zip(self.index, self.index[1:])):
            raise InputError("row indices must be strictly increasing")

    @property
    def rows(self):
        return list(zip(self.index, self.value))

    def copy(self):
        new = object.__new__(type(self))
        new.index = list(self.index)
        new.value = list(self.value)
        return new

    def __len__(self):
        return len(self.index)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.index == other.index and self.value == other.value

    def __repr__(self):
        return f"{type(self).__name__}({self.rows})"


class SampleSizeMatrix(_RunLength):
    """Compressed accumulated sample counts; counts strictly increase down the rows."""

    def _validate(self):
        super()._validate()
        if any(b <= a for a, b in zip(self.value, self.value[1:])):
            raise InputError("sample counts must be strictly increasing across rows")
        if self.value[0] < 0:
            raise InputError("sample counts must be nonnegative")

    def completion_index(self, N: int) -> Optional[int]:
        """First grid index already holding ``N`` samples, ``None`` if there is none."""
        return self.index[-1] if self.value[-1] >= N else None

    def next_radius_index(self, N: int, m: int) -> int:
        """Largest grid index whose accumulated count is still below ``N``."""
        return m if self.value[-1] < N else self.index[-1] - 1

    def is_complete(self, N: int) -> bool:
        return len(self.index) == 1 and self.value[0] == N

    def record(self, j_star: int, N: int) -> int:
        """Add one sample that lies in ``B_{r_i}`` for all ``i >= j_star``.

        Returns the number of rows written.
        """
        idx, val = self.index, self.value
        pos = bisect_right(idx, j_star) - 1
        if idx[pos] == j_star:
            # Case (2): j* starts an existing row
            for k in range(pos, len(val)):
                val[k] += 1
            writes = len(val) - pos
        elif pos == len(idx) - 1:
            # Case (3): j* beyond the last row start
            idx.append(j_star)
            val.append(val[-1] + 1)
            writes = 1
        else:
            # Case (1): j* strictly inside row pos
            idx.insert(pos + 1, j_star)
            val.insert(pos + 1, val[pos] + 1)
            for k in range(pos + 2, len(val)):
                val[k] += 1
            writes = len(val) - pos - 1
        if val[-1] >= N:
            # truncate after the first saturated row and cap it at N
            cut = bisect_left(val, N)
            del idx[cut + 1 :], val[cut + 1 :]
            if val[cut] != N:
                val[cut] = N
                writes += 1
        return writes


class ViolationMatrix(_RunLength):
    """Compressed accumulated violation counts, stored canonically (no equal neighbours)."""

    def _validate(self):
        super()._validate()
        if any(v < 0 for v in self.value):
            raise InputError("violation counts must be nonnegative")

    def record(self, j_star: int, completion: Optional[int] = None) -> int:
        """Add one violating sample whose smallest containing radius is ``j_star``.

        ``completion`` is the first full grid index *before* this sample was
        counted, ``None`` while no radius is full.  Exactly the indices in
        ``[j_star, completion)`` gain a violation.  Returns rows written.
        """
        idx, val = self.index, self.value
        if j_star < 1 or (completion is not None and j_star >= completion):
            raise NumericalError(
                f"violation at index {j_star} outside the incomplete region below {completion}"
            )
        writes = 0
        if completion is None:
            iota = len(idx) - 1
        else:
            # Step (i): iota = last row starting below the completion boundary
            iota = bisect_left(idx, completion) - 1
            # Step (ii): make sure a row starts exactly at the completion boundary
            if iota + 1 == len(idx) or idx[iota + 1] != completion:
                idx.insert(iota + 1, completion)
                val.insert(iota + 1, val[iota])
                writes += 1
        # Step (iii): increment the incomplete block from j_star upward
        pos = bisect_right(idx, j_star) - 1
        if idx[pos] == j_star:
            first = pos
        else:
            idx.insert(pos + 1, j_star)
            val.insert(pos + 1, val[pos])
            iota += 1
            first = pos + 1
        for k in range(first, iota + 1):
            val[k] += 1
        writes += iota + 1 - first
        # canonical form: merge equal neighbours at both edges of the block
        if iota + 1 < len(val) and val[iota + 1] == val[iota]:
            del idx[iota + 1], val[iota + 1]
        if first > 0 and val[first] == val[first - 1]:
            del idx[first], val[first]
        return writes


# ---------------------------------------------------------------------------
# functional interface over the two matrices
# ---------------------------------------------------------------------------


def update_sample_matrix(S: SampleSizeMatrix, j_star: int, N: int, m: Optional[int] = None):
    """Copy of ``S`` after one sample with smallest containing index ``j_star``."""
    if j_star < 1 or (m is not None and j_star > m):
        raise InputError(f"j_star={j_star} out of range")
    out = S.copy()
    out.record(j_star, N)
    return out


def update_violation_matrix(V: ViolationMatrix, S: SampleSizeMatrix, j_star: int, N: int):
    """Copy of ``V`` after one *violating* sample.

    ``S`` is the sample-size matrix as it stood before this sample was
    counted; its saturated tail marks the radii that must not change.
    """
    out = V.copy()
    out.record(j_star, S.completion_index(N))
    return out


def decompress(M: _RunLength, m: int) -> np.ndarray:
    """Expand run-length rows into the per-index vector of length ``m``."""
    if M.index[-1] > m:
        raise InputError(f"row index {M.index[-1]} exceeds m={m}")
    out = np.empty(m, dtype=np.int64)
    bounds = M.index + [m + 1]
    for k, v in enumerate(M.value):
        out[bounds[k] - 1 : bounds[k + 1] - 1] = v
    return out


def compress(values, cls=ViolationMatrix):
    """Change-point encoding of a per-index vector (inverse of ``decompress``)."""
    values = [int(v) for v in values]
    if not values:
        raise InputError("cannot compress an empty vector")
    rows = [(1, values[0])]
    for i in range(1, len(values)):
        if values[i] != values[i - 1]:
            rows.append((i + 1, values[i]))
    return cls(rows)


# ---------------------------------------------------------------------------
# results, audit log and the brute-force oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditRecord:
    draw_index: int
    radius_index_drawn: int
    gauge: float
    j_star: int
    violated: bool


@dataclass(frozen=True, eq=False)
class RunResult:
    grid: RadiusGrid
    N: int
    violations_final: np.ndarray
    estimates: np.ndarray
    total_draws: int
    per_radius_draws: np.ndarray
    empirical_engp: float
    max_S_rows: int
    max_V_rows: int
    update_count: int
    seed: int
    engine: str = "reuse"
    audit_log: Optional[list] = field(default=None, repr=False)

    def fingerprint(self) -> bytes:
        """Byte string covering every numeric output, for determinism checks."""
        parts = [
            self.engine.encode(),
            np.asarray(self.grid.radii).tobytes(),
            np.asarray(self.violations_final, dtype=np.int64).tobytes(),
            np.asarray(self.estimates, dtype=float).tobytes(),
            np.asarray(self.per_radius_draws, dtype=np.int64).tobytes(),
            np.array(
                [self.N, self.total_draws, self.max_S_rows, self.max_V_rows, self.update_count, self.seed],
                dtype=np.int64,
            ).tobytes(),
            np.array([self.empirical_engp]).tobytes(),
        ]
        return b"|".join(parts)


def oracle_trajectory(audit_log, grid: RadiusGrid, N: int):
    """``s(i, j)`` and ``v(i, j)`` for every prefix ``j`` of the log, from the definitions.

    Row ``k`` of each returned ``(n, m)`` array is the state after draw
    ``k + 1``.  Membership is re-derived from the recorded gauges with a
    direct comparison against every radius, independent of ``radius_index``
    and of the compressed updates.
    """
    n = len(audit_log)
    m = grid.m
    if n == 0:
        return np.zeros((0, m), dtype=np.int64), np.zeros((0, m), dtype=np.int64)
    g = np.array([rec.gauge for rec in audit_log])
    bad = np.array([rec.violated for rec in audit_log], dtype=bool)
    Y = g[:, None] <= grid.radii[None, :]
    hits = np.cumsum(Y, axis=0)
    # truncation: sample k counts at radius i only while cumulative hits <= N
    counted = Y & (hits <= N)
    s = np.cumsum(counted, axis=0)
    v = np.cumsum(counted & bad[:, None], axis=0)
    return s.astype(np.int64), v.astype(np.int64)


def oracle_state(audit_log, grid: RadiusGrid, N: int):
    """Final ``(s, v)`` vectors recomputed from the audit log."""
    if not audit_log:
        return np.zeros(grid.m, dtype=np.int64), np.zeros(grid.m, dtype=np.int64)
    s, v = oracle_trajectory(audit_log, grid, N)
    return s[-1], v[-1]


_AUDIT_FIELDS = ("draw_index", "radius_index_drawn", "gauge", "j_star", "violated")


def write_audit_log(path, audit_log) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_AUDIT_FIELDS)
        for rec in audit_log:
            w.writerow(
                [rec.draw_index, rec.radius_index_drawn, f"{rec.gauge:.17g}", rec.j_star, int(rec.violated)]
            )


def read_audit_log(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != _AUDIT_FIELDS:
            raise InputError(f"{path}: unexpected audit header {reader.fieldnames}")
        return [
            AuditRecord(
                int(row["draw_index"]),
                int(row["radius_index_drawn"]),
                float(row["gauge"]),
                int(row["j_star"]),
                row["violated"] == "1",
            )
            for row in reader
        ]


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based stream (Philox) keyed by ``seed``; one stream per run."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def _check_run_args(uset, grid, N, predicate):
    if int(N) != N or N < 1:
        raise InputError(f"N must be a positive integer, got {N}")
    if predicate.dimension != uset.d:
        raise InputError(
            f"predicate dimension {predicate.dimension} does not match the set dimension {uset.d}"
        )
    if not isinstance(grid, RadiusGrid):
        raise InputError("grid must be a RadiusGrid")


StepHook = Callable[[int, SampleSizeMatrix, ViolationMatrix], None]


def run(
    uset: UncertaintySet,
    grid: RadiusGrid,
    N: int,
    predicate: ViolationPredicate,
    seed: int = 0,
    audit: bool = False,
    on_step: Optional[StepHook] = None,
    max_draws: Optional[int] = None,
) -> RunResult:
    """Estimate ``P(r_i)`` for every grid radius with ``N`` samples each, reusing draws.

    ``on_step(j, S, V)`` (testing aid) is called after draw ``j`` with the
    live matrices; do not mutate them.  ``max_draws`` aborts with
    ``CapExceeded`` once that many draws have been issued.
    """
    _check_run_args(uset, grid, N, predicate)
    N = int(N)
    m = grid.m
    radii = grid.radii
    rng = make_rng(seed)

    S = SampleSizeMatrix()
    V = ViolationMatrix()
    per_radius = np.zeros(m, dtype=np.int64)
    log = [] if audit else None
    draws = 0
    updates = 0
    max_S = max_V = 1
    snapshots = [] if on_step is not None else None

    while not S.is_complete(N):
        z = sample_unit(uset, rng, BLOCK)
        unit_g = _norm(z, uset.shape)
        t_blk = np.empty(BLOCK, dtype=np.int64)
        j_blk = np.empty(BLOCK, dtype=np.int64)
        comp_blk = []
        used = 0
        if snapshots is not None:
            snapshots.clear()
        # schedule and count samples; depends on gauges only
        for k in range(BLOCK):
            t = S.next_radius_index(N, m)
            g = radii[t - 1] * unit_g[k]
            j = radius_index(grid, g)
            # scaling by a factor <= 1 cannot leave B_{r_t}; guard anyway
            if j is None or j > t:
                j = t
            comp_blk.append(S.completion_index(N))
            updates += S.record(j, N)
            if len(S) > max_S:
                max_S = len(S)
            t_blk[k] = t
            j_blk[k] = j
            per_radius[t - 1] += 1
            if snapshots is not None:
                snapshots.append(S.copy())
            used = k + 1
            if S.is_complete(N):
                break
        if max_draws is not None and draws + used > max_draws:
            raise CapExceeded(f"run exceeded max_draws={max_draws}", value=draws + used, cap=max_draws)
        pts = to_points(uset, radii[t_blk[:used] - 1], z[:used])
        bad = predicate.evaluate(pts)
        for k in range(used):
            if bad[k]:
                updates += V.record(int(j_blk[k]), comp_blk[k])
                if len(V) > max_V:
                    max_V = len(V)
            if log is not None:
                log.append(
                    AuditRecord(
                        draws + k + 1,
                        int(t_blk[k]),
                        float(radii[t_blk[k] - 1] * unit_g[k]),
                        int(j_blk[k]),
                        bool(bad[k]),
                    )
                )
            if on_step is not None:
                on_step(draws + k + 1, snapshots[k], V)
        draws += used

    v_final = decompress(V, m)
    return RunResult(
        grid=grid,
        N=N,
        violations_final=v_final,
        estimates=1.0 - v_final / N,
        total_draws=draws,
        per_radius_draws=per_radius,
        empirical_engp=draws / N,
        max_S_rows=max_S,
        max_V_rows=max_V,
        update_count=updates,
        seed=int(seed),
        engine="reuse",
        audit_log=log,
    )


def run_conventional(
    uset: UncertaintySet,
    grid: RadiusGrid,
    N: int,
    predicate: ViolationPredicate,
    seed: int = 0,
) -> RunResult:
    """Baseline: ``N`` fresh draws at every radius, ``m * N`` draws in total.

    The record table has one row per radius, and every draw rewrites one
    record, so ``max_S_rows = m`` and ``update_count = m * N``.
    """
    _check_run_args(uset, grid, N, predicate)
    N = int(N)
    m = grid.m
    rng = make_rng(seed)
    violations = np.zeros(m, dtype=np.int64)
    for i, r in enumerate(grid.radii):
        done = 0
        while done < N:
            n = min(BLOCK, N - done)
            z = sample_unit(uset, rng, n)
            violations[i] += int(np.count_nonzero(predicate.evaluate(to_points(uset, r, z))))
            done += n
    return RunResult(
        grid=grid,
        N=N,
        violations_final=violations,
        estimates=1.0 - violations / N,
        total_draws=m * N,
        per_radius_draws=np.full(m, N, dtype=np.int64),
        empirical_engp=float(m),
        max_S_rows=m,
        max_V_rows=m,
        update_count=m * N,
        seed=int(seed),
        engine="conventional",
    )
