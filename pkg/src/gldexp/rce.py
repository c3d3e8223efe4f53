"""Random coding exponent of the generalized likelihood decoder over
constant-composition ensembles.

The engine enumerates all grid joints Q with row marginal Q_X once, groups
them by exact column marginal, and reduces each group to Pareto frontiers:
for the inner minimization only couplings with (small I, large g) can achieve
the minimum, and for the outer one only joints with (small D, small g).
Since [I(Q') - R + [g(Q)-g(Q')]_+]_+ = [alpha(Q) - R]_+ with
alpha(Q) = min_{Q'} (I(Q') + [g(Q)-g(Q')]_+), the per-joint inner minimum is
rate-free and a whole rate sweep costs a single grid pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import xlogy

from .metrics import DecoderMetric, eval_g, eval_g_array
from .probkit import (
    Channel,
    Distribution,
    JointDistribution,
    SimplexGrid,
    conditional_divergence,
    compose,
    enumerate_couplings,
    ext_sub,
    lattice_rows,
    mutual_information,
    pos,
)

_CHUNK = 1 << 20


@dataclass(frozen=True, eq=False)
class RceProblem:
    """Composition, true channel, decoder metric and search grid."""

    q_x: Distribution
    w: Channel
    metric: DecoderMetric
    grid: SimplexGrid

    def __post_init__(self):
        if self.q_x.size != self.w.n_inputs:
            raise ValueError("composition does not match channel input alphabet")
        if self.metric.kind in ("matched", "mismatched"):
            ref = self.metric.channel
            if ref.n_inputs != self.w.n_inputs or ref.n_outputs != self.w.n_outputs:
                raise ValueError("metric channel dimensions do not match")


@dataclass
class CurvePoint:
    rate: float
    exponent: float
    witness_q: Optional[JointDistribution] = None
    witness_qprime: Optional[JointDistribution] = None


@dataclass
class ExponentCurve:
    points: List[CurvePoint] = field(default_factory=list)

    def __post_init__(self):
        rates = [p.rate for p in self.points]
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ValueError("curve rates must be strictly increasing")

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    @property
    def exponents(self) -> np.ndarray:
        return np.array([p.exponent for p in self.points])


def pairwise_exponent(
    q: JointDistribution,
    qp: JointDistribution,
    r: float,
    m: DecoderMetric,
    marginal_tol: Optional[float] = None,
) -> float:
    """[I(Q') - R + [g(Q) - g(Q')]_+]_+ with extended-real conventions."""
    if np.max(np.abs(q.row_marginal().probs - qp.row_marginal().probs)) > 1e-9:
        raise ValueError("joints do not share the row marginal")
    if marginal_tol is not None:
        gap = np.max(np.abs(q.col_marginal().probs - qp.col_marginal().probs))
        if gap > marginal_tol + 1e-12:
            raise ValueError("column marginal mismatch %r beyond tolerance" % gap)
    dg = ext_sub(eval_g(m, q), eval_g(m, qp))
    return float(pos((mutual_information(qp) - r) + pos(dg)))


# ---------------------------------------------------------------------------
# grid engine
# ---------------------------------------------------------------------------


class _RceEngine:
    """Precomputed grid statistics for one (composition, channel, metric)."""

    def __init__(self, prob: RceProblem):
        self.prob = prob
        q_x = prob.q_x.probs
        k = prob.grid.resolution
        n_y = prob.w.n_outputs
        self.rows = lattice_rows(k, n_y)
        n_r = self.rows.shape[0]
        n_x = q_x.size
        n = n_r ** n_x

        d_row = np.empty((n_x, n_r))
        g_row = None
        coef = prob.metric.coefficients()
        for x in range(n_x):
            d_row[x] = _kl_rows(self.rows, prob.w.matrix[x])
        if coef is not None:
            g_row = np.empty((n_x, n_r))
            for x in range(n_x):
                g_row[x] = q_x[x] * _linear_rows(self.rows, coef[x])
        h_row = -xlogy(self.rows, self.rows).sum(axis=1)

        self.d = np.empty(n)
        self.i = np.empty(n)
        self.g = np.empty(n)
        col = np.empty((n, n_y))
        shape = (n_r,) * n_x
        for lo in range(0, n, _CHUNK):
            hi = min(lo + _CHUNK, n)
            idx = np.unravel_index(np.arange(lo, hi), shape)
            d = np.zeros(hi - lo)
            hr = np.zeros(hi - lo)
            c = np.zeros((hi - lo, n_y))
            for x in range(n_x):
                d += q_x[x] * d_row[x][idx[x]]
                hr += q_x[x] * h_row[idx[x]]
                c += q_x[x] * self.rows[idx[x]]
            self.d[lo:hi] = d
            col[lo:hi] = c
            h_col = -xlogy(c, c).sum(axis=1)
            self.i[lo:hi] = np.maximum(h_col - hr, 0.0)
            if g_row is not None:
                g = np.zeros(hi - lo)
                for x in range(n_x):
                    g += g_row[x][idx[x]]
                self.g[lo:hi] = g
        if g_row is None:
            self.g = prob.metric.beta * self.i.copy()

        keys = np.round(col * 1e9).astype(np.int64)
        self.col_values, inv = np.unique(keys, axis=0, return_inverse=True)
        self.col_values = self.col_values / 1e9
        self._build_frontiers(inv.ravel())
        self._build_alpha()

    # -- frontier construction ------------------------------------------------

    def _build_frontiers(self, inv: np.ndarray):
        order = np.lexsort((self.i, inv))
        bounds = np.searchsorted(inv[order], np.arange(self.col_values.shape[0] + 1))
        self.group_members = [
            order[bounds[g]:bounds[g + 1]] for g in range(self.col_values.shape[0])
        ]
        self.inner_frontier = []
        for gidx in range(self.col_values.shape[0]):
            members = order[bounds[gidx]:bounds[gidx + 1]]
            # sorted by I ascending: keep only strict improvements in g
            gvals = self.g[members]
            cmax = np.maximum.accumulate(gvals)
            keep = np.ones(members.size, dtype=bool)
            keep[1:] = gvals[1:] > cmax[:-1]
            self.inner_frontier.append(members[keep])

        order_d = np.lexsort((self.d, inv))
        bounds_d = np.searchsorted(inv[order_d], np.arange(self.col_values.shape[0] + 1))
        self.outer_frontier = []
        for gidx in range(self.col_values.shape[0]):
            members = order_d[bounds_d[gidx]:bounds_d[gidx + 1]]
            # sorted by D ascending: keep only strict improvements in -g;
            # infinite-D members (sorted last) can never win and are dropped
            # unless the whole group is infinite.
            gvals = self.g[members]
            cmin = np.minimum.accumulate(gvals)
            keep = np.ones(members.size, dtype=bool)
            keep[1:] = gvals[1:] < cmin[:-1]
            finite = np.isfinite(self.d[members])
            if finite.any():
                keep &= finite
            self.outer_frontier.append(members[keep])

    # -- rate-free inner minimum ----------------------------------------------

    def _build_alpha(self):
        delta = self.prob.grid.marginal_tolerance + 1e-12
        u = self.col_values
        n_g = u.shape[0]
        # neighbor search windowed on the first column-marginal coordinate
        first_order = np.argsort(u[:, 0], kind="stable")
        first_sorted = u[first_order, 0]
        q_idx: List[np.ndarray] = []
        d_list: List[np.ndarray] = []
        a_list: List[np.ndarray] = []
        w_list: List[np.ndarray] = []
        for gidx in range(n_g):
            lo = np.searchsorted(first_sorted, u[gidx, 0] - delta, side="left")
            hi = np.searchsorted(first_sorted, u[gidx, 0] + delta, side="right")
            window = first_order[lo:hi]
            gaps = np.abs(u[window] - u[gidx]).max(axis=1)
            neigh = window[gaps <= delta]
            cand = np.concatenate([self.inner_frontier[j] for j in neigh])
            ic, gc = self.i[cand], self.g[cand]
            queries = self.outer_frontier[gidx]
            if queries.size == 0:
                continue
            gamma = self.g[queries]
            with np.errstate(invalid="ignore"):
                diff = gamma[:, None] - gc[None, :]
            diff = np.where(
                np.isneginf(gamma)[:, None] & np.isneginf(gc)[None, :], 0.0, diff
            )
            vals = ic[None, :] + np.maximum(diff, 0.0)
            jbest = np.argmin(vals, axis=1)
            q_idx.append(queries)
            d_list.append(self.d[queries])
            a_list.append(vals[np.arange(queries.size), jbest])
            w_list.append(cand[jbest])
        self.cand_q = np.concatenate(q_idx)
        self.cand_d = np.concatenate(d_list)
        self.cand_alpha = np.concatenate(a_list)
        self.cand_witness = np.concatenate(w_list)

    # -- evaluation ------------------------------------------------------------

    def evaluate(self, r: float) -> Tuple[float, int, int]:
        total = self.cand_d + np.maximum(self.cand_alpha - r, 0.0)
        best = int(np.argmin(total))
        return float(total[best]), int(self.cand_q[best]), int(self.cand_witness[best])

    def joint_table(self, flat: int) -> np.ndarray:
        n_x = self.prob.q_x.size
        idx = np.unravel_index(flat, (self.rows.shape[0],) * n_x)
        return self.prob.q_x.probs[:, None] * self.rows[list(idx)]


def _kl_rows(rows: np.ndarray, ref: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = xlogy(rows, rows) - xlogy(rows, ref[None, :])
    terms = np.where(rows == 0.0, 0.0, terms)
    return terms.sum(axis=1)


def _linear_rows(rows: np.ndarray, coef: np.ndarray) -> np.ndarray:
    finite = np.where(np.isneginf(coef), 0.0, coef)
    vals = (rows * finite).sum(axis=1)
    blocked = (rows[:, np.isneginf(coef)] > 0.0).any(axis=1)
    return np.where(blocked, -np.inf, vals)


def _engine(prob: RceProblem) -> _RceEngine:
    eng = prob.__dict__.get("_engine")
    if eng is None:
        eng = _RceEngine(prob)
        object.__setattr__(prob, "_engine", eng)
    return eng


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def inner_exponent(
    q: JointDistribution, r: float, prob: RceProblem, refine: bool = True
) -> Tuple[float, JointDistribution]:
    """min over couplings Q' (shared marginals) of the pairwise exponent,
    with an optional local refinement pass; returns the achieving Q'."""
    q_y = q.col_marginal()
    best = np.inf
    witness = None
    for qp in enumerate_couplings(prob.q_x, q_y, prob.grid):
        val = pairwise_exponent(q, qp, r, prob.metric)
        if val < best:
            best, witness = val, qp
    if witness is None:
        raise ValueError("empty coupling stream; grid too coarse")
    if refine:
        gq = eval_g(prob.metric, q)
        col_q = q.col_marginal().probs
        delta = prob.grid.marginal_tolerance + 1e-12

        def objective(tp):
            dg = ext_sub(gq, float(eval_g_array(prob.metric, tp)))
            iqp = _table_mi(tp)
            return float(pos((iqp - r) + pos(dg)))

        def feasible(tp):
            return np.max(np.abs(tp.sum(axis=0) - col_q)) <= delta

        table, best = _refine_table(
            witness.table, best, objective, prob, feasible=feasible
        )
        witness = JointDistribution(table)
    return best, witness


def random_coding_exponent(
    prob: RceProblem, r: float, refine: bool = True
) -> Tuple[float, Tuple[JointDistribution, JointDistribution]]:
    """min over grid joints Q of D(Q||Q_X x W) + inner exponent, plus one
    local refinement pass around the grid argmin; witnesses for (Q, Q')."""
    if r < 0:
        raise ValueError("rate must be >= 0")
    eng = _engine(prob)
    val, qi, ji = eng.evaluate(r)
    tq, tp = eng.joint_table(qi), eng.joint_table(ji)
    if refine:
        val, tq, tp = _refine_pair(prob, r, tq, tp, val)
    return max(val, 0.0), (JointDistribution(tq), JointDistribution(tp))


def exponent_curve(
    prob: RceProblem, rates: Sequence[float], refine: bool = True
) -> ExponentCurve:
    points = []
    prev = None
    for r in rates:
        val, (wq, wp) = random_coding_exponent(prob, float(r), refine=refine)
        if prev is not None:
            val = min(val, prev)  # clip grid noise so the curve is nonincreasing
        prev = val
        points.append(CurvePoint(float(r), val, wq, wp))
    return ExponentCurve(points)


_ML_PROBLEMS: dict = {}


def ml_baseline(
    q_x: Distribution, w: Channel, r: float, grid: SimplexGrid, refine: bool = True
) -> float:
    """min over joints with row marginal q_x of D(Q||Q_X x W) + [I(Q) - R]_+."""
    if r < 0:
        raise ValueError("rate must be >= 0")
    key = (q_x.probs.tobytes(), w.matrix.tobytes(), grid.resolution, grid.marginal_tolerance)
    prob = _ML_PROBLEMS.get(key)
    if prob is None:
        prob = RceProblem(q_x, w, DecoderMetric("mmi", beta=1.0), grid)
        _ML_PROBLEMS[key] = prob
    eng = _engine(prob)
    total = eng.d + np.maximum(eng.i - r, 0.0)
    best = int(np.argmin(total))
    val = float(total[best])
    if refine:
        table = eng.joint_table(best)

        def objective(tp):
            d = conditional_divergence(JointDistribution(tp), w)
            return d + max(_table_mi(tp) - r, 0.0)

        _, val = _refine_table(table, val, objective, prob)
    return max(val, 0.0)


def critical_rate(prob: RceProblem) -> Tuple[float, float, float]:
    """Zero-crossing rate R0 of E(R) with its one-dimensional bounds.

    All three minimizations run over couplings whose output marginal is
    consistent with (Q_X x W)_Y (up to the grid tolerance), plus Q_X x W
    itself. The bracket [g0 - g(Q)]_+ vanishes exactly when g(Q) >= g0, so
    the upper bound is min{I(Q): g(Q) >= g(Q_X x W)}; the lower bound is the
    t-grid relaxation max_t min_Q {I - t g + t g0}.
    """
    eng = _engine(prob)
    joint0 = compose(prob.q_x, prob.w)
    g0 = eval_g(prob.metric, joint0)
    c0 = joint0.col_marginal().probs
    delta = prob.grid.marginal_tolerance + 1e-12

    mask = np.abs(eng.col_values - c0[None, :]).max(axis=1) <= delta
    groups = np.nonzero(mask)[0]
    members = np.concatenate(
        [eng.group_members[j] for j in groups] or [np.array([], int)]
    )
    i0 = mutual_information(joint0)
    i_c = np.append(eng.i[members], i0)
    g_c = np.append(eng.g[members], g0)

    r0 = float(np.min(i_c + pos(ext_sub(g0, g_c))))

    feasible = g_c >= g0 - 1e-12
    upper = float(i_c[feasible].min())

    lower = 0.0
    for t in np.linspace(0.0, 1.0, 101):
        if t == 0.0:
            vals = i_c
        else:
            with np.errstate(invalid="ignore"):
                vals = np.where(np.isneginf(g_c), np.inf, i_c - t * g_c + t * g0)
        lower = max(lower, float(np.min(vals)))
    return r0, lower, upper


# ---------------------------------------------------------------------------
# local refinement
# ---------------------------------------------------------------------------


def _table_mi(table: np.ndarray) -> float:
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    h = float(-xlogy(table, table).sum())
    return max(float(-xlogy(rows, rows).sum() - xlogy(cols, cols).sum()) - h, 0.0)


def _refine_table(table, value, objective, prob, feasible=None, sweeps=1):
    """Coordinate descent on conditional rows at step 1/(4k): move step mass
    between output symbols inside one input row, keeping the row marginal."""
    q_x = prob.q_x.probs
    step = 1.0 / (4 * prob.grid.resolution)
    table = table.copy()
    n_x, n_y = table.shape
    for _ in range(sweeps):
        improved = False
        for x in range(n_x):
            mass = step * q_x[x]
            if mass == 0.0:
                continue
            for y1 in range(n_y):
                for y2 in range(n_y):
                    if y1 == y2 or table[x, y1] < mass - 1e-15:
                        continue
                    trial = table.copy()
                    trial[x, y1] -= mass
                    trial[x, y2] += mass
                    trial = np.clip(trial, 0.0, None)
                    if feasible is not None and not feasible(trial):
                        continue
                    cand = objective(trial)
                    if cand < value - 1e-15:
                        table, value = trial, cand
                        improved = True
        if not improved:
            break
    return table, value


def _refine_pair(prob, r, tq, tp, value):
    delta = prob.grid.marginal_tolerance + 1e-12
    metric = prob.metric

    def total(a, b):
        d = conditional_divergence(JointDistribution(a), prob.w)
        dg = ext_sub(float(eval_g_array(metric, a)), float(eval_g_array(metric, b)))
        return d + float(pos((_table_mi(b) - r) + pos(dg)))

    def feas_pair(a, b):
        return np.max(np.abs(a.sum(axis=0) - b.sum(axis=0))) <= delta

    tp, value = _refine_table(
        tp, value, lambda t: total(tq, t), prob, feasible=lambda t: feas_pair(tq, t)
    )
    tq, value = _refine_table(
        tq, value, lambda t: total(t, tp), prob, feasible=lambda t: feas_pair(t, tp)
    )
    return value, tq, tp
