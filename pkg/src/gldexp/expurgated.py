"""Expurgated exponents for the stochastic likelihood decoder.

The grid path enumerates pairwise codeword joints Q_XX' and, inside each,
channel conditionals Q_{Y|XX'}; the objective couples the decoder metric g on
both single-letter marginals Q_XY and Q_X'Y with the normalization term
alpha(R, Q_Y). The z-channel closed forms give an independent one-dimensional
check of the whole construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import xlogy

from .probkit import (
    Channel,
    Distribution,
    JointDistribution,
    NEG_INF,
    SimplexGrid,
    entropy_vec,
    lattice_rows,
    mutual_information,
    mutual_information_vec,
    pos,
)
from .metrics import DecoderMetric, eval_g_array
from . import rce

_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class ExpurgationProblem:
    """Constant-composition pairwise setup: input composition, true channel,
    decoder metric, and grid resolution. epsilon is the expurgation slack in
    nats; the reported exponent takes it to zero."""

    q_x: Distribution
    w: Channel
    metric: DecoderMetric
    grid: SimplexGrid
    epsilon: float = 0.0
    _alpha_cache: Dict[tuple, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.q_x.size != self.w.n_inputs:
            raise ValueError("input alphabet mismatch")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


def _ext_sub_vec(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a - b elementwise with (-inf) - (-inf) := 0."""
    with np.errstate(invalid="ignore"):
        out = a - b
    return np.where(np.isnan(out), 0.0, out)


def _conditional_stack(q_y: np.ndarray, rows: np.ndarray, combos: np.ndarray) -> np.ndarray:
    """Joint tables q_y(y) * Q_{X|Y}(x|y), oriented (combo, x, y)."""
    cond = rows[combos]  # (n, n_y, n_x)
    return np.swapaxes(cond, 1, 2) * q_y[None, None, :]


def alpha(r: float, q_y: Distribution, prob: ExpurgationProblem) -> float:
    """Normalization exponent: sup over grid conditionals Q_{X|Y} with
    I(Q) <= r of g(Q) - I(Q), plus r; -inf on an empty feasible set."""
    if r < 0:
        raise ValueError("rate must be >= 0")
    n_x = prob.q_x.size
    rows = lattice_rows(prob.grid.resolution, n_x)
    n = rows.shape[0]
    n_y = q_y.size
    best = NEG_INF
    idx = np.arange(n)
    grids = np.meshgrid(*([idx] * n_y), indexing="ij")
    combos = np.stack([g.ravel() for g in grids], axis=1)
    for lo in range(0, combos.shape[0], _CHUNK):
        chunk = combos[lo : lo + _CHUNK]
        tables = _conditional_stack(q_y.probs, rows, chunk)
        i_vals = mutual_information_vec(tables)
        ok = i_vals <= r + 1e-12
        if not ok.any():
            continue
        g_vals = eval_g_array(prob.metric, tables[ok])
        diff = _ext_sub_vec(g_vals, i_vals[ok])
        cur = float(np.max(diff))
        if cur > best:
            best = cur
    if best == NEG_INF:
        return NEG_INF
    return best + r


def _alpha_cached(r: float, q_y_vec: np.ndarray, prob: ExpurgationProblem) -> float:
    key = (round(r, 12),) + tuple(np.round(q_y_vec, 6))
    val = prob._alpha_cache.get(key)
    if val is None:
        val = alpha(r, Distribution(q_y_vec), prob)
        prob._alpha_cache[key] = val
    return val


def _cond_div_vec(q_xy: np.ndarray, q_x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """D(Q_{Y|X} || W | Q_X) for a stack of (X, Y) joints with fixed Q_X."""
    ref = q_x[None, :, None] * w[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = xlogy(q_xy, q_xy) - xlogy(q_xy, ref)
    terms = np.where(q_xy == 0.0, 0.0, terms)
    return terms.sum(axis=(1, 2))


def gamma(q_xx: JointDistribution, r: float, prob: ExpurgationProblem) -> float:
    """Pairwise distance functional: inf over grid conditionals Q_{Y|XX'} of
    D(Q_{Y|X}||W|Q_X) + I(X';Y|X) + [max{g(Q_XY), alpha(r,Q_Y)} - g(Q_X'Y)]_+."""
    n_x = prob.q_x.size
    delta = prob.grid.marginal_tolerance + 1e-12
    if q_xx.row_alphabet != n_x or q_xx.col_alphabet != n_x:
        raise ValueError("pairwise joint must be square over the input alphabet")
    if np.max(np.abs(q_xx.table.sum(axis=1) - prob.q_x.probs)) > delta:
        raise ValueError("row marginal of the pairwise joint is off the composition")
    if np.max(np.abs(q_xx.table.sum(axis=0) - prob.q_x.probs)) > delta:
        raise ValueError("column marginal of the pairwise joint is off the composition")

    n_y = prob.w.n_outputs
    rows = lattice_rows(prob.grid.resolution, n_y)
    n = rows.shape[0]
    pair_mass = q_xx.table.ravel()
    active = np.flatnonzero(pair_mass > 0.0)
    n_act = active.size
    q_x_probs = q_xx.table.sum(axis=1)
    h_pair = float(entropy_vec(pair_mass))
    h_x = float(entropy_vec(q_x_probs))

    idx = np.arange(n)
    grids = np.meshgrid(*([idx] * n_act), indexing="ij")
    combos = np.stack([g.ravel() for g in grids], axis=1)
    best = np.inf
    for lo in range(0, combos.shape[0], _CHUNK):
        chunk = combos[lo : lo + _CHUNK]
        m = chunk.shape[0]
        full = np.zeros((m, n_x * n_x, n_y))
        full[:, active, :] = pair_mass[None, active, None] * rows[chunk]
        full = full.reshape(m, n_x, n_x, n_y)
        q_xy = full.sum(axis=2)
        q_xpy = full.sum(axis=1)
        q_y = q_xy.sum(axis=1)

        d_vals = _cond_div_vec(q_xy, q_x_probs, prob.w.matrix)
        # I(X';Y|X) = H(X'|X) + H(Y|X) - H(X'Y|X), all conditioned the same way
        h_full = entropy_vec(full.reshape(m, -1))
        h_xy = entropy_vec(q_xy.reshape(m, -1))
        i_cond = np.maximum((h_pair - h_x) + (h_xy - h_x) - (h_full - h_x), 0.0)

        g_xy = eval_g_array(prob.metric, q_xy)
        g_xpy = eval_g_array(prob.metric, q_xpy)
        keys, inverse = np.unique(np.round(q_y * 1e6).astype(np.int64), axis=0, return_inverse=True)
        a_vals = np.empty(keys.shape[0])
        first = np.zeros(keys.shape[0], dtype=int)
        first[inverse[::-1]] = np.arange(m - 1, -1, -1)
        for j in range(keys.shape[0]):
            a_vals[j] = _alpha_cached(r, q_y[first[j]], prob)
        bracket = np.maximum(_ext_sub_vec(np.maximum(g_xy, a_vals[inverse]), g_xpy), 0.0)
        total = d_vals + i_cond + bracket
        cur = float(np.min(total))
        if cur < best:
            best = cur
    if best < -1e-9:
        raise AssertionError("pairwise distance functional went negative: %g" % best)
    return max(best, 0.0)


def _pairwise_joints(prob: ExpurgationProblem, r: float) -> List[JointDistribution]:
    """Grid joints Q_XX' with both marginals at the composition and I <= r."""
    delta = prob.grid.marginal_tolerance + 1e-12
    n_x = prob.q_x.size
    rows = lattice_rows(prob.grid.resolution, n_x)
    out = []
    saw_product = False
    product = np.outer(prob.q_x.probs, prob.q_x.probs)
    for combo in itertools.product(range(rows.shape[0]), repeat=n_x):
        table = prob.q_x.probs[:, None] * rows[list(combo)]
        if np.max(np.abs(table.sum(axis=0) - prob.q_x.probs)) > delta:
            continue
        j = JointDistribution(table)
        if mutual_information(j) > r + 1e-12:
            continue
        if np.max(np.abs(table - product)) <= 1e-12:
            saw_product = True
        out.append(j)
    if not saw_product:
        out.append(JointDistribution(product))
    return out


def expurgated_exponent(prob: ExpurgationProblem, r: float) -> float:
    """min over feasible pairwise joints of Gamma(Q_XX', r) + I(X;X') - r,
    clamped at zero for reporting; +inf when no pairwise joint is feasible."""
    if r <= 0:
        raise ValueError("rate must be > 0")
    r_eff = r - prob.epsilon
    if r_eff <= 0:
        raise ValueError("rate must exceed the expurgation slack")
    best = np.inf
    for q_xx in _pairwise_joints(prob, r_eff):
        val = gamma(q_xx, r_eff, prob) + mutual_information(q_xx) - r_eff
        if val < best:
            best = val
    if not np.isfinite(best) and best > 0:
        return np.inf
    return max(best, 0.0)


def bhattacharyya_matrix(w: Channel) -> np.ndarray:
    """d_B(x, x') = -log sum_y sqrt(W(y|x) W(y|x')); zero on the diagonal."""
    overlap = np.sqrt(w.matrix) @ np.sqrt(w.matrix).T
    with np.errstate(divide="ignore"):
        return -np.log(overlap)


def ckm_baseline(q_x: Distribution, w: Channel, r: float, grid: SimplexGrid) -> float:
    """Classical expurgated exponent: min over pairwise joints (marginals q_x,
    I <= r) of the expected Bhattacharyya distance plus I - r."""
    if r <= 0:
        raise ValueError("rate must be > 0")
    d_b = bhattacharyya_matrix(w)
    mmi = DecoderMetric("mmi", beta=1.0)
    prob = ExpurgationProblem(q_x, w, mmi, grid)
    best = np.inf
    for q_xx in _pairwise_joints(prob, r):
        mask = q_xx.table > 0.0
        if np.isinf(d_b[mask]).any():
            continue
        val = float((q_xx.table[mask] * d_b[mask]).sum()) + mutual_information(q_xx) - r
        if val < best:
            best = val
    return best if np.isfinite(best) else np.inf


# ---------------------------------------------------------------------------
# z-channel closed forms
# ---------------------------------------------------------------------------


def binary_entropy(p: float) -> float:
    """h(p) in nats."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


def inverse_binary_entropy(val: float) -> float:
    """h^{-1} on [0, 1/2] by bisection to 1e-12."""
    if val <= 0.0:
        return 0.0
    if val >= math.log(2):
        return 0.5
    lo, hi = 0.0, 0.5
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < val:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def zchannel_matrix(w_param: float) -> Channel:
    """Binary z-channel: input 1 is noiseless, input 0 flips w.p. 1 - w."""
    return Channel(np.array([[w_param, 1.0 - w_param], [0.0, 1.0]]))


def _h_vec(p: np.ndarray) -> np.ndarray:
    return -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p))


def ckm_zchannel(r: float, w_param: float) -> float:
    """Two-branch closed form of the classical expurgated exponent at uniform
    inputs on the z-channel."""
    root = math.sqrt(1.0 - w_param)
    threshold = math.log(2) - binary_entropy(1.0 / (1.0 + root))
    if r <= threshold:
        return -0.5 * inverse_binary_entropy(math.log(2) - r) * math.log(1.0 - w_param)
    return math.log(2.0 / (1.0 + root)) - r


def gld_zchannel(r: float, w_param: float, include_rate_term: bool = True, points: int = 1001) -> float:
    """Expurgated exponent of the likelihood decoder on the z-channel at
    uniform inputs, by dense 2-D minimization over (theta, q <= 2 theta)."""
    theta = np.linspace(0.0, 0.5, points)
    feasible = math.log(2) - _h_vec(2.0 * theta) <= r + 1e-12
    theta = theta[feasible]
    if theta.size == 0:
        return np.inf
    frac = np.linspace(0.0, 1.0, points)
    q = 2.0 * theta[:, None] * frac[None, :]
    g_q = 0.5 * q * math.log(w_param) + 0.5 * (1.0 - q) * math.log(1.0 - w_param)
    i_q = _h_vec(0.5 * q) - 0.5 * _h_vec(q)
    obj = -g_q - _h_vec(2.0 * theta)[:, None] - theta[:, None] * _h_vec(frac)[None, :]
    if include_rate_term:
        obj = obj + np.maximum(r - i_q, 0.0)
    return float(np.min(obj)) + math.log(2) - r


def zchannel_curves(
    w_param: float,
    rates: Sequence[float],
    grid: Optional[SimplexGrid] = None,
    points: int = 1001,
) -> List[Tuple[float, float, float, float]]:
    """Rows (rate, e_gld, e_ckm, e_rc) for the z-channel at uniform inputs.
    e_rc is the random coding exponent under the matched likelihood decoder."""
    if not 0.0 < w_param < 1.0:
        raise ValueError("w parameter must lie in (0, 1)")
    if grid is None:
        grid = SimplexGrid(64)
    w = zchannel_matrix(w_param)
    q_x = Distribution(np.array([0.5, 0.5]))
    metric = DecoderMetric("matched", beta=1.0, channel=w)
    prob = rce.RceProblem(q_x, w, metric, grid)
    out = []
    for r in rates:
        r = float(r)
        if not 0.0 < r < math.log(2):
            raise ValueError("rates must lie in (0, log 2)")
        e_gld = gld_zchannel(r, w_param, points=points)
        e_ckm = ckm_zchannel(r, w_param)
        e_rc, _ = rce.random_coding_exponent(prob, r)
        out.append((r, e_gld, e_ckm, e_rc))
    return out
