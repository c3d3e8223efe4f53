"""Source-channel exponents with decoder side information under stochastic
likelihood decoding of the bin index.

The exponent is min{E2(R), E5}: a source-coding term that grows with the
binning rate and a rate-free channel term. Both reduce to finite grid
minimizations; the source term collapses to a single pass because
[[f_i - f_j]_+ + R - H_j]_+ = [R + beta_i]_+ with a rate-free
beta_i = min_j ([f_i - f_j]_+ - H_j) over side-information-compatible j.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.special import xlogy

from .probkit import (
    Channel,
    Distribution,
    JointDistribution,
    SimplexGrid,
    conditional_divergence,
    ext_sub,
    kl_vec,
    lattice_rows,
    mutual_information,
    mutual_information_vec,
    pos,
)
from .metrics import DecoderMetric, SourceMetric, eval_f, eval_f_array, eval_g, eval_g_array
from .rce import CurvePoint, ExponentCurve


@dataclass(frozen=True, eq=False)
class JscProblem:
    """Source joint, channel input composition, channel, the two metrics, and
    the search grid."""

    p_uv: JointDistribution
    q_x: Distribution
    w: Channel
    f: SourceMetric
    g: DecoderMetric
    grid: SimplexGrid

    def __post_init__(self):
        if self.q_x.size != self.w.n_inputs:
            raise ValueError("composition does not match channel input alphabet")
        if self.f.kind == "matched" and self.f.joint.table.shape != self.p_uv.table.shape:
            raise ValueError("source metric does not match the source joint")


@dataclass
class JscExponents:
    """Both terms of the exponent and their pointwise minimum."""

    e2_curve: ExponentCurve
    e5: float
    e_of_r: ExponentCurve

    @property
    def saturation_rate(self) -> float:
        """Smallest tabulated rate at which the channel term binds."""
        for p in self.e2_curve.points:
            if p.exponent >= self.e5:
                return p.rate
        return float("inf")


def _ext_sub_vec(a, b):
    """a - b elementwise with (-inf) - (-inf) := 0."""
    with np.errstate(invalid="ignore"):
        out = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return np.where(np.isnan(out), 0.0, out)


def _cond_entropy_rows(tables: np.ndarray) -> np.ndarray:
    """H(row | col) for stacked joints: H(joint) - H(col marginal)."""
    h_joint = -xlogy(tables, tables).sum(axis=(-2, -1))
    cols = tables.sum(axis=-2)
    h_col = -xlogy(cols, cols).sum(axis=-1)
    return h_joint - h_col


def _simplex_joint_tables(n_rows: int, n_cols: int, grid: SimplexGrid) -> np.ndarray:
    """All k-lattice tables of the full (n_rows x n_cols)-simplex, stacked."""
    flat = lattice_rows(grid.resolution, n_rows * n_cols)
    return flat.reshape(-1, n_rows, n_cols)


class _SourceSide:
    """Grid statistics over source joints Q_UV: divergence to the true source,
    metric value, conditional entropy H(U|V), and the rate-free inner term."""

    def __init__(self, prob: JscProblem):
        grid_tables = _simplex_joint_tables(*prob.p_uv.table.shape, prob.grid)
        # the true source is always a candidate, even when it is off the grid
        self.tables = np.concatenate([grid_tables, prob.p_uv.table[None]], axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = xlogy(self.tables, self.tables) - xlogy(self.tables, prob.p_uv.table[None])
        terms = np.where(self.tables == 0.0, 0.0, terms)
        self.d = terms.sum(axis=(1, 2))
        self.f = eval_f_array(prob.f, self.tables)
        self.h = _cond_entropy_rows(self.tables)
        self.v_marg = self.tables.sum(axis=1)
        keys, self.cell = np.unique(
            np.round(self.v_marg * 1e9).astype(np.int64), axis=0, return_inverse=True
        )
        self.cell_marg = keys.astype(float) / 1e9
        delta = prob.grid.marginal_tolerance + 1e-12
        # for each V-cell, the member indices of all cells within delta
        self.neighbors = []
        for c in range(self.cell_marg.shape[0]):
            close = np.max(np.abs(self.cell_marg - self.cell_marg[c]), axis=1) <= delta
            self.neighbors.append(np.flatnonzero(np.isin(self.cell, np.flatnonzero(close))))
        # beta_i = min over compatible j of [f_i - f_j]_+ - H_j
        self.beta = np.empty(self.d.size)
        for i in range(self.d.size):
            j = self.neighbors[self.cell[i]]
            self.beta[i] = np.min(pos(_ext_sub_vec(self.f[i], self.f[j])) - self.h[j])


class _ChannelSide:
    """Grid statistics over channel joints Q_XY with row marginal q_x."""

    def __init__(self, prob: JscProblem):
        rows = lattice_rows(prob.grid.resolution, prob.w.n_outputs)
        n = rows.shape[0]
        n_x = prob.q_x.size
        grids = np.meshgrid(*([np.arange(n)] * n_x), indexing="ij")
        combos = np.stack([g.ravel() for g in grids], axis=1)
        ref = prob.q_x.probs[:, None] * prob.w.matrix
        # the composed true channel is always a candidate, grid or not
        self.tables = np.concatenate(
            [prob.q_x.probs[None, :, None] * rows[combos], ref[None]], axis=0
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = xlogy(self.tables, self.tables) - xlogy(self.tables, ref[None])
        terms = np.where(self.tables == 0.0, 0.0, terms)
        self.d = terms.sum(axis=(1, 2))
        self.g = eval_g_array(prob.g, self.tables)
        self.i = mutual_information_vec(self.tables)
        self.y_marg = self.tables.sum(axis=1)
        keys, self.cell = np.unique(
            np.round(self.y_marg * 1e9).astype(np.int64), axis=0, return_inverse=True
        )
        self.cell_marg = keys.astype(float) / 1e9
        delta = prob.grid.marginal_tolerance + 1e-12
        self.neighbors = []
        for c in range(self.cell_marg.shape[0]):
            close = np.max(np.abs(self.cell_marg - self.cell_marg[c]), axis=1) <= delta
            self.neighbors.append(np.flatnonzero(np.isin(self.cell, np.flatnonzero(close))))


def _source_side(prob: JscProblem) -> _SourceSide:
    side = prob.__dict__.get("_source_side")
    if side is None:
        side = _SourceSide(prob)
        object.__setattr__(prob, "_source_side", side)
    return side


def _channel_side(prob: JscProblem) -> _ChannelSide:
    side = prob.__dict__.get("_channel_side")
    if side is None:
        side = _ChannelSide(prob)
        object.__setattr__(prob, "_channel_side", side)
    return side


def e1_source(r: float, q_uv: JointDistribution, prob: JscProblem) -> float:
    """min over grid joints Q_U'V sharing the side-information marginal of
    [[f(Q_UV) - f(Q_U'V)]_+ + R - H(U'|V)]_+."""
    if r < 0:
        raise ValueError("rate must be >= 0")
    side = _source_side(prob)
    delta = prob.grid.marginal_tolerance + 1e-12
    v = q_uv.col_marginal().probs
    ok = np.max(np.abs(side.v_marg - v[None, :]), axis=1) <= delta
    f_q = eval_f(prob.f, q_uv)
    cands_f = side.f[ok]
    cands_h = side.h[ok]
    # the queried joint itself is always an admissible competitor
    cands_f = np.append(cands_f, f_q)
    cands_h = np.append(cands_h, _cond_entropy_rows(q_uv.table[None])[0])
    beta = np.min(pos(_ext_sub_vec(f_q, cands_f)) - cands_h)
    return float(pos(r + beta))


def e2_source(r: float, prob: JscProblem) -> float:
    """Source term: min over Q_UV of D(Q_UV||P_UV) + E1(R, Q_UV)."""
    if r < 0:
        raise ValueError("rate must be >= 0")
    side = _source_side(prob)
    return float(np.min(side.d + pos(r + side.beta)))


def e3_pairwise(
    q_uv: JointDistribution,
    q_xy: JointDistribution,
    q_upv: JointDistribution,
    q_xpy: JointDistribution,
    prob: JscProblem,
) -> float:
    """[[h(Q_UV,Q_XY) - h(Q_U'V,Q_X'Y)]_+ + I(X';Y) - H(U'|V)]_+ with
    h = f + g."""
    delta = prob.grid.marginal_tolerance + 1e-12
    if np.max(np.abs(q_uv.col_marginal().probs - q_upv.col_marginal().probs)) > delta:
        raise ValueError("side-information marginals do not agree")
    if np.max(np.abs(q_xy.col_marginal().probs - q_xpy.col_marginal().probs)) > delta:
        raise ValueError("channel output marginals do not agree")
    if np.max(np.abs(q_xpy.row_marginal().probs - prob.q_x.probs)) > delta:
        raise ValueError("competing codeword marginal is off the composition")
    h_true = eval_f(prob.f, q_uv) + eval_g(prob.g, q_xy)
    h_comp = eval_f(prob.f, q_upv) + eval_g(prob.g, q_xpy)
    dh = ext_sub(h_true, h_comp)
    gap = mutual_information(q_xpy) - _cond_entropy_rows(q_upv.table[None])[0]
    return float(pos(pos(dh) + gap))


def e5_channel(prob: JscProblem) -> float:
    """Rate-free channel term: four-level grid minimum over the outer pair
    (Q_UV, Q_XY) and the inner competitor pair (Q_U'V, Q_X'Y)."""
    src = _source_side(prob)
    ch = _channel_side(prob)
    best = np.inf
    pair_cache: Dict[Tuple[int, int], Tuple[np.ndarray, np.ndarray]] = {}
    for vc in range(src.cell_marg.shape[0]):
        i1 = np.flatnonzero(src.cell == vc)
        j1 = src.neighbors[vc]
        for yc in range(ch.cell_marg.shape[0]):
            i2 = np.flatnonzero(ch.cell == yc)
            j2 = ch.neighbors[yc]
            # competitor pair values, flattened over (j1, j2)
            h_pair = (src.f[j1][:, None] + ch.g[j2][None, :]).ravel()
            c_pair = (ch.i[j2][None, :] - src.h[j1][:, None]).ravel()
            a = src.f[i1][:, None] + ch.g[i2][None, :]
            e4 = np.min(
                pos(pos(_ext_sub_vec(a[..., None], h_pair[None, None, :])) + c_pair),
                axis=2,
            )
            total = src.d[i1][:, None] + ch.d[i2][None, :] + e4
            cur = float(np.min(total))
            if cur < best:
                best = cur
    return max(best, 0.0)


def jsc_exponent(prob: JscProblem, rates: Sequence[float]) -> JscExponents:
    """Assemble E(R) = min{E2(R), E5} over the given rate grid."""
    if any(r < 0 for r in rates):
        raise ValueError("rates must be >= 0")
    e5 = e5_channel(prob)
    e2_points = []
    e_points = []
    for r in rates:
        r = float(r)
        e2 = e2_source(r, prob)
        e2_points.append(CurvePoint(r, e2))
        e_points.append(CurvePoint(r, min(e2, e5)))
    return JscExponents(ExponentCurve(e2_points), e5, ExponentCurve(e_points))
