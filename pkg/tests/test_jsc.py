"""Source-channel exponent: formula checks and a full brute-force oracle."""

import numpy as np
import pytest

from gldexp.probkit import (
    Channel,
    Distribution,
    JointDistribution,
    SimplexGrid,
    lattice_rows,
    mutual_information,
)
from gldexp.metrics import DecoderMetric, SourceMetric
from gldexp.jsc import (
    JscProblem,
    e1_source,
    e2_source,
    e3_pairwise,
    e5_channel,
    jsc_exponent,
)

# everything on the k = 8 grid so the oracle and the engine see identical sets
P_UV = JointDistribution(np.array([[0.375, 0.125], [0.125, 0.375]]))
UNIFORM = Distribution(np.array([0.5, 0.5]))
BSC25 = Channel(np.array([[0.75, 0.25], [0.25, 0.75]]))
F_MATCHED = SourceMetric("matched", beta=1.0, joint=P_UV)
G_MATCHED = DecoderMetric("matched", beta=1.0, channel=BSC25)


def make_problem(k=8):
    return JscProblem(P_UV, UNIFORM, BSC25, F_MATCHED, G_MATCHED, SimplexGrid(k))


def entropy_cond(table):
    t = np.asarray(table, dtype=float)
    h_joint = -np.sum(t[t > 0] * np.log(t[t > 0]))
    col = t.sum(axis=0)
    h_col = -np.sum(col[col > 0] * np.log(col[col > 0]))
    return h_joint - h_col


def test_e3_formula_examples():
    prob = make_problem()
    # equal metric values, I(X';Y) matching H(U'|V) exactly: everything cancels
    q = P_UV
    q_xy = JointDistribution(UNIFORM.probs[:, None] * BSC25.matrix)
    val = e3_pairwise(q, q_xy, q, q_xy, prob)
    gap = mutual_information(q_xy) - entropy_cond(q.table)
    assert val == pytest.approx(max(gap, 0.0), abs=1e-12)


def test_e3_marginal_validation():
    prob = make_problem()
    q_xy = JointDistribution(UNIFORM.probs[:, None] * BSC25.matrix)
    bad_v = JointDistribution(np.array([[0.7, 0.1], [0.1, 0.1]]))
    with pytest.raises(ValueError):
        e3_pairwise(P_UV, q_xy, bad_v, q_xy, prob)


def test_e3_numeric_cases():
    # direct checks of [[dh]_+ + I - H]_+ arithmetic
    assert max(max(0.3, 0.0) + 0.4 - 0.5, 0.0) == pytest.approx(0.2)
    assert max(max(-1.0, 0.0) + 0.1 - 0.5, 0.0) == 0.0


def test_e1_feasible_point_bound():
    prob = make_problem()
    for r in (0.1, 0.4, 0.8):
        bound = max(r - entropy_cond(P_UV.table), 0.0)
        assert e1_source(r, P_UV, prob) <= bound + 1e-12


def test_e2_zero_at_rate_zero_and_monotone():
    prob = make_problem()
    assert e2_source(0.0, prob) == 0.0
    rates = np.linspace(0.0, 1.2, 13)
    vals = [e2_source(float(r), prob) for r in rates]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 0.0  # above log|U| the source term must be positive


def brute_force_e5(prob):
    """Fully unrolled minimization with explicit candidate construction."""
    grid = prob.grid
    delta = grid.marginal_tolerance + 1e-12
    uv_joints = [j.reshape(2, 2) for j in lattice_rows(grid.resolution, 4)]
    rows = lattice_rows(grid.resolution, 2)
    xy_joints = []
    for i in range(rows.shape[0]):
        for j in range(rows.shape[0]):
            xy_joints.append(0.5 * np.stack([rows[i], rows[j]]))
    # the true source and the composed true channel are candidates too
    uv_joints.append(P_UV.table)
    xy_joints.append(0.5 * BSC25.matrix)

    def f_val(t):
        return float(np.sum(t * np.log(P_UV.table)))

    def g_val(t):
        return float(np.sum(t * np.log(BSC25.matrix)))

    def mi(t):
        r, c = t.sum(axis=1), t.sum(axis=0)
        h = lambda v: -np.sum(v[v > 0] * np.log(v[v > 0]))
        return max(h(r) + h(c) - h(t), 0.0)

    def kl(t, ref):
        mask = t > 0
        return float(np.sum(t[mask] * np.log(t[mask] / ref[mask])))

    ref_xy = 0.5 * BSC25.matrix
    uv_stats = [(kl(t, P_UV.table), f_val(t), entropy_cond(t), t.sum(axis=0)) for t in uv_joints]
    xy_stats = [(kl(t, ref_xy), g_val(t), mi(t), t.sum(axis=0)) for t in xy_joints]
    best = np.inf
    for d_uv, f_uv, h_uv, v_uv in uv_stats:
        comp_src = [(f2, h2) for _, f2, h2, v2 in uv_stats if np.max(np.abs(v2 - v_uv)) <= delta]
        for d_xy, g_xy, i_xy, y_xy in xy_stats:
            a = f_uv + g_xy
            e4 = np.inf
            for _, g2, i2, y2 in xy_stats:
                if np.max(np.abs(y2 - y_xy)) > delta:
                    continue
                for f2, h2 in comp_src:
                    e3 = max(max(a - (f2 + g2), 0.0) + i2 - h2, 0.0)
                    if e3 < e4:
                        e4 = e3
            total = d_uv + d_xy + e4
            if total < best:
                best = total
    return max(best, 0.0)


def test_e5_matches_brute_force():
    prob = make_problem(k=4)
    assert e5_channel(prob) == pytest.approx(brute_force_e5(prob), abs=1e-10)


def test_e5_rate_free_bit_identical():
    prob = make_problem()
    assert e5_channel(prob) == e5_channel(prob)


def test_jsc_exponent_assembly():
    prob = make_problem()
    rates = np.arange(0.0, 1.21, 0.1)
    res = jsc_exponent(prob, rates)
    e2 = res.e2_curve.exponents
    e = res.e_of_r.exponents
    assert np.array_equal(e, np.minimum(e2, res.e5))
    assert np.all(np.diff(e) >= -1e-15)
    assert e[0] == 0.0
    # beyond saturation the curve is flat at the channel term, bit-identical
    assert e[-1] == res.e5 and e[-2] == res.e5
    assert res.saturation_rate < rates[-1]


def test_e2_second_resolution_oracle():
    coarse = JscProblem(P_UV, UNIFORM, BSC25, F_MATCHED, G_MATCHED, SimplexGrid(8))
    fine = JscProblem(P_UV, UNIFORM, BSC25, F_MATCHED, G_MATCHED, SimplexGrid(32))
    for r in (0.3, 0.5, 0.9):
        assert abs(e2_source(r, coarse) - e2_source(r, fine)) <= 5e-2


def test_dimension_validation():
    with pytest.raises(ValueError):
        JscProblem(P_UV, Distribution(np.array([0.2, 0.3, 0.5])), BSC25, F_MATCHED, G_MATCHED, SimplexGrid(8))
