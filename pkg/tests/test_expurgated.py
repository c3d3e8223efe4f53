"""Expurgated exponent machinery and the z-channel closed forms."""

import itertools
import math

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
from gldexp.metrics import DecoderMetric, eval_g
from gldexp.expurgated import (
    ExpurgationProblem,
    alpha,
    bhattacharyya_matrix,
    binary_entropy,
    ckm_baseline,
    ckm_zchannel,
    expurgated_exponent,
    gamma,
    gld_zchannel,
    inverse_binary_entropy,
    zchannel_curves,
    zchannel_matrix,
)

UNIFORM = Distribution(np.array([0.5, 0.5]))
BSC10 = Channel(np.array([[0.9, 0.1], [0.1, 0.9]]))
MATCHED = DecoderMetric("matched", beta=1.0, channel=BSC10)


def make_problem(grid_k=8, metric=MATCHED, w=BSC10):
    return ExpurgationProblem(UNIFORM, w, metric, SimplexGrid(grid_k))


def test_alpha_mmi_equals_rate():
    prob = make_problem(metric=DecoderMetric("mmi", beta=1.0))
    for r in (0.05, 0.3, 0.6):
        q_y = Distribution(np.array([0.5, 0.5]))
        assert alpha(r, q_y, prob) == pytest.approx(r, abs=1e-12)


def test_alpha_nondecreasing_in_rate():
    prob = make_problem()
    q_y = Distribution(np.array([0.4, 0.6]))
    rates = np.linspace(0.01, 0.6, 12)
    vals = [alpha(float(r), q_y, prob) for r in rates]
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


def brute_force_gamma(q_xx, r, prob):
    """Independent re-implementation with explicit loops over conditionals."""
    k = prob.grid.resolution
    rows = lattice_rows(k, prob.w.n_outputs)
    mass = q_xx.table
    q_x = mass.sum(axis=1)
    pairs = [(x, xp) for x in range(2) for xp in range(2) if mass[x, xp] > 0]
    best = np.inf
    for combo in itertools.product(range(rows.shape[0]), repeat=len(pairs)):
        full = np.zeros((2, 2, 2))
        for (x, xp), ridx in zip(pairs, combo):
            full[x, xp] = mass[x, xp] * rows[ridx]
        q_xy = full.sum(axis=1)
        q_xpy = full.sum(axis=0)
        q_y = q_xy.sum(axis=0)
        d = 0.0
        for x in range(2):
            for y in range(2):
                if q_xy[x, y] > 0:
                    d += q_xy[x, y] * math.log(q_xy[x, y] / (q_x[x] * prob.w.matrix[x, y]))
        h = lambda t: -sum(v * math.log(v) for v in np.ravel(t) if v > 0)
        i_cond = (h(mass) - h(q_x)) + (h(q_xy) - h(q_x)) - (h(full) - h(q_x))
        g_xy = eval_g(prob.metric, JointDistribution(q_xy))
        g_xpy = eval_g(prob.metric, JointDistribution(q_xpy))
        a = alpha(r, Distribution(q_y), prob)
        top = max(g_xy, a)
        if top == float("-inf") and g_xpy == float("-inf"):
            bracket = 0.0
        else:
            bracket = max(top - g_xpy, 0.0)
        best = min(best, d + max(i_cond, 0.0) + bracket)
    return best


def test_gamma_matches_brute_force():
    prob = make_problem(grid_k=4)
    q_xx = JointDistribution(np.array([[0.375, 0.125], [0.125, 0.375]]))
    for r in (0.1, 0.4):
        assert gamma(q_xx, r, prob) == pytest.approx(
            brute_force_gamma(q_xx, r, prob), abs=1e-9
        )


def test_gamma_resolution_stability():
    q_xx = JointDistribution(np.array([[0.375, 0.125], [0.125, 0.375]]))
    g8 = gamma(q_xx, 0.2, make_problem(8))
    g32 = gamma(q_xx, 0.2, make_problem(32))
    assert abs(g8 - g32) <= 5e-2


def test_gamma_nonnegative_and_marginal_check():
    prob = make_problem()
    q_xx = JointDistribution(np.array([[0.5, 0.0], [0.0, 0.5]]))
    assert gamma(q_xx, 0.3, prob) >= 0.0
    off = JointDistribution(np.array([[0.7, 0.1], [0.1, 0.1]]))
    with pytest.raises(ValueError):
        gamma(off, 0.3, prob)


def test_expurgated_dominates_ckm():
    for w in (BSC10, Channel(np.array([[0.8, 0.2], [0.3, 0.7]]))):
        m = DecoderMetric("matched", beta=1.0, channel=w)
        prob = ExpurgationProblem(UNIFORM, w, m, SimplexGrid(8))
        for r in (0.1, 0.3):
            e_ex = expurgated_exponent(prob, r)
            e_ckm = ckm_baseline(UNIFORM, w, r, SimplexGrid(8))
            assert e_ex >= e_ckm - 5e-2


def test_bhattacharyya_matrix():
    d_b = bhattacharyya_matrix(BSC10)
    assert d_b[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert d_b[1, 1] == pytest.approx(0.0, abs=1e-12)
    expected = -math.log(2.0 * math.sqrt(0.9 * 0.1))
    assert d_b[0, 1] == pytest.approx(expected, abs=1e-12)


def test_ckm_identity_channel_is_infinite():
    ident = Channel(np.eye(2))
    assert ckm_baseline(UNIFORM, ident, 0.1, SimplexGrid(8)) == float("inf")


def test_inverse_binary_entropy():
    assert inverse_binary_entropy(math.log(2)) == pytest.approx(0.5, abs=1e-9)
    for p in (0.05, 0.2, 0.35):
        assert inverse_binary_entropy(binary_entropy(p)) == pytest.approx(p, abs=1e-9)


def test_ckm_zchannel_low_rate_value():
    assert ckm_zchannel(0.0, 0.9) == pytest.approx(0.5756462732485114, abs=1e-9)


def test_ckm_zchannel_high_rate_branch_is_linear():
    w = 0.9
    threshold = math.log(2) - binary_entropy(1.0 / (1.0 + math.sqrt(1.0 - w)))
    r1, r2 = threshold + 0.05, threshold + 0.15
    v1, v2 = ckm_zchannel(r1, w), ckm_zchannel(r2, w)
    assert (v1 - v2) == pytest.approx(r2 - r1, abs=1e-12)


def test_zchannel_identity_without_rate_term():
    for w in (0.5, 0.9):
        for r in np.linspace(0.02, 0.67, 30):
            lhs = gld_zchannel(float(r), w, include_rate_term=False)
            rhs = ckm_zchannel(float(r), w)
            assert abs(lhs - rhs) <= 1e-3


def test_zchannel_curves_dominance():
    rates = np.linspace(0.05, 0.65, 20)
    table = zchannel_curves(0.9, rates, grid=SimplexGrid(32))
    improved = False
    for r, e_gld, e_ckm, e_rc in table:
        assert e_gld >= max(e_ckm, e_rc) - 2e-2
        if r > 0.55 and e_gld - e_ckm > 1e-2:
            improved = True
    assert improved


def test_zchannel_matrix_shape():
    w = zchannel_matrix(0.9)
    assert np.allclose(w.matrix, [[0.9, 0.1], [0.0, 1.0]])


def test_problem_validation():
    with pytest.raises(ValueError):
        ExpurgationProblem(UNIFORM, BSC10, MATCHED, SimplexGrid(8), epsilon=-0.1)
    with pytest.raises(ValueError):
        expurgated_exponent(make_problem(), 0.0)
