"""Finite-alphabet probability objects and information measures.

All information quantities are in nats. Extended-real values (+/-inf) are
carried as ordinary IEEE floats; the helpers `pos` and `ext_sub` implement
the clamping and (-inf)-(-inf) conventions needed by the exponent formulas.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from scipy.special import xlogy

VALIDATION_ATOL = 1e-9

NEG_INF = float("-inf")
POS_INF = float("inf")


def pos(x):
    """[x]_+ = max{0, x}; maps -inf to 0. Works elementwise on arrays."""
    return np.maximum(x, 0.0)


def ext_sub(a, b):
    """a - b on the extended reals with (-inf) - (-inf) := 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        d = a - b
    d = np.where(np.isneginf(a) & np.isneginf(b), 0.0, d)
    if d.ndim == 0:
        return float(d)
    return d


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector over a finite alphabet."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1:
            raise ValueError("probability vector must be one-dimensional")
        if p.size == 0:
            raise ValueError("empty probability vector")
        if p.min() < -VALIDATION_ATOL:
            raise ValueError("negative probability entry %r" % p.min())
        if abs(p.sum() - 1.0) > VALIDATION_ATOL:
            raise ValueError("probabilities sum to %r, expected 1" % p.sum())
        object.__setattr__(self, "probs", np.clip(p, 0.0, None))

    @property
    def size(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Probability table over a product of two finite alphabets."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2:
            raise ValueError("joint table must be two-dimensional")
        if t.min() < -VALIDATION_ATOL:
            raise ValueError("negative joint entry %r" % t.min())
        if abs(t.sum() - 1.0) > VALIDATION_ATOL:
            raise ValueError("joint entries sum to %r, expected 1" % t.sum())
        object.__setattr__(self, "table", np.clip(t, 0.0, None))

    @property
    def row_alphabet(self) -> int:
        return self.table.shape[0]

    @property
    def col_alphabet(self) -> int:
        return self.table.shape[1]

    def row_marginal(self) -> Distribution:
        return Distribution(self.table.sum(axis=1))

    def col_marginal(self) -> Distribution:
        return Distribution(self.table.sum(axis=0))


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic transition matrix; rows index inputs, columns outputs."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError("channel matrix must be two-dimensional")
        if m.min() < -VALIDATION_ATOL:
            raise ValueError("negative transition probability %r" % m.min())
        sums = m.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > VALIDATION_ATOL)[0]
        if bad.size:
            raise ValueError(
                "channel row %d sums to %g, expected 1" % (bad[0], sums[bad[0]])
            )
        object.__setattr__(self, "matrix", np.clip(m, 0.0, None))

    @property
    def n_inputs(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class SimplexGrid:
    """Discretization of the probability simplex: entries are multiples of
    1/resolution; marginal constraints are enforced up to marginal_tolerance
    in L-infinity."""

    resolution: int
    marginal_tolerance: Optional[float] = None

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("grid resolution must be >= 2")
        if self.marginal_tolerance is None:
            object.__setattr__(self, "marginal_tolerance", 1.0 / self.resolution)
        elif self.marginal_tolerance <= 0:
            raise ValueError("marginal tolerance must be > 0")


# ---------------------------------------------------------------------------
# information measures (nats)
# ---------------------------------------------------------------------------


def entropy(p: Distribution) -> float:
    """Shannon entropy -sum p log p with 0 log 0 = 0."""
    return float(-xlogy(p.probs, p.probs).sum())


def entropy_vec(p: np.ndarray, axis: int = -1) -> np.ndarray:
    """Entropy of probability vectors stacked along `axis`."""
    return -xlogy(p, p).sum(axis=axis)


def mutual_information(q: JointDistribution) -> float:
    """I(Q) = H(row) + H(col) - H(joint); always >= 0 up to rounding."""
    t = q.table
    h_joint = float(-xlogy(t, t).sum())
    h_row = float(-xlogy(t.sum(1), t.sum(1)).sum())
    h_col = float(-xlogy(t.sum(0), t.sum(0)).sum())
    return max(h_row + h_col - h_joint, 0.0)


def mutual_information_vec(tables: np.ndarray) -> np.ndarray:
    """I(Q) for a stack of joint tables of shape (..., rows, cols)."""
    h_joint = -xlogy(tables, tables).sum(axis=(-2, -1))
    rows = tables.sum(axis=-1)
    cols = tables.sum(axis=-2)
    h_row = -xlogy(rows, rows).sum(axis=-1)
    h_col = -xlogy(cols, cols).sum(axis=-1)
    return np.maximum(h_row + h_col - h_joint, 0.0)


def kl_divergence(p: Distribution, q: Distribution) -> float:
    """D(p||q) in nats; +inf on absolute-continuity failure."""
    if p.size != q.size:
        raise ValueError("alphabet mismatch: %d vs %d" % (p.size, q.size))
    return kl_vec(p.probs, q.probs)


def kl_vec(p: np.ndarray, q: np.ndarray, axis=None) -> np.ndarray:
    """Elementwise-stacked KL divergence; +inf where p > 0 meets q = 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if axis is None:
        axis = tuple(range(p.ndim))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = xlogy(p, p) - xlogy(p, q)
    terms = np.where(p == 0.0, 0.0, terms)
    out = terms.sum(axis=axis)
    if out.ndim == 0:
        return float(out)
    return out


def compose(q_x: Distribution, w: Channel) -> JointDistribution:
    """Joint table q_x(x) * w(y|x)."""
    if q_x.size != w.n_inputs:
        raise ValueError("input alphabet mismatch")
    return JointDistribution(q_x.probs[:, None] * w.matrix)


def conditional_divergence(q_joint: JointDistribution, w: Channel) -> float:
    """D(Q_{Y|X} || W | Q_X) = D(Q_{XY} || Q_X x W)."""
    if q_joint.row_alphabet != w.n_inputs or q_joint.col_alphabet != w.n_outputs:
        raise ValueError("dimension mismatch between joint and channel")
    ref = q_joint.table.sum(axis=1)[:, None] * w.matrix
    return kl_vec(q_joint.table, ref)


# ---------------------------------------------------------------------------
# simplex-grid enumeration
# ---------------------------------------------------------------------------


def compositions(total: int, parts: int) -> Iterator[tuple]:
    """Nonnegative integer compositions of `total` into `parts`, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def lattice_rows(k: int, parts: int) -> np.ndarray:
    """All probability vectors with entries i/k, ordered lexicographically."""
    return np.array(list(compositions(k, parts)), dtype=float) / k


def enumerate_joints_fixed_row(
    q_x: Distribution, grid: SimplexGrid, n_cols: int
) -> Iterator[JointDistribution]:
    """All joints with row marginal exactly q_x whose conditional rows lie on
    the k-resolution lattice; deterministic lexicographic order."""
    rows = lattice_rows(grid.resolution, n_cols)
    idx = range(rows.shape[0])
    for combo in itertools.product(idx, repeat=q_x.size):
        yield JointDistribution(q_x.probs[:, None] * rows[list(combo)])


def enumerate_couplings(
    q_x: Distribution, q_y: Distribution, grid: SimplexGrid
) -> Iterator[JointDistribution]:
    """Grid joints with row marginal q_x and column marginal within the grid's
    L-infinity tolerance of q_y. The exact product joint q_x (x) q_y is always
    appended when the grid itself does not produce it."""
    delta = grid.marginal_tolerance + 1e-12
    product_table = np.outer(q_x.probs, q_y.probs)
    saw_product = False
    for j in enumerate_joints_fixed_row(q_x, grid, q_y.size):
        col = j.table.sum(axis=0)
        if np.max(np.abs(col - q_y.probs)) <= delta:
            if np.max(np.abs(j.table - product_table)) <= 1e-12:
                saw_product = True
            yield j
    if not saw_product:
        yield JointDistribution(product_table)


def enumerate_simplex_joints(
    n_rows: int, n_cols: int, grid: SimplexGrid
) -> Iterator[JointDistribution]:
    """All joint tables on the k-lattice of the full (n_rows*n_cols)-simplex."""
    k = grid.resolution
    for comp in compositions(k, n_rows * n_cols):
        yield JointDistribution(np.array(comp, dtype=float).reshape(n_rows, n_cols) / k)


# ---------------------------------------------------------------------------
# JSON file formats
# ---------------------------------------------------------------------------


def load_distribution(path) -> Distribution:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if "probs" not in data:
        raise ValueError("distribution file %s lacks a 'probs' field" % path)
    return Distribution(np.asarray(data["probs"], dtype=float))


def load_channel(path) -> Channel:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if "matrix" not in data:
        raise ValueError("channel file %s lacks a 'matrix' field" % path)
    return Channel(np.asarray(data["matrix"], dtype=float))
