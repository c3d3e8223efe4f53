"""Decoder and source metrics of the generalized likelihood decoder.

A decoder metric g maps a joint (input, output) distribution to an extended
real; a source metric f does the same for (source, side-information) joints.
Both are evaluated on empirical joint types by the decoder, and on grid
distributions by the exponent engines.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import xlogy

from .probkit import (
    Channel,
    JointDistribution,
    NEG_INF,
    load_channel,
    mutual_information_vec,
)

DECODER_KINDS = ("matched", "mismatched", "mmi", "linear")
SOURCE_KINDS = ("matched", "neg_cond_entropy", "linear")


@dataclass(frozen=True, eq=False)
class DecoderMetric:
    """Channel-side functional g. Kinds: matched/mismatched (beta * E_Q log W),
    mmi (beta * I(Q)), linear (coefficient table)."""

    kind: str
    beta: float = 1.0
    channel: Optional[Channel] = None
    table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in DECODER_KINDS:
            raise ValueError("unknown decoder metric kind %r" % self.kind)
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.kind in ("matched", "mismatched") and self.channel is None:
            raise ValueError("%s metric needs a channel" % self.kind)
        if self.kind == "linear":
            if self.table is None:
                raise ValueError("linear metric needs a coefficient table")
            object.__setattr__(self, "table", np.asarray(self.table, dtype=float))

    def coefficients(self) -> Optional[np.ndarray]:
        """Per-(x, y) coefficients when g is linear in Q (None for mmi).
        Entries may be -inf where the reference channel vanishes."""
        if self.kind in ("matched", "mismatched"):
            with np.errstate(divide="ignore"):
                return self.beta * np.log(self.channel.matrix)
        if self.kind == "linear":
            return self.table
        return None


@dataclass(frozen=True, eq=False)
class SourceMetric:
    """Source-side functional f over (U, V) joints."""

    kind: str
    beta: float = 1.0
    joint: Optional[JointDistribution] = None
    table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError("unknown source metric kind %r" % self.kind)
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.kind == "matched" and self.joint is None:
            raise ValueError("matched source metric needs the source joint")
        if self.kind == "linear":
            if self.table is None:
                raise ValueError("linear metric needs a coefficient table")
            object.__setattr__(self, "table", np.asarray(self.table, dtype=float))

    def coefficients(self) -> Optional[np.ndarray]:
        if self.kind == "matched":
            with np.errstate(divide="ignore"):
                return self.beta * np.log(self.joint.table)
        if self.kind == "linear":
            return self.table
        return None


def _linear_eval(coef: np.ndarray, tables: np.ndarray) -> np.ndarray:
    """sum coef * Q over the last two axes, with 0 * (-inf) := 0 and any
    Q > 0 on a -inf coefficient forcing -inf."""
    finite = np.where(np.isneginf(coef), 0.0, coef)
    vals = (tables * finite).sum(axis=(-2, -1))
    blocked = (tables[..., np.isneginf(coef)] > 0.0).any(axis=-1)
    return np.where(blocked, NEG_INF, vals)


def eval_g_array(m: DecoderMetric, tables: np.ndarray) -> np.ndarray:
    """Vectorized g over a stack of joint tables (..., |X|, |Y|)."""
    tables = np.asarray(tables, dtype=float)
    if m.kind == "mmi":
        return m.beta * mutual_information_vec(tables)
    return _linear_eval(m.coefficients(), tables)


def eval_g(m: DecoderMetric, q: JointDistribution) -> float:
    """g(Q) for a single joint; -inf when Q charges a zero of the reference."""
    if m.kind in ("matched", "mismatched"):
        if q.row_alphabet != m.channel.n_inputs or q.col_alphabet != m.channel.n_outputs:
            raise ValueError("joint dimensions do not match the metric channel")
    if m.kind == "linear" and q.table.shape != m.table.shape:
        raise ValueError("joint dimensions do not match the coefficient table")
    return float(eval_g_array(m, q.table))


def eval_f_array(m: SourceMetric, tables: np.ndarray) -> np.ndarray:
    """Vectorized f over a stack of (U, V) joint tables."""
    tables = np.asarray(tables, dtype=float)
    if m.kind == "neg_cond_entropy":
        h_joint = -xlogy(tables, tables).sum(axis=(-2, -1))
        cols = tables.sum(axis=-2)
        h_v = -xlogy(cols, cols).sum(axis=-1)
        return -m.beta * (h_joint - h_v)
    return _linear_eval(m.coefficients(), tables)


def eval_f(m: SourceMetric, q: JointDistribution) -> float:
    if m.kind == "matched" and q.table.shape != m.joint.table.shape:
        raise ValueError("joint dimensions do not match the source metric")
    if m.kind == "linear" and q.table.shape != m.table.shape:
        raise ValueError("joint dimensions do not match the coefficient table")
    return float(eval_f_array(m, q.table))


# ---------------------------------------------------------------------------
# JSON metric specs
# ---------------------------------------------------------------------------


def load_decoder_metric(path, true_channel: Optional[Channel] = None) -> DecoderMetric:
    """Read a metric spec file. 'matched' binds to the supplied true channel;
    'mismatched' names its own channel file (relative to the spec file)."""
    with open(path, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    kind = spec.get("kind")
    beta = float(spec.get("beta", 1.0))
    if kind == "matched":
        if true_channel is None:
            raise ValueError("matched metric requires the true channel")
        return DecoderMetric("matched", beta=beta, channel=true_channel)
    if kind == "mismatched":
        ref = spec.get("channel")
        if ref is None:
            raise ValueError("mismatched metric spec lacks a 'channel' field")
        w_prime = load_channel(os.path.join(os.path.dirname(str(path)), ref))
        return DecoderMetric("mismatched", beta=beta, channel=w_prime)
    if kind == "mmi":
        return DecoderMetric("mmi", beta=beta)
    if kind == "linear":
        return DecoderMetric("linear", table=np.asarray(spec["table"], dtype=float))
    raise ValueError("unknown decoder metric kind %r" % kind)


def load_source_metric(path, source_joint: Optional[JointDistribution] = None) -> SourceMetric:
    with open(path, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    kind = spec.get("kind")
    beta = float(spec.get("beta", 1.0))
    if kind == "matched":
        if source_joint is None:
            raise ValueError("matched source metric requires the source joint")
        return SourceMetric("matched", beta=beta, joint=source_joint)
    if kind == "neg_cond_entropy":
        return SourceMetric("neg_cond_entropy", beta=beta)
    if kind == "linear":
        return SourceMetric("linear", table=np.asarray(spec["table"], dtype=float))
    raise ValueError("unknown source metric kind %r" % kind)
