"""Decoder and source metric evaluation."""

import json

import numpy as np
import pytest

from gldexp.probkit import Channel, Distribution, JointDistribution
from gldexp.metrics import (
    DecoderMetric,
    SourceMetric,
    eval_f,
    eval_g,
    eval_g_array,
    load_decoder_metric,
    load_source_metric,
)

BSC10 = Channel(np.array([[0.9, 0.1], [0.1, 0.9]]))
DSBS = JointDistribution(np.array([[0.45, 0.05], [0.05, 0.45]]))


def test_matched_metric_value():
    m = DecoderMetric("matched", beta=1.0, channel=BSC10)
    manual = float(np.sum(DSBS.table * np.log(BSC10.matrix)))
    assert eval_g(m, DSBS) == pytest.approx(manual, abs=1e-12)
    assert eval_g(m, DSBS) == pytest.approx(-0.3250829733914482, abs=1e-12)


def test_beta_scaling():
    m1 = DecoderMetric("matched", beta=1.0, channel=BSC10)
    m3 = DecoderMetric("matched", beta=3.0, channel=BSC10)
    assert eval_g(m3, DSBS) == pytest.approx(3.0 * eval_g(m1, DSBS), abs=1e-12)


def test_mmi_metric_is_scaled_mutual_information():
    from gldexp.probkit import mutual_information

    m = DecoderMetric("mmi", beta=2.0)
    assert eval_g(m, DSBS) == pytest.approx(2.0 * mutual_information(DSBS), abs=1e-12)


def test_linear_metric():
    table = np.array([[1.0, -2.0], [0.5, 0.0]])
    m = DecoderMetric("linear", table=table)
    assert eval_g(m, DSBS) == pytest.approx(float((DSBS.table * table).sum()), abs=1e-12)


def test_zero_transition_gives_neg_inf():
    z = Channel(np.array([[0.9, 0.1], [0.0, 1.0]]))
    m = DecoderMetric("matched", beta=1.0, channel=z)
    charged = JointDistribution(np.array([[0.4, 0.1], [0.2, 0.3]]))  # mass on W=0
    assert eval_g(m, charged) == float("-inf")
    clean = JointDistribution(np.array([[0.4, 0.1], [0.0, 0.5]]))
    assert np.isfinite(eval_g(m, clean))


def test_vectorized_matches_scalar():
    m = DecoderMetric("mmi", beta=1.0)
    rng = np.random.default_rng(5)
    tables = rng.random((50, 2, 2))
    tables /= tables.sum(axis=(1, 2), keepdims=True)
    vec = eval_g_array(m, tables)
    for i in range(50):
        assert vec[i] == pytest.approx(eval_g(m, JointDistribution(tables[i])), abs=1e-12)


def test_source_metrics():
    f = SourceMetric("matched", beta=1.0, joint=DSBS)
    manual = float(np.sum(DSBS.table * np.log(DSBS.table)))
    assert eval_f(f, DSBS) == pytest.approx(manual, abs=1e-12)
    g = SourceMetric("neg_cond_entropy", beta=1.0)
    h_uv = -float(np.sum(DSBS.table * np.log(DSBS.table)))
    h_v = -float(np.sum(DSBS.table.sum(0) * np.log(DSBS.table.sum(0))))
    assert eval_f(g, DSBS) == pytest.approx(-(h_uv - h_v), abs=1e-12)


def test_kind_validation():
    with pytest.raises(ValueError):
        DecoderMetric("nope")
    with pytest.raises(ValueError):
        DecoderMetric("matched", beta=-1.0, channel=BSC10)
    with pytest.raises(ValueError):
        DecoderMetric("matched")
    with pytest.raises(ValueError):
        SourceMetric("linear")


def test_load_decoder_metric(tmp_path):
    spec = tmp_path / "m.json"
    spec.write_text(json.dumps({"kind": "matched", "beta": 2.0}))
    m = load_decoder_metric(spec, true_channel=BSC10)
    assert m.kind == "matched" and m.beta == 2.0

    other = tmp_path / "w2.json"
    other.write_text(json.dumps({"matrix": [[0.8, 0.2], [0.2, 0.8]]}))
    spec2 = tmp_path / "mm.json"
    spec2.write_text(json.dumps({"kind": "mismatched", "channel": "w2.json"}))
    m2 = load_decoder_metric(spec2)
    assert np.allclose(m2.channel.matrix, [[0.8, 0.2], [0.2, 0.8]])


def test_load_source_metric(tmp_path):
    spec = tmp_path / "f.json"
    spec.write_text(json.dumps({"kind": "neg_cond_entropy", "beta": 1.5}))
    f = load_source_metric(spec)
    assert f.kind == "neg_cond_entropy" and f.beta == 1.5
