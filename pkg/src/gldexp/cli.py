"""Command-line front end: curve emission for every engine plus the
z-channel figure recipe. Each run writes a CSV and a MANIFEST.json sibling
recording the inputs for reproducibility."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .probkit import (
    Channel,
    Distribution,
    SimplexGrid,
    load_channel,
    load_distribution,
)
from .metrics import load_decoder_metric, load_source_metric
from . import rce, expurgated, jsc, simulator
from .probkit import JointDistribution

LOG2 = math.log(2.0)


class InfeasibleError(Exception):
    """Raised when a run has no feasible configuration (exit code 3)."""


def parse_rates(spec: str) -> list:
    """START:STOP:STEP in nats, inclusive of STOP up to rounding."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError("rates must be START:STOP:STEP, got %r" % spec)
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise ValueError("rates must satisfy STOP >= START and STEP > 0")
    out = list(np.arange(start, stop + 1e-12, step))
    if not out:
        raise ValueError("empty rate grid %r" % spec)
    return out


def _fmt(x: float) -> str:
    if x == float("inf"):
        return "inf"
    return "%.12g" % x


def _scale(x: float, bits: bool) -> float:
    return x / LOG2 if bits else x


def _witness(j: JointDistribution) -> str:
    return ";".join("%.6g" % v for v in j.table.ravel())


def _write_manifest(out_path: str, verb: str, args: argparse.Namespace, wall: float):
    payload = {
        "verb": verb,
        "inputs": {
            k: v
            for k, v in vars(args).items()
            if k not in ("func",) and not callable(v)
        },
        "tool_version": __version__,
        "wall_clock_seconds": wall,
    }
    manifest = os.path.join(os.path.dirname(os.path.abspath(out_path)), "MANIFEST.json")
    with open(manifest, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _write_csv(path: str, header: list, rows: list):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _load_common(args):
    w = load_channel(args.channel)
    q_x = load_distribution(args.input_dist)
    grid = SimplexGrid(args.grid)
    return w, q_x, grid


def cmd_rce(args) -> int:
    w, q_x, grid = _load_common(args)
    metric = load_decoder_metric(args.metric, true_channel=w)
    prob = rce.RceProblem(q_x, w, metric, grid)
    rates = parse_rates(args.rates)
    curve = rce.exponent_curve(prob, rates)
    rows = []
    full = []
    for p in curve.points:
        rows.append(
            [
                _fmt(_scale(p.rate, args.bits)),
                _fmt(_scale(p.exponent, args.bits)),
                _witness(p.witness_q),
                _witness(p.witness_qprime),
            ]
        )
        full.append(
            {
                "rate": p.rate,
                "exponent": p.exponent,
                "witness_q": p.witness_q.table.tolist(),
                "witness_qprime": p.witness_qprime.table.tolist(),
            }
        )
    _write_csv(args.out, ["rate", "exponent", "witness_q", "witness_qprime"], rows)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(full, fh, indent=2)
    return 0


def cmd_expurgated(args) -> int:
    if args.zchannel is not None:
        return _zchannel_curves_to_csv(args.zchannel, args)
    if not (args.channel and args.input_dist and args.metric):
        raise ValueError("expurgated needs --channel, --input-dist and --metric (or --zchannel)")
    w, q_x, grid = _load_common(args)
    metric = load_decoder_metric(args.metric, true_channel=w)
    prob = expurgated.ExpurgationProblem(q_x, w, metric, grid)
    rates = parse_rates(args.rates)
    header = ["rate", "e_ex"]
    if args.baseline == "ckm":
        header.append("e_ckm")
    rows = []
    for r in rates:
        val = expurgated.expurgated_exponent(prob, r)
        if not np.isfinite(val):
            raise InfeasibleError("no feasible pairwise joint at rate %g" % r)
        row = [_fmt(_scale(r, args.bits)), _fmt(_scale(val, args.bits))]
        if args.baseline == "ckm":
            row.append(_fmt(_scale(expurgated.ckm_baseline(q_x, w, r, grid), args.bits)))
        rows.append(row)
    _write_csv(args.out, header, rows)
    return 0


def _zchannel_curves_to_csv(w_param: float, args) -> int:
    rates = parse_rates(args.rates)
    table = expurgated.zchannel_curves(w_param, rates)
    rows = [
        [
            _fmt(_scale(r, args.bits)),
            _fmt(_scale(e_gld, args.bits)),
            _fmt(_scale(e_ckm, args.bits)),
            _fmt(_scale(e_rc, args.bits)),
        ]
        for r, e_gld, e_ckm, e_rc in table
    ]
    _write_csv(args.out, ["rate", "e_gld", "e_ckm", "e_rc"], rows)
    return 0


def cmd_zchannel(args) -> int:
    return _zchannel_curves_to_csv(args.w, args)


def cmd_jsc(args) -> int:
    p_uv = JointDistribution(np.asarray(json.load(open(args.source))["table"], dtype=float))
    w = load_channel(args.channel)
    q_x = load_distribution(args.input_dist)
    grid = SimplexGrid(args.grid)
    f = load_source_metric(args.f, source_joint=p_uv)
    g = load_decoder_metric(args.g, true_channel=w)
    prob = jsc.JscProblem(p_uv, q_x, w, f, g, grid)
    rates = parse_rates(args.rates)
    res = jsc.jsc_exponent(prob, rates)
    rows = [
        [
            _fmt(_scale(p2.rate, args.bits)),
            _fmt(_scale(p2.exponent, args.bits)),
            _fmt(_scale(res.e5, args.bits)),
            _fmt(_scale(pe.exponent, args.bits)),
        ]
        for p2, pe in zip(res.e2_curve.points, res.e_of_r.points)
    ]
    _write_csv(args.out, ["rate", "e2", "e5", "e"], rows)
    return 0


def cmd_simulate(args) -> int:
    w = load_channel(args.channel)
    q_x = load_distribution(args.input_dist)
    metric = load_decoder_metric(args.metric, true_channel=w)
    rows = []
    for n in args.n:
        cfg = simulator.SimConfig(n, args.rate, w, q_x, metric, args.trials, args.seed)
        res = simulator.run_monte_carlo(cfg)
        rows.append(
            [
                str(n),
                _fmt(_scale(args.rate, args.bits)),
                str(res.trials),
                str(res.errors),
                _fmt(res.error_estimate),
                _fmt(res.stderr),
                _fmt(_scale(res.empirical_exponent, args.bits)),
            ]
        )
    _write_csv(
        args.out,
        ["n", "rate", "trials", "errors", "p_hat", "stderr", "emp_exponent"],
        rows,
    )
    return 0


def cmd_oracle(args) -> int:
    w = load_channel(args.channel)
    q_x = load_distribution(args.input_dist)
    metric = load_decoder_metric(args.metric, true_channel=w)
    rows = []
    for n in args.n:
        m = max(int(round(math.exp(n * args.rate))), 1)
        try:
            exact = simulator.exact_ensemble_error(q_x, n, m, w, metric)
        except ValueError as exc:
            raise InfeasibleError(str(exc))
        rows.append(
            [
                str(n),
                _fmt(_scale(args.rate, args.bits)),
                str(m),
                _fmt(exact),
                _fmt(_scale(-math.log(exact) / n if exact > 0 else float("inf"), args.bits)),
            ]
        )
    _write_csv(args.out, ["n", "rate", "m", "p_exact", "exact_exponent"], rows)
    return 0


def _int_list(text: str) -> list:
    return [int(t) for t in text.split(",") if t]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gldexp",
        description="Error exponents and simulation for stochastic likelihood decoding",
    )
    parser.add_argument("--workers", type=int, default=1, help="worker pool size (reserved; results are identical for any value)")
    sub = parser.add_subparsers(dest="verb")

    def common(p, metric=True):
        p.add_argument("--channel", required=True)
        p.add_argument("--input-dist", required=True)
        if metric:
            p.add_argument("--metric", required=True)
        p.add_argument("--grid", type=int, default=64)
        p.add_argument("--bits", action="store_true", help="display rates/exponents in bits")
        p.add_argument("--out", required=True)

    p = sub.add_parser("rce", help="random coding exponent curve")
    common(p)
    p.add_argument("--rates", required=True, help="START:STOP:STEP in nats")
    p.add_argument("--json", help="also write full-precision JSON here")
    p.set_defaults(func=cmd_rce)

    p = sub.add_parser("expurgated", help="expurgated exponent curve")
    p.add_argument("--channel")
    p.add_argument("--input-dist")
    p.add_argument("--metric")
    p.add_argument("--grid", type=int, default=16)
    p.add_argument("--bits", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--rates", required=True)
    p.add_argument("--baseline", choices=["ckm"], default=None)
    p.add_argument("--zchannel", type=float, default=None, help="z-channel parameter shortcut; emits the three-curve CSV")
    p.set_defaults(func=cmd_expurgated)

    p = sub.add_parser("zchannel", help="z-channel three-curve figure data")
    p.add_argument("--w", type=float, required=True)
    p.add_argument("--rates", required=True)
    p.add_argument("--bits", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_zchannel)

    p = sub.add_parser("jsc", help="source-channel exponent with side information")
    p.add_argument("--source", required=True, help="JSON with the source joint table")
    p.add_argument("--channel", required=True)
    p.add_argument("--input-dist", required=True)
    p.add_argument("--f", required=True, help="source metric spec")
    p.add_argument("--g", required=True, help="decoder metric spec")
    p.add_argument("--rates", required=True)
    p.add_argument("--grid", type=int, default=8)
    p.add_argument("--bits", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_jsc)

    p = sub.add_parser("simulate", help="Monte Carlo error estimation")
    p.add_argument("--channel", required=True)
    p.add_argument("--input-dist", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--n", type=_int_list, required=True, help="comma-separated blocklengths")
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bits", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="exact tiny-instance ensemble error")
    p.add_argument("--channel", required=True)
    p.add_argument("--input-dist", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--n", type=_int_list, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--bits", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    t0 = time.time()
    try:
        code = args.func(args)
    except InfeasibleError as exc:
        print("infeasible: %s" % exc, file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    _write_manifest(args.out, args.verb, args, time.time() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
