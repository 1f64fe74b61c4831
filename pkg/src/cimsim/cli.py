"""Command-line entry point: ``cimsim {fuse,score,bench,trace,scale}``.

Exit codes: 0 success, 1 internal error, 2 bad user input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from .config import MacroConfig, SkipMode, load_config
from .cost_model import REFERENCE_FIGURES, NodeScalingParams, analytic_counts, scale_area, scale_power
from .fixedpoint import load_matrix
from .fusion import WeightMode, fuse, load_fused, requantize, save_fused
from .near_memory import attention_scores
from .oracle import baseline_ops, baseline_trace, proposed_trace
from .synth import random_fused, sparse_tokens

log = logging.getLogger("cimsim")

BENCH_COLUMNS = [
    "n",
    "d",
    "k",
    "sparsity",
    "seed",
    "skip_mode",
    "total_ops",
    "cycles",
    "skipped_cycles",
    "expected_cycles",
    "wordline_activations",
    "adder_ops",
    "latency_s",
    "energy_j",
    "efficiency_ops_per_j",
    "array_access_ratio",
    "energy_ratio",
]


class UserError(Exception):
    pass


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _config(args) -> MacroConfig:
    cfg = load_config(getattr(args, "config", None))
    skip = getattr(args, "skip_mode", None)
    if skip:
        cfg = cfg.with_overrides(skip_mode=SkipMode.parse(skip))
    return cfg


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def cmd_fuse(args) -> int:
    wq = load_matrix(args.wq, args.bits)
    wk = load_matrix(args.wk, args.bits)
    if wq.shape != wk.shape or wq.rows != wq.cols:
        raise UserError(f"shape mismatch: W_Q is {wq.rows}x{wq.cols}, W_K is {wk.rows}x{wk.cols}")
    fw = fuse(wq, wk)
    if args.weight_mode == "int8":
        fw = requantize(fw, args.weight_bits)
    save_fused(fw, args.out, args.format)
    summary = dict(fw.metadata(), min=int(fw.values.min()), max=int(fw.values.max()), out=str(args.out))
    sys.stdout.write(dump_json(summary))
    return 0


def run_score(x, fw, cfg: MacroConfig, weight_mode: str = "exact", threads=None):
    if weight_mode == "int8" and fw.mode is WeightMode.EXACT:
        fw = requantize(fw, cfg.weight_bits)
    scores, report = attention_scores(x, fw, cfg, threads=threads)
    report["weights"] = fw.metadata()
    return scores, report


def cmd_score(args) -> int:
    cfg = _config(args)
    fw = load_fused(args.fused)
    if args.x:
        x = load_matrix(args.x, args.bits or cfg.input_bits)
    elif args.synthetic:
        x = sparse_tokens(args.synthetic, fw.d, args.bits or cfg.input_bits, args.sparsity, args.seed)
    else:
        raise UserError("score needs --x or --synthetic N")
    if x.cols != fw.d:
        raise UserError(f"shape mismatch: X is {x.rows}x{x.cols}, fused weights are {fw.d}x{fw.d}")
    try:
        scores, report = run_score(x, fw, cfg, args.weight_mode, args.threads)
    except OverflowError as exc:
        raise UserError(str(exc)) from exc
    text = dump_json(report)
    if args.out:
        scores.save(args.out, args.format)
        report_path = Path(args.report) if args.report else Path(str(args.out) + ".report.json")
        report_path.write_text(text)
    elif args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def bench_rows(ns, ds, ks, sparsities, seed: int, cfg: MacroConfig, threads=None) -> list[dict]:
    rows = []
    for n in ns:
        for d in ds:
            for k in ks:
                for s in sparsities:
                    x = sparse_tokens(n, d, k, s, seed)
                    fw = random_fused(d, cfg.weight_bits, seed)
                    _, rep = attention_scores(x, fw, cfg, threads=threads)
                    cost = rep["cost"]
                    expected = analytic_counts(n, d, cfg.with_overrides(input_bits=k), sparsity=s)
                    ratios = rep["access"]["ratios"]
                    rows.append(
                        {
                            "n": n,
                            "d": d,
                            "k": k,
                            "sparsity": s,
                            "seed": seed,
                            "skip_mode": cfg.skip_mode.value,
                            "total_ops": cost["total_ops"],
                            "cycles": cost["cycles"],
                            "skipped_cycles": cost["skipped_cycles"],
                            "expected_cycles": round(float(expected.cycles), 3),
                            "wordline_activations": cost["counters"]["wordline_activations"],
                            "adder_ops": cost["counters"]["adder_ops"],
                            "latency_s": cost["latency_s"],
                            "energy_j": cost["energy_j"],
                            "efficiency_ops_per_j": cost["efficiency_ops_per_j"],
                            "array_access_ratio": ratios["array_access_baseline_over_proposed"],
                            "energy_ratio": ratios["energy_baseline_over_proposed"],
                        }
                    )
    return rows


def cmd_bench(args) -> int:
    cfg = _config(args)
    rows = bench_rows(_ints(args.n), _ints(args.d), _ints(args.k), _floats(args.sparsity), args.seed, cfg, args.threads)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def trace_report(n: int, d: int, k: int, w: int, cfg: MacroConfig) -> dict:
    prop = proposed_trace(n, d, k, w, cfg.output_bits, cfg.array_rows, cfg.array_cols)
    base = baseline_trace(n, d, k, w, cfg.output_bits)
    return {
        "proposed": prop.as_dict(),
        "baseline": base.as_dict(),
        "baseline_ops": baseline_ops(n, d, k),
        "ratios": {
            "array_access_baseline_over_proposed": base.array_bits() / prop.array_bits(),
            "total_access_baseline_over_proposed": base.total_bits() / prop.total_bits(),
        },
        "reference_values": {"memory_access_reduction": 6.9, "energy_reduction": 4.9},
    }


def cmd_trace(args) -> int:
    cfg = _config(args)
    out = [trace_report(n, args.d, args.k, args.w, cfg) | {"n": n} for n in _ints(args.n)]
    text = dump_json(out if len(out) != 1 else out[0])
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def scale_report(power_w: float, area_mm2: float, p: NodeScalingParams) -> dict:
    power = scale_power(power_w, p)
    area = scale_area(area_mm2, p)
    out = {
        "params": {"l_from_nm": p.l_from, "l_to_nm": p.l_to, "v_from": p.v_from, "v_to": p.v_to, "f_from_hz": p.f_from, "f_to_hz": p.f_to},
        "power_w": {"input": power_w, "scaled_by_formula": power},
        "area_mm2": {"input": area_mm2, "scaled_by_formula": area},
    }
    if (p.l_from, p.l_to) == (65.0, 28.0):
        ref_p = REFERENCE_FIGURES["scaled_28nm_power_w"]
        out["reference_table"] = {
            "power_w": ref_p,
            "area_mm2": REFERENCE_FIGURES["scaled_28nm_area_mm2"],
            "power_disagrees_with_formula": abs(power - ref_p) > 0.02 * ref_p,
            "note": "the published 28 nm power cell does not follow from its own scaling formula; both are shown",
        }
    return out


def cmd_scale(args) -> int:
    p = NodeScalingParams(args.from_nm, args.to_nm, args.v_from, args.v_to, args.f_from, args.f_to)
    report = scale_report(args.power, args.area, p)
    sys.stdout.write(dump_json(report))
    if report.get("reference_table", {}).get("power_disagrees_with_formula"):
        sys.stderr.write("note: published 28 nm power (0.26 mW) differs from the formula result\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cimsim", description="Weight-stationary CIM attention-score simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="INI macro config")
            p.add_argument("--skip-mode", choices=["none", "plane", "element"])
        p.add_argument("--out")

    f = sub.add_parser("fuse", help="precompute W_QK = W_Q . W_K^T")
    f.add_argument("--wq", required=True)
    f.add_argument("--wk", required=True)
    f.add_argument("--bits", type=int, default=8, help="bit width of CSV inputs")
    f.add_argument("--weight-mode", choices=["exact", "int8"], default="exact")
    f.add_argument("--weight-bits", type=int, default=8, help="stored width for requantized mode")
    f.add_argument("--format", choices=["csv", "bin", "json"], default="bin")
    common(f, config=False)
    f.set_defaults(func=cmd_fuse)
    f.set_defaults(out_required=True)

    s = sub.add_parser("score", help="compute S = X . W_QK . X^T on the macro model")
    s.add_argument("--x", help="token matrix (CSV or CIMX binary)")
    s.add_argument("--fused", required=True)
    s.add_argument("--bits", type=int, help="bit width of CSV token input (default: config input_bits)")
    s.add_argument("--synthetic", type=int, metavar="N", help="generate N seeded tokens instead of --x")
    s.add_argument("--sparsity", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--weight-mode", choices=["exact", "int8"], default="exact")
    s.add_argument("--format", choices=["csv", "bin", "json"], default="csv")
    s.add_argument("--report", help="report JSON path (default: <out>.report.json)")
    s.add_argument("--threads", type=int, help="worker threads (default: $CIMSIM_THREADS, 0 = auto)")
    common(s)
    s.set_defaults(func=cmd_score)

    b = sub.add_parser("bench", help="sweep N, d, K, bit sparsity; emit CSV")
    b.add_argument("--n", default="16")
    b.add_argument("--d", default="64")
    b.add_argument("--k", default="8")
    b.add_argument("--sparsity", default="0")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--threads", type=int)
    common(b)
    b.set_defaults(func=cmd_bench)

    t = sub.add_parser("trace", help="proposed vs baseline access traces")
    t.add_argument("--n", default="64")
    t.add_argument("--d", type=int, default=64)
    t.add_argument("--k", type=int, default=8)
    t.add_argument("--w", type=int, default=8)
    common(t)
    t.set_defaults(func=cmd_trace)

    c = sub.add_parser("scale", help="process-node power/area scaling")
    c.add_argument("--power", type=float, default=1.24e-3, help="watts")
    c.add_argument("--area", type=float, default=0.35, help="mm^2")
    c.add_argument("--from-nm", type=float, default=65.0)
    c.add_argument("--to-nm", type=float, default=28.0)
    c.add_argument("--v-from", type=float, default=1.0)
    c.add_argument("--v-to", type=float, default=0.8)
    c.add_argument("--f-from", type=float, default=100e6)
    c.add_argument("--f-to", type=float, default=100e6)
    c.set_defaults(func=cmd_scale)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "out_required", False) and not args.out:
        sys.stderr.write("cimsim: error: --out is required\n")
        return 2
    try:
        return args.func(args)
    except (UserError, ValueError, OverflowError, OSError) as exc:
        sys.stderr.write(f"cimsim: error: {exc}\n")
        return 2
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return 1


if __name__ == "__main__":
    sys.exit(main())
