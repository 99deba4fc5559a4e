"""Command-line entry points: simulate, analyze, report.

Exit codes: 0 success, 2 usage, 3 data validation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data import ConformalConfig, DataValidationError, InsufficientDataError
from .io import (ColumnMapping, RunManifest, digest_of, dump_json, file_digest,
                 load_csv, mc_report_dict, now_iso, write_mc_long_csv)
from .learners import RoleSpecs
from .pipelines import ipw_ate
from .rng import child_seed
from .simulation import METHODS, DgpSpec, run_mc, run_method

WORKERS_ENV = "ATTRITION_CONFORMAL_WORKERS"


def _workers(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attrition-conformal",
                                     description="Prediction intervals for treatment "
                                                 "effects under experiment attrition")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte Carlo study on a synthetic DGP")
    sim.add_argument("--dgp", required=True, choices=("dgp1", "dgp2", "appendixE"))
    sim.add_argument("--n", required=True, type=int)
    sim.add_argument("--reps", required=True, type=int)
    sim.add_argument("--method", required=True, choices=METHODS)
    sim.add_argument("--learner", default="glm", choices=("glm", "random_forest"))
    sim.add_argument("--alpha", type=float, default=0.025)
    sim.add_argument("--gamma", type=float, default=0.025)
    sim.add_argument("--rho", type=float, default=None)
    sim.add_argument("--missingness", default="MAR", choices=("MAR", "MCAR"))
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.add_argument("--threads", type=int, default=None)

    ana = sub.add_parser("analyze", help="run a pipeline on a CSV dataset")
    ana.add_argument("--data", required=True)
    ana.add_argument("--map", required=True, dest="mapping")
    ana.add_argument("--method", required=True, choices=METHODS)
    ana.add_argument("--reps", type=int, default=10)
    ana.add_argument("--learner", default="glm", choices=("glm", "random_forest"))
    ana.add_argument("--alpha", type=float, default=0.025)
    ana.add_argument("--gamma", type=float, default=0.025)
    ana.add_argument("--seed", type=int, default=0)
    ana.add_argument("--out", required=True)
    ana.add_argument("--threads", type=int, default=None)

    rep = sub.add_parser("report", help="merge mc_report.json files into a table")
    rep.add_argument("--in", required=True, nargs="+", dest="inputs")
    rep.add_argument("--allow-mixed", action="store_true")
    rep.add_argument("--out", required=True)
    return parser


def cmd_simulate(args, parser) -> int:
    if args.dgp == "appendixE" and args.rho is not None:
        parser.error("--rho does not apply to the appendixE DGP")
    if args.dgp != "appendixE" and args.missingness != "MAR":
        parser.error("--missingness applies to the appendixE DGP only")
    rho = args.rho if args.rho is not None else 0.0
    started = now_iso()
    t0 = time.time()

    dgp = DgpSpec(kind=args.dgp, n=args.n, rho=rho, missingness=args.missingness,
                  seed=args.seed)
    cfg = ConformalConfig(alpha=args.alpha, gamma=args.gamma, seed=args.seed)
    specs = RoleSpecs.uniform(args.learner, seed=args.seed)
    report = run_mc(dgp, args.method, cfg, specs, reps=args.reps,
                    learner=args.learner, workers=_workers(args))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    command = ["simulate", "--dgp", args.dgp, "--n", str(args.n), "--reps", str(args.reps),
               "--method", args.method, "--learner", args.learner,
               "--alpha", repr(args.alpha), "--gamma", repr(args.gamma),
               "--rho", repr(rho), "--missingness", args.missingness,
               "--seed", str(args.seed)]
    config = {"dgp": args.dgp, "n": args.n, "reps": args.reps, "method": args.method,
              "learner": args.learner, "alpha": args.alpha, "gamma": args.gamma,
              "rho": rho, "missingness": args.missingness, "seed": args.seed}
    manifest = RunManifest(command=command, config=config, seed=args.seed,
                           input_digest=digest_of(config))
    dump_json(mc_report_dict(report, manifest.digest), out / "mc_report.json")
    write_mc_long_csv(report, out / "mc_long.csv")
    manifest.started_at = started
    manifest.finished_at = now_iso()
    manifest.wall_time = time.time() - t0
    manifest.write(out / "manifest.json")
    cov = "n/a" if report.mean_coverage is None else f"{report.mean_coverage:.3f}"
    length = "n/a" if report.mean_length is None else f"{report.mean_length:.3f}"
    print(f"{args.method} on {args.dgp}: coverage {cov}, length {length}, "
          f"{report.n_failed} failed reps -> {out}")
    return 0


def _two_sample_diff(ds) -> tuple[float, float]:
    obs = np.flatnonzero(ds.r == 1)
    y, d = ds.y[obs], ds.d[obs]
    y1, y0 = y[d == 1], y[d == 0]
    est = float(y1.mean() - y0.mean())
    se = math.sqrt(y1.var(ddof=1) / y1.size + y0.var(ddof=1) / y0.size)
    return est, se


def cmd_analyze(args, parser) -> int:
    started = now_iso()
    t0 = time.time()
    mapping = ColumnMapping.from_json(args.mapping)
    ds = load_csv(args.data, mapping)
    cfg = ConformalConfig(alpha=args.alpha, gamma=args.gamma, seed=args.seed)
    base_specs = RoleSpecs.uniform(args.learner, seed=args.seed)

    att_n = int((ds.r == 0).sum())
    per_rep_ate = []
    per_rep_len = []
    results = []
    failures = []
    for rep in range(args.reps):
        cfg_rep = replace(cfg, seed=child_seed(cfg.seed, rep))
        specs = base_specs.reseed(child_seed(cfg.seed, 10_000 + rep))
        try:
            res = run_method(ds, args.method, cfg_rep, specs)
        except (InsufficientDataError, RuntimeError, ValueError) as exc:
            failures.append(f"rep {rep}: {type(exc).__name__}: {exc}")
            continue
        results.append(res)
        if att_n:
            finite = np.isfinite(res.che_lo) & np.isfinite(res.che_hi)
            if finite.any():
                per_rep_ate.append(float((0.5 * (res.che_lo + res.che_hi))[finite].mean()))
                per_rep_len.append(float((res.che_hi - res.che_lo)[finite].mean()))
    if len(failures) > 0.2 * args.reps or not results:
        raise RuntimeError(f"{len(failures)}/{args.reps} replicates failed; "
                           f"first: {failures[:3]}")

    ate_r1, se_r1 = _two_sample_diff(ds)
    ipw = ipw_ate(ds, base_specs, clip=cfg.propensity_clip)

    n_r1 = int((ds.r == 1).sum())
    if att_n and per_rep_ate:
        # point estimates and SEs across replications
        ate_r0 = float(np.mean(per_rep_ate))
        se_r0 = float(np.std(per_rep_ate, ddof=1)) if len(per_rep_ate) > 1 else math.nan
        n_all = n_r1 + att_n
        ate_all = (n_r1 * ate_r1 + att_n * ate_r0) / n_all
        se_all = math.sqrt((n_r1 / n_all * se_r1) ** 2 + (att_n / n_all * se_r0) ** 2)
        length = float(np.mean(per_rep_len))
        se_len = float(np.std(per_rep_len, ddof=1)) if len(per_rep_len) > 1 else math.nan
    else:
        ate_r0 = se_r0 = length = se_len = None
        ate_all, se_all = ate_r1, se_r1

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    estimates = {"ATER1": ate_r1, "ATER0": ate_r0, "ATEall": ate_all, "Length": length}
    ses = {"ATER1": se_r1, "ATER0": se_r0, "ATEall": se_all, "Length": se_len}
    summary_doc = {
        "columns": ["ATER1", "ATER0", "ATEall", "Length"],
        "method": args.method,
        "estimates": estimates,
        "standard_errors": ses,
        "ipw": {"ATER1": ipw.estimate, "se": ipw.se},
        "n_r1": n_r1,
        "n_r0": att_n,
        "reps": args.reps,
        "failed_reps": failures,
        "notes": (None if att_n else "no attrition rows: ATEall equals ATER1"),
    }
    dump_json(summary_doc, out / "ate_summary.json")

    with (out / "intervals.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "mean_lo", "mean_hi", "finite_reps"])
        if att_n and results:
            att = results[0].att_idx
            lo = np.vstack([r.che_lo for r in results])
            hi = np.vstack([r.che_hi for r in results])
            finite = np.isfinite(lo) & np.isfinite(hi)
            with np.errstate(invalid="ignore"):
                cnt = finite.sum(axis=0)
                mean_lo = np.where(cnt > 0, np.where(finite, lo, 0.0).sum(axis=0) / np.maximum(cnt, 1), math.nan)
                mean_hi = np.where(cnt > 0, np.where(finite, hi, 0.0).sum(axis=0) / np.maximum(cnt, 1), math.nan)
            for j, row in enumerate(att):
                writer.writerow([int(row), repr(float(mean_lo[j])), repr(float(mean_hi[j])),
                                 int(cnt[j])])

    command = ["analyze", "--data", str(args.data), "--map", str(args.mapping),
               "--method", args.method, "--reps", str(args.reps),
               "--learner", args.learner, "--alpha", repr(args.alpha),
               "--gamma", repr(args.gamma), "--seed", str(args.seed)]
    config = {"method": args.method, "reps": args.reps, "learner": args.learner,
              "alpha": args.alpha, "gamma": args.gamma, "seed": args.seed}
    manifest = RunManifest(command=command, config=config, seed=args.seed,
                           input_digest=digest_of({"data": file_digest(args.data),
                                                   "mapping": file_digest(args.mapping)}))
    manifest.started_at = started
    manifest.finished_at = now_iso()
    manifest.wall_time = time.time() - t0
    manifest.write(out / "manifest.json")
    print(f"{args.method} on {args.data}: ATEall "
          f"{'n/a' if ate_all is None else round(ate_all, 4)} -> {out}")
    return 0


def cmd_report(args, parser) -> int:
    docs = []
    for p in args.inputs:
        with open(p, encoding="utf-8") as fh:
            docs.append(json.load(fh))
    seen = {}
    for doc in docs:
        seen.setdefault(doc.get("run_digest", ""), doc)  # dedup by manifest digest
    docs = list(seen.values())
    levels = {(d["config"]["alpha"], d["config"]["gamma"]) for d in docs}
    if len(levels) > 1 and not args.allow_mixed:
        raise DataValidationError(f"mixed nominal levels across inputs: {sorted(levels)}; "
                                  "pass --allow-mixed to merge anyway")

    rows = []
    for d in docs:
        agg = d["aggregate"]
        rows.append({
            "method": d["method"], "learner": d.get("learner", ""),
            "dgp": d["dgp"]["kind"], "n": d["dgp"]["n"], "rho": d["dgp"]["rho"],
            "alpha": d["config"]["alpha"], "gamma": d["config"]["gamma"],
            "coverage_mean": agg["mean_coverage"], "coverage_sd": agg["sd_coverage"],
            "length_mean": agg["mean_length"], "length_sd": agg["sd_length"],
            "n_reps": agg["n_reps"], "n_failed": agg["n_failed"],
            "run_digest": d.get("run_digest", ""),
        })
    rows.sort(key=lambda r: (r["method"], r["dgp"], r["n"], r["rho"], r["run_digest"]))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json({"rows": rows}, out / "report.json")
    cols = ["method", "learner", "dgp", "n", "rho", "alpha", "gamma", "coverage_mean",
            "coverage_sd", "length_mean", "length_sd", "n_reps", "n_failed", "run_digest"]
    with (out / "report.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow(["" if row[c] is None else row[c] for c in cols])
    print(f"merged {len(rows)} runs -> {out}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args, parser)
        if args.command == "analyze":
            return cmd_analyze(args, parser)
        return cmd_report(args, parser)
    except (DataValidationError, InsufficientDataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
