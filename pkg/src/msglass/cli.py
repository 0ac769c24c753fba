"""Command-line interface: solve, verify, scan, and mc subcommands.

Machine outputs are JSON, except scans which emit CSV.  Exit codes:
0 success, 1 validation error, 2 numerical failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .analysis import (
    check_simultaneity_hypothesis,
    classify_rsb,
    compute_residuals,
)
from .functionals import BAssignment
from .mc import McConfig, McGuardError, estimate_F
from .model import ModelValidationError, load_model
from .orderparam import DiscretePair
from .solver import SolveConfig, SolverError, minimize_B, support_bound

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_VERIFY_FAIL = 3

RESIDUAL_THRESHOLDS = {
    "cs": 1e-6,
    "parisi_a": 1e-6,
    "parisi_b": 1e-6,
    "bridge": 1e-6,
    "ab_gap": 1e-8,
}


def model_hash(doc):
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _manifest(args, subcommand):
    return {
        "model": getattr(args, "model", None),
        "subcommand": subcommand,
        "overrides": {
            k: v
            for k, v in vars(args).items()
            if k not in ("func", "model", "out") and v is not None
        },
        "seed": getattr(args, "seed", None),
        "out": getattr(args, "out", None),
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def _solve_config(args):
    kwargs = {}
    if args.k_max is not None:
        kwargs["k_max"] = args.k_max
    if args.tol is not None:
        kwargs["tol_B"] = args.tol
    if args.seeds is not None:
        kwargs["multistart_seeds"] = args.seeds
    return SolveConfig(**kwargs)


def _solve_to_doc(model, model_doc, config, manifest):
    report = minimize_B(model, config)
    classification = classify_rsb(report.pair, model, config.merge_tol)
    # record hypothesis status for every species pair
    for s in range(model.n_species):
        for t in range(s + 1, model.n_species):
            classification.hypothesis[(s, t)] = check_simultaneity_hypothesis(
                model, (s, t), minimizer=report.pair
            )
    residuals = compute_residuals(
        report.pair, model, report.b, h3strict_ok=report.h3strict_ok
    )
    return {
        "manifest": manifest,
        "model": model_doc,
        "model_hash": model_hash(model_doc),
        "value": report.value,
        "a_value": report.a_value,
        "qbar": report.qbar,
        "pair": report.pair.to_dict(model.species),
        "b": {s: float(v) for s, v in zip(model.species, report.b.b)},
        "residuals": residuals.to_dict(),
        "classification": classification.to_dict(model.species),
        "escalation": report.escalation,
        "h3_ok": report.h3_ok,
        "h3strict_ok": report.h3strict_ok,
        "warnings": report.warnings,
        "local_minima": [
            {
                "value": lm.value,
                "pair": lm.pair.to_dict(model.species),
                "converged": lm.converged,
            }
            for lm in report.local_minima[:10]
        ],
    }


def _emit(doc, out):
    text = json.dumps(doc, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_solve(args):
    with open(args.model) as fh:
        model_doc = json.load(fh)
    model = load_model(model_doc)
    doc = _solve_to_doc(model, model_doc, _solve_config(args),
                        _manifest(args, "solve"))
    _emit(doc, args.out)
    return EXIT_OK


def verify_report(doc, thresholds=RESIDUAL_THRESHOLDS):
    """Recompute residuals from a stored report; returns (ok, detail)."""
    if not doc or "model" not in doc or "pair" not in doc:
        raise ValueError("report is empty or missing required blocks")
    if model_hash(doc["model"]) != doc.get("model_hash"):
        raise ValueError("stale report: model hash mismatch")
    model = load_model(doc["model"])
    pair = DiscretePair.from_dict(doc["pair"], model.species)
    b = BAssignment(np.array([doc["b"][s] for s in model.species]))
    residuals = compute_residuals(
        pair, model, b, h3strict_ok=doc.get("h3strict_ok", True)
    )
    maxima = residuals.max_abs()
    detail = {}
    ok = True
    for key, bound in thresholds.items():
        if key in ("parisi_a", "parisi_b") and residuals.parisi_b_advisory:
            detail[key] = {"value": maxima[key], "bound": bound,
                           "status": "advisory"}
            continue
        passed = maxima[key] <= bound
        ok = ok and passed
        detail[key] = {"value": maxima[key], "bound": bound,
                       "status": "pass" if passed else "fail"}
    return ok, detail


def cmd_verify(args):
    with open(args.report) as fh:
        doc = json.load(fh)
    ok, detail = verify_report(doc)
    for key, info in detail.items():
        print(f"{key}: {info['status']} ({info['value']:.3e} <= {info['bound']:.0e})")
    print("verify:", "pass" if ok else "fail")
    return EXIT_OK if ok else EXIT_VERIFY_FAIL


def cmd_classify(args):
    with open(args.report) as fh:
        doc = json.load(fh)
    if not doc or "model" not in doc or "pair" not in doc:
        raise ValueError("report is empty or missing required blocks")
    if model_hash(doc["model"]) != doc.get("model_hash"):
        raise ValueError("stale report: model hash mismatch")
    model = load_model(doc["model"])
    pair = DiscretePair.from_dict(doc["pair"], model.species)
    classification = classify_rsb(pair, model)
    for s in range(model.n_species):
        for t in range(s + 1, model.n_species):
            classification.hypothesis[(s, t)] = check_simultaneity_hypothesis(
                model, (s, t), minimizer=pair
            )
    _emit(classification.to_dict(model.species), args.out)
    return EXIT_OK


def _parse_range(spec):
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError("range must be lo:hi:step")
    lo, hi, step = (float(x) for x in parts)
    if step <= 0 or hi < lo:
        raise ValueError("bad range bounds")
    if hi == lo:
        return [lo]
    count = int(np.floor((hi - lo) / step + 1e-12)) + 1
    return [lo + i * step for i in range(count)]


def _apply_param(model_doc, path, value):
    """Set a parameter in the model config.

    ``beta`` scales every interaction coefficient by value**2 (a global
    inverse-temperature multiplier); otherwise the path must address one
    coefficient as ``terms[i].entries[j].coeff``.
    """
    doc = json.loads(json.dumps(model_doc))
    if path == "beta":
        for term in doc.get("terms", []):
            for entry in term["entries"]:
                entry["coeff"] = entry["coeff"] * value**2
        return doc
    import re

    m = re.fullmatch(r"terms\[(\d+)\]\.entries\[(\d+)\]\.coeff", path)
    if not m:
        raise ValueError(
            f"parameter path {path!r} is not numeric "
            "(use 'beta' or 'terms[i].entries[j].coeff')"
        )
    doc["terms"][int(m.group(1))]["entries"][int(m.group(2))]["coeff"] = value
    return doc


def cmd_scan(args):
    with open(args.model) as fh:
        model_doc = json.load(fh)
    values = _parse_range(args.range)
    config = _solve_config(args)

    def one(v):
        model = load_model(_apply_param(model_doc, args.param, v))
        report = minimize_B(model, config)
        cls = classify_rsb(report.pair, model, config.merge_tol)
        residuals = compute_residuals(
            report.pair, model, report.b, h3strict_ok=report.h3strict_ok
        )
        return {
            "param": v,
            "B_value": report.value,
            "rsb_levels": ";".join(
                f"{s}={lv}" for s, lv in zip(model.species, cls.rsb_levels)
            ),
            "simultaneity": "|".join(
                ",".join(model.species[i] for i in c) for c in cls.partition
            ),
            "max_residual": max(residuals.max_abs().values()),
        }

    env = os.environ.get("MSSG_THREADS")
    workers = max(1, int(env)) if env else min(4, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(one, values))
    rows.sort(key=lambda r: r["param"])

    fieldnames = ["param", "B_value", "rsb_levels", "simultaneity", "max_residual"]
    out_fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out_fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            out_fh.close()
    return EXIT_OK


def cmd_mc(args):
    with open(args.model) as fh:
        model_doc = json.load(fh)
    model = load_model(model_doc)
    mc = McConfig(n_total=args.n, samples=args.samples, seed=args.seed or 0)
    est = estimate_F(model, mc)
    variational = None
    if not args.no_solve:
        report = minimize_B(model, _solve_config(args))
        variational = report.value
    doc = {
        "manifest": _manifest(args, "mc"),
        "model_hash": model_hash(model_doc),
        "estimate": est.to_dict(),
    }
    if variational is not None:
        doc["variational"] = variational
        doc["gap"] = est.value - variational
        if est.stderr > 0:
            doc["gap_sigma"] = (est.value - variational) / est.stderr
    _emit(doc, args.out)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(
        prog="msglass",
        description="Multi-species spherical spin glass free energy solver",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def add_solver_flags(p):
        p.add_argument("--k-max", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--seeds", type=int, default=None,
                       help="number of multistart seeds")

    p = sub.add_parser("solve", help="minimize the free-energy functional")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None)
    add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="re-check residuals of a stored report")
    p.add_argument("report")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("classify",
                       help="re-derive the RSB classification of a stored report")
    p.add_argument("report")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("scan", help="parameter sweep, one solve per row")
    p.add_argument("--model", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--range", required=True, help="lo:hi:step")
    p.add_argument("--out", default=None)
    add_solver_flags(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("mc", help="Monte Carlo free-energy cross-check")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-solve", action="store_true",
                   help="skip the variational comparison solve")
    add_solver_flags(p)
    p.set_defaults(func=cmd_mc)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelValidationError, ValueError, KeyError, json.JSONDecodeError,
            FileNotFoundError, McGuardError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
