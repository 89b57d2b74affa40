"""Command-line interface: ``bopco optimize|compare|oracle|stats|export-dot|export``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import OracleBudget, exhaustive_oracle, nested_optimize
from .errors import (BopcoError, BudgetExceeded, DecodeError, EGraphError, InfeasibleError,
                     InvariantViolation, ModelError)
from .export import load_jobs, reevaluate_front, report_json, write_run
from .fixtures import FIXTURES, load_fixture
from .icee import IceeParams, RunConfig, design_space_param, params_for, run
from .model import design_space_size, load_model
from .moo import common_reference, hypervolume

log = logging.getLogger("bopco")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3


def _load(spec: str):
    if spec.startswith("fixture:"):
        name = spec.split(":", 1)[1]
        if name not in FIXTURES:
            raise ModelError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
        return load_fixture(name)
    return load_model(spec)


def _coerce(value: str):
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def _config(args) -> RunConfig:
    seed, alpha, overrides = 0, 0.75, {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ModelError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ModelError(f"config file {path} is not valid JSON: {exc}") from None
        seed = int(data.pop("seed", seed))
        alpha = float(data.pop("alpha", alpha))
        overrides.update(data.pop("params", {}))
        overrides.update(data)
    if args.seed is not None:
        seed = args.seed
    if args.alpha is not None:
        alpha = args.alpha
    for item in args.param or []:
        if "=" not in item:
            raise ModelError(f"--param expects k=v, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = _coerce(v.strip())
    unknown = sorted(set(overrides) - set(IceeParams.__dataclass_fields__))
    if unknown:
        raise ModelError(f"unknown parameter(s): {', '.join(unknown)}")
    if args.threads and args.threads > 1:
        log.info("--threads=%d requested; extraction runs single-threaded", args.threads)
    return RunConfig(seed=seed, alpha=alpha, overrides=overrides, timeout=args.timeout_secs,
                     check_invariants=getattr(args, "check_invariants", False))


def _front_hv(*fronts):
    arrays = [np.array([tuple(s.cost) for s in f], dtype=float).reshape(-1, 3) for f in fronts]
    ref = common_reference(*arrays)
    return [hypervolume(a, ref) for a in arrays], ref


def cmd_optimize(args) -> int:
    model = _load(args.model)
    cfg = _config(args)
    result = run(model, cfg)
    dot = result.graph.to_dot() if args.dot else None
    for path in write_run(args.out, result.front, result.report, dot):
        log.info("wrote %s", path)
    s = result.report["summary"]
    print(f"front: {len(result.front)} solutions, hypervolume {s['hypervolume']:.6g}, "
          f"{s['#Iter']} iterations, {s['total']:.2f} s -> {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    model = _load(args.model)
    cfg = _config(args)
    ours = run(model, cfg)
    base = nested_optimize(ours.explored_designs, model, ours.params, cfg.seed,
                           timeout=args.baseline_timeout)
    fronts = [ours.front, base.front]
    oracle = None
    if args.oracle:
        oracle = exhaustive_oracle(model, OracleBudget())
        fronts.append(oracle.front)
    hvs, ref = _front_hv(*fronts)
    t_ours, t_base = ours.report["summary"]["total"], base.seconds
    row = {
        "model": model.name,
        "designs": len(ours.explored_designs),
        "ours_min": t_ours / 60.0,
        "baseline_min": t_base / 60.0,
        "speedup": t_base / t_ours if t_ours > 0 else float("inf"),
        "hv_ours": hvs[0],
        "hv_baseline": hvs[1],
        "hv_rel_diff": abs(hvs[0] - hvs[1]) / max(hvs[0], hvs[1], 1e-300),
        "baseline_timed_out": base.timed_out,
        "ref_point": [float(x) for x in ref],
    }
    if oracle is not None:
        row["hv_oracle"] = hvs[2]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.json").write_text(report_json(row))
    cols = ["model", "designs", "ours_min", "baseline_min", "speedup", "hv_ours", "hv_baseline",
            "hv_rel_diff"] + (["hv_oracle"] if oracle is not None else [])
    lines = [",".join(cols)]
    vals = []
    for c in cols:
        v = row[c]
        if c == "baseline_min" and base.timed_out:
            vals.append(f">{v:.4g}")
        else:
            vals.append(f"{v:.6g}" if isinstance(v, float) else str(v))
    lines.append(",".join(vals))
    (out / "compare.csv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    if base.timed_out:
        print("baseline: TIMEOUT (partial front)")
    return EXIT_OK


def cmd_oracle(args) -> int:
    model = _load(args.model)
    budget = OracleBudget(args.max_designs, args.max_arrangements, args.max_cut_orders)
    res = exhaustive_oracle(model, budget)
    hv, _ = _front_hv(res.front)
    write_run(args.out, res.front, {"designs": res.n_designs, "terms": res.n_terms,
                                     "truncated": res.truncated, "seconds": res.seconds,
                                     "hypervolume": hv[0]})
    print(f"oracle: {len(res.front)} solutions from {res.n_terms} terms over {res.n_designs} designs"
          f"{' (truncated)' if res.truncated else ''}")
    return EXIT_OK


def cmd_stats(args) -> int:
    model = _load(args.model)
    cfg = _config(args)
    size = design_space_size(model)
    params = params_for(model, cfg)
    info = {
        "model": model.name,
        "parts": model.n_parts,
        "connectors": len(model.connectors),
        "assignments": size.assignments,
        "unique_bops": size.unique_bops,
        "unique_bops_exact": size.exact,
        "D_for_params": design_space_param(model, cfg.seed),
        "params": params.__dict__,
    }
    print(json.dumps(info, indent=1))
    return EXIT_OK


def cmd_export_dot(args) -> int:
    model = _load(args.model)
    cfg = _config(args)
    result = run(model, cfg)
    text = result.graph.to_dot()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    return EXIT_OK


def cmd_export(args) -> int:
    model = _load(args.model)
    path = Path(args.front)
    if not path.is_file():
        raise ModelError(f"front file not found: {path}")
    pairs = reevaluate_front(path, model)
    bad = [i for i, (a, b) in enumerate(pairs) if tuple(a) != tuple(b)]
    if bad:
        raise InvariantViolation(f"re-evaluated costs differ for solutions {bad}")
    data = json.loads(path.read_text())
    plans = []
    for s in data["solutions"]:
        jobs = load_jobs(s, model)
        plans.append({"design": s["design"], "cost": s["cost"], "stocks": [
            {"stock": j.packing.stock.id, "stack": j.stack,
             "placements": j.packing.to_json()["placements"],
             "cuts": [{**c.to_json(), "stack": j.stack} for c in j.order]} for j in jobs]})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"plans": plans}, indent=1))
    print(f"{len(pairs)} plans re-validated -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bopco", description=__doc__)
    p.add_argument("--version", action="version", version=f"bopco {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default="out"):
        sp.add_argument("model", help="model JSON path, or fixture:<name>")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--alpha", type=float, default=None)
        sp.add_argument("--param", action="append", metavar="K=V", help="override a search parameter")
        sp.add_argument("--config", help="JSON file with seed, alpha and parameter overrides")
        sp.add_argument("--timeout-secs", type=float, default=None, dest="timeout_secs")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--out", default=out_default)
        sp.add_argument("--check-invariants", action="store_true", dest="check_invariants")

    sp = sub.add_parser("optimize", help="run the co-optimization")
    common(sp)
    sp.add_argument("--dot", action="store_true", help="also write egraph.dot")
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("compare", help="compare against the nested per-design baseline")
    common(sp)
    sp.add_argument("--oracle", action="store_true", help="add the exhaustive oracle's hypervolume")
    sp.add_argument("--baseline-timeout", type=float, default=None, dest="baseline_timeout")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("oracle", help="exhaustive front for tiny models")
    sp.add_argument("model")
    sp.add_argument("--out", default="out")
    sp.add_argument("--max-designs", type=int, default=OracleBudget.max_designs)
    sp.add_argument("--max-arrangements", type=int, default=OracleBudget.max_arrangements_per_design)
    sp.add_argument("--max-cut-orders", type=int, default=OracleBudget.max_cut_orders_per_atomic)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("stats", help="design-space size and derived parameters")
    common(sp)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("export-dot", help="write the final e-graph as GraphViz DOT")
    common(sp, out_default="-")
    sp.set_defaults(func=cmd_export_dot)

    sp = sub.add_parser("export", help="re-validate a front.json and write per-stock cut plans")
    sp.add_argument("model")
    sp.add_argument("front")
    sp.add_argument("--out", default="plans.json")
    sp.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    level = os.environ.get("BOPCO_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InfeasibleError, BudgetExceeded) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InvariantViolation, EGraphError, DecodeError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except BopcoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
