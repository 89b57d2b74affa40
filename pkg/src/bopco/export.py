"""Writing and re-reading fronts, plans and run reports."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidPackingError
from .fabrication.cutting import Job, evaluate_costs
from .fabrication.packing import Cut, packing_from_json
from .model import DesignSpaceModel
from .moo import Solution

CSV_COLUMNS = ("design_vector", "f_c", "f_p", "f_t", "term_fingerprint")


def fmt(x: float) -> str:
    return format(float(x), ".6g")


def design_str(design: Sequence[int]) -> str:
    return "[" + ",".join(str(int(g)) for g in design) + "]"


def front_csv(front: Sequence[Solution]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in front:
        w.writerow([design_str(s.design), fmt(s.cost[0]), fmt(s.cost[1]), fmt(s.cost[2]),
                    s.term_fingerprint])
    return buf.getvalue()


def job_json(job: Job) -> dict:
    return {"stock": job.packing.stock.id, "stack": job.stack,
            "placements": job.packing.to_json()["placements"],
            "cuts": [c.to_json() for c in job.order]}


def solution_json(s: Solution) -> dict:
    return {"design": list(s.design),
            "cost": {"f_c": float(s.cost[0]), "f_p": float(s.cost[1]), "f_t": float(s.cost[2])},
            "term_fingerprint": s.term_fingerprint,
            "jobs": [job_json(j) for j in s.plans]}


def front_json(front: Sequence[Solution]) -> str:
    return json.dumps({"solutions": [solution_json(s) for s in front]}, indent=1)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def report_json(report: dict) -> str:
    return json.dumps(_plain(report), indent=1)


def write_run(out_dir: str | Path, front: Sequence[Solution], report: dict | None = None,
              dot: str | None = None) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in (("front.csv", front_csv(front)), ("front.json", front_json(front)),
                       ("report.json", report_json(report) if report is not None else None),
                       ("egraph.dot", dot)):
        if text is None:
            continue
        (out / name).write_text(text)
        written.append(out / name)
    return written


def load_jobs(obj: dict, model: DesignSpaceModel) -> list:
    jobs = []
    for j in obj["jobs"]:
        stock = model.stock_map.get(j["stock"])
        if stock is None:
            raise InvalidPackingError(f"unknown stock {j['stock']!r}")
        order = tuple(Cut.from_json(c) for c in j["cuts"])
        jobs.append(Job(packing_from_json(j, stock, order), order, int(j["stack"])))
    return jobs


def reevaluate_front(path: str | Path, model: DesignSpaceModel) -> list:
    """``(stored, recomputed)`` cost pairs for every solution of an exported front."""
    data = json.loads(Path(path).read_text())
    out = []
    for s in data["solutions"]:
        stored = (s["cost"]["f_c"], s["cost"]["f_p"], s["cost"]["f_t"])
        out.append((stored, tuple(evaluate_costs(load_jobs(s, model), model.tool_map))))
    return out
