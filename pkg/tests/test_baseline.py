import json
from pathlib import Path

import pytest

from bopco.baseline import (OracleBudget, exhaustive_oracle, nested_optimize, optimize_single_design,
                            unique_designs)
from bopco.errors import BudgetExceeded
from bopco.icee import RunConfig, params_for
from bopco.model import design_key, parse_model
from bopco.moo import dominates

GOLDEN = Path(__file__).parent / "golden" / "frame_oracle.json"

TINY = {
    "templates": [{"id": "a", "shape": {"bar": {"len": 300}}, "material": "pine"}],
    "connectors": [],
    "stock": [{"id": "s", "shape": {"bar": {"len": 1000}}, "price": 5, "kerf": 3, "material": "pine"}],
    "tools": [{"id": "saw", "kind": "chopsaw", "cut_time": 10, "setup_time": 60, "base_error": 0.5}],
}


def fast_params(model):
    return params_for(model, RunConfig(overrides={"mt_d": 3, "t_d": 2, "mt_p": 10, "t_p": 4}))


def test_trivial_oracle():
    res = exhaustive_oracle(parse_model(json.dumps(TINY)))
    assert [tuple(s.cost) for s in res.front] == [(5.0, 0.0, 10.0)]
    assert res.n_designs == 1 and not res.truncated


def test_frame_oracle_matches_golden(frame):
    golden = json.loads(GOLDEN.read_text())
    res = exhaustive_oracle(frame, OracleBudget(**golden["budget"]))
    assert res.n_designs == golden["designs"] and res.n_terms == golden["terms"]
    assert not res.truncated
    got = sorted((list(s.design), list(s.cost)) for s in res.front)
    want = sorted((e["design"], e["cost"]) for e in golden["front"])
    assert got == want


def test_oracle_front_is_mutually_nondominated(frame):
    golden = json.loads(GOLDEN.read_text())
    costs = [e["cost"] for e in golden["front"]]
    for a in costs:
        assert not any(dominates(b, a) for b in costs)


def test_oracle_budget_enforced(frame):
    with pytest.raises(BudgetExceeded):
        exhaustive_oracle(frame, OracleBudget(max_designs=2))
    with pytest.raises(ValueError):
        OracleBudget(max_designs=0)


def test_unique_designs_cover_every_bag(frame):
    reps = unique_designs(frame)
    assert len(reps) == 13
    assert len({design_key(frame, d) for d in reps}) == 13


def test_single_design_stays_on_its_design(frame):
    orig = tuple(frame.original_design())
    front = optimize_single_design(orig, frame, fast_params(frame), seed=0)
    assert front and all(s.design == orig for s in front)


def test_nested_merges_per_design_fronts(frame):
    designs = unique_designs(frame)[:3]
    p = fast_params(frame)
    res = nested_optimize(designs, frame, p, seed=0)
    assert set(res.per_design) == set(designs)
    assert not res.timed_out
    singles = [s for d in designs for s in optimize_single_design(d, frame, p, seed=0)]
    for s in singles:
        assert not any(dominates(s.cost, r.cost) for r in res.front)


def test_nested_timeout_is_reported(frame):
    res = nested_optimize(unique_designs(frame), frame, fast_params(frame), timeout=0.0)
    assert res.timed_out
