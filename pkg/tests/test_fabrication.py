import itertools
import math

import numpy as np
import pytest

from bopco.baseline import standalone_term
from bopco.egraph import AtomicNode
from bopco.errors import InfeasibleError, InvalidPackingError
from bopco.fabrication import (Cut, Job, enumerate_arrangements, enumerate_cut_orders, evaluate_costs,
                               finalize_term, generate_arrangements, optimize_atomic, pack_bar,
                               pack_sheet, simulate, term_bounds, validate_packing)
from bopco.fabrication.cutting import count_orders
from bopco.fabrication.planning import COUNTERS, atomic_plans
from bopco.fixtures import box_atom, box_model, load_fixture, random_model, worked_term
from bopco.model import (Bar, ConcretePart, Rect, StockType, bop_key, instantiate_design,
                         random_design)
from bopco.moo import SolutionArchive
from bopco.terms import atoms, term_key

BAR = StockType("s", Bar(1000.0), 5.0, 3.0, "pine")
SHEET = StockType("ply", Rect(1000.0, 800.0), 30.0, 3.0, "ply")


def bar(length, al=90, ar=90, tid="p"):
    return ConcretePart(tid, Bar(length, al, ar), "pine")


def rect(w, h, tid="r"):
    return ConcretePart(tid, Rect(w, h), "ply")


def first_order(packing, model):
    return enumerate_cut_orders(packing, 1, model.tools_for(packing.stock.kind))[0]


# -- cost evaluation ----------------------------------------------------------------

def test_empty_plan_costs_nothing():
    assert tuple(evaluate_costs([], box_model().tool_map)) == (0.0, 0.0, 0.0)


def test_two_square_cuts():
    m = box_model()
    pk = box_atom("long", "xy").packing
    assert len(pk.cuts) == 2
    assert tuple(evaluate_costs([Job(pk, first_order(pk, m), 1)], m.tool_map)) == (9.0, 0.0, 20.0)


def test_stacking_multiplies_material_not_time():
    m = box_model()
    pk = box_atom("long", "xy").packing
    assert tuple(evaluate_costs([Job(pk, first_order(pk, m), 3)], m.tool_map)) == (27.0, 0.0, 20.0)


def test_angled_cut_costs_precision():
    m = box_model()
    pk = pack_bar(BAR, [bar(300, 45, 90)])
    order = first_order(pk, m)
    assert tuple(evaluate_costs([Job(pk, order, 1)], m.tool_map)) == (5.0, 0.5, 10.0)
    assert tuple(evaluate_costs([Job(pk, order, 2)], m.tool_map)) == (10.0, 1.0, 10.0)


def test_angle_change_adds_setup():
    m = box_model()
    pk = pack_bar(BAR, [bar(300, 90, 45), bar(200)])
    orders = enumerate_cut_orders(pk, 100, m.tools_for("1d"))
    costs = {evaluate_costs([Job(pk, o, 1)], m.tool_map).f_t for o in orders}
    n = len(pk.cuts)
    # every order switches angle at least once; some switch twice
    assert min(costs) == n * 10 + 60
    assert max(costs) <= n * 10 + 2 * 60


def test_setup_carries_across_jobs():
    m = box_model()
    square = pack_bar(BAR, [bar(300)])
    angled = pack_bar(BAR, [bar(300, 90, 45)])
    jobs = [Job(square, first_order(square, m), 1), Job(angled, first_order(angled, m), 1)]
    assert evaluate_costs(jobs, m.tool_map).f_t == 10 + 10 + 60


def test_sheet_cut_depth_costs_precision():
    pk = pack_sheet(SHEET, [(rect(300, 200), False)] * 5)
    m = load_fixture("cabinet")
    tools = {t.id: t for t in m.tools}
    order = next(o for o in enumerate_cut_orders(pk, 50, m.tools_for("2d")) if max(simulate(pk, o)) > 0)
    depths = simulate(pk, order)
    cost = evaluate_costs([Job(pk, order, 1)], tools)
    assert cost.f_p == pytest.approx(sum(0.4 * (1 + d) for d in depths if d > 0))


def test_invalid_order_rejected():
    pk = pack_bar(BAR, [bar(300), bar(200)])
    with pytest.raises(InvalidPackingError):
        simulate(pk, pk.cuts[:1])
    with pytest.raises(InvalidPackingError):
        simulate(pk, pk.cuts + pk.cuts[:1])


# -- packing -----------------------------------------------------------------------

def test_bar_packing_kerf_and_fit():
    assert pack_bar(BAR, [bar(500), bar(497)]) is not None
    assert pack_bar(BAR, [bar(500), bar(498)]) is None
    exact = pack_bar(BAR, [bar(1000)])
    assert exact is not None and exact.cuts == ()


def test_matching_miters_share_a_cut():
    shared = pack_bar(BAR, [bar(300, 90, 45), bar(300, 45, 90)])
    apart = pack_bar(BAR, [bar(300, 90, 45), bar(300, 90, 90)])
    assert len(shared.cuts) == 2 and len(apart.cuts) == 3


def test_sheet_packing_is_valid():
    items = [(rect(300, 200), False), (rect(250, 200), True), (rect(400, 150), False)]
    pk = pack_sheet(SHEET, items)
    validate_packing(pk)
    assert bop_key(pk.parts) == bop_key([p for p, _ in items])


def test_oversized_sheet_part_does_not_fit():
    assert pack_sheet(SHEET, [(rect(1200, 100), False)]) is None
    assert pack_sheet(SHEET, [(rect(900, 100), False)]) is not None


def test_random_arrangements_are_valid_and_cover_the_bag():
    rng = np.random.default_rng(21)
    for _ in range(25):
        m = random_model(rng)
        bag = instantiate_design(m, random_design(m, rng))
        hist = set()
        for term in generate_arrangements(bag, m, 4, hist, rng):
            assert term_key(term) == bop_key(bag)
            for pk in atoms(term):
                validate_packing(pk)


# -- cut orders ----------------------------------------------------------------------

def test_bar_has_factorial_orders():
    pk = box_atom("long", "wyzz").packing
    assert len(pk.cuts) == 4 and count_orders(pk) == math.factorial(4)
    assert len(enumerate_cut_orders(pk, 1000, box_model().tools_for("1d"))) == 24


def test_enumeration_respects_limit_and_is_deterministic():
    m = box_model()
    pk = box_atom("long", "wyzz").packing
    a = enumerate_cut_orders(pk, 5, m.tools_for("1d"))
    b = enumerate_cut_orders(pk, 5, m.tools_for("1d"))
    assert len(a) == 5 and a == b
    assert len(set(a)) == 5
    with pytest.raises(ValueError):
        enumerate_cut_orders(pk, 0, m.tools_for("1d"))


def test_sheet_order_count_matches_brute_force():
    pk = pack_sheet(SHEET, [(rect(300, 200), False), (rect(300, 150), False), (rect(200, 300), False)])
    brute = 0
    for perm in itertools.permutations(pk.cuts):
        try:
            simulate(pk, perm)
            brute += 1
        except InvalidPackingError:
            pass
    assert count_orders(pk) == brute
    m = load_fixture("cabinet")
    assert len(enumerate_cut_orders(pk, 10**6, m.tools_for("2d"))) == brute


# -- atomic plans --------------------------------------------------------------------

def test_optimize_atomic_is_memoized():
    m = box_model()
    node = AtomicNode(box_atom("long", "wyzz").packing)
    before = COUNTERS["enumerations"]
    t1, p1 = optimize_atomic(node, 50, m)
    t2, p2 = optimize_atomic(node, 50, m)
    assert COUNTERS["enumerations"] == before + 1
    assert (t1, p1) == (t2, p2)
    optimize_atomic(node, 10, m)
    assert COUNTERS["enumerations"] == before + 2


def test_atomic_plans_are_extremal():
    m = box_model()
    pk = pack_bar(BAR, [bar(300, 90, 45), bar(200), bar(150, 60, 90)])
    node = AtomicNode(pk)
    t, p = optimize_atomic(node, 1000, m)
    costs = [evaluate_costs([Job(pk, o, 1)], m.tool_map)
             for o in enumerate_cut_orders(pk, 1000, m.tools_for("1d"))]
    assert t.cost.f_t == min(c.f_t for c in costs)
    assert p.cost.f_p == min(c.f_p for c in costs)


# -- term bounds and finalization ------------------------------------------------------

def test_worked_term_bounds():
    m = box_model()
    term = standalone_term(worked_term(), (0,), {})
    lower, upper = term_bounds(term, 100, m)
    assert tuple(lower) == (17.0, 0.0, 40.0)
    assert tuple(upper) == (17.0, 0.0, 40.0)


def test_identical_packings_share_time_in_lower_bound():
    m = box_model()
    y = box_atom("short", "y")
    from bopco.terms import Join
    term = standalone_term(Join(y, Join(y, y)), (0,), {})
    lower, upper = term_bounds(term, 100, m)
    # stack limit 2 forces two jobs, the bound credits a single stack
    assert tuple(lower) == (12.0, 0.0, 10.0)
    assert tuple(upper) == (12.0, 0.0, 20.0)


def _random_plans(term, limit, model, rng, n=30):
    groups = {}
    for node in term.atoms:
        groups.setdefault(node.packing.fingerprint, []).append(node)
    for _ in range(n):
        jobs = []
        for nodes in groups.values():
            plans = atomic_plans(nodes[0], limit, model)
            left = len(nodes)
            while left:
                info = plans.options[int(rng.integers(len(plans.options)))]
                s = int(rng.integers(1, min(left, info.stack_limit) + 1))
                jobs.append(Job(nodes[0].packing, info.order, s))
                left -= s
        yield [jobs[i] for i in rng.permutation(len(jobs))]


def test_bounds_are_sound_on_random_terms():
    rng = np.random.default_rng(4)
    checked = 0
    for _ in range(20):
        m = random_model(rng)
        bag = instantiate_design(m, random_design(m, rng))
        for t in generate_arrangements(bag, m, 3, set(), rng):
            term = standalone_term(t, (0,), {})
            lower, upper = term_bounds(term, 30, m)
            sols = finalize_term(term, 30, None, m)
            assert sols
            for s in sols:
                assert all(lo <= c + 1e-9 for lo, c in zip(lower, s.cost))
            assert min(s.cost.f_t for s in sols) <= upper.f_t + 1e-9
            for jobs in _random_plans(term, 30, m, rng):
                c = evaluate_costs(jobs, m.tool_map)
                assert all(lo <= x + 1e-9 for lo, x in zip(lower, c))
                checked += 1
    assert checked > 100


def test_finalize_prunes_dominated_terms():
    m = box_model()
    term = standalone_term(worked_term(), (0,), {})
    archive = SolutionArchive()
    for s in finalize_term(term, 100, None, m):
        archive.insert(s)
    worse = standalone_term(worked_term(), (0,), {})
    before = COUNTERS["pruned_terms"]
    # a front point strictly better everywhere prunes the term outright
    from bopco.moo import Solution
    archive.insert(Solution((9,), "better", (1.0, 0.0, 1.0), (), ("A", "x"), frozenset()))
    assert finalize_term(worse, 100, archive, m) == []
    assert COUNTERS["pruned_terms"] == before + 1


def test_finalize_dedups_equal_costs():
    m = box_model()
    sols = finalize_term(standalone_term(worked_term(), (0,), {}), 100, None, m)
    assert len(sols) == 1
    assert tuple(sols[0].cost) == (17.0, 0.0, 40.0)


# -- arrangement generation -------------------------------------------------------------

def test_box_bag_yields_fresh_arrangements():
    m = box_model()
    bag = [ConcretePart(n, Bar(L), "pine") for n, L in (("x", 600), ("y", 400), ("y", 400), ("z", 300))]
    hist = set()
    rng = np.random.default_rng(0)
    first = generate_arrangements(bag, m, 5, hist, rng)
    second = generate_arrangements(bag, m, 5, hist, rng)
    assert first and all(term_key(t) == bop_key(bag) for t in first + second)
    fps = [tuple(sorted(p.fingerprint for p in atoms(t))) for t in first + second]
    assert len(set(fps)) == len(fps)
    assert len(hist) == len(fps)


def test_generation_zero_k():
    assert generate_arrangements([bar(100)], box_model(), 0, set(), np.random.default_rng(0)) == []


def test_unpackable_part_is_infeasible():
    with pytest.raises(InfeasibleError, match="big"):
        generate_arrangements([bar(5000, tid="big")], box_model(), 3, set(), np.random.default_rng(0))


def test_generated_arrangements_are_within_enumeration():
    m = box_model()
    bag = [ConcretePart(n, Bar(L), "pine") for n, L in (("x", 600), ("y", 400), ("z", 300))]
    terms, truncated = enumerate_arrangements(bag, m, 10**5)
    assert not truncated
    space = {tuple(sorted(p.fingerprint for p in atoms(t))) for t in terms}
    got = generate_arrangements(bag, m, 50, set(), np.random.default_rng(1))
    for t in got:
        assert tuple(sorted(p.fingerprint for p in atoms(t))) in space
    assert len(space) >= len(got)


def test_enumeration_truncates():
    m = box_model()
    bag = [ConcretePart(n, Bar(L), "pine") for n, L in (("x", 600), ("y", 400), ("z", 300))]
    terms, truncated = enumerate_arrangements(bag, m, 2)
    assert len(terms) == 2 and truncated


def test_cut_roundtrip_json():
    c = Cut(0, 12.5, 0.0, 1.0, 45.0, "saw")
    assert Cut.from_json(c.to_json()) == c
