"""Cutting-plan optimization for atomic e-nodes and whole terms."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from ..model import DesignSpaceModel
from ..moo import Solution, SolutionArchive
from ..terms import DecodedTerm
from .cutting import Job, ObjectiveVector, _changes, enumerate_cut_orders, evaluate_costs, order_fingerprint

LOCAL_SEARCH_ITERS = 100

COUNTERS: Counter = Counter()


@dataclass(frozen=True)
class CutPlan:
    order: tuple
    cost: ObjectiveVector


@dataclass(frozen=True)
class OrderInfo:
    """An evaluated cut order for one stock piece (stack of one)."""

    order: tuple
    cost: ObjectiveVector
    stack_limit: int
    fp: str

    @property
    def first(self):
        return (self.order[0].tool, self.order[0].angle) if self.order else None

    @property
    def last(self):
        return (self.order[-1].tool, self.order[-1].angle) if self.order else None

    @property
    def plan(self) -> CutPlan:
        return CutPlan(self.order, self.cost)


@dataclass
class AtomicPlans:
    limit: int
    options: list
    min_time: OrderInfo
    min_precision: OrderInfo


def optimize_atomic(node, limit: int, model: DesignSpaceModel) -> tuple[CutPlan, CutPlan]:
    """Best cut orders for one atomic node by time and by precision.

    Results are memoized on the node; a repeated call with the same ``limit``
    performs no enumeration.
    """
    return atomic_plans(node, limit, model).min_time.plan, node.plan_cache.min_precision.plan


def atomic_plans(node, limit: int, model: DesignSpaceModel) -> AtomicPlans:
    cache = node.plan_cache
    if cache is not None and cache.limit == limit:
        COUNTERS["cache_hits"] += 1
        return cache
    COUNTERS["enumerations"] += 1
    packing = node.packing
    tools = model.tool_map
    infos = []
    for order in enumerate_cut_orders(packing, limit, model.tools_for(packing.stock.kind)):
        cost = evaluate_costs([Job(packing, order, 1)], tools)
        used = {c.tool for c in order}
        stack = min((tools[t].stack_limit for t in used), default=max(
            t.stack_limit for t in model.tools_for(packing.stock.kind)))
        infos.append(OrderInfo(order, cost, stack, order_fingerprint(order)))
    COUNTERS["orders_evaluated"] += len(infos)
    min_time = min(infos, key=lambda o: (o.cost.f_t, o.cost.f_p, o.fp))
    min_prec = min(infos, key=lambda o: (o.cost.f_p, o.cost.f_t, o.fp))
    node.plan_cache = AtomicPlans(limit, infos, min_time, min_prec)
    return node.plan_cache


def _groups(term: DecodedTerm, limit: int, model: DesignSpaceModel) -> list:
    """Atomic nodes grouped by identical packing: ``[(node, plans, count)]``."""
    counts: dict = {}
    nodes: dict = {}
    for node in term.atoms:
        fp = node.packing.fingerprint
        counts[fp] = counts.get(fp, 0) + 1
        nodes[fp] = node
    return [(nodes[fp], atomic_plans(nodes[fp], limit, model), counts[fp]) for fp in sorted(counts)]


def _stacks(n: int, cap: int) -> list:
    full, rest = divmod(n, cap)
    return [cap] * full + ([rest] if rest else [])


class _PlanState:
    """Job sequence for a term: each job is ``[group, option_index, stack]``."""

    def __init__(self, groups: list, model: DesignSpaceModel, pick: str):
        self.groups = groups
        self.tools = model.tool_map
        self.jobs = []
        for g, (_, plans, n) in enumerate(groups):
            best = plans.min_time if pick == "time" else plans.min_precision
            idx = plans.options.index(best)
            for s in _stacks(n, best.stack_limit):
                self.jobs.append([g, idx, s])

    def info(self, job) -> OrderInfo:
        return self.groups[job[0]][1].options[job[1]]

    def score(self, jobs) -> tuple[float, float]:
        f_t = f_p = 0.0
        prev = None
        for job in jobs:
            info = self.info(job)
            f_t += info.cost.f_t
            f_p += info.cost.f_p * job[2]
            if info.order:
                if _changes(prev, info.order[0]):
                    f_t += self.tools[info.order[0].tool].setup_time
                prev = info.last
        return f_t, f_p

    def to_jobs(self) -> list:
        return [Job(self.groups[g][0].packing, self.info([g, o, s]).order, s) for g, o, s in self.jobs]


def _local_search(state: _PlanState, objective: str) -> None:
    """Best-improvement search over job swaps and per-job order changes."""

    def rank(jobs):
        f_t, f_p = state.score(jobs)
        return (f_t, f_p) if objective == "time" else (f_p, f_t)

    allowed = []
    for _, plans, _ in state.groups:
        if objective == "time":
            allowed.append(range(len(plans.options)))
        else:
            best = plans.min_precision.cost.f_p
            allowed.append([i for i, o in enumerate(plans.options) if o.cost.f_p <= best])

    current = rank(state.jobs)
    for _ in range(LOCAL_SEARCH_ITERS):
        best, best_jobs = current, None
        n = len(state.jobs)
        for i in range(n):
            for j in range(i + 1, n):
                cand = [list(x) for x in state.jobs]
                cand[i], cand[j] = cand[j], cand[i]
                r = rank(cand)
                if r < best:
                    best, best_jobs = r, cand
        for i, (g, o, s) in enumerate(state.jobs):
            for alt in allowed[g]:
                if alt == o or state.groups[g][1].options[alt].stack_limit < s:
                    continue
                cand = [list(x) for x in state.jobs]
                cand[i][1] = alt
                r = rank(cand)
                if r < best:
                    best, best_jobs = r, cand
        if best_jobs is None:
            break
        state.jobs, current = best_jobs, best


def term_bounds(term: DecodedTerm, limit: int, model: DesignSpaceModel) -> tuple[ObjectiveVector, ObjectiveVector]:
    """Componentwise lower bound and a feasible upper bound on the term's plans.

    The lower bound charges each group of identical packings its cheapest
    single-piece time once, as if the whole group were one stack; the upper
    bound is the exact cost of the min-time plans executed in canonical order.
    """
    groups = _groups(term, limit, model)
    f_c = f_p = f_t = 0.0
    for node, plans, n in groups:
        f_c += node.packing.stock.price * n
        f_p += plans.min_precision.cost.f_p * n
        f_t += plans.min_time.cost.f_t
    lower = ObjectiveVector(f_c, f_p, f_t)
    upper = evaluate_costs(_PlanState(groups, model, "time").to_jobs(), model.tool_map)
    return lower, upper


def best_plans(term: DecodedTerm, limit: int, model: DesignSpaceModel) -> list:
    """Min-time and min-precision job lists for the whole term (possibly equal)."""
    groups = _groups(term, limit, model)
    out = []
    for objective in ("time", "precision"):
        state = _PlanState(groups, model, objective)
        _local_search(state, objective)
        out.append(state.to_jobs())
    return out


def finalize_term(term: DecodedTerm, limit: int, archive: SolutionArchive | None,
                  model: DesignSpaceModel) -> list:
    """Turn a term into at most two solutions, or none if its lower bound is dominated."""
    lower, _ = term_bounds(term, limit, model)
    if archive is not None and archive.front_dominates(lower):
        COUNTERS["pruned_terms"] += 1
        return []
    out: list = []
    seen: set = set()
    for jobs in best_plans(term, limit, model):
        cost = evaluate_costs(jobs, model.tool_map)
        if cost in seen:
            continue
        seen.add(cost)
        out.append(Solution(term.design, term.fingerprint, cost, tuple(jobs), term.struct,
                            term.class_keys))
    COUNTERS["finalized_terms"] += 1
    return out


def solution_from_jobs(jobs: Sequence[Job], model: DesignSpaceModel) -> ObjectiveVector:
    return evaluate_costs(jobs, model.tool_map)
