"""Reference optimizers: per-design nested optimization and an exhaustive oracle."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

from .egraph import AtomicNode
from .errors import BudgetExceeded
from .fabrication.arrangements import _pack_cached, enumerate_arrangements
from .fabrication.planning import finalize_term
from .icee import IceeParams, RunConfig, params_for, run, struct_fingerprint
from .model import DesignSpaceModel, design_key, instantiate_design, iter_designs
from .moo import SolutionArchive, pareto_filter
from .terms import DecodedTerm, Term, atoms, term_struct


@dataclass(frozen=True)
class OracleBudget:
    max_designs: int = 64
    max_arrangements_per_design: int = 20_000
    max_cut_orders_per_atomic: int = 720

    def __post_init__(self):
        if min(self.max_designs, self.max_arrangements_per_design, self.max_cut_orders_per_atomic) < 1:
            raise ValueError("oracle budget entries must be >= 1")


@dataclass
class OracleResult:
    front: list
    n_designs: int
    n_terms: int
    truncated: bool
    seconds: float


@dataclass
class NestedResult:
    front: list
    seconds: float
    per_design: dict = field(default_factory=dict)
    timed_out: bool = False


def optimize_single_design(design: Sequence[int], model: DesignSpaceModel,
                           params: IceeParams | None = None, seed: int = 0) -> list:
    """Fabrication-only optimization of one design on a fresh one-root e-graph."""
    cfg = RunConfig(seed=seed, designs=[tuple(design)], include_original=False, expand_designs=False)
    return run(model, cfg, params or params_for(model, cfg)).front


def nested_optimize(designs: Sequence[Sequence[int]], model: DesignSpaceModel,
                    params: IceeParams | None = None, seed: int = 0,
                    timeout: float | None = None) -> NestedResult:
    """Optimize every design independently and merge the fronts.

    Nothing is shared between designs: each run starts with an empty e-graph
    and the packing cache is cleared, so designs with equal bags repeat work.
    """
    params = params or params_for(model, RunConfig(seed=seed))
    t0 = time.perf_counter()
    pooled: list = []
    per_design: dict = {}
    timed_out = False
    for d in designs:
        if timeout is not None and time.perf_counter() - t0 > timeout:
            timed_out = True
            break
        _pack_cached.cache_clear()
        ts = time.perf_counter()
        front = optimize_single_design(d, model, params, seed)
        per_design[tuple(d)] = time.perf_counter() - ts
        pooled.extend(front)
    return NestedResult(pareto_filter(pooled), time.perf_counter() - t0, per_design, timed_out)


def standalone_term(term: Term, design: tuple, nodes: dict) -> DecodedTerm:
    """A decoded term built without an e-graph; ``nodes`` shares atomic plan caches."""
    packings = atoms(term)
    atom_nodes = tuple(nodes.setdefault(p.fingerprint, AtomicNode(p)) for p in packings)
    struct = term_struct(term)
    return DecodedTerm(-1, tuple(design), struct, atom_nodes, frozenset(), struct_fingerprint(struct))


def unique_designs(model: DesignSpaceModel) -> list:
    """Smallest design vector for each distinct bag of parts, in key order."""
    reps: dict = {}
    for d in iter_designs(model):
        key = design_key(model, d)
        if key not in reps:
            reps[key] = tuple(d)
    return [reps[k] for k in sorted(reps)]


def exhaustive_oracle(model: DesignSpaceModel, budget: OracleBudget = OracleBudget()) -> OracleResult:
    """Exact front over every arrangement the generator can build, for tiny models.

    Terms whose lower bound is already dominated are skipped; this cannot
    change the front.
    """
    t0 = time.perf_counter()
    n_assign = 1
    for n in model.variant_counts:
        n_assign *= n
    if n_assign > 100 * budget.max_designs:
        raise BudgetExceeded(f"{n_assign} design assignments exceed the oracle budget")
    designs = unique_designs(model)
    if len(designs) > budget.max_designs:
        raise BudgetExceeded(f"{len(designs)} distinct designs exceed max_designs={budget.max_designs}")
    archive = SolutionArchive(cap=10**9)
    nodes: dict = {}
    n_terms = 0
    truncated = False
    for d in designs:
        bag = instantiate_design(model, d)
        terms, cut = enumerate_arrangements(bag, model, budget.max_arrangements_per_design)
        truncated |= cut
        for t in terms:
            n_terms += 1
            for s in finalize_term(standalone_term(t, d, nodes), budget.max_cut_orders_per_atomic,
                                   archive, model):
                archive.insert(s)
    return OracleResult(pareto_filter(archive.front()), len(designs), n_terms, truncated,
                        time.perf_counter() - t0)
