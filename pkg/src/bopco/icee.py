"""Iterative contraction and expansion over the bag-of-parts e-graph.

One iteration extracts a Pareto front from the e-graph with a genetic
algorithm, scores every e-class by impact and exploration, prunes low scorers,
and grows the graph with new designs and new arrangements.
"""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .egraph import AtomicNode, BopEGraph, UnionNode
from .errors import DecodeError, InvariantViolation
from .fabrication.arrangements import generate_arrangements
from .fabrication.planning import finalize_term, term_bounds
from .model import (DesignSpaceModel, bop_key, design_key, design_space_size, identical_parts_score,
                    instantiate_design, iter_designs, random_design)
from .moo import SolutionArchive, hypervolume, nsga3_select, pareto_filter
from .terms import DecodedTerm

log = logging.getLogger(__name__)

SAMPLE_CAP = 10**5
ORIENTATIONS = 2
HV_RTOL = 1e-9


@dataclass
class IceeParams:
    alpha: float = 0.75
    K_d: int = 1
    K_f: int = 1
    K_nd: int = 0
    K_m: int = 10
    N_pop: int = 4
    P: int = 1
    t_d: int = 10
    mt_d: int = 200
    mc_d: float = 0.95
    mm_d: float = 0.80
    t_p: int = 20
    mt_p: int = 200
    mc_p: float = 0.95
    mm_p: float = 0.80
    w: float = 0.7
    P_rate: float = 0.3
    T: float = 4 * 3600.0

    def validate(self) -> None:
        for name in ("mc_d", "mm_d", "mc_p", "mm_p", "w", "P_rate", "alpha"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("K_d", "K_f", "N_pop", "P"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("K_m", "t_d", "mt_d", "t_p", "mt_p", "K_nd"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.K_nd > self.K_d:
            raise ValueError("K_nd must not exceed K_d")


def _ceil_log10(n: int) -> int:
    # exact for integers: smallest k with 10**k >= n
    return 0 if n <= 1 else len(str(n - 1))


def derive_params(alpha: float, n_p: int, D_size: int, **overrides: Any) -> IceeParams:
    """Search parameters scaled by model complexity and the exploration knob ``alpha``."""
    if n_p < 1 or D_size < 1:
        raise ValueError("n_p and D_size must be >= 1")
    K_d = 2 ** _ceil_log10(int(D_size))
    beta = math.floor(44 * alpha**7 + 2)
    p = IceeParams(alpha=alpha, K_d=K_d, K_f=beta * n_p, K_nd=math.floor((1 - alpha) * K_d),
                   N_pop=4 * K_d, P=max(1, 2 * (beta - 2)))
    for k, v in overrides.items():
        if not hasattr(p, k):
            raise ValueError(f"unknown parameter {k!r}")
        setattr(p, k, type(getattr(p, k))(v))
    p.validate()
    return p


# -- genomes -------------------------------------------------------------------

@dataclass
class Genome:
    root_gene: int
    genes: dict

    def vector(self, class_ids: Sequence[int]) -> list:
        return [self.root_gene] + [self.genes[c] for c in class_ids]

    def content_key(self) -> tuple:
        return (self.root_gene, tuple(sorted(self.genes.items())))


def _root_slots(g: BopEGraph) -> list:
    return [(c, n) for c in g.root_classes() for n in g.classes[c].nodes]


def random_genome(g: BopEGraph, rng: np.random.Generator) -> Genome:
    slots = len(_root_slots(g))
    genes = {c: int(rng.integers(len(g.classes[c].nodes))) for c in sorted(g.classes)}
    return Genome(int(rng.integers(slots)), genes)


def repair(genome: Genome, g: BopEGraph, rng: np.random.Generator) -> Genome:
    """Make ``genome`` valid after the e-graph changed."""
    slots = len(_root_slots(g))
    root = genome.root_gene if genome.root_gene < slots else int(rng.integers(slots))
    genes = {}
    for c in sorted(g.classes):
        n = len(g.classes[c].nodes)
        v = genome.genes.get(c)
        genes[c] = v if v is not None and v < n else int(rng.integers(n))
    return Genome(root, genes)


def decode(g: BopEGraph, genome: Genome) -> DecodedTerm:
    """Follow the genome from its root e-node down to atomic packings."""
    slots = _root_slots(g)
    if not 0 <= genome.root_gene < len(slots):
        raise DecodeError(f"root gene {genome.root_gene} out of range ({len(slots)} root e-nodes)")
    root_class, root_node = slots[genome.root_gene]
    atoms: list = []
    used: set = set()

    def walk(cid: int, nid: int, path: frozenset) -> tuple:
        used.add(g.classes[cid].key)
        node = g.nodes[nid]
        if isinstance(node, AtomicNode):
            atoms.append(node)
            return ("A", node.packing.fingerprint)
        parts = []
        for child in (node.left, node.right):
            if child in path:
                raise DecodeError(f"cycle through e-class {child}")
            cls = g.classes[child]
            gi = genome.genes.get(child)
            if gi is None or not 0 <= gi < len(cls.nodes):
                raise DecodeError(f"no valid gene for e-class {child}")
            parts.append(walk(child, cls.nodes[gi], path | {child}))
        return ("U", parts[0], parts[1])

    struct = walk(root_class, root_node, frozenset({root_class}))
    design = g.designs_for(root_class)[0]
    return DecodedTerm(root_class, design, struct, tuple(atoms), frozenset(used),
                       struct_fingerprint(struct))


def struct_fingerprint(struct: tuple) -> str:
    return hashlib.sha1(repr(struct).encode()).hexdigest()[:16]


def encode(g: BopEGraph, struct: tuple, rng: np.random.Generator | None = None) -> Genome:
    """A genome that decodes to ``struct`` (which must be live under a root e-class)."""
    top = g.lookup_node(struct)
    if top is None or not g.is_root(g.node_class[top]):
        raise DecodeError("term is not represented by a root e-class")
    genes: dict = {}

    def assign(s: tuple) -> None:
        if s[0] == "U":
            for child in (s[1], s[2]):
                nid = g.lookup_node(child)
                cid = g.node_class[nid]
                idx = g.classes[cid].nodes.index(nid)
                if genes.setdefault(cid, idx) != idx:
                    raise DecodeError(f"term needs two different e-nodes of e-class {cid}")
                assign(child)

    assign(struct)
    root_gene = _root_slots(g).index((g.node_class[top], top))
    rng = rng or np.random.default_rng(0)
    for c in sorted(g.classes):
        genes.setdefault(c, int(rng.integers(len(g.classes[c].nodes))))
    return Genome(root_gene, genes)


# -- extraction ------------------------------------------------------------------

@dataclass
class _Eval:
    term: DecodedTerm
    cost: tuple
    solutions: list


class Extractor:
    """Genetic extraction of the Pareto front; keeps its population between calls."""

    def __init__(self, model: DesignSpaceModel, params: IceeParams, rng: np.random.Generator):
        self.model = model
        self.params = params
        self.rng = rng
        self.population: list = []
        self.cache: dict = {}
        self.generations = 0
        self.evaluations = 0

    def evaluate(self, g: BopEGraph, genome: Genome, archive: SolutionArchive) -> _Eval:
        term = decode(g, genome)
        hit = self.cache.get(term.fingerprint)
        if hit is not None:
            return hit
        self.evaluations += 1
        sols = finalize_term(term, self.params.P, archive, self.model)
        for s in sols:
            archive.insert(s)
        if sols:
            cost = tuple(sols[0].cost)
        else:
            cost = tuple(term_bounds(term, self.params.P, self.model)[1])
        ev = _Eval(term, cost, sols)
        self.cache[term.fingerprint] = ev
        return ev

    def _vary(self, a: Genome, b: Genome, class_ids: list, g: BopEGraph) -> tuple:
        p, rng = self.params, self.rng
        va, vb = a.vector(class_ids), b.vector(class_ids)
        if len(va) > 1 and rng.random() < p.mc_p:
            cut = int(rng.integers(1, len(va)))
            va, vb = va[:cut] + vb[cut:], vb[:cut] + va[cut:]
        sizes = [len(_root_slots(g))] + [len(g.classes[c].nodes) for c in class_ids]
        out = []
        for v in (va, vb):
            v = list(v)
            if rng.random() < p.mm_p:
                i = int(rng.integers(len(v)))
                v[i] = int(rng.integers(sizes[i]))
            out.append(Genome(v[0], dict(zip(class_ids, v[1:]))))
        return tuple(out)

    def run(self, g: BopEGraph, archive: SolutionArchive) -> list:
        p, rng = self.params, self.rng
        if not g.root_classes():
            raise DecodeError("e-graph has no root e-class")
        class_ids = sorted(g.classes)
        pop = [repair(x, g, rng) for x in self.population]
        while len(pop) < p.N_pop:
            pop.append(random_genome(g, rng))
        evals = [self.evaluate(g, x, archive) for x in pop]
        best = archive.front_costs()
        stale = gens = 0
        while gens < p.mt_p and stale < p.t_p:
            order = rng.permutation(len(pop))
            children = []
            for i in range(0, len(order), 2):
                a = pop[order[i]]
                b = pop[order[i + 1]] if i + 1 < len(order) else pop[order[0]]
                children.extend(self._vary(a, b, class_ids, g))
            children = children[:len(pop)]
            child_evals = [self.evaluate(g, x, archive) for x in children]
            merged = pop + children
            merged_evals = evals + child_evals
            keep = nsga3_select([e.cost for e in merged_evals], p.N_pop, seed=rng,
                                key=lambda i: (merged_evals[i].cost, merged[i].content_key()))
            pop = [merged[i] for i in keep]
            evals = [merged_evals[i] for i in keep]
            gens += 1
            current = archive.front_costs()
            if hv_improved(best, current, archive.reference_point()):
                best, stale = current, 0
            else:
                stale += 1
        self.population = pop
        self.generations += gens
        return archive.front()


def hv_improved(before: np.ndarray, after: np.ndarray, ref: np.ndarray) -> bool:
    old = hypervolume(before, ref) if len(before) else 0.0
    new = hypervolume(after, ref) if len(after) else 0.0
    return new > old + HV_RTOL * max(1.0, abs(old))


# -- scoring and contraction -------------------------------------------------------

def _minmax(values: dict) -> dict:
    if not values:
        return {}
    lo, hi = min(values.values()), max(values.values())
    if hi == lo:
        return {k: 1.0 for k in values}
    span = hi - lo
    return {k: (v - lo) / span for k, v in values.items()}


def layer_zero_classes(g: BopEGraph, archive: SolutionArchive) -> set:
    out = set()
    for s in archive.front():
        for key in s.class_keys:
            cid = g.class_by_key.get(key)
            if cid is not None:
                out.add(cid)
    return out


def raw_impact(g: BopEGraph, archive: SolutionArchive) -> dict:
    """Per live class, the sum of ``10**(M - l)`` over archived solutions using it."""
    layers = archive.layers()
    M = len(layers)
    by_key: dict = {}
    for l, layer in enumerate(layers):
        weight = 10 ** (M - l)  # exact integers; layers can be many
        for i in layer:
            for key in archive.solutions[i].class_keys:
                by_key[key] = by_key.get(key, 0) + weight
    return {c: by_key.get(cls.key, 0) for c, cls in g.classes.items()}


def compute_scores(g: BopEGraph, archive: SolutionArchive, params: IceeParams) -> dict:
    """Set ``e_score``, ``i_score`` and ``p_score`` on every live class; return raw impact."""
    raw_i = raw_impact(g, archive)
    raw_e = {c: min(1.0, cls.explored_count / (cls.key.size * ORIENTATIONS))
             for c, cls in g.classes.items()}
    ni, ne = _minmax(raw_i), _minmax(raw_e)
    for c, cls in g.classes.items():
        cls.i_score, cls.e_score = ni[c], ne[c]
        cls.p_score = params.w * ni[c] + (1 - params.w) * (1 - ne[c])
    return raw_i


def score_and_select_prunable(g: BopEGraph, archive: SolutionArchive, params: IceeParams) -> set:
    """Classes to contract: low ``P_score`` and not needed by roots or the current front."""
    compute_scores(g, archive, params)
    protected = set(g.root_classes()) | layer_zero_classes(g, archive)
    doomed = {c for c, cls in g.classes.items() if cls.p_score < params.P_rate} - protected
    while doomed:
        removed, _ = g.cascade(doomed)
        hit = sorted(removed & protected)
        if not hit:
            break
        for c in hit:
            # keep one complete derivation below each protected class alive
            stack = [c]
            while stack:
                cur = stack.pop()
                protected.add(cur)
                node = g.nodes[g.classes[cur].nodes[0]]
                if isinstance(node, UnionNode):
                    stack.extend(x for x in (node.left, node.right) if x not in protected)
        doomed -= protected
    return doomed


# -- expansion ---------------------------------------------------------------------

def largest_remainder(total: int, weights: Sequence[float]) -> list:
    """Split ``total`` proportionally to ``weights`` with largest-remainder rounding."""
    n = len(weights)
    if n == 0:
        return []
    s = float(sum(weights))
    shares = [total / n] * n if s <= 0 else [total * w / s for w in weights]
    base = [int(math.floor(x)) for x in shares]
    rest = total - sum(base)
    order = sorted(range(n), key=lambda i: (-(shares[i] - base[i]), i))
    for i in order[:rest]:
        base[i] += 1
    return base


def design_layers(archive: SolutionArchive) -> dict:
    """Each archived design mapped to the lowest layer containing it."""
    out: dict = {}
    for l, layer in enumerate(archive.layers()):
        for i in layer:
            d = archive.solutions[i].design
            if d not in out or l < out[d]:
                out[d] = l
    return out


@dataclass
class Explorer:
    """Adds designs and arrangements to the e-graph."""

    model: DesignSpaceModel
    params: IceeParams
    rng: np.random.Generator
    history: set = field(default_factory=set)
    designs: set = field(default_factory=set)
    arrangements: int = 0

    def add_design(self, g: BopEGraph, design: tuple, bag: list | None = None) -> int:
        bag = bag if bag is not None else instantiate_design(self.model, design)
        key = design_key(self.model, design)
        cid = g.class_by_key.get(key)
        if cid is None or not g.is_root(cid):
            cid = self.add_arrangements(g, bag, self.params.K_f)
        g.register_root(design, cid, key)
        self.designs.add(tuple(design))
        return cid

    def add_arrangements(self, g: BopEGraph, bag: list, k: int) -> int | None:
        cid = None
        for term in generate_arrangements(bag, self.model, k, self.history, self.rng):
            cid = g.insert(term)
            self.arrangements += 1
        return cid if cid is not None else g.class_by_key.get(bop_key(bag))

    def _design_offspring(self, parents: list, ranks: dict) -> list:
        p, rng, model = self.params, self.rng, self.model
        counts = model.variant_counts
        out = []
        for _ in range(p.K_m * p.K_d):
            a = self._tournament(parents, ranks)
            b = self._tournament(parents, ranks)
            child = list(a)
            if len(child) > 1 and rng.random() < p.mc_d:
                cut = int(rng.integers(1, len(child)))
                child = list(a[:cut]) + list(b[cut:])
            if child and rng.random() < p.mm_d:
                i = int(rng.integers(len(child)))
                child[i] = int(rng.integers(counts[i]))
            out.append(tuple(child))
        return out

    def _tournament(self, parents: list, ranks: dict) -> tuple:
        a = parents[int(self.rng.integers(len(parents)))]
        b = parents[int(self.rng.integers(len(parents)))]
        return min(a, b, key=lambda d: (ranks[d], d))

    def expand(self, g: BopEGraph, archive: SolutionArchive) -> dict:
        """Grow the graph; class scores must be current (see :func:`compute_scores`)."""
        p = self.params
        new_designs = 0
        if p.K_nd > 0 and len(archive) and self.model.connectors:
            ranks = design_layers(archive)
            parents = sorted(ranks, key=lambda d: (ranks[d], d))
            cands: dict = {}
            for d in self._design_offspring(parents, ranks):
                key = design_key(self.model, d)
                cid = g.class_by_key.get(key)
                if cid is not None and g.is_root(cid):
                    g.register_root(d, cid, key)
                    self.designs.add(d)
                    continue
                if key not in cands or d < cands[key][1]:
                    cands[key] = (identical_parts_score(instantiate_design(self.model, d)), d)
            ranked = sorted(cands.items(), key=lambda kv: (-kv[1][0], kv[0], kv[1][1]))
            for _, (_, d) in ranked[:p.K_nd]:
                self.add_design(g, d)
                new_designs += 1

        before = self.arrangements
        roots = sorted(g.root_classes(), key=lambda c: (-g.classes[c].i_score, -g.classes[c].p_score, c))
        chosen = roots[:p.K_d]
        split = largest_remainder(p.K_f * p.K_d, [g.classes[c].p_score for c in chosen])
        for c, k in zip(chosen, split):
            if k > 0:
                bag = instantiate_design(self.model, g.designs_for(c)[0])
                self.add_arrangements(g, bag, k)
        return {"new_designs": new_designs, "new_arrangements": self.arrangements - before}


# -- the loop ----------------------------------------------------------------------

@dataclass
class RunConfig:
    seed: int = 0
    alpha: float = 0.75
    overrides: Mapping[str, Any] = field(default_factory=dict)
    timeout: float | None = None
    check_invariants: bool = False
    include_original: bool = True
    max_designs: int | None = None   # restrict initialization to a subset (baselines)
    designs: Sequence[tuple] | None = None
    expand_designs: bool = True


@dataclass
class RunResult:
    front: list
    report: dict
    graph: BopEGraph
    archive: SolutionArchive
    params: IceeParams
    explored_designs: list


def design_space_param(model: DesignSpaceModel, seed: int = 0) -> int:
    size = design_space_size(model, SAMPLE_CAP, seed)
    return size.unique_bops if size.exact else size.assignments


def params_for(model: DesignSpaceModel, cfg: RunConfig) -> IceeParams:
    overrides = dict(cfg.overrides)
    if cfg.timeout is not None:
        overrides["T"] = float(cfg.timeout)
    return derive_params(cfg.alpha, model.n_parts, design_space_param(model, cfg.seed), **overrides)


def candidate_designs(model: DesignSpaceModel, rng: np.random.Generator) -> list:
    total = math.prod(model.variant_counts)
    if total <= SAMPLE_CAP:
        return [tuple(d) for d in iter_designs(model)]
    seen: set = set()
    for _ in range(4 * SAMPLE_CAP):
        if len(seen) >= SAMPLE_CAP:
            break
        seen.add(random_design(model, rng))
    return sorted(seen)


def select_initial(model: DesignSpaceModel, designs: Sequence[tuple], k: int) -> list:
    """Top ``k`` designs with distinct bags, most duplicated parts first."""
    best: dict = {}
    for d in designs:
        bag = instantiate_design(model, d)
        key = bop_key(bag)
        score = identical_parts_score(bag)
        if key not in best or d < best[key][1]:
            best[key] = (score, d)
    ranked = sorted(best.items(), key=lambda kv: (-kv[1][0], kv[0], kv[1][1]))
    return [d for _, (_, d) in ranked[:k]]


def initialize(model: DesignSpaceModel, params: IceeParams, rng: np.random.Generator,
               include_original: bool = True, designs: Sequence[tuple] | None = None):
    g = BopEGraph()
    archive = SolutionArchive()
    explorer = Explorer(model, params, rng)
    pool = [tuple(d) for d in designs] if designs is not None else candidate_designs(model, rng)
    chosen = select_initial(model, pool, params.K_d)
    if include_original and designs is None:
        orig = tuple(model.original_design())
        okey = design_key(model, orig)
        if all(design_key(model, d) != okey for d in chosen):
            chosen.append(orig)
    for d in chosen:
        explorer.add_design(g, d)
    return g, archive, explorer


def check_state(g: BopEGraph, archive: SolutionArchive) -> None:
    g.audit()
    for s in archive.front():
        cid = g.lookup(s.term)
        if cid is None or not g.is_root(cid):
            raise InvariantViolation(f"front term {s.term_fingerprint} is no longer representable")


def run(model: DesignSpaceModel, config: RunConfig | None = None,
        params: IceeParams | None = None) -> RunResult:
    cfg = config or RunConfig()
    params = params or params_for(model, cfg)
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    g, archive, explorer = initialize(model, params, rng, cfg.include_original, cfg.designs)
    if not cfg.expand_designs:
        params = dataclasses.replace(params, K_nd=0)
        explorer.params = params
    extractor = Extractor(model, params, rng)
    t_ce = time.perf_counter() - t0
    t_ex = 0.0
    trace = []
    best = np.zeros((0, 3))
    stale = it = 0
    frozen = False
    while it < params.mt_d and stale < params.t_d:
        it += 1
        ts = time.perf_counter()
        prev_front = archive.front_costs()
        extractor.run(g, archive)
        t_ex += time.perf_counter() - ts
        ref = archive.reference_point()
        hv = archive.hypervolume()
        if cfg.check_invariants and hypervolume(prev_front, ref) > hv + HV_RTOL * max(1.0, hv):
            raise InvariantViolation("archive hypervolume decreased")
        if hv_improved(best, archive.front_costs(), ref):
            best, stale = archive.front_costs(), 0
        else:
            stale += 1
        entry = {"iteration": it, "hypervolume": hv, "ref_point": [float(x) for x in ref],
                 "front_size": len(archive.front()), "archive_size": len(archive),
                 "generations": extractor.generations}
        frozen = frozen or (time.perf_counter() - t0) > params.T
        ts = time.perf_counter()
        if not frozen and not (stale >= params.t_d or it >= params.mt_d):
            doomed = score_and_select_prunable(g, archive, params)
            removed = g.contract(doomed, layer_zero_classes(g, archive))
            if cfg.check_invariants:
                check_state(g, archive)
            entry.update(doomed=len(doomed), removed_nodes=removed)
            entry.update(explorer.expand(g, archive))
            if cfg.check_invariants:
                check_state(g, archive)
        entry["stats"] = g.stats()._asdict()
        entry["frozen"] = frozen
        t_ce += time.perf_counter() - ts
        trace.append(entry)
        log.info("iteration %d: hv=%.6g front=%d classes=%d", it, hv, entry["front_size"],
                 entry["stats"]["n_classes"])
    front = pareto_filter(archive.front())
    total = time.perf_counter() - t0
    report = {
        "params": dataclasses.asdict(params),
        "seed": cfg.seed,
        "iterations": trace,
        "summary": {
            "#Iter": it,
            "#EDV": len(explorer.designs),
            "#Arr": explorer.arrangements,
            "#PDV": len({s.design for s in front}),
            "CEt": t_ce,
            "Et": t_ex,
            "total": total,
            "hypervolume": archive.hypervolume(),
            "ref_point": [float(x) for x in archive.reference_point()],
            "front_size": len(front),
            "archive_size": len(archive),
            "evaluated_terms": extractor.evaluations,
        },
    }
    return RunResult(front, report, g, archive, params, sorted(explorer.designs))

