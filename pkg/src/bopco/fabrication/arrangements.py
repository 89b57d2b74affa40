"""Arrangement generation: assigning a bag of parts to stock pieces and packing them."""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from ..errors import InfeasibleError
from ..model import Bar, ConcretePart, DesignSpaceModel, StockType
from ..terms import arrangement_fingerprint, chain
from .packing import Packing, pack


@lru_cache(maxsize=500_000)
def _pack_cached(stock: StockType, signature: tuple) -> Packing | None:
    items = [(ConcretePart(tid, shape, mat), rot) for tid, shape, mat, rot in signature]
    return pack(stock, items)


def try_pack(stock: StockType, items: Sequence[tuple]) -> Packing | None:
    sig = tuple((p.template_id, p.shape, p.material, bool(rot)) for p, rot in items)
    return _pack_cached(stock, sig)


def _size(part: ConcretePart) -> float:
    s = part.shape
    return s.length if isinstance(s, Bar) else s.width * s.height


def _rotations(part: ConcretePart) -> list:
    if isinstance(part.shape, Bar) or part.canon[1] == part.canon[2]:
        return [False]
    return [False, True]


def _stock_area(s: StockType) -> float:
    return s.width * s.height


def _choose_stock(options: list, policy: str, rng: np.random.Generator | None) -> tuple:
    if policy == "cheapest":
        return min(options, key=lambda o: (o[0].price, -_stock_area(o[0]), o[0].id))
    if policy == "largest":
        return min(options, key=lambda o: (-_stock_area(o[0]), o[0].price, o[0].id))
    return options[int(rng.integers(len(options)))]


def check_packable(bag: Sequence[ConcretePart], model: DesignSpaceModel) -> None:
    for part in bag:
        if not any(try_pack(s, [(part, r)]) for s in model.stock_for(part) for r in _rotations(part)):
            raise InfeasibleError(
                f"part {part.template_id!r} ({part.shape}) fits no {part.material!r} stock")


def first_fit(order: Sequence[ConcretePart], model: DesignSpaceModel, policy: str,
              rng: np.random.Generator | None = None, new_bin_prob: float = 0.0) -> list:
    """Place parts one by one into the first open stock piece with room."""
    bins: list = []  # [stock, items]
    for part in order:
        rots = _rotations(part)
        if rng is not None and len(rots) > 1 and rng.random() < 0.5:
            rots = rots[::-1]
        placed = False
        if not (rng is not None and new_bin_prob > 0 and rng.random() < new_bin_prob):
            for b in bins:
                if b[0].kind != part.kind or b[0].material != part.material:
                    continue
                for r in rots:
                    if try_pack(b[0], b[1] + [(part, r)]) is not None:
                        b[1].append((part, r))
                        placed = True
                        break
                if placed:
                    break
        if placed:
            continue
        options = [(s, r) for s in model.stock_for(part) for r in rots
                   if try_pack(s, [(part, r)]) is not None]
        if not options:
            raise InfeasibleError(f"part {part.template_id!r} fits no {part.material!r} stock")
        stock, r = _choose_stock(options, policy, rng)
        bins.append([stock, [(part, r)]])
    return [try_pack(s, items) for s, items in bins]


def _grouped_order(bag: Sequence[ConcretePart]) -> list:
    counts: dict = {}
    for p in bag:
        counts[p.canon] = counts.get(p.canon, 0) + 1
    return sorted(bag, key=lambda p: (-counts[p.canon], -_size(p), p.canon))


def _size_order(bag: Sequence[ConcretePart]) -> list:
    return sorted(bag, key=lambda p: (-_size(p), p.canon))


def _heuristic_candidates(bag: Sequence[ConcretePart], model: DesignSpaceModel) -> Iterator[list]:
    grouped, by_size = _grouped_order(bag), _size_order(bag)
    yield first_fit(grouped, model, "largest")
    yield first_fit(by_size, model, "largest")
    yield first_fit(by_size, model, "cheapest")
    yield first_fit(grouped, model, "cheapest")
    yield [try_pack(*min(((s, [(p, r)]) for s in model.stock_for(p) for r in _rotations(p)
                          if try_pack(s, [(p, r)]) is not None),
                         key=lambda o: (o[0].price, o[0].id))) for p in grouped]


def generate_arrangements(bag: Sequence[ConcretePart], model: DesignSpaceModel, k: int,
                          history: set, rng: np.random.Generator) -> list:
    """Return up to ``k`` new arrangement terms for ``bag``.

    Deterministic heuristics come first: identical parts grouped together
    (stacking potential) and first-fit decreasing (dense packing).  Random
    part orders, stock choices and forced new stock pieces then diversify.
    Every returned arrangement is recorded in ``history`` and never returned
    again.
    """
    if k < 1:
        return []
    check_packable(bag, model)
    out: list = []

    def take(packings: list) -> bool:
        fp = arrangement_fingerprint(packings)
        if fp not in history:
            history.add(fp)
            out.append(chain(packings))
        return len(out) >= k

    for packings in _heuristic_candidates(bag, model):
        if take(packings):
            return out
    parts = list(bag)
    for _ in range(30 * k):
        order = [parts[i] for i in rng.permutation(len(parts))]
        prob = (0.0, 0.25, 0.5)[int(rng.integers(3))]
        if take(first_fit(order, model, "random", rng, prob)):
            break
    return out


# -- exhaustive enumeration (oracle mode) -------------------------------------

def _set_partitions(items: list) -> Iterator[list]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def _distinct_perms(block: list) -> list:
    seen, out = set(), []
    for perm in itertools.permutations(block):
        sig = tuple(p.canon for p in perm)
        if sig not in seen:
            seen.add(sig)
            out.append(perm)
    return out


def block_packings(block: Sequence[ConcretePart], model: DesignSpaceModel) -> list:
    """Every packing the builders produce for one stock piece holding ``block``."""
    kinds = {(p.kind, p.material) for p in block}
    if len(kinds) != 1:
        return []
    found: dict = {}
    for stock in model.stock_for(block[0]):
        for perm in _distinct_perms(list(block)):
            for rots in itertools.product(*(_rotations(p) for p in perm)):
                pk = try_pack(stock, list(zip(perm, rots)))
                if pk is not None and pk.fingerprint not in found:
                    found[pk.fingerprint] = pk
    return [found[f] for f in sorted(found)]


def enumerate_arrangements(bag: Sequence[ConcretePart], model: DesignSpaceModel,
                           limit: int) -> tuple[list, bool]:
    """Deterministically enumerate the generator's whole arrangement space.

    Returns ``(terms, truncated)``; enumeration stops after ``limit`` terms.
    """
    check_packable(bag, model)
    parts = sorted(bag, key=lambda p: p.canon)
    seen_partitions: set = set()
    seen: set = set()
    block_cache: dict = {}
    out: list = []
    for partition in _set_partitions(list(range(len(parts)))):
        blocks = sorted((sorted((parts[i] for i in b), key=lambda p: p.canon) for b in partition),
                        key=lambda b: [p.canon for p in b])
        sig = tuple(tuple(p.canon for p in b) for b in blocks)
        if sig in seen_partitions:
            continue
        seen_partitions.add(sig)
        options = []
        for b, bsig in zip(blocks, sig):
            if bsig not in block_cache:
                block_cache[bsig] = block_packings(b, model)
            options.append(block_cache[bsig])
        for combo in itertools.product(*options):
            fp = arrangement_fingerprint(combo)
            if fp in seen:
                continue
            seen.add(fp)
            out.append(chain(list(combo)))
            if len(out) >= limit:
                return out, True
    return out, False
