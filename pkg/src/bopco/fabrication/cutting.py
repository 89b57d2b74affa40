"""Cutting orders and the fabrication cost model.

Cost model, for a plan made of jobs (one stock packing cut ``stack`` times at once):

* ``f_c`` sums stock prices over every stock piece used.
* ``f_t`` adds ``cut_time`` per physical cut (a stack is cut once) plus the
  incoming tool's ``setup_time`` whenever consecutive cuts change tool or angle.
* ``f_p`` adds, per piece, ``0`` for a square cut measured from a factory edge
  and ``base_error * (1 + depth)`` otherwise, where ``depth`` counts the cuts
  the reference edge transitively depends on.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from ..model import QUANTUM, Tool, is_square
from .packing import Cut, Packing, Sheet, simulate


class ObjectiveVector(NamedTuple):
    f_c: float = 0.0
    f_p: float = 0.0
    f_t: float = 0.0


@dataclass(frozen=True)
class Job:
    """A packing cut with a given order, ``stack`` identical pieces at a time."""

    packing: Packing
    order: tuple
    stack: int = 1


def order_fingerprint(order: Sequence[Cut]) -> str:
    return ";".join(f"{c.tool}:{c.geometry}" for c in order)


def _changes(prev: tuple | None, cut: Cut) -> bool:
    return prev is not None and (prev[0] != cut.tool or abs(prev[1] - cut.angle) > QUANTUM)


def evaluate_costs(jobs: Iterable[Job], tools: Mapping[str, Tool]) -> ObjectiveVector:
    f_c = f_p = f_t = 0.0
    prev = None
    for job in jobs:
        f_c += job.packing.stock.price * job.stack
        depths = simulate(job.packing, job.order)
        for cut, depth in zip(job.order, depths):
            tool = tools[cut.tool]
            f_t += tool.cut_time
            if _changes(prev, cut):
                f_t += tool.setup_time
            prev = (cut.tool, cut.angle)
            if not (is_square(cut.angle) and depth == 0):
                f_p += tool.base_error * (1 + depth) * job.stack
    return ObjectiveVector(f_c, f_p, f_t)


def _executable(sheet: Sheet, cuts: Sequence[Cut], done: Sequence[bool]) -> list:
    return [i for i, c in enumerate(cuts) if not done[i] and sheet.find(c) >= 0]


def greedy_order(packing: Packing, key: Callable[[Cut], tuple],
                 pick: Callable[[list], int] | None = None) -> list:
    """Build an order by repeatedly executing the best executable cut under ``key``."""
    cuts = list(packing.cuts)
    sheet = Sheet(packing.stock)
    done = [False] * len(cuts)
    out = []
    while len(out) < len(cuts):
        ready = _executable(sheet, cuts, done)
        if not ready:
            break
        i = pick(ready) if pick else min(ready, key=lambda j: key(cuts[j]))
        done[i] = True
        sheet.apply(cuts[i])
        out.append(cuts[i])
    return out


HEURISTIC_KEYS = (
    lambda c: (round(c.angle, 3), c.axis, c.pos, c.lo),    # angle-grouped, left to right
    lambda c: (c.axis, c.pos, c.lo),                      # left to right
    lambda c: (c.axis, -c.pos, -c.lo),                    # right to left
    lambda c: (round(c.angle, 3), c.axis, -c.pos, -c.lo),  # angle-grouped, right to left
)


def _seed(packing: Packing) -> int:
    return int(hashlib.sha1(packing.fingerprint.encode()).hexdigest()[:8], 16)


def enumerate_cut_orders(packing: Packing, limit: int, tools: Sequence[Tool]) -> list:
    """Return up to ``limit`` distinct valid cut orders, deterministically.

    Heuristic orders come first (the first one groups equal angles), then
    random executable sequences seeded from the packing, then a depth-first
    sweep that fills in whatever is left so the result is complete whenever
    fewer than ``limit`` orders exist.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    tool_ids = [t.id for t in tools]
    cuts = sorted(packing.cuts, key=lambda c: c.geometry)
    if not cuts:
        return [()]
    seen: set = set()
    out: list = []

    def add(order: Sequence[Cut], tool: str) -> bool:
        if len(order) != len(cuts):
            return False
        tagged = tuple(c.with_tool(tool) for c in order)
        if tagged in seen:
            return False
        seen.add(tagged)
        out.append(tagged)
        return len(out) >= limit

    for key in HEURISTIC_KEYS:
        for tool in tool_ids:
            if add(greedy_order(packing, key), tool):
                return out

    rng = np.random.default_rng(_seed(packing))
    n_total = len(tool_ids) * (np.prod(np.arange(1, len(cuts) + 1), dtype=float))
    attempts = 0 if n_total <= 2 * limit else 4 * limit
    for _ in range(attempts):
        order = greedy_order(packing, key=None, pick=lambda ready: ready[int(rng.integers(len(ready)))])
        if add(order, tool_ids[int(rng.integers(len(tool_ids)))]):
            return out

    for tool in tool_ids:
        for order in _all_orders(packing, cuts):
            if add(order, tool):
                return out
    return out


def _all_orders(packing: Packing, cuts: list):
    """Depth-first generator of every executable ordering of ``cuts``."""
    n = len(cuts)

    def rec(sheet: Sheet, done: list, prefix: list):
        if len(prefix) == n:
            yield list(prefix)
            return
        for i in _executable(sheet, cuts, done):
            nxt = sheet.copy()
            nxt.apply(cuts[i])
            done[i] = True
            prefix.append(cuts[i])
            yield from rec(nxt, done, prefix)
            prefix.pop()
            done[i] = False

    yield from rec(Sheet(packing.stock), [False] * n, [])


def count_orders(packing: Packing, cap: int = 10**6) -> int:
    return sum(1 for _ in itertools.islice(_all_orders(packing, sorted(packing.cuts, key=lambda c: c.geometry)), cap))
