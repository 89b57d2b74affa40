"""Multi-objective toolkit: dominance, non-dominated sorting, NSGA-III selection,
exact hypervolume in two and three dimensions, and the solution archive."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

ARCHIVE_CAP = 50_000


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff ``a`` is no worse than ``b`` everywhere and strictly better somewhere."""
    if len(a) != len(b):
        raise ValueError("dimension mismatch")
    better = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            better = True
    return better


def dominance_matrix(points: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True when point ``i`` dominates point ``j``."""
    P = np.asarray(points, dtype=float)
    n = len(P)
    out = np.zeros((n, n), dtype=bool)
    step = max(1, 2_000_000 // max(1, n * P.shape[1] if P.ndim == 2 else 1))
    for s in range(0, n, step):
        A = P[s:s + step, None, :]
        out[s:s + step] = np.all(A <= P[None], axis=2) & np.any(A < P[None], axis=2)
    return out


def non_dominated_sort(points: Sequence[Sequence[float]]) -> list:
    """Partition point indices into Pareto layers (layer 0 is the front).

    Uses domination counts: a point joins the current layer once every point
    dominating it has been placed in an earlier layer.  Indices within a layer
    are in increasing order.
    """
    P = np.asarray(points, dtype=float)
    n = len(P)
    if n == 0:
        return []
    D = dominance_matrix(P)
    counts = D.sum(axis=0)
    assigned = np.zeros(n, dtype=bool)
    layers = []
    current = np.flatnonzero(counts == 0)
    while current.size:
        layers.append(current.tolist())
        assigned[current] = True
        counts = counts - D[current].sum(axis=0)
        current = np.flatnonzero((counts == 0) & ~assigned)
    return layers


def nondominated_mask(points: np.ndarray) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    if len(P) == 0:
        return np.zeros(0, dtype=bool)
    return ~dominance_matrix(P).any(axis=0)


# -- hypervolume -----------------------------------------------------------------

def _hv2(pts: np.ndarray, ref: np.ndarray) -> float:
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    total, best_y = 0.0, ref[1]
    for x, y in pts[order]:
        if y < best_y:
            total += (ref[0] - x) * (best_y - y)
            best_y = y
    return total


def hypervolume(front: Sequence[Sequence[float]], ref: Sequence[float]) -> float:
    """Exact measure of the union of boxes ``[p, ref]`` for 2 or 3 objectives.

    Points that do not strictly dominate ``ref`` in every coordinate contribute
    nothing and are ignored.
    """
    ref = np.asarray(ref, dtype=float)
    d = ref.shape[0]
    if d not in (2, 3):
        raise ValueError(f"hypervolume supports 2 or 3 objectives, got {d}")
    pts = np.asarray(front, dtype=float).reshape(-1, d)
    pts = pts[np.all(pts < ref, axis=1)]
    if len(pts) == 0:
        return 0.0
    if d == 2:
        return _hv2(pts, ref)
    pts = pts[np.argsort(pts[:, 2], kind="stable")]
    total = 0.0
    for i in range(len(pts)):
        top = pts[i + 1, 2] if i + 1 < len(pts) else ref[2]
        depth = top - pts[i, 2]
        if depth > 0:
            total += _hv2(pts[: i + 1, :2], ref[:2]) * depth
    return total


# -- NSGA-III ------------------------------------------------------------------

def das_dennis(n_obj: int, divisions: int) -> np.ndarray:
    """Uniform reference directions on the unit simplex."""
    pts = []
    for combo in itertools.combinations_with_replacement(range(n_obj), divisions):
        counts = np.bincount(combo, minlength=n_obj)
        pts.append(counts / divisions)
    pts = np.unique(np.array(pts), axis=0)
    return pts[np.lexsort(pts.T[::-1])]


def default_divisions(n_obj: int) -> int:
    return 12 if n_obj == 2 else 6


def nsga3_select(points: Sequence[Sequence[float]], n: int, divisions: int | None = None,
                 seed: int | np.random.Generator = 0,
                 key: Callable[[int], Any] | None = None) -> list:
    """Select ``n`` indices: whole layers first, the boundary layer by reference-point niching.

    Tie-breaks use ``key`` (default: the point's coordinates) so the selected
    set does not depend on input order beyond exact duplicates.
    """
    P = np.asarray(points, dtype=float)
    N = len(P)
    if n > N:
        raise ValueError(f"cannot select {n} of {N}")
    if n == N:
        return list(range(N))
    if n <= 0:
        return []
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    key = key or (lambda i: (tuple(P[i]), i))
    chosen: list = []
    last: list = []
    for layer in non_dominated_sort(P):
        if len(chosen) + len(layer) <= n:
            chosen.extend(layer)
            if len(chosen) == n:
                return sorted(chosen)
        else:
            last = layer
            break
    k = n - len(chosen)
    pool = chosen + last
    S = P[pool]
    ideal = S.min(axis=0)
    span = S.max(axis=0) - ideal
    span[span <= 0] = 1.0
    F = (S - ideal) / span
    refs = das_dennis(P.shape[1], divisions or default_divisions(P.shape[1]))
    norms = np.sum(refs * refs, axis=1)
    proj = (F @ refs.T) / norms
    dist = np.linalg.norm(F[:, None, :] - proj[:, :, None] * refs[None], axis=2)
    assoc = np.argmin(dist, axis=1)
    d_min = dist[np.arange(len(pool)), assoc]
    niche = np.zeros(len(refs), dtype=int)
    for j in assoc[: len(chosen)]:
        niche[j] += 1
    members: dict = {}
    for pos in range(len(chosen), len(pool)):
        members.setdefault(int(assoc[pos]), []).append(pos)
    for j in members:
        members[j].sort(key=lambda pos: key(pool[pos]))
    active = set(members)
    picked: list = []
    while k > 0 and active:
        lo = min(niche[j] for j in active)
        cands = sorted(j for j in active if niche[j] == lo)
        j = cands[int(rng.integers(len(cands)))]
        group = members[j]
        if niche[j] == 0:
            pos = min(group, key=lambda p: (d_min[p], key(pool[p])))
        else:
            pos = group[int(rng.integers(len(group)))]
        group.remove(pos)
        if not group:
            active.discard(j)
        picked.append(pool[pos])
        niche[j] += 1
        k -= 1
    return sorted(chosen + picked)


# -- archive -------------------------------------------------------------------

@dataclass
class Solution:
    """A (design, fabrication plan) pair with its objective vector."""

    design: tuple
    term_fingerprint: str
    cost: tuple
    plans: tuple = ()
    term: tuple = ()
    class_keys: frozenset = field(default_factory=frozenset)

    @property
    def dedup_key(self) -> tuple:
        return (self.term_fingerprint, tuple(self.cost))


class SolutionArchive:
    """The set of every evaluated solution, with cached layering.

    The reference point for hypervolume is 1.1 times the componentwise maximum
    cost seen so far (1.0 for a component that is always zero).  It is fixed
    at its first computation and only grows when a later cost exceeds it.
    """

    def __init__(self, cap: int = ARCHIVE_CAP):
        self.cap = cap
        self.solutions: list[Solution] = []
        self._keys: set = set()
        self._front: list = []
        self._layers: list | None = None
        self._max: np.ndarray | None = None
        self.ref_point: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.solutions)

    def insert(self, s: Solution) -> bool:
        k = s.dedup_key
        if k in self._keys:
            return False
        self._keys.add(k)
        idx = len(self.solutions)
        self.solutions.append(s)
        c = np.asarray(s.cost, dtype=float)
        self._max = c.copy() if self._max is None else np.maximum(self._max, c)
        if not any(dominates(self.solutions[i].cost, s.cost) for i in self._front):
            self._front = [i for i in self._front if not dominates(s.cost, self.solutions[i].cost)]
            self._front.append(idx)
        self._layers = None
        if len(self.solutions) > self.cap:
            self._evict()
        return True

    def _evict(self) -> None:
        layers = self.layers()
        drop: set = set()
        excess = len(self.solutions) - self.cap
        for layer in reversed(layers[1:]):
            for i in reversed(layer):
                if len(drop) >= excess:
                    break
                drop.add(i)
            if len(drop) >= excess:
                break
        keep = [i for i in range(len(self.solutions)) if i not in drop]
        remap = {old: new for new, old in enumerate(keep)}
        self.solutions = [self.solutions[i] for i in keep]
        self._front = [remap[i] for i in self._front]
        self._layers = None

    def costs(self) -> np.ndarray:
        return np.array([s.cost for s in self.solutions], dtype=float).reshape(-1, 3)

    def layers(self) -> list:
        if self._layers is None:
            self._layers = non_dominated_sort(self.costs())
        return self._layers

    def front(self) -> list:
        return [self.solutions[i] for i in sorted(self._front)]

    def front_costs(self) -> np.ndarray:
        return np.array([self.solutions[i].cost for i in sorted(self._front)], dtype=float).reshape(-1, 3)

    def front_dominates(self, v: Sequence[float]) -> bool:
        F = self.front_costs()
        if len(F) == 0:
            return False
        v = np.asarray(v, dtype=float)
        return bool(np.any(np.all(F <= v, axis=1) & np.any(F < v, axis=1)))

    def reference_point(self) -> np.ndarray:
        if self._max is None:
            return np.ones(3)
        want = np.where(self._max > 0, 1.1 * self._max, 1.0)
        if self.ref_point is None:
            self.ref_point = want
        else:
            grow = self._max >= self.ref_point
            self.ref_point = np.where(grow, want, self.ref_point)
        return self.ref_point

    def hypervolume(self, ref: Sequence[float] | None = None) -> float:
        ref = self.reference_point() if ref is None else np.asarray(ref, dtype=float)
        return hypervolume(self.front_costs(), ref)


def common_reference(*fronts: Sequence[Sequence[float]]) -> np.ndarray:
    """1.1x the componentwise maximum over several fronts (1.0 where all are zero)."""
    pts = [np.asarray(f, dtype=float).reshape(-1, 3) for f in fronts if len(f)]
    if not pts:
        return np.ones(3)
    m = np.vstack(pts).max(axis=0)
    return np.where(m > 0, 1.1 * m, 1.0)


def pareto_filter(solutions: Sequence[Solution]) -> list:
    """Non-dominated subset, deduplicated by cost, in deterministic order."""
    uniq: dict = {}
    for s in solutions:
        uniq.setdefault(tuple(s.cost), s)
    items = sorted(uniq.values(), key=lambda s: (tuple(s.cost), s.term_fingerprint))
    if not items:
        return []
    mask = nondominated_mask(np.array([s.cost for s in items], dtype=float))
    return [s for s, m in zip(items, mask) if m]
