"""Packings of parts into single stock pieces, and the cut simulator.

Coordinates are millimetres.  A 1D bar is modelled as a strip of height 1 so
that bars and sheets share one guillotine simulator: every cut is a straight
line spanning the full extent of the piece it splits.  A cut at ``pos``
removes the kerf band ``[pos, pos + kerf]``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from ..errors import InvalidPackingError
from ..model import SQUARE, Bar, ConcretePart, StockType, bop_key, is_square, quantize

EPS = 1e-6


@dataclass(frozen=True)
class Cut:
    """One straight cut.

    ``axis`` 0 is the line ``x = pos`` spanning ``y`` in ``[lo, hi]``; axis 1
    is the line ``y = pos`` spanning ``x`` in ``[lo, hi]``.
    """

    axis: int
    pos: float
    lo: float
    hi: float
    angle: float = SQUARE
    tool: str = ""

    def with_tool(self, tool: str) -> Cut:
        return Cut(self.axis, self.pos, self.lo, self.hi, self.angle, tool)

    @property
    def geometry(self) -> tuple:
        return (self.axis, quantize(self.pos), quantize(self.lo), quantize(self.hi),
                quantize(self.angle))

    def to_json(self) -> dict:
        return {"tool": self.tool, "axis": self.axis, "pos": self.pos, "lo": self.lo,
                "hi": self.hi, "angle": self.angle}

    @classmethod
    def from_json(cls, obj: dict) -> Cut:
        return cls(int(obj["axis"]), float(obj["pos"]), float(obj["lo"]), float(obj["hi"]),
                   float(obj.get("angle", SQUARE)), obj.get("tool", ""))


@dataclass(frozen=True)
class Placement:
    """A part at its position; ``part.shape`` is already oriented (flipped/rotated)."""

    part: ConcretePart
    x: float
    y: float = 0.0

    @property
    def w(self) -> float:
        s = self.part.shape
        return s.length if isinstance(s, Bar) else s.width

    @property
    def h(self) -> float:
        s = self.part.shape
        return 1.0 if isinstance(s, Bar) else s.height

    def footprint(self) -> tuple:
        s = self.part.shape
        if isinstance(s, Bar):
            dims = (quantize(s.length), quantize(s.angle_left), quantize(s.angle_right))
        else:
            dims = (quantize(s.width), quantize(s.height))
        return dims + (self.part.material, quantize(self.x), quantize(self.y))


@dataclass(frozen=True, eq=False)
class Packing:
    stock: StockType
    placements: tuple
    cuts: tuple = field(repr=False)

    @cached_property
    def fingerprint(self) -> str:
        body = sorted(p.footprint() for p in self.placements)
        return f"{self.stock.id}|{body!r}"

    @cached_property
    def digest(self) -> str:
        return hashlib.sha1(self.fingerprint.encode()).hexdigest()[:16]

    @cached_property
    def key(self):
        return bop_key(p.part for p in self.placements)

    @property
    def parts(self) -> tuple:
        return tuple(p.part for p in self.placements)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Packing) and self.fingerprint == other.fingerprint

    def __hash__(self) -> int:
        return hash(self.fingerprint)

    def to_json(self) -> dict:
        return {"stock": self.stock.to_json(),
                "placements": [{**p.part.to_json(), "x": p.x, "y": p.y} for p in self.placements]}


class Sheet:
    """Mutable cut state: the current pieces of one stock piece.

    Each piece is ``[x0, x1, y0, y1, d_left, d_right, d_bottom, d_top]`` where
    ``d_*`` counts the cuts an edge transitively depends on (factory edges 0).
    """

    __slots__ = ("pieces", "kerf")

    def __init__(self, stock: StockType, pieces: list | None = None):
        self.kerf = stock.kerf
        self.pieces = pieces if pieces is not None else [
            (0.0, stock.width, 0.0, stock.height, 0, 0, 0, 0)]

    def copy(self) -> Sheet:
        clone = Sheet.__new__(Sheet)
        clone.kerf = self.kerf
        clone.pieces = list(self.pieces)
        return clone

    def find(self, cut: Cut) -> int:
        for i, p in enumerate(self.pieces):
            if cut.axis == 0:
                lo, hi, a, b = p[2], p[3], p[0], p[1]
            else:
                lo, hi, a, b = p[0], p[1], p[2], p[3]
            if abs(lo - cut.lo) <= EPS and abs(hi - cut.hi) <= EPS and a - EPS <= cut.pos < b - EPS:
                return i
        return -1

    def apply(self, cut: Cut) -> int:
        """Execute ``cut``; return the chain depth of its reference edge."""
        i = self.find(cut)
        if i < 0:
            raise InvalidPackingError(f"cut {cut} does not span any current piece")
        x0, x1, y0, y1, dl, dr, db, dt = self.pieces.pop(i)
        far = cut.pos + self.kerf
        if cut.axis == 0:
            depth = min(dl, dr)
            first = (x0, cut.pos, y0, y1, dl, depth + 1, db, dt)
            second = (far, x1, y0, y1, depth + 1, dr, db, dt)
            keep = [first if cut.pos - x0 > EPS else None, second if x1 - far > EPS else None]
        else:
            depth = min(db, dt)
            first = (x0, x1, y0, cut.pos, dl, dr, db, depth + 1)
            second = (x0, x1, far, y1, dl, dr, depth + 1, dt)
            keep = [first if cut.pos - y0 > EPS else None, second if y1 - far > EPS else None]
        self.pieces.extend(p for p in keep if p is not None)
        return depth

    def holds(self, placement: Placement) -> bool:
        x, y, w, h = placement.x, placement.y, placement.w, placement.h
        return any(abs(p[0] - x) <= EPS and abs(p[1] - x - w) <= EPS and abs(p[2] - y) <= EPS
                   and abs(p[3] - y - h) <= EPS for p in self.pieces)


def simulate(packing: Packing, order: Sequence[Cut]) -> list:
    """Run ``order`` on a fresh stock piece; return per-cut reference chain depths.

    Raises :class:`InvalidPackingError` when a cut cannot be executed or the
    final pieces do not include every placed part.
    """
    sheet = Sheet(packing.stock)
    depths = [sheet.apply(c) for c in order]
    for pl in packing.placements:
        if not sheet.holds(pl):
            raise InvalidPackingError(
                f"part {pl.part.template_id!r} at ({pl.x}, {pl.y}) is not separated "
                f"on stock {packing.stock.id!r}")
    return depths


def validate_packing(packing: Packing) -> None:
    from .cutting import greedy_order

    for pl in packing.placements:
        if pl.part.material != packing.stock.material or pl.part.kind != packing.stock.kind:
            raise InvalidPackingError(
                f"part {pl.part.template_id!r} ({pl.part.kind}, {pl.part.material}) does not "
                f"match stock {packing.stock.id!r}")
    order = greedy_order(packing, lambda c: (c.axis, c.pos, c.lo))
    if len(order) != len(packing.cuts):
        raise InvalidPackingError(f"cuts of {packing.fingerprint} admit no guillotine order")
    simulate(packing, order)


# -- layout builders ---------------------------------------------------------

def _orient_bar(shape: Bar, prev_right: float | None) -> tuple[Bar, bool]:
    """Pick an orientation; returns (shape, shares_cut_with_previous)."""
    options = [shape] if quantize(shape.angle_left) == quantize(shape.angle_right) else [
        shape, shape.flipped()]
    if prev_right is None:
        for s in options:
            if is_square(s.angle_left):
                return s, False
        return options[0], False
    for s in options:
        if quantize(s.angle_left) == quantize(prev_right):
            return s, True
    for s in options:
        if is_square(s.angle_left):
            return s, False
    return options[0], False


def pack_bar(stock: StockType, parts: Sequence[ConcretePart]) -> Packing | None:
    """Lay ``parts`` end to end on a bar, left to right, or ``None`` if they do not fit.

    Each part is oriented so its left end can share the previous part's cut
    when the angles match; the first part puts a square end on the factory edge
    when it has one.
    """
    length, kerf = stock.length, stock.kerf
    pos = 0.0
    cuts, placements = [], []
    prev_right = None
    for i, part in enumerate(parts):
        shape, shared = _orient_bar(part.shape, prev_right)
        if i == 0:
            if not is_square(shape.angle_left):
                cuts.append(Cut(0, 0.0, 0.0, 1.0, shape.angle_left))
                pos = kerf
        elif not shared:
            cuts.append(Cut(0, pos, 0.0, 1.0, shape.angle_left))
            pos += kerf
        placements.append(Placement(ConcretePart(part.template_id, shape, part.material), pos))
        pos += shape.length
        if pos > length + EPS:
            return None
        last = i == len(parts) - 1
        if last and is_square(shape.angle_right) and abs(pos - length) <= EPS:
            break
        if pos >= length - EPS:
            return None
        cuts.append(Cut(0, pos, 0.0, 1.0, shape.angle_right))
        pos += kerf
        prev_right = shape.angle_right
    return Packing(stock, tuple(placements), tuple(cuts))


def pack_sheet(stock: StockType, items: Sequence[tuple]) -> Packing | None:
    """Shelf-pack ``(part, rotated)`` items on a sheet with guillotine cuts.

    Items go to the first shelf with room (height no taller than the shelf,
    width left); otherwise a new shelf opens above the previous one.
    """
    W, H, kerf = stock.width, stock.height, stock.kerf
    shelves = []  # [y, height, x_next, [(part, x, w, h)]]
    for part, rotated in items:
        shape = part.shape.rotated() if rotated else part.shape
        w, h = shape.width, shape.height
        oriented = ConcretePart(part.template_id, shape, part.material)
        for sh in shelves:
            if h <= sh[1] + EPS and sh[2] + w <= W + EPS:
                sh[3].append((oriented, sh[2], w, h))
                sh[2] += w + kerf
                break
        else:
            y = shelves[-1][0] + shelves[-1][1] + kerf if shelves else 0.0
            if y + h > H + EPS or w > W + EPS:
                return None
            shelves.append([y, h, w + kerf, [(oriented, 0.0, w, h)]])

    cuts, placements = [], []
    for sh in shelves:
        y, sh_h, _, row = sh
        top = y + sh_h
        if top < H - EPS:
            cuts.append(Cut(1, top, 0.0, W))
        else:
            top = H
        for part, x, w, h in row:
            placements.append(Placement(part, x, y))
            right = x + w
            if right < W - EPS:
                cuts.append(Cut(0, right, y, top))
            else:
                right = W
            if h < sh_h - EPS and y + h < top - EPS:
                cuts.append(Cut(1, y + h, x, right))
    return Packing(stock, tuple(placements), tuple(cuts))


def pack(stock: StockType, items: Sequence) -> Packing | None:
    """Dispatch to the bar or sheet builder; sheet items are ``(part, rotated)`` pairs."""
    if stock.kind == "1d":
        return pack_bar(stock, [it[0] if isinstance(it, tuple) else it for it in items])
    return pack_sheet(stock, [it if isinstance(it, tuple) else (it, False) for it in items])


def packing_from_json(obj: dict, stock: StockType, cuts: Iterable[Cut]) -> Packing:
    from ..model import _parse_shape

    placements = tuple(
        Placement(ConcretePart(p["template"], _parse_shape(p["shape"]), p["material"]),
                  float(p["x"]), float(p.get("y", 0.0)))
        for p in obj["placements"])
    geometry = tuple(Cut(c.axis, c.pos, c.lo, c.hi, c.angle) for c in cuts)
    return Packing(stock, placements, geometry)
