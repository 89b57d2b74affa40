"""Design-space model: part templates, connectors with discrete variants, stock and tools.

A design is a vector of variant indices, one per connector.  Instantiating a
design applies each chosen variant's shape overrides to the part templates and
yields a bag (multiset) of concrete parts.  Bags are compared through their
canonical :class:`BopKey`.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence, Union

import jsonschema
import numpy as np

from .errors import ModelError

QUANTUM = 1e-3
SQUARE = 90.0

ONE_D = "1d"
TWO_D = "2d"
TOOL_KINDS = {"chopsaw": ONE_D, "tracksaw": TWO_D}


def quantize(value: float) -> int:
    return int(round(value / QUANTUM))


def is_square(angle: float) -> bool:
    return abs(angle - SQUARE) <= QUANTUM


@dataclass(frozen=True)
class Bar:
    """A 1D part: a length of lumber with an end angle on each side."""

    length: float
    angle_left: float = SQUARE
    angle_right: float = SQUARE

    kind = ONE_D

    def canon(self) -> tuple:
        lo, hi = sorted((quantize(self.angle_left), quantize(self.angle_right)))
        return ("bar", quantize(self.length), lo, hi)

    def flipped(self) -> Bar:
        return Bar(self.length, self.angle_right, self.angle_left)

    def to_json(self) -> dict:
        return {"bar": {"len": self.length, "al": self.angle_left, "ar": self.angle_right}}


@dataclass(frozen=True)
class Rect:
    """A 2D part cut from sheet material."""

    width: float
    height: float

    kind = TWO_D

    def canon(self) -> tuple:
        lo, hi = sorted((quantize(self.width), quantize(self.height)))
        return ("rect", lo, hi)

    def rotated(self) -> Rect:
        return Rect(self.height, self.width)

    def to_json(self) -> dict:
        return {"rect": {"w": self.width, "h": self.height}}


PartShape = Union[Bar, Rect]


@dataclass(frozen=True, eq=False)
class ConcretePart:
    """A part with concrete geometry.

    Equality ignores ``template_id``: two parts are the same when their
    quantized shapes and materials agree, so symmetric parts coming from
    different templates unify.  Bars may be flipped end for end and rectangles
    rotated, so the canonical form sorts angles and side lengths.
    """

    template_id: str
    shape: PartShape
    material: str

    @cached_property
    def canon(self) -> tuple:
        return self.shape.canon() + (self.material,)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConcretePart):
            return NotImplemented
        return self.canon == other.canon

    def __hash__(self) -> int:
        return hash(self.canon)

    @property
    def kind(self) -> str:
        return self.shape.kind

    def to_json(self) -> dict:
        return {"template": self.template_id, "shape": self.shape.to_json(), "material": self.material}


BagOfParts = tuple  # tuple[ConcretePart, ...]
DesignVector = tuple  # tuple[int, ...]


@dataclass(frozen=True)
class StockType:
    id: str
    shape: PartShape
    price: float
    kerf: float
    material: str

    @property
    def kind(self) -> str:
        return self.shape.kind

    @property
    def length(self) -> float:
        return self.shape.length

    @property
    def width(self) -> float:
        return self.shape.width if isinstance(self.shape, Rect) else self.shape.length

    @property
    def height(self) -> float:
        return self.shape.height if isinstance(self.shape, Rect) else 1.0

    def to_json(self) -> dict:
        shape = self.shape.to_json()
        if "bar" in shape:
            shape = {"bar": {"len": self.shape.length}}
        return {"id": self.id, "shape": shape, "price": self.price, "kerf": self.kerf,
                "material": self.material}


@dataclass(frozen=True)
class Tool:
    id: str
    kind: str
    cut_time: float
    setup_time: float
    base_error: float
    stack_limit: int = 1

    @property
    def applicable_kind(self) -> str:
        return TOOL_KINDS[self.kind]

    def to_json(self) -> dict:
        return {"id": self.id, "kind": self.kind, "cut_time": self.cut_time,
                "setup_time": self.setup_time, "base_error": self.base_error,
                "stack_limit": self.stack_limit}


@dataclass(frozen=True)
class Override:
    """Field edits applied to one template by a connector variant.

    ``sets`` assign absolute values (``len``, ``al``, ``ar``, ``w``, ``h``);
    ``deltas`` add to the current value (``dlen``, ``dw``, ``dh``).
    """

    template_id: str
    sets: tuple = ()
    deltas: tuple = ()


@dataclass(frozen=True)
class Connector:
    id: str
    variants: tuple  # tuple[tuple[Override, ...], ...]


@dataclass(frozen=True)
class DesignSpaceModel:
    templates: tuple  # tuple[ConcretePart, ...]
    connectors: tuple
    stock: tuple
    tools: tuple
    designs: dict = field(default_factory=dict)
    name: str = "model"

    @cached_property
    def template_index(self) -> dict:
        return {p.template_id: i for i, p in enumerate(self.templates)}

    @cached_property
    def tool_map(self) -> dict:
        return {t.id: t for t in self.tools}

    @cached_property
    def stock_map(self) -> dict:
        return {s.id: s for s in self.stock}

    @property
    def n_parts(self) -> int:
        return len(self.templates)

    @property
    def variant_counts(self) -> tuple:
        return tuple(len(c.variants) for c in self.connectors)

    def stock_for(self, part: ConcretePart) -> list:
        return [s for s in self.stock if s.kind == part.kind and s.material == part.material]

    def tools_for(self, kind: str) -> list:
        return [t for t in self.tools if t.applicable_kind == kind]

    def original_design(self) -> DesignVector:
        if "original" in self.designs:
            return self.designs["original"]
        return tuple(0 for _ in self.connectors)


class BopKey:
    """Canonical, order-independent key of a bag of parts."""

    __slots__ = ("entries", "data", "_hash")

    def __init__(self, entries: Iterable[tuple]):
        self.entries = tuple(sorted(entries))
        self.data = json.dumps(self.entries, separators=(",", ":")).encode()
        self._hash = hash(self.data)

    @classmethod
    def from_canons(cls, canons: Iterable[tuple]) -> BopKey:
        return cls(tuple(c) + (n,) for c, n in Counter(canons).items())

    @property
    def size(self) -> int:
        return sum(e[-1] for e in self.entries)

    def counter(self) -> Counter:
        return Counter({e[:-1]: e[-1] for e in self.entries})

    def __add__(self, other: BopKey) -> BopKey:
        merged = self.counter() + other.counter()
        return BopKey(tuple(c) + (n,) for c, n in merged.items())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, BopKey) and self.data == other.data

    def __lt__(self, other: BopKey) -> bool:
        return self.data < other.data

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"BopKey({self.data.decode()})"


def bop_key(bag: Iterable[ConcretePart]) -> BopKey:
    return BopKey.from_canons(p.canon for p in bag)


def identical_parts_score(bag: Sequence[ConcretePart]) -> int:
    if not bag:
        return 0
    return len(bag) - len({p.canon for p in bag})


_SET_FIELDS = {ONE_D: ("len", "al", "ar"), TWO_D: ("w", "h")}
_DELTA_FIELDS = {ONE_D: {"dlen": "len"}, TWO_D: {"dw": "w", "dh": "h"}}
_DELTA_TARGET = {"dlen": "len", "dw": "w", "dh": "h"}


def _shape_fields(shape: PartShape) -> dict:
    if isinstance(shape, Bar):
        return {"len": shape.length, "al": shape.angle_left, "ar": shape.angle_right}
    return {"w": shape.width, "h": shape.height}


def _shape_from_fields(kind: str, f: dict) -> PartShape:
    if kind == ONE_D:
        return Bar(f["len"], f["al"], f["ar"])
    return Rect(f["w"], f["h"])


def _check_shape(shape: PartShape, where: str) -> None:
    if isinstance(shape, Bar):
        if not shape.length > 0:
            raise ModelError(f"{where}: bar length must be > 0 (got {shape.length})")
        for a in (shape.angle_left, shape.angle_right):
            if not 0 < a <= 180:
                raise ModelError(f"{where}: angle must lie in (0, 180] (got {a})")
    elif not (shape.width > 0 and shape.height > 0):
        raise ModelError(f"{where}: rectangle dimensions must be > 0")


def instantiate_design(model: DesignSpaceModel, design: Sequence[int]) -> BagOfParts:
    design = tuple(int(g) for g in design)
    if len(design) != len(model.connectors):
        raise ModelError(f"design has {len(design)} genes, model has {len(model.connectors)} connectors")
    fields = [_shape_fields(t.shape) for t in model.templates]
    for conn, gene in zip(model.connectors, design):
        if not 0 <= gene < len(conn.variants):
            raise ModelError(f"gene {gene} out of range for connector {conn.id!r} "
                             f"({len(conn.variants)} variants)")
        for ov in conn.variants[gene]:
            f = fields[model.template_index[ov.template_id]]
            for name, value in ov.sets:
                f[name] = value
            for name, value in ov.deltas:
                f[_DELTA_TARGET[name]] += value
    bag = []
    for tmpl, f in zip(model.templates, fields):
        shape = _shape_from_fields(tmpl.kind, f)
        _check_shape(shape, f"design {list(design)}, template {tmpl.template_id!r}")
        bag.append(ConcretePart(tmpl.template_id, shape, tmpl.material))
    return tuple(bag)


def design_key(model: DesignSpaceModel, design: Sequence[int]) -> BopKey:
    return bop_key(instantiate_design(model, design))


def iter_designs(model: DesignSpaceModel) -> Iterator[DesignVector]:
    return itertools.product(*(range(n) for n in model.variant_counts))


class DesignSpaceSize(NamedTuple):
    assignments: int
    unique_bops: int
    exact: bool


def design_space_size(model: DesignSpaceModel, cap: int = 10**5, seed: int = 0) -> DesignSpaceSize:
    """Count design assignments and the distinct bags of parts they produce.

    Exact when the assignment count is at most ``cap``; otherwise the bag count
    is a lower bound estimated from ``cap`` uniform samples.
    """
    assignments = math.prod(model.variant_counts)
    if assignments <= cap:
        keys = {design_key(model, d) for d in iter_designs(model)}
        return DesignSpaceSize(assignments, len(keys), True)
    rng = np.random.default_rng(seed)
    keys = {design_key(model, random_design(model, rng)) for _ in range(cap)}
    return DesignSpaceSize(assignments, len(keys), False)


def random_design(model: DesignSpaceModel, rng: np.random.Generator) -> DesignVector:
    return tuple(int(rng.integers(n)) for n in model.variant_counts)


# -- parsing -----------------------------------------------------------------

_NUM = {"type": "number"}
_SHAPE_SCHEMA = {
    "type": "object",
    "minProperties": 1,
    "maxProperties": 1,
    "properties": {
        "bar": {"type": "object", "required": ["len"], "additionalProperties": False,
                "properties": {"len": _NUM, "al": _NUM, "ar": _NUM}},
        "rect": {"type": "object", "required": ["w", "h"], "additionalProperties": False,
                 "properties": {"w": _NUM, "h": _NUM}},
    },
    "additionalProperties": False,
}
_OVERRIDE_SCHEMA = {
    "type": "object",
    "required": ["template"],
    "additionalProperties": False,
    "properties": {"template": {"type": "string"}, "len": _NUM, "al": _NUM, "ar": _NUM,
                   "w": _NUM, "h": _NUM, "dlen": _NUM, "dw": _NUM, "dh": _NUM},
}
MODEL_SCHEMA = {
    "type": "object",
    "required": ["templates", "connectors", "stock", "tools"],
    "properties": {
        "name": {"type": "string"},
        "templates": {"type": "array", "minItems": 1, "items": {
            "type": "object", "required": ["id", "shape", "material"], "additionalProperties": False,
            "properties": {"id": {"type": "string"}, "shape": _SHAPE_SCHEMA,
                           "material": {"type": "string"}}}},
        "connectors": {"type": "array", "items": {
            "type": "object", "required": ["id", "variants"], "additionalProperties": False,
            "properties": {"id": {"type": "string"}, "variants": {
                "type": "array", "minItems": 1,
                "items": {"type": "array", "items": _OVERRIDE_SCHEMA}}}}},
        "stock": {"type": "array", "minItems": 1, "items": {
            "type": "object", "required": ["id", "shape", "price", "material"],
            "additionalProperties": False,
            "properties": {"id": {"type": "string"}, "shape": _SHAPE_SCHEMA, "price": _NUM,
                           "kerf": _NUM, "material": {"type": "string"}}}},
        "tools": {"type": "array", "minItems": 1, "items": {
            "type": "object", "required": ["id", "kind", "cut_time", "setup_time", "base_error"],
            "additionalProperties": False,
            "properties": {"id": {"type": "string"},
                           "kind": {"enum": sorted(TOOL_KINDS)},
                           "cut_time": _NUM, "setup_time": _NUM, "base_error": _NUM,
                           "stack_limit": {"type": "integer"}}}},
        "designs": {"type": "object", "additionalProperties": {
            "type": "array", "items": {"type": "integer"}}},
    },
    "additionalProperties": False,
}


def _parse_shape(obj: dict) -> PartShape:
    if "bar" in obj:
        b = obj["bar"]
        return Bar(float(b["len"]), float(b.get("al", SQUARE)), float(b.get("ar", SQUARE)))
    r = obj["rect"]
    return Rect(float(r["w"]), float(r["h"]))


def _unique(ids: list, what: str) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise ModelError(f"duplicate {what} identifier {i!r}")
        seen.add(i)


def parse_model(text: str | bytes) -> DesignSpaceModel:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON: {exc}") from exc
    try:
        jsonschema.validate(raw, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in exc.absolute_path)
        raise ModelError(f"schema violation at ${path}: {exc.message}") from None

    _unique([t["id"] for t in raw["templates"]], "template")
    _unique([c["id"] for c in raw["connectors"]], "connector")
    _unique([s["id"] for s in raw["stock"]], "stock")
    _unique([t["id"] for t in raw["tools"]], "tool")

    templates = []
    for i, t in enumerate(raw["templates"]):
        shape = _parse_shape(t["shape"])
        _check_shape(shape, f"templates[{i}] ({t['id']!r})")
        templates.append(ConcretePart(t["id"], shape, t["material"]))
    kinds = {t.template_id: t.kind for t in templates}

    connectors = []
    for i, c in enumerate(raw["connectors"]):
        variants = []
        for j, variant in enumerate(c["variants"]):
            touched = set()
            overrides = []
            for ov in variant:
                tid = ov["template"]
                where = f"connectors[{i}] ({c['id']!r}) variant {j}"
                if tid not in kinds:
                    raise ModelError(f"{where}: unknown template {tid!r}")
                if tid in touched:
                    raise ModelError(f"{where}: template {tid!r} overridden twice")
                touched.add(tid)
                kind = kinds[tid]
                sets, deltas = [], []
                for k, v in ov.items():
                    if k == "template":
                        continue
                    if k in _SET_FIELDS[kind]:
                        sets.append((k, float(v)))
                    elif k in _DELTA_FIELDS[kind]:
                        deltas.append((k, float(v)))
                    else:
                        raise ModelError(f"{where}: field {k!r} does not apply to a {kind} part")
                overrides.append(Override(tid, tuple(sets), tuple(deltas)))
            variants.append(tuple(overrides))
        connectors.append(Connector(c["id"], tuple(variants)))

    stock = []
    for i, s in enumerate(raw["stock"]):
        shape = _parse_shape(s["shape"])
        _check_shape(shape, f"stock[{i}] ({s['id']!r})")
        st = StockType(s["id"], Bar(shape.length) if isinstance(shape, Bar) else shape,
                       float(s["price"]), float(s.get("kerf", 0.0)), s["material"])
        if st.price < 0 or st.kerf < 0:
            raise ModelError(f"stock[{i}] ({s['id']!r}): price and kerf must be >= 0")
        stock.append(st)

    tools = []
    for i, t in enumerate(raw["tools"]):
        tool = Tool(t["id"], t["kind"], float(t["cut_time"]), float(t["setup_time"]),
                    float(t["base_error"]), int(t.get("stack_limit", 1)))
        if min(tool.cut_time, tool.setup_time, tool.base_error) < 0 or tool.stack_limit < 1:
            raise ModelError(f"tools[{i}] ({t['id']!r}): times and errors must be >= 0, "
                             "stack_limit >= 1")
        tools.append(tool)

    for part in templates:
        if not any(s.kind == part.kind and s.material == part.material for s in stock):
            raise ModelError(f"no {part.kind} stock of material {part.material!r} "
                             f"for template {part.template_id!r}")
        if not any(t.applicable_kind == part.kind for t in tools):
            raise ModelError(f"no tool cuts {part.kind} stock (template {part.template_id!r})")

    model = DesignSpaceModel(tuple(templates), tuple(connectors), tuple(stock), tuple(tools),
                             name=raw.get("name", "model"))
    designs = {}
    for name, genes in raw.get("designs", {}).items():
        genes = tuple(genes)
        if len(genes) != len(connectors):
            raise ModelError(f"design {name!r}: expected {len(connectors)} genes, got {len(genes)}")
        for conn, g in zip(connectors, genes):
            if not 0 <= g < len(conn.variants):
                raise ModelError(f"design {name!r}: gene {g} out of range for connector {conn.id!r}")
        designs[name] = genes
    object.__setattr__(model, "designs", designs)
    return model


def load_model(path: str | Path) -> DesignSpaceModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelError(f"cannot read model file {str(path)!r}: {exc.strerror}") from exc
    model = parse_model(text)
    if model.name == "model":
        object.__setattr__(model, "name", path.stem)
    return model
