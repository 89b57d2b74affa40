"""Bundled example models, the two-variant box e-graph, and a random model generator."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .egraph import BopEGraph
from .fabrication.packing import pack_bar
from .model import Bar, ConcretePart, DesignSpaceModel, StockType, Tool, parse_model
from .terms import Atom, Join, Term

FIXTURES = ("frame", "cabinet", "rack")


def fixture_text(name: str) -> str:
    return resources.files("bopco.data").joinpath(f"{name}.json").read_text()


def load_fixture(name: str) -> DesignSpaceModel:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
    return parse_model(fixture_text(name))


# -- two box variants sharing sub-arrangements ----------------------------------------

BOX_LENGTHS = {"x": 600.0, "y": 400.0, "z": 300.0, "w": 500.0}
BOX_STOCK = {
    "long": StockType("long", Bar(1600.0), 9.0, 3.0, "pine"),
    "short": StockType("short", Bar(450.0), 4.0, 3.0, "pine"),
}
BOX_TOOLS = (Tool("chopsaw", "chopsaw", 10.0, 60.0, 0.5, 2),)


def box_part(name: str) -> ConcretePart:
    return ConcretePart(name, Bar(BOX_LENGTHS[name]), "pine")


def box_model() -> DesignSpaceModel:
    """Model wrapper for the box parts (stock and tools only matter here)."""
    return DesignSpaceModel(tuple(box_part(n) for n in "xyzw"), (), tuple(BOX_STOCK.values()),
                            BOX_TOOLS, name="box")


def box_atom(stock: str, names: str) -> Atom:
    packing = pack_bar(BOX_STOCK[stock], [box_part(n) for n in names])
    if packing is None:
        raise ValueError(f"{names} does not fit on {stock}")
    return Atom(packing)


@dataclass
class BoxGraph:
    graph: BopEGraph
    terms: list
    classes: dict  # label -> e-class id
    designs: dict  # variant name -> design vector


def box_graph() -> BoxGraph:
    """Two box variants, {x,y,y,z} and {w,x,y,y,z,z}, encoded in one e-graph.

    Single parts go on the short stock when they fit; everything else uses the
    long stock.  Classes are labelled by their bag, e.g. ``"xyyz"``.
    """
    def single(n: str) -> Atom:
        return box_atom("short" if BOX_LENGTHS[n] + 3 <= 450 else "long", n)

    t2 = Join(Join(single("x"), single("y")), Join(single("y"), single("z")))
    t1 = Join(box_atom("long", "xy"), Join(single("y"), single("z")))
    t3 = Join(box_atom("long", "xy"), Join(Join(single("y"), single("z")), box_atom("long", "wz")))
    t4 = Join(box_atom("long", "xy"), box_atom("long", "wyzz"))
    g = BopEGraph()
    terms = [t2, t1, t3, t4]
    roots = [g.insert(t) for t in terms]
    designs = {"small": (0,), "large": (1,)}
    g.register_root(designs["small"], roots[0])
    g.register_root(designs["large"], roots[2])
    labels = {}
    for cid, cls in g.classes.items():
        names = []
        for entry in cls.key.entries:
            length = entry[1] / 1000.0
            name = next(n for n, L in BOX_LENGTHS.items() if L == length)
            names.extend(name * entry[-1])
        labels["".join(sorted(names))] = cid
    return BoxGraph(g, terms, labels, designs)


def worked_term() -> Term:
    """The highlighted arrangement of the small box: {x,y} on long, {y} and {z} on short."""
    return Join(box_atom("long", "xy"), Join(box_atom("short", "y"), box_atom("short", "z")))


# -- random models ----------------------------------------------------------------

def random_model(rng: np.random.Generator, two_d: bool | None = None) -> DesignSpaceModel:
    """A small random model that is always feasible; used for fuzzing."""
    if two_d is None:
        two_d = bool(rng.random() < 0.3)
    n_parts = int(rng.integers(2, 5 if two_d else 6))
    templates = []
    for i in range(n_parts):
        if two_d:
            shape = {"rect": {"w": int(rng.integers(100, 400)), "h": int(rng.integers(100, 400))}}
        else:
            a = [90, 90, 45, 60][int(rng.integers(4))]
            b = [90, 90, 45][int(rng.integers(3))]
            shape = {"bar": {"len": int(rng.integers(150, 700)), "al": a, "ar": b}}
        templates.append({"id": f"p{i}", "shape": shape, "material": "m"})
    connectors = []
    for c in range(int(rng.integers(1, 4))):
        variants = [[]]
        for _ in range(int(rng.integers(1, 3))):
            picks = rng.choice(n_parts, size=int(rng.integers(1, min(2, n_parts) + 1)), replace=False)
            ov = []
            for i in sorted(int(x) for x in picks):
                if two_d:
                    ov.append({"template": f"p{i}", "dw": int(rng.integers(-60, 61))})
                elif rng.random() < 0.5:
                    ov.append({"template": f"p{i}", "dlen": int(rng.integers(-80, 81))})
                else:
                    ov.append({"template": f"p{i}", "al": [90, 45][int(rng.integers(2))]})
            variants.append(ov)
        connectors.append({"id": f"c{c}", "variants": variants})
    if two_d:
        stock = [{"id": "sheet", "shape": {"rect": {"w": 1000, "h": 800}}, "price": 30, "kerf": 3,
                  "material": "m"},
                 {"id": "half", "shape": {"rect": {"w": 500, "h": 800}}, "price": 17, "kerf": 3,
                  "material": "m"}]
        tools = [{"id": "track", "kind": "tracksaw", "cut_time": 20, "setup_time": 30,
                  "base_error": 0.3, "stack_limit": 1}]
    else:
        stock = [{"id": "short", "shape": {"bar": {"len": 900}}, "price": 5, "kerf": 3, "material": "m"},
                 {"id": "long", "shape": {"bar": {"len": 1800}}, "price": 9, "kerf": 3, "material": "m"}]
        tools = [{"id": "chop", "kind": "chopsaw", "cut_time": 8, "setup_time": 30, "base_error": 0.5,
                  "stack_limit": int(rng.integers(1, 4))}]
    return parse_model(json.dumps({"name": "random", "templates": templates, "connectors": connectors,
                                   "stock": stock, "tools": tools}))
