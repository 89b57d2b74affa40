"""The bag-of-parts e-graph.

E-classes are keyed by the bag of parts their terms use; e-nodes are either
atomic packings (one stock piece) or unions of two child e-classes.  Classes
never merge after insertion because keys are computed eagerly, so there is no
union-find here: equivalence is exactly key equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, NamedTuple, Sequence

from .errors import EGraphError, InvariantViolation
from .fabrication.packing import Packing
from .model import BopKey
from .terms import Atom, Term


@dataclass(eq=False)
class AtomicNode:
    packing: Packing
    plan_cache: Any = None

    @property
    def fingerprint(self) -> tuple:
        return ("A", self.packing.fingerprint)


@dataclass(eq=False)
class UnionNode:
    left: int
    right: int


@dataclass(eq=False)
class EClass:
    id: int
    key: BopKey
    nodes: list = field(default_factory=list)
    explored_count: int = 0
    e_score: float = 0.0
    i_score: float = 0.0
    p_score: float = 0.0


class Stats(NamedTuple):
    n_classes: int
    n_enodes: int
    n_roots: int
    n_atomic: int
    n_union: int


def _union_fp(a: BopKey, b: BopKey) -> tuple:
    lo, hi = sorted((a.data, b.data))
    return ("U", lo, hi)


class BopEGraph:
    def __init__(self) -> None:
        self.classes: dict[int, EClass] = {}
        self.class_by_key: dict[BopKey, int] = {}
        self.nodes: dict[int, AtomicNode | UnionNode] = {}
        self.node_class: dict[int, int] = {}
        self.node_index: dict[tuple, int] = {}
        self.parents: dict[int, set] = {}
        self.roots: dict[BopKey, set] = {}
        self._next_class = 0
        self._next_node = 0

    # -- insertion -------------------------------------------------------------

    def _class_for(self, key: BopKey) -> EClass:
        cid = self.class_by_key.get(key)
        if cid is None:
            cid = self._next_class
            self._next_class += 1
            self.classes[cid] = EClass(cid, key)
            self.class_by_key[key] = cid
            self.parents[cid] = set()
        return self.classes[cid]

    def _add_node(self, fp: tuple, key: BopKey, node) -> int:
        nid = self.node_index.get(fp)
        if nid is not None:
            return self.node_class[nid]
        cls = self._class_for(key)
        nid = self._next_node
        self._next_node += 1
        self.nodes[nid] = node
        self.node_class[nid] = cls.id
        self.node_index[fp] = nid
        cls.nodes.append(nid)
        cls.explored_count += 1
        if isinstance(node, UnionNode):
            self.parents[node.left].add(nid)
            self.parents[node.right].add(nid)
        return cls.id

    def insert(self, term: Term) -> int:
        """Insert an arrangement term with maximal sharing; return its e-class id."""
        if isinstance(term, Atom):
            node = AtomicNode(term.packing)
            return self._add_node(node.fingerprint, term.packing.key, node)
        a = self.insert(term.left)
        b = self.insert(term.right)
        ka, kb = self.classes[a].key, self.classes[b].key
        if kb < ka:
            a, b, ka, kb = b, a, kb, ka
        return self._add_node(_union_fp(ka, kb), ka + kb, UnionNode(a, b))

    def class_of_node(self, nid: int) -> EClass:
        return self.classes[self.node_class[nid]]

    # -- roots -------------------------------------------------------------------

    def register_root(self, design: Sequence[int], class_id: int, key: BopKey | None = None) -> None:
        cls = self.classes.get(class_id)
        if cls is None:
            raise EGraphError(f"e-class {class_id} is not live")
        if key is not None and key != cls.key:
            raise EGraphError(f"design {list(design)} has a different bag of parts than e-class {class_id}")
        self.roots.setdefault(cls.key, set()).add(tuple(design))

    def root_classes(self) -> list:
        return sorted(self.class_by_key[k] for k in self.roots if k in self.class_by_key)

    def designs_for(self, class_id: int) -> list:
        return sorted(self.roots.get(self.classes[class_id].key, ()))

    def is_root(self, class_id: int) -> bool:
        return self.classes[class_id].key in self.roots

    # -- contraction ---------------------------------------------------------

    def cascade(self, doomed: Iterable[int]) -> tuple[set, set]:
        """Classes and nodes removed if ``doomed`` were deleted (no mutation)."""
        removed_classes = set(doomed)
        removed_nodes: set = set()
        queue = sorted(removed_classes)
        while queue:
            c = queue.pop()
            removed_nodes.update(self.classes[c].nodes)
            for n in sorted(self.parents[c]):
                if n in removed_nodes:
                    continue
                removed_nodes.add(n)
                owner = self.node_class[n]
                if owner not in removed_classes and all(m in removed_nodes for m in self.classes[owner].nodes):
                    removed_classes.add(owner)
                    queue.append(owner)
        return removed_classes, removed_nodes

    def contract(self, doomed: Iterable[int], protected: Iterable[int] = ()) -> int:
        """Remove ``doomed`` classes and everything that depends on them.

        Root classes are always protected.  Returns the number of removed e-nodes.
        """
        doomed = set(doomed)
        if not doomed:
            return 0
        for c in doomed:
            if c not in self.classes:
                raise EGraphError(f"e-class {c} is not live")
        guard = set(protected) | set(self.root_classes())
        hit = doomed & guard
        if hit:
            raise EGraphError(f"cannot remove protected e-classes {sorted(hit)}")
        removed_classes, removed_nodes = self.cascade(doomed)
        emptied = removed_classes & guard
        if emptied:
            raise EGraphError(f"contraction would empty protected e-classes {sorted(emptied)}")
        for n in removed_nodes:
            node = self.nodes.pop(n)
            owner = self.node_class.pop(n)
            if isinstance(node, UnionNode):
                fp = _union_fp(self.classes[node.left].key, self.classes[node.right].key)
                for child in (node.left, node.right):
                    if child in self.parents:
                        self.parents[child].discard(n)
            else:
                fp = node.fingerprint
            del self.node_index[fp]
            if owner not in removed_classes:
                self.classes[owner].nodes.remove(n)
        for c in removed_classes:
            cls = self.classes.pop(c)
            del self.class_by_key[cls.key]
            del self.parents[c]
        return len(removed_nodes)

    # -- queries -------------------------------------------------------------

    def stats(self) -> Stats:
        n_atomic = sum(isinstance(n, AtomicNode) for n in self.nodes.values())
        return Stats(len(self.classes), len(self.nodes), len(self.root_classes()), n_atomic,
                     len(self.nodes) - n_atomic)

    def atomic_nodes(self) -> list:
        return [n for n in self.nodes.values() if isinstance(n, AtomicNode)]

    def lookup_node(self, struct: tuple) -> int | None:
        """E-node at the top of the term ``struct`` if every node of it is live."""
        if struct[0] == "A":
            return self.node_index.get(("A", struct[1]))
        a, b = self.lookup(struct[1]), self.lookup(struct[2])
        if a is None or b is None:
            return None
        return self.node_index.get(_union_fp(self.classes[a].key, self.classes[b].key))

    def lookup(self, struct: tuple) -> int | None:
        """E-class representing the term ``struct`` if every node of it is live."""
        nid = self.lookup_node(struct)
        return None if nid is None else self.node_class[nid]

    def audit(self) -> None:
        """Full consistency check; raises :class:`InvariantViolation`."""
        for cid, cls in self.classes.items():
            if not cls.nodes:
                raise InvariantViolation(f"e-class {cid} is empty")
            if self.class_by_key.get(cls.key) != cid:
                raise InvariantViolation(f"key index out of sync for e-class {cid}")
            for n in cls.nodes:
                if self.node_class.get(n) != cid:
                    raise InvariantViolation(f"e-node {n} listed in {cid} but owned elsewhere")
        for nid, node in self.nodes.items():
            owner = self.classes.get(self.node_class.get(nid))
            if owner is None:
                raise InvariantViolation(f"e-node {nid} has no live e-class")
            if isinstance(node, UnionNode):
                for child in (node.left, node.right):
                    if child not in self.classes:
                        raise InvariantViolation(f"union e-node {nid} references dead e-class {child}")
                    if nid not in self.parents[child]:
                        raise InvariantViolation(f"parent index misses e-node {nid}")
                key = self.classes[node.left].key + self.classes[node.right].key
                fp = _union_fp(self.classes[node.left].key, self.classes[node.right].key)
            else:
                key = node.packing.key
                fp = node.fingerprint
            if key != owner.key:
                raise InvariantViolation(f"e-node {nid} represents {key}, class key is {owner.key}")
            if self.node_index.get(fp) != nid:
                raise InvariantViolation(f"e-node {nid} missing from the structural index")
        if len(self.node_index) != len(self.nodes):
            raise InvariantViolation("structural index holds dead e-nodes")
        for key in self.roots:
            if key not in self.class_by_key:
                raise InvariantViolation(f"root {key} references a dead e-class")

    def to_dot(self) -> str:
        lines = ["digraph bop_egraph {", "  compound=true;", "  node [fontsize=10];"]
        for cid in sorted(self.classes):
            cls = self.classes[cid]
            style = "solid" if self.is_root(cid) else "dotted"
            lines.append(f"  subgraph cluster_{cid} {{")
            lines.append(f'    label="E{cid} ({cls.key.size} parts)"; style={style};')
            for nid in cls.nodes:
                node = self.nodes[nid]
                if isinstance(node, AtomicNode):
                    lines.append(f'    n{nid} [shape=circle,label="A\\n{node.packing.stock.id}"];')
                else:
                    lines.append(f'    n{nid} [shape=square,label="U"];')
            lines.append("  }")
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            if isinstance(node, UnionNode):
                for child in (node.left, node.right):
                    head = self.classes[child].nodes[0]
                    lines.append(f"  n{nid} -> n{head} [lhead=cluster_{child}];")
        lines.append("}")
        return "\n".join(lines) + "\n"
