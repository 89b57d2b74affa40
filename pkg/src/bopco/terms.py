"""Arrangement terms: atomic packings combined by binary unions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

from .fabrication.packing import Packing


@dataclass(frozen=True)
class Atom:
    packing: Packing


@dataclass(frozen=True)
class Join:
    left: "Term"
    right: "Term"


Term = Union[Atom, Join]


def atoms(term: Term) -> list:
    if isinstance(term, Atom):
        return [term.packing]
    return atoms(term.left) + atoms(term.right)


def term_size(term: Term) -> int:
    """Number of tree nodes."""
    if isinstance(term, Atom):
        return 1
    return 1 + term_size(term.left) + term_size(term.right)


def term_key(term: Term):
    out = None
    for p in atoms(term):
        out = p.key if out is None else out + p.key
    return out


def arrangement_fingerprint(packings: Sequence[Packing]) -> tuple:
    return tuple(sorted(p.fingerprint for p in packings))


def chain(packings: Sequence[Packing]) -> Term:
    """Right-nested union over packings in canonical order.

    Canonical ordering makes arrangements of different bags that end in the
    same packings share their suffix sub-terms inside the e-graph.
    """
    ordered = sorted(packings, key=lambda p: (p.key.data, p.fingerprint))
    term: Term = Atom(ordered[-1])
    for p in reversed(ordered[:-1]):
        term = Join(Atom(p), term)
    return term


@dataclass(frozen=True)
class DecodedTerm:
    """A term extracted from the e-graph for one root design.

    ``struct`` is the term as nested tuples (``("A", packing_fp)`` or
    ``("U", left, right)``), stable across e-graph mutations.  ``atoms`` lists
    the atomic e-nodes with multiplicity.
    """

    root_class: int
    design: tuple
    struct: tuple
    atoms: tuple
    class_keys: frozenset
    fingerprint: str


def term_struct(term: Term) -> tuple:
    """Nested-tuple form of ``term`` with union children ordered by bag key."""
    if isinstance(term, Atom):
        return ("A", term.packing.fingerprint)
    a, b = (term.left, term_struct(term.left)), (term.right, term_struct(term.right))
    if term_key(b[0]) < term_key(a[0]):
        a, b = b, a
    return ("U", a[1], b[1])
