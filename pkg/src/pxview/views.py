"""Materialization of deterministic and probabilistic view extensions.

A probabilistic view extension bundles a view's results into one p-document:
a doc(v)-labeled root with a single ind child, under which each result
subtree hangs with the probability the view assigned to its root.  Every
ordinary node inside carries a marker child labeled ``#id:<original-id>`` so
that occurrences of the same original node stay addressable by queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .model import (
    IND,
    DocNode,
    Document,
    PDist,
    PDocument,
    POrd,
    PNode,
    subtree_at,
)
from .pattern import TreePattern, doc_label, eval_doc, to_query
from .probeval import peval

MARKER_PREFIX = "#id:"


@dataclass
class ViewDef:
    """A named tree-pattern view.

    A compensated view (used by multi-view rewriting) additionally records
    the base view it navigates into; its extension is the base view's.
    """

    name: str
    pattern: TreePattern
    base: Optional["ViewDef"] = None
    compensation: Optional[TreePattern] = None

    def extension_source(self) -> "ViewDef":
        return self.base if self.base is not None else self

    def __repr__(self):
        return "ViewDef(%s = %s)" % (self.name, to_query(self.pattern))


def compensated_view(name: str, base: ViewDef, compensation: TreePattern) -> ViewDef:
    from .pattern import compensate

    return ViewDef(
        name=name,
        pattern=compensate(base.pattern, compensation),
        base=base,
        compensation=compensation,
    )


@dataclass
class Occurrence:
    index: int
    ext_root_id: str
    orig_root_id: str
    beta: Fraction
    contained_orig_ids: frozenset = field(default_factory=frozenset)


class ViewExtension:
    def __init__(self, view: str, pdoc: PDocument, occurrences: list[Occurrence],
                 node_orig: dict[str, str]):
        self.view = view
        self.pdoc = pdoc
        self.occurrences = occurrences
        self.node_orig = node_orig  # every ordinary ext node id -> original id
        self._subtrees: dict[int, PDocument] = {}

    def orig_of(self, ext_id: str) -> str:
        return self.node_orig[ext_id]

    def occurrence_index_of_node(self, ext_id: str) -> int:
        return int(ext_id.split(":", 1)[0][1:])

    def beta_by_orig(self) -> dict[str, Fraction]:
        return {o.orig_root_id: o.beta for o in self.occurrences}

    def occurrences_containing(self, orig_id: str) -> list[Occurrence]:
        return [o for o in self.occurrences if orig_id in o.contained_orig_ids]

    def subtree(self, occ: Occurrence) -> PDocument:
        if occ.index not in self._subtrees:
            self._subtrees[occ.index] = subtree_at(self.pdoc, occ.ext_root_id)
        return self._subtrees[occ.index]

    def ext_id_in_occurrence(self, occ: Occurrence, orig_id: str) -> str:
        return "x%d:%s" % (occ.index, orig_id)

    def to_json(self) -> dict:
        obj = self.pdoc.to_json()
        obj["occurrences"] = [
            {"ext": e, "orig": o} for e, o in sorted(self.node_orig.items())
        ]
        return obj


def materialize_det(v: ViewDef, d: Document) -> Document:
    """Deterministic view extension: doc(v) root over the answer subtrees."""
    answers = sorted(eval_doc(v.pattern, d))
    root = DocNode("doc:%s" % v.name, doc_label(v.name))
    for n_id in answers:
        root.children.append(d.find(n_id).copy())
    return Document(root, doc_label(v.name))


def _copy_with_markers(node: PNode, occ: int, node_orig: dict[str, str]) -> PNode:
    if isinstance(node, POrd):
        ext_id = "x%d:%s" % (occ, node.id)
        node_orig[ext_id] = node.id
        marker = POrd(ext_id + "#m", MARKER_PREFIX + node.id)
        children = [marker] + [_copy_with_markers(c, occ, node_orig) for c in node.children]
        return POrd(ext_id, node.label, children)
    return PDist(node.kind, [(p, _copy_with_markers(c, occ, node_orig)) for p, c in node.children])


def materialize_prob(v: ViewDef, p: PDocument) -> ViewExtension:
    """Probabilistic view extension of a view over a p-document."""
    answers = peval(v.pattern, p)
    ind_children: list[tuple[Fraction, PNode]] = []
    occurrences: list[Occurrence] = []
    node_orig: dict[str, str] = {}
    for index, orig_id in enumerate(sorted(answers)):
        beta = answers[orig_id]
        sub = subtree_at(p, orig_id)
        before = set(node_orig)
        copy = _copy_with_markers(sub.root, index, node_orig)
        contained = frozenset(
            node_orig[k] for k in node_orig if k not in before
        )
        ind_children.append((beta, copy))
        occurrences.append(
            Occurrence(
                index=index,
                ext_root_id="x%d:%s" % (index, orig_id),
                orig_root_id=orig_id,
                beta=beta,
                contained_orig_ids=contained,
            )
        )
    root = POrd("doc:%s" % v.name, doc_label(v.name), [PDist(IND, ind_children)])
    pdoc = PDocument(root, doc_label(v.name))
    return ViewExtension(v.name, pdoc, occurrences, node_orig)


def strip_markers(node: PNode) -> PNode:
    """Drop marker children (used by fidelity checks and answer serialization)."""
    if isinstance(node, POrd):
        return POrd(
            node.id,
            node.label,
            [
                strip_markers(c)
                for c in node.children
                if not (isinstance(c, POrd) and c.label.startswith(MARKER_PREFIX))
            ],
        )
    return PDist(node.kind, [(p, strip_markers(c)) for p, c in node.children])
