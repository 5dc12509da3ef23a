"""Probabilistic XML data model.

Documents are unranked, unordered, rooted label trees.  A p-document adds
distributional nodes (``mux`` / ``ind``) whose outgoing edges carry exact
rational probabilities; it compactly represents a finite probability space
of documents (its worlds).  All probabilities here are `fractions.Fraction`
values so that downstream equality checks are exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Union


class ModelError(ValueError):
    """Base class for data-model errors."""


class PDocParseError(ModelError):
    """Raised when a serialized (p-)document cannot be parsed."""


class InvalidPDocument(ModelError):
    """Raised when a structural invariant is violated.

    Carries the offending node (when identifiable) and the rule name.
    """

    def __init__(self, message: str, node: Optional[str] = None, rule: str = ""):
        super().__init__(message)
        self.node = node
        self.rule = rule


class UnknownNode(ModelError):
    pass


class WorldBoundExceeded(ModelError):
    """Too many distributional nodes for exhaustive world enumeration."""


MUX = "mux"
IND = "ind"


def parse_prob(text: Union[str, int, float]) -> Fraction:
    """Parse a probability literal ("0.75", "3/4", "1") into an exact Fraction.

    Decimal literals are read exactly as p/10^k, never through binary floats.
    """
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        raise PDocParseError(
            "probability %r is a float; use a string literal for exactness" % text
        )
    s = text.strip()
    try:
        if "/" in s:
            num, den = s.split("/")
            return Fraction(int(num), int(den))
        if "." in s:
            whole, frac = s.split(".")
            whole = whole or "0"
            if not frac:
                return Fraction(int(whole))
            return Fraction(int(whole) * 10 ** len(frac) + int(frac), 10 ** len(frac))
        return Fraction(int(s))
    except (ValueError, ZeroDivisionError) as exc:
        raise PDocParseError("bad probability literal %r: %s" % (text, exc)) from None


def format_prob(p: Fraction) -> str:
    """Render a Fraction in lowest terms ("3/4", integers as "1")."""
    if p.denominator == 1:
        return str(p.numerator)
    return "%d/%d" % (p.numerator, p.denominator)


# ---------------------------------------------------------------------------
# Deterministic documents
# ---------------------------------------------------------------------------


@dataclass
class DocNode:
    id: str
    label: str
    children: list["DocNode"] = field(default_factory=list)

    def walk(self) -> Iterator["DocNode"]:
        yield self
        for c in self.children:
            yield from c.walk()

    def copy(self) -> "DocNode":
        return DocNode(self.id, self.label, [c.copy() for c in self.children])


class Document:
    """Rooted, unordered, unranked label tree with node identifiers.

    Identifiers are unique in source documents; materialized view extensions
    may repeat them (see the views module).
    """

    def __init__(self, root: DocNode, name: str = ""):
        self.root = root
        self.name = name or root.label

    def nodes(self) -> Iterator[DocNode]:
        return self.root.walk()

    def ids(self) -> frozenset:
        return frozenset(n.id for n in self.nodes())

    def find(self, node_id: str) -> DocNode:
        for n in self.nodes():
            if n.id == node_id:
                return n
        raise UnknownNode("no node with id %r" % node_id)

    def __eq__(self, other):
        if not isinstance(other, Document):
            return NotImplemented
        return _doc_key(self.root) == _doc_key(other.root)

    def __hash__(self):
        return hash(_doc_key(self.root))

    def to_json(self) -> dict:
        return {"name": self.name, "root": _docnode_to_json(self.root)}

    def serialize(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _doc_key(n: DocNode):
    return (n.id, n.label, tuple(sorted(_doc_key(c) for c in n.children)))


def _docnode_to_json(n: DocNode) -> dict:
    return {
        "id": n.id,
        "label": n.label,
        "children": [_docnode_to_json(c) for c in n.children],
    }


def _docnode_from_json(obj: dict, path: str) -> DocNode:
    if not isinstance(obj, dict) or "label" not in obj or "id" not in obj:
        raise PDocParseError("expected ordinary node object at %s" % path)
    kids = obj.get("children", [])
    return DocNode(
        str(obj["id"]),
        str(obj["label"]),
        [_docnode_from_json(c, "%s.children[%d]" % (path, i)) for i, c in enumerate(kids)],
    )


def parse_doc(text: str) -> Document:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PDocParseError("JSON syntax error at position %d: %s" % (exc.pos, exc.msg))
    if not isinstance(obj, dict) or "root" not in obj:
        raise PDocParseError("document object must have a 'root' field")
    root = _docnode_from_json(obj["root"], "root")
    return Document(root, str(obj.get("name", "")))


# ---------------------------------------------------------------------------
# p-documents
# ---------------------------------------------------------------------------


@dataclass
class POrd:
    """Ordinary p-document node."""

    id: str
    label: str
    children: list["PNode"] = field(default_factory=list)


@dataclass
class PDist:
    """Distributional node: mux selects at most one child, ind each child
    independently.  ``children`` pairs each child with its edge probability."""

    kind: str  # MUX or IND
    children: list[tuple[Fraction, "PNode"]] = field(default_factory=list)


PNode = Union[POrd, PDist]


class PDocument:
    def __init__(self, root: POrd, name: str = ""):
        self.root = root
        self.name = name or (root.label if isinstance(root, POrd) else "")

    # -- traversal helpers ---------------------------------------------------

    def walk(self) -> Iterator[PNode]:
        stack = [self.root]
        while stack:
            n = stack.pop()
            yield n
            if isinstance(n, POrd):
                stack.extend(reversed(n.children))
            else:
                stack.extend(node for _, node in reversed(n.children))

    def ordinary_nodes(self) -> Iterator[POrd]:
        return (n for n in self.walk() if isinstance(n, POrd))

    def find(self, node_id: str) -> POrd:
        for n in self.ordinary_nodes():
            if n.id == node_id:
                return n
        raise UnknownNode("no ordinary node with id %r" % node_id)

    def parent_map(self) -> dict[int, PNode]:
        """Map id() of each node to its parent node object."""
        parents: dict[int, PNode] = {}
        for n in self.walk():
            if isinstance(n, POrd):
                for c in n.children:
                    parents[id(c)] = n
            else:
                for _, c in n.children:
                    parents[id(c)] = n
        return parents

    def dist_count(self) -> int:
        return sum(1 for n in self.walk() if isinstance(n, PDist))

    # -- serialization --------------------------------------------------------

    def to_json(self) -> dict:
        return {"name": self.name, "root": _pnode_to_json(self.root)}

    def serialize(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def __eq__(self, other):
        if not isinstance(other, PDocument):
            return NotImplemented
        return self.name == other.name and _pnode_key(self.root) == _pnode_key(other.root)

    def __hash__(self):
        return hash((self.name, _pnode_key(self.root)))


def _pnode_key(n: PNode):
    if isinstance(n, POrd):
        return ("o", n.id, n.label, tuple(sorted(_pnode_key(c) for c in n.children)))
    return ("d", n.kind, tuple(sorted((p, _pnode_key(c)) for p, c in n.children)))


def _pnode_to_json(n: PNode) -> dict:
    if isinstance(n, POrd):
        return {
            "id": n.id,
            "label": n.label,
            "children": [_pnode_to_json(c) for c in n.children],
        }
    return {
        "dist": n.kind,
        "children": [
            {"p": format_prob(p), "node": _pnode_to_json(c)} for p, c in n.children
        ],
    }


def _pnode_from_json(obj: dict, path: str) -> PNode:
    if not isinstance(obj, dict):
        raise PDocParseError("expected node object at %s" % path)
    if "dist" in obj:
        kind = obj["dist"]
        if kind not in (MUX, IND):
            raise PDocParseError("unknown distributional kind %r at %s" % (kind, path))
        children = []
        for i, entry in enumerate(obj.get("children", [])):
            cpath = "%s.children[%d]" % (path, i)
            if not isinstance(entry, dict) or "p" not in entry or "node" not in entry:
                raise PDocParseError("distributional child needs 'p' and 'node' at %s" % cpath)
            children.append((parse_prob(entry["p"]), _pnode_from_json(entry["node"], cpath)))
        return PDist(kind, children)
    if "label" in obj and "id" in obj:
        kids = obj.get("children", [])
        return POrd(
            str(obj["id"]),
            str(obj["label"]),
            [_pnode_from_json(c, "%s.children[%d]" % (path, i)) for i, c in enumerate(kids)],
        )
    raise PDocParseError("node at %s is neither ordinary nor distributional" % path)


def parse_pdoc(text: str) -> PDocument:
    """Parse and validate the JSON form of a p-document."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PDocParseError("JSON syntax error at position %d: %s" % (exc.pos, exc.msg))
    return pdoc_from_json(obj)


def pdoc_from_json(obj: dict, validate: bool = True) -> PDocument:
    if not isinstance(obj, dict) or "root" not in obj:
        raise PDocParseError("p-document object must have a 'root' field")
    root = _pnode_from_json(obj["root"], "root")
    if not isinstance(root, POrd):
        raise InvalidPDocument("root must be an ordinary node", rule="root-ordinary")
    doc = PDocument(root, str(obj.get("name", "")))
    if validate:
        violations = validate_pdoc(doc)
        if violations:
            v = violations[0]
            raise InvalidPDocument(v.message, node=v.node, rule=v.rule)
    return doc


@dataclass
class Violation:
    rule: str
    node: Optional[str]
    message: str


def validate_pdoc(p: PDocument, require_unique_ids: bool = True) -> list[Violation]:
    """Check the p-document invariants; an empty list means ok."""
    out: list[Violation] = []
    if not isinstance(p.root, POrd):
        out.append(Violation("root-ordinary", None, "root must be an ordinary node"))
        return out
    seen: dict[str, int] = {}
    for n in p.walk():
        if isinstance(n, POrd):
            seen[n.id] = seen.get(n.id, 0) + 1
            continue
        if not n.children:
            out.append(Violation("leaf-ordinary", None, "distributional node has no children (leaves must be ordinary)"))
        total = Fraction(0)
        for prob, _child in n.children:
            if prob <= 0:
                out.append(Violation("positive-prob", None, "child probability %s is not > 0" % format_prob(prob)))
            if prob > 1:
                out.append(Violation("prob-at-most-one", None, "child probability %s exceeds 1" % format_prob(prob)))
            total += prob
        if n.kind == MUX and total > 1:
            out.append(Violation("mux-sum", None, "mux child probabilities sum to %s > 1" % format_prob(total)))
    if require_unique_ids:
        for node_id, count in seen.items():
            if count > 1:
                out.append(Violation("unique-ids", node_id, "node id %r occurs %d times" % (node_id, count)))
    return out


def deterministic_pdoc(d: Document, name: str = "") -> PDocument:
    """Lift a plain document into a p-document with no distributional nodes."""

    def conv(n: DocNode) -> POrd:
        return POrd(n.id, n.label, [conv(c) for c in n.children])

    return PDocument(conv(d.root), name or d.name)


# ---------------------------------------------------------------------------
# Possible-world semantics
# ---------------------------------------------------------------------------


@dataclass
class World:
    document: Document
    probability: Fraction


def _resolve(node: PNode) -> list[tuple[Fraction, tuple[DocNode, ...]]]:
    """Distribution over the tuples of ordinary subtrees a child link yields."""
    if isinstance(node, POrd):
        combos: list[tuple[Fraction, tuple[DocNode, ...]]] = [(Fraction(1), ())]
        for child in node.children:
            child_dist = _resolve(child)
            combos = [
                (p1 * p2, kids1 + kids2)
                for p1, kids1 in combos
                for p2, kids2 in child_dist
            ]
        return [
            (p, (DocNode(node.id, node.label, list(kids)),)) for p, kids in combos
        ]
    if node.kind == MUX:
        out: list[tuple[Fraction, tuple[DocNode, ...]]] = []
        total = Fraction(0)
        for prob, child in node.children:
            total += prob
            out.extend((prob * p, kids) for p, kids in _resolve(child))
        leftover = 1 - total
        if leftover > 0:
            out.append((leftover, ()))
        return out
    # ind: each child kept independently
    combos = [(Fraction(1), ())]
    for prob, child in node.children:
        branch = [(prob * p, kids) for p, kids in _resolve(child)]
        if prob < 1:
            branch.append((1 - prob, ()))
        combos = [
            (p1 * p2, kids1 + kids2) for p1, kids1 in combos for p2, kids2 in branch
        ]
    return combos


def enumerate_worlds(p: PDocument, max_dist_nodes: int = 20) -> list[World]:
    """All worlds of the p-document with their exact probabilities.

    Runs yielding documents with the same ordinary-node id set are merged
    into a single world (node ids persist from the p-document).
    """
    count = p.dist_count()
    if count > max_dist_nodes:
        raise WorldBoundExceeded(
            "%d distributional nodes exceed bound %d; use sampling or the DP evaluator"
            % (count, max_dist_nodes)
        )
    by_ids: dict[frozenset, World] = {}
    for prob, roots in _resolve(p.root):
        assert len(roots) == 1
        doc = Document(roots[0], p.name)
        key = doc.ids()
        if key in by_ids:
            by_ids[key].probability += prob
        else:
            by_ids[key] = World(doc, prob)
    return sorted(by_ids.values(), key=lambda w: sorted(w.document.ids()))


def appearance_prob(p: PDocument, node_id: str) -> Fraction:
    """Probability that the ordinary node exists in a random world.

    This is the product, over distributional nodes on the root-to-node chain,
    of the probability of the child continuing toward the node.
    """
    target = p.find(node_id)  # raises UnknownNode
    parents = p.parent_map()
    prob = Fraction(1)
    node: PNode = target
    while id(node) in parents:
        parent = parents[id(node)]
        if isinstance(parent, PDist):
            for edge_p, child in parent.children:
                if child is node:
                    prob *= edge_p
                    break
        node = parent
    return prob


def _copy_pnode(n: PNode) -> PNode:
    if isinstance(n, POrd):
        return POrd(n.id, n.label, [_copy_pnode(c) for c in n.children])
    return PDist(n.kind, [(p, _copy_pnode(c)) for p, c in n.children])


def subtree_at(p: PDocument, node_id: str) -> PDocument:
    """The p-subdocument rooted at an ordinary node, probabilities preserved."""
    node = p.find(node_id)
    return PDocument(_copy_pnode(node), p.name)
