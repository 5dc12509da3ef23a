"""Tree-pattern and intersection-pattern algebra.

Tree patterns are the child/descendant/predicate fragment of XPath without
wildcards: unordered trees whose edges are tagged ``/`` or ``//``, with one
output node sitting on the main branch (the root-to-output path).
Intersection patterns join several tree patterns on the identity of the
answer node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .model import DocNode, Document

CHILD = "/"
DESC = "//"


class PatternError(ValueError):
    pass


class PatternSyntaxError(PatternError):
    def __init__(self, message: str, pos: int):
        super().__init__("%s (at position %d)" % (message, pos))
        self.pos = pos


class PatNode:
    __slots__ = ("label", "edges")

    def __init__(self, label: str, edges: Optional[list[tuple[str, "PatNode"]]] = None):
        self.label = label
        self.edges: list[tuple[str, PatNode]] = edges or []

    def walk(self) -> Iterator["PatNode"]:
        yield self
        for _, c in self.edges:
            yield from c.walk()

    def __repr__(self):
        return "PatNode(%r)" % self.label


def _copy_node(node: PatNode, memo: dict[int, PatNode]) -> PatNode:
    new = PatNode(node.label)
    memo[id(node)] = new
    for ax, c in node.edges:
        new.edges.append((ax, _copy_node(c, memo)))
    return new


class TreePattern:
    """A tree pattern with a designated output node on the main branch."""

    def __init__(self, root: PatNode, out: PatNode):
        self.root = root
        self.out = out
        if self.main_branch() is None:
            raise PatternError("output node is not reachable from the root")

    # -- structure -----------------------------------------------------------

    def main_branch(self) -> Optional[list[PatNode]]:
        path: list[PatNode] = []

        def dfs(n: PatNode) -> bool:
            path.append(n)
            if n is self.out:
                return True
            for _, c in n.edges:
                if dfs(c):
                    return True
            path.pop()
            return False

        return path if dfs(self.root) else None

    def mb(self) -> list[PatNode]:
        path = self.main_branch()
        assert path is not None
        return path

    def mb_axes(self) -> list[str]:
        path = self.mb()
        axes = []
        for up, down in zip(path, path[1:]):
            for ax, c in up.edges:
                if c is down:
                    axes.append(ax)
                    break
        return axes

    def predicates_of(self, mb_node: PatNode) -> list[tuple[str, PatNode]]:
        """Child subtrees of a main-branch node that are not on the main branch."""
        on_mb = {id(n) for n in self.mb()}
        return [(ax, c) for ax, c in mb_node.edges if id(c) not in on_mb]

    def nodes(self) -> Iterator[PatNode]:
        return self.root.walk()

    def size(self) -> int:
        return sum(1 for _ in self.nodes())

    def copy(self) -> "TreePattern":
        memo: dict[int, PatNode] = {}
        root = _copy_node(self.root, memo)
        return TreePattern(root, memo[id(self.out)])

    def copy_with_map(self) -> tuple["TreePattern", dict[int, PatNode]]:
        memo: dict[int, PatNode] = {}
        root = _copy_node(self.root, memo)
        return TreePattern(root, memo[id(self.out)]), memo

    # -- identity --------------------------------------------------------------

    def canonical_key(self):
        return _canon(self.root, self.out)

    def __eq__(self, other):
        if not isinstance(other, TreePattern):
            return NotImplemented
        return self.canonical_key() == other.canonical_key()

    def __hash__(self):
        return hash(self.canonical_key())

    def __repr__(self):
        return "TreePattern(%s)" % to_query(self)


def _canon(node: PatNode, out: PatNode):
    return (
        node.label,
        node is out,
        tuple(sorted((ax, _canon(c, out)) for ax, c in node.edges)),
    )


@dataclass
class IntersectionPattern:
    members: list[TreePattern]

    def __post_init__(self):
        if not self.members:
            raise PatternError("intersection needs at least one member")

    def __repr__(self):
        return "IntersectionPattern(%s)" % to_query(self)


Pattern = Union[TreePattern, IntersectionPattern]


def single_node(label: str) -> TreePattern:
    n = PatNode(label)
    return TreePattern(n, n)


def linear_pattern(labels: list[str], axes: list[str]) -> TreePattern:
    """Build a predicate-free pattern from main-branch labels and edge axes."""
    assert len(axes) == len(labels) - 1
    root = PatNode(labels[0])
    cur = root
    for lbl, ax in zip(labels[1:], axes):
        nxt = PatNode(lbl)
        cur.edges.append((ax, nxt))
        cur = nxt
    return TreePattern(root, cur)


# ---------------------------------------------------------------------------
# Parsing / serialization
# ---------------------------------------------------------------------------

_LABEL_CHARS = set("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_")
_ID_EXTRA = set(":-.")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str):
        raise PatternSyntaxError(msg, self.pos)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def eat(self, s: str) -> bool:
        if self.text.startswith(s, self.pos):
            self.pos += len(s)
            return True
        return False

    def expect(self, s: str):
        if not self.eat(s):
            self.error("expected %r" % s)

    def label(self) -> str:
        start = self.pos
        if self.eat("#id:"):
            while self.peek() in _LABEL_CHARS or self.peek() in _ID_EXTRA:
                self.pos += 1
            if self.pos == start + 4:
                self.error("empty #id: label")
            return self.text[start : self.pos]
        if self.text.startswith("doc(", self.pos):
            self.pos += 4
            name_start = self.pos
            while self.peek() in _LABEL_CHARS:
                self.pos += 1
            if self.pos == name_start:
                self.error("empty view name in doc(...)")
            self.expect(")")
            return self.text[start : self.pos]
        while self.peek() in _LABEL_CHARS:
            self.pos += 1
        if self.pos == start:
            self.error("expected a label")
        return self.text[start : self.pos]

    def axis(self) -> Optional[str]:
        if self.eat("//"):
            return DESC
        if self.eat("/"):
            return CHILD
        return None

    def preds(self, node: PatNode):
        while self.eat("["):
            node.edges.append(self.rel())
            self.expect("]")

    def rel(self) -> tuple[str, PatNode]:
        anchor = CHILD
        if self.eat(".//"):
            anchor = DESC
        elif self.eat("./"):
            anchor = CHILD
        top = PatNode(self.label())
        self.preds(top)
        cur = top
        while True:
            ax = self.axis()
            if ax is None:
                break
            nxt = PatNode(self.label())
            cur.edges.append((ax, nxt))
            self.preds(nxt)
            cur = nxt
        return anchor, top

    def query(self) -> TreePattern:
        root = PatNode(self.label())
        self.preds(root)
        cur = root
        while True:
            ax = self.axis()
            if ax is None:
                break
            nxt = PatNode(self.label())
            cur.edges.append((ax, nxt))
            self.preds(nxt)
            cur = nxt
        return TreePattern(root, cur)


def parse_pattern(text: str) -> Pattern:
    """Parse a query string; '&' separates intersection members."""
    parts = [p.strip() for p in text.split("&")]
    patterns = []
    for part in parts:
        if not part:
            raise PatternSyntaxError("empty intersection member", text.find("&"))
        parser = _Parser(part)
        q = parser.query()
        if parser.pos != len(part):
            parser.error("trailing input %r" % part[parser.pos :])
        patterns.append(q)
    if len(patterns) == 1:
        return patterns[0]
    return IntersectionPattern(patterns)


def parse_tp(text: str) -> TreePattern:
    q = parse_pattern(text)
    if not isinstance(q, TreePattern):
        raise PatternError("expected a single tree pattern, got an intersection")
    return q


def _subtree_str(node: PatNode) -> str:
    s = node.label
    for ax, c in sorted(node.edges, key=lambda e: (e[0], _canon(e[1], None))):
        s += "[%s%s]" % (".//" if ax == DESC else "", _subtree_str(c))
    return s


def to_query(q: Pattern) -> str:
    """Serialize a pattern back to the query grammar."""
    if isinstance(q, IntersectionPattern):
        return " & ".join(to_query(m) for m in q.members)
    mb = q.mb()
    axes = q.mb_axes()
    out = []
    for i, node in enumerate(mb):
        if i > 0:
            out.append(axes[i - 1])
        out.append(node.label)
        for ax, c in sorted(
            q.predicates_of(node), key=lambda e: (e[0], _canon(e[1], None))
        ):
            out.append("[%s%s]" % (".//" if ax == DESC else "", _subtree_str(c)))
    return "".join(out)


# ---------------------------------------------------------------------------
# Evaluation on documents (embedding semantics)
# ---------------------------------------------------------------------------


class _DocIndex:
    def __init__(self, d: Document):
        self.root = d.root
        self.children: dict[int, list[DocNode]] = {}
        self.descendants: dict[int, list[DocNode]] = {}
        self._index(d.root)

    def _index(self, n: DocNode) -> list[DocNode]:
        self.children[id(n)] = list(n.children)
        desc: list[DocNode] = []
        for c in n.children:
            desc.append(c)
            desc.extend(self._index(c))
        self.descendants[id(n)] = desc
        return desc


def _matches(p: PatNode, x: DocNode, idx: _DocIndex, memo: dict) -> bool:
    """Whole subtree rooted at p embeds with p mapped to x."""
    key = (id(p), id(x))
    if key in memo:
        return memo[key]
    ok = p.label == x.label
    if ok:
        for ax, c in p.edges:
            pool = idx.children[id(x)] if ax == CHILD else idx.descendants[id(x)]
            if not any(_matches(c, y, idx, memo) for y in pool):
                ok = False
                break
    memo[key] = ok
    return ok


def eval_doc(q: Pattern, d: Union[Document, list[Document]]) -> set[str]:
    """Answer node ids of a pattern over a document (or a document set).

    Over a set, each intersection member is evaluated on the documents whose
    root label matches, and the member results are intersected.
    """
    docs = d if isinstance(d, list) else [d]
    if isinstance(q, IntersectionPattern):
        result: Optional[set[str]] = None
        for m in q.members:
            part: set[str] = set()
            for doc in docs:
                part |= eval_doc(m, doc)
            result = part if result is None else (result & part)
        return result or set()
    answers: set[str] = set()
    for doc in docs:
        if q.root.label != doc.root.label:
            continue
        idx = _DocIndex(doc)
        memo: dict = {}
        mb = q.mb()
        axes = q.mb_axes()
        on_mb = {id(n) for n in mb}

        def node_ok(p: PatNode, x: DocNode) -> bool:
            if p.label != x.label:
                return False
            for ax, c in p.edges:
                if id(c) in on_mb:
                    continue
                pool = idx.children[id(x)] if ax == CHILD else idx.descendants[id(x)]
                if not any(_matches(c, y, idx, memo) for y in pool):
                    return False
            return True

        def walk(i: int, x: DocNode):
            if i == len(mb) - 1:
                answers.add(x.id)
                return
            ax = axes[i]
            pool = idx.children[id(x)] if ax == CHILD else idx.descendants[id(x)]
            for y in pool:
                if node_ok(mb[i + 1], y):
                    walk(i + 1, y)

        if node_ok(mb[0], doc.root):
            walk(0, doc.root)
    return answers


# ---------------------------------------------------------------------------
# Containment and equivalence
# ---------------------------------------------------------------------------


class _PatIndex:
    def __init__(self, q: TreePattern):
        self.descendants: dict[int, list[PatNode]] = {}
        self._index(q.root)

    def _index(self, n: PatNode) -> list[PatNode]:
        desc: list[PatNode] = []
        for _, c in n.edges:
            desc.append(c)
            desc.extend(self._index(c))
        self.descendants[id(n)] = desc
        return desc


def _hom(a: PatNode, b: PatNode, q_from: TreePattern, q_to: TreePattern,
         idx: _PatIndex, memo: dict) -> bool:
    """Containment mapping of q_from's subtree at ``a`` into q_to with a -> b."""
    key = (id(a), id(b))
    if key in memo:
        return memo[key]
    ok = a.label == b.label and (a is not q_from.out or b is q_to.out)
    if ok:
        for ax, a2 in a.edges:
            if ax == CHILD:
                pool = [c for cax, c in b.edges if cax == CHILD]
            else:
                pool = idx.descendants[id(b)]
            if not any(_hom(a2, b2, q_from, q_to, idx, memo) for b2 in pool):
                ok = False
                break
    memo[key] = ok
    return ok


def contains(q1: TreePattern, q2: TreePattern) -> bool:
    """True iff q1 is contained in q2 (q1(d) is a subset of q2(d) for all d),
    decided by searching a containment mapping from q2 into q1."""
    idx = _PatIndex(q1)
    return _hom(q2.root, q1.root, q2, q1, idx, {})


def equivalent(q1: TreePattern, q2: TreePattern) -> bool:
    return contains(q1, q2) and contains(q2, q1)


def iso_equal(q1: TreePattern, q2: TreePattern) -> bool:
    return q1.canonical_key() == q2.canonical_key()


_PAD_LABEL = "zz_pad"
_counter = [0]


def _fresh_doc_id() -> str:
    _counter[0] += 1
    return "t%d" % _counter[0]


def canonical_document(q: TreePattern, pad: int = 2) -> tuple[Document, str]:
    """A canonical model of the pattern: /-edges become edges, //-edges become
    paths of ``pad`` edges through fresh-labeled padding nodes.  Returns the
    document and the id of the output node's image."""

    memo_out: list[str] = []

    def build_track(p: PatNode) -> DocNode:
        d = DocNode(_fresh_doc_id(), p.label)
        if p is q.out:
            memo_out.append(d.id)
        for ax, c in p.edges:
            child = build_track(c)
            if ax == DESC:
                for _ in range(pad - 1):
                    child = DocNode(_fresh_doc_id(), _PAD_LABEL, [child])
            d.children.append(child)
        return d

    root = build_track(q.root)
    return Document(root, q.root.label), memo_out[0]


def containment_counterexample(q1: TreePattern, q2: TreePattern) -> Optional[Document]:
    """A document witnessing that q1 is not contained in q2, or None.

    The canonical model of q1 with fresh padding on descendant edges is a
    complete witness for the wildcard-free fragment: any embedding of q2
    into it hitting the answer image induces a containment mapping.
    """
    if contains(q1, q2):
        return None
    doc, out_id = canonical_document(q1)
    assert out_id in eval_doc(q1, doc)
    assert out_id not in eval_doc(q2, doc)
    return doc


# ---------------------------------------------------------------------------
# Minimization
# ---------------------------------------------------------------------------


def _without_edge(q: TreePattern, parent: PatNode, edge_index: int) -> TreePattern:
    memo: dict[int, PatNode] = {}
    root = _copy_node(q.root, memo)
    new_parent = memo[id(parent)]
    del new_parent.edges[edge_index]
    return TreePattern(root, memo[id(q.out)])


def minimize(q: TreePattern) -> TreePattern:
    """Remove redundant predicate subtrees until no removal preserves
    equivalence.  Equivalence of minimized patterns is isomorphism."""
    cur = q.copy()
    changed = True
    while changed:
        changed = False
        on_mb = {id(n) for n in cur.mb()}
        for node in list(cur.nodes()):
            for i, (_ax, child) in enumerate(node.edges):
                if id(child) in on_mb:
                    continue
                candidate = _without_edge(cur, node, i)
                # dropping a predicate only relaxes, so candidate ⊒ cur always;
                # equivalence holds iff candidate ⊑ cur
                if contains(candidate, cur):
                    cur = candidate
                    changed = True
                    break
            if changed:
                break
    return cur


# ---------------------------------------------------------------------------
# Structure report: main branch, tokens, prefix-suffix
# ---------------------------------------------------------------------------


@dataclass
class StructureReport:
    labels: list[str]
    axes: list[str]
    depth: int
    tokens: list[list[str]]
    token_nodes: list[list[PatNode]]
    last_token_nodes: list[PatNode]
    u: int


def _prefix_suffix(labels: list[str]) -> int:
    m = len(labels)
    for u in range(m // 2, 0, -1):
        if labels[:u] == labels[m - u :]:
            return u
    return 0


def structure(q: TreePattern) -> StructureReport:
    mb = q.mb()
    axes = q.mb_axes()
    labels = [n.label for n in mb]
    tokens: list[list[str]] = [[labels[0]]]
    token_nodes: list[list[PatNode]] = [[mb[0]]]
    for ax, node in zip(axes, mb[1:]):
        if ax == CHILD:
            tokens[-1].append(node.label)
            token_nodes[-1].append(node)
        else:
            tokens.append([node.label])
            token_nodes.append([node])
    last = tokens[-1]
    return StructureReport(
        labels=labels,
        axes=axes,
        depth=len(mb),
        tokens=tokens,
        token_nodes=token_nodes,
        last_token_nodes=token_nodes[-1],
        u=_prefix_suffix(last),
    )


# ---------------------------------------------------------------------------
# Slicing, compensation, unfolding
# ---------------------------------------------------------------------------


@dataclass
class SliceResult:
    prefix: TreePattern
    suffix: TreePattern


def slice_pattern(q: TreePattern, k: int) -> SliceResult:
    """Split at main-branch depth k: prefix of size k (with predicates) and
    the suffix pattern rooted at the depth-k node."""
    mb = q.mb()
    if not 1 <= k <= len(mb):
        raise PatternError("slice depth %d out of range 1..%d" % (k, len(mb)))
    copy, memo = q.copy_with_map()
    cmb = copy.mb()
    pivot = cmb[k - 1]
    # suffix: the pivot subtree as its own pattern
    suffix_root = _copy_node(pivot, sub_memo := {})
    suffix = TreePattern(suffix_root, sub_memo[id(memo[id(q.out)])] if k < len(mb) else suffix_root)
    # prefix: drop the main-branch continuation below the pivot
    if k < len(mb):
        nxt = cmb[k]
        pivot.edges = [(ax, c) for ax, c in pivot.edges if c is not nxt]
    prefix = TreePattern(copy.root, pivot)
    return SliceResult(prefix=prefix, suffix=suffix)


def mb_only(q: TreePattern) -> TreePattern:
    """The main branch of q as a predicate-free linear pattern."""
    return linear_pattern([n.label for n in q.mb()], q.mb_axes())


def strip_out_predicates(q: TreePattern) -> TreePattern:
    """Drop the predicate subtrees attached to the output node."""
    copy, memo = q.copy_with_map()
    out = memo[id(q.out)]
    on_mb = {id(n) for n in copy.mb()}
    out.edges = [(ax, c) for ax, c in out.edges if id(c) in on_mb]
    return copy


def compensate(q1: TreePattern, q2: TreePattern) -> TreePattern:
    """Graft q2 onto out(q1): q2's root merges with the output node of q1."""
    if q1.out.label != q2.root.label:
        raise PatternError(
            "compensation label mismatch: out(q1)=%r vs root(q2)=%r"
            % (q1.out.label, q2.root.label)
        )
    base, memo1 = q1.copy_with_map()
    graft, memo2 = q2.copy_with_map()
    join = memo1[id(q1.out)]
    join.edges.extend(graft.root.edges)
    new_out = memo2[id(q2.out)]
    if new_out is graft.root:
        new_out = join
    return TreePattern(base.root, new_out)


DOC_PREFIX = "doc("


def doc_label(view_name: str) -> str:
    return "doc(%s)" % view_name


def is_doc_label(label: str) -> bool:
    return label.startswith(DOC_PREFIX) and label.endswith(")")


def doc_label_name(label: str) -> str:
    return label[len(DOC_PREFIX) : -1]


def doc_plan(view_name: str, out_label: str, compensation: Optional[TreePattern] = None) -> TreePattern:
    """Build the plan pattern doc(v)/lbl(v) optionally extended by a
    compensation whose root is labeled lbl(v)."""
    head = linear_pattern([doc_label(view_name), out_label], [CHILD])
    if compensation is None:
        return head
    return compensate(head, compensation)


def unfold(q: Pattern, views: dict[str, TreePattern]) -> Pattern:
    """Replace each doc(v)/lbl(v) head by the view definition."""
    if isinstance(q, IntersectionPattern):
        return IntersectionPattern([unfold(m, views) for m in q.members])
    if not is_doc_label(q.root.label):
        return q.copy()
    name = doc_label_name(q.root.label)
    if name not in views:
        raise PatternError("unknown view name %r" % name)
    vdef = views[name]
    if len(q.root.edges) != 1:
        raise PatternError("doc(%s) head must have exactly one child" % name)
    ax, head = q.root.edges[0]
    if ax != CHILD:
        raise PatternError("doc(%s) head must use a /-edge" % name)
    if head.label != vdef.out.label:
        raise PatternError(
            "label mismatch under doc(%s): %r vs view output %r"
            % (name, head.label, vdef.out.label)
        )
    # continuation = subtree below the lbl(v) node, as a pattern
    memo: dict[int, PatNode] = {}
    cont_root = _copy_node(head, memo)
    out_img = memo.get(id(q.out), cont_root)
    continuation = TreePattern(cont_root, out_img)
    return compensate(vdef, continuation)


# ---------------------------------------------------------------------------
# Interleavings: TP-vs-TP∩ equivalence machinery
# ---------------------------------------------------------------------------


@dataclass
class AlignedSlot:
    """One merged main-branch node in an interleaving of several patterns."""

    label: str
    incoming: Optional[str]  # None for the root slot
    parts: list[tuple[int, PatNode]] = field(default_factory=list)  # (member, node)


def _member_chain(q: TreePattern) -> list[tuple[Optional[str], PatNode]]:
    mb = q.mb()
    axes = [None] + q.mb_axes()
    return list(zip(axes, mb))


def aligned_merges(
    members: list[TreePattern], pin_out: Optional[list[bool]] = None
) -> list[list[AlignedSlot]]:
    """All ways to merge the members' main branches into one chain.

    Roots coalesce (root preservation); the output nodes of the pinned
    members coalesce in the final slot (they denote the same answer node),
    while an unpinned member's chain may end anywhere above it.  A /-edge
    forces adjacent slots; merged nodes must agree on labels.  Orderings
    leading to dead ends are dropped.
    """
    k = len(members)
    if pin_out is None:
        pin_out = [True] * k
    chains = [_member_chain(m) for m in members]
    pinned = [i for i in range(k) if pin_out[i]]
    if len({chains[i][0][1].label for i in range(k)}) != 1:
        return []
    if len({chains[i][-1][1].label for i in pinned}) > 1:
        return []

    results: list[list[AlignedSlot]] = []

    def rec(pos: tuple[int, ...], slots: list[AlignedSlot], last_slot_of: list[int]):
        if all(pos[i] == len(chains[i]) for i in range(k)):
            results.append(list(slots))
            return
        pending = [i for i in range(k) if pos[i] < len(chains[i])]
        # enumerate nonempty subsets of pending members with equal next labels
        n = len(pending)
        for mask in range(1, 1 << n):
            subset = [pending[j] for j in range(n) if mask & (1 << j)]
            nexts = [chains[i][pos[i]] for i in subset]
            labels = {node.label for _, node in nexts}
            if len(labels) != 1:
                continue
            takes_pinned_out = any(
                pos[i] == len(chains[i]) - 1 for i in subset if pin_out[i]
            )
            if takes_pinned_out:
                # the slot holding the answer node must be the very last one:
                # all pinned outputs coalesce here, everything else is done
                is_final = all(
                    (pos[i] == len(chains[i]) - 1 and i in subset)
                    if i in subset
                    else pos[i] == len(chains[i])
                    for i in range(k)
                ) and all(i in subset for i in pinned)
                if not is_final:
                    continue
            # /-edges force placement right below the predecessor's slot
            ok = True
            for i in subset:
                ax, _node = chains[i][pos[i]]
                if ax == CHILD and last_slot_of[i] != len(slots) - 1:
                    ok = False
                    break
            if not ok:
                continue
            incoming = None
            if slots:
                incoming = DESC
                for i in subset:
                    ax, _node = chains[i][pos[i]]
                    if ax == CHILD:
                        incoming = CHILD
                        break
            slot = AlignedSlot(labels.pop(), incoming, [(i, chains[i][pos[i]][1]) for i in subset])
            new_pos = tuple(pos[i] + 1 if i in subset else pos[i] for i in range(k))
            new_last = list(last_slot_of)
            for i in subset:
                new_last[i] = len(slots)
            slots.append(slot)
            rec(new_pos, slots, new_last)
            slots.pop()

    # a single-node pinned member makes the root the answer node, forcing
    # every other chain to collapse into the root slot as well
    if any(len(chains[i]) == 1 for i in pinned) and not all(
        len(c) == 1 for c in chains
    ):
        return []
    root_slot = AlignedSlot(
        chains[0][0][1].label, None, [(i, chains[i][0][1]) for i in range(k)]
    )
    rec(tuple(1 for _ in range(k)), [root_slot], [0] * k)
    return results


def _slots_to_pattern(members: list[TreePattern], slots: list[AlignedSlot]) -> TreePattern:
    mb_sets = [{id(n) for n in m.mb()} for m in members]
    nodes: list[PatNode] = []
    for slot in slots:
        node = PatNode(slot.label)
        for member_idx, orig in slot.parts:
            for ax, c in orig.edges:
                if id(c) in mb_sets[member_idx]:
                    continue
                node.edges.append((ax, _copy_node(c, {})))
        nodes.append(node)
    for up, down, slot in zip(nodes, nodes[1:], slots[1:]):
        up.edges.append((slot.incoming, down))
    return TreePattern(nodes[0], nodes[-1])


def interleavings(Q: Union[IntersectionPattern, TreePattern]) -> list[TreePattern]:
    """The set of tree patterns whose union is equivalent to the intersection.

    Captures every way to order or coalesce the members' main-branch nodes;
    results are minimized and deduplicated up to isomorphism.
    """
    if isinstance(Q, TreePattern):
        return [minimize(Q)]
    if len(Q.members) == 1:
        return [minimize(Q.members[0])]
    out: dict = {}
    for slots in aligned_merges(Q.members):
        cand = minimize(_slots_to_pattern(Q.members, slots))
        out[cand.canonical_key()] = cand
    # drop interleavings subsumed by more general ones: keep all (the union
    # is what matters); dedupe only by isomorphism
    return [out[k] for k in sorted(out.keys())]


def satisfiable(Q: Union[IntersectionPattern, TreePattern]) -> bool:
    """True iff some document set yields a non-empty answer."""
    if isinstance(Q, TreePattern):
        return True
    return bool(interleavings(Q))


def equiv_tp_cap(q: TreePattern, Q: Union[IntersectionPattern, TreePattern]) -> bool:
    """Decide q ≡ Q via interleavings: some interleaving contains q, and q
    contains every interleaving."""
    if isinstance(Q, TreePattern):
        return equivalent(q, Q)
    inters = interleavings(Q)
    if not inters:
        return False
    if not all(contains(qi, q) for qi in inters):
        return False
    return any(contains(q, qj) for qj in inters)


def simplify_cap(Q: Union[IntersectionPattern, TreePattern]) -> Optional[TreePattern]:
    """Reduce an intersection to a single equivalent tree pattern when it is
    union-free (exactly one interleaving up to isomorphism)."""
    if isinstance(Q, TreePattern):
        return minimize(Q)
    inters = interleavings(Q)
    if len(inters) == 1:
        return inters[0]
    # several interleavings may still collapse if one contains all others
    for cand in inters:
        if all(contains(other, cand) for other in inters):
            return cand
    return None


# ---------------------------------------------------------------------------
# Extended-skeleton recognition
# ---------------------------------------------------------------------------


def is_extended_skeleton(q: TreePattern) -> bool:
    """Recognize the fragment restricting descendant edges inside predicates.

    For every main-branch node n and every predicate subtree part reached
    through a //-edge, the /-path leading into that //-edge must not map into
    the /-path following n on the main branch (nor the other way around); an
    empty path maps into anything.
    """
    mb = q.mb()
    axes = q.mb_axes()
    for i, node in enumerate(mb):
        following: list[str] = []
        for j in range(i, len(axes)):
            if axes[j] == CHILD:
                following.append(mb[j + 1].label)
            else:
                break
        for ax, pred in q.predicates_of(node):
            for incoming in _desc_incoming_paths(ax, pred):
                if _lpath_maps(incoming, following) or _lpath_maps(following, incoming):
                    return False
    return True


def _desc_incoming_paths(anchor_axis: str, pred_root: PatNode) -> list[list[str]]:
    """For each //-edge inside (or anchoring) a predicate, the /-connected
    label path from the anchor down to that //-edge."""
    paths: list[list[str]] = []

    def rec(node: PatNode, lpath: list[str]):
        for ax, c in node.edges:
            if ax == DESC:
                paths.append(lpath + [node.label])
                rec(c, [])  # a new /-segment starts below the //-edge
            else:
                rec(c, lpath + [node.label])

    if anchor_axis == DESC:
        paths.append([])
    rec(pred_root, [])
    return paths


def _lpath_maps(p: list[str], r: list[str]) -> bool:
    """A /-path maps into another iff it is a (label) prefix of it."""
    return len(p) <= len(r) and all(a == b for a, b in zip(p, r))
