"""Probabilistic condition-independence between tree-pattern queries.

Two queries are condition-independent when, on every p-document and node,
the probability of their joint match factorizes into the product of their
individual probabilities divided by the node's appearance probability.
`cindep` decides this syntactically (conservatively: a Dependent verdict may
be pessimistic, an Independent verdict is meant to be sound); the falsifier
checks the defining identity directly on randomly generated p-documents.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .model import IND, MUX, PDist, PDocument, POrd, appearance_prob
from .pattern import (
    CHILD,
    DESC,
    AlignedSlot,
    IntersectionPattern,
    PatNode,
    TreePattern,
    aligned_merges,
)
from .probeval import peval, peval_cap

INDEPENDENT = "Independent"
DEPENDENT = "Dependent"


@dataclass
class CIndepVerdict:
    verdict: str
    rule: str = ""
    detail: str = ""
    counterexample: Optional[tuple[PDocument, str]] = None

    @property
    def independent(self) -> bool:
        return self.verdict == INDEPENDENT


def _has_predicates(q: TreePattern) -> bool:
    return any(q.predicates_of(n) for n in q.mb())


def _pred_map(q: TreePattern) -> dict[int, list[tuple[str, PatNode]]]:
    return {id(n): q.predicates_of(n) for n in q.mb()}


def _offset_window(anchor_axis: str, path_edges: list[str]) -> tuple[int, bool]:
    """(min depth offset of a predicate node below its anchor, flexible?)."""
    edges = [anchor_axis] + path_edges
    return len(edges), any(ax == DESC for ax in edges)


def _pred_nodes_with_paths(anchor_axis: str, root: PatNode):
    """Every node of a predicate subtree with the edge-axis path from the anchor."""
    out = []

    def rec(node: PatNode, path: list[str]):
        out.append((node, list(path)))
        for ax, c in node.edges:
            rec(c, path + [ax])

    rec(root, [])
    return [(node, _offset_window(anchor_axis, path)) for node, path in out]


def _gap_window(slots: list[AlignedSlot], i: int, j: int) -> tuple[int, bool]:
    """(min chain-depth gap between slots i < j, flexible?)."""
    axes = [slots[t].incoming for t in range(i + 1, j + 1)]
    return len(axes), any(ax == DESC for ax in axes)


def _windows_meet(min1: int, flex1: bool, min2: int, flex2: bool) -> bool:
    """Intersect [min1, max1] and [min2, max2] where max is the min itself for
    rigid windows and unbounded for flexible ones."""
    if not flex1 and min2 > min1:
        return False
    if not flex2 and min1 > min2:
        return False
    return True


def _share_feasible(slots, p1, s1_ax, s1_root, p2, s2_ax, s2_root) -> bool:
    """Can a witness node of one predicate coincide with a witness node of the
    other in some satisfying document?  Depth-window approximation (may err on
    the side of reporting feasibility)."""
    if p1 > p2:
        p1, s1_ax, s1_root, p2, s2_ax, s2_root = p2, s2_ax, s2_root, p1, s1_ax, s1_root
    gap_min, gap_flex = (0, False) if p1 == p2 else _gap_window(slots, p1, p2)
    for x1, (min1, flex1) in _pred_nodes_with_paths(s1_ax, s1_root):
        for x2, (min2, flex2) in _pred_nodes_with_paths(s2_ax, s2_root):
            if x1.label != x2.label:
                continue
            # depth(x1) = depth(p1) + o1 must equal depth(p2) + o2, i.e.
            # o1 = gap + o2 for some feasible offsets and gap
            if _windows_meet(min1, flex1, gap_min + min2, gap_flex or flex2):
                return True
    return False


def _gate_below(slots, s_ax: str, s_root: PatNode, pos: int, m: int) -> bool:
    """Can some required part of a predicate anchored at slot ``pos`` be
    placed strictly below slot ``m`` (pos <= m), possibly routing its upper
    /-connected part along the merged main branch?"""
    if s_ax == DESC:
        return True
    if pos == m:
        return True
    nxt = slots[pos + 1]
    if nxt.label == s_root.label:
        return any(_gate_below(slots, ax, c, pos + 1, m) for ax, c in s_root.edges)
    return False


def _alignment_interaction(q1: TreePattern, q2: TreePattern,
                           slots: list[AlignedSlot],
                           preds1: dict, preds2: dict) -> Optional[CIndepVerdict]:
    slot_preds: list[tuple[list, list]] = []
    for slot in slots:
        own = ([], [])
        for member_idx, node in slot.parts:
            pmap = preds1 if member_idx == 0 else preds2
            own[member_idx].extend(pmap[id(node)])
        slot_preds.append(own)
    # R1: one merged node tests predicates of both queries
    for t, (a, b) in enumerate(slot_preds):
        if a and b:
            return CIndepVerdict(
                DEPENDENT, rule="R1",
                detail="merged main-branch node %d carries predicates of both queries" % t,
            )
    pairs = [
        (t1, ax1, r1, t2, ax2, r2)
        for t1, (a1, _) in enumerate(slot_preds)
        for ax1, r1 in a1
        for t2, (_, b2) in enumerate(slot_preds)
        for ax2, r2 in b2
    ]
    # R2: a witness node can be shared by predicates of the two queries
    for t1, ax1, r1, t2, ax2, r2 in pairs:
        if _share_feasible(slots, t1, ax1, r1, t2, ax2, r2):
            return CIndepVerdict(
                DEPENDENT, rule="R2",
                detail="predicates at merged nodes %d and %d can share a witness node" % (t1, t2),
            )
    # R3: the upper predicate's witness can be gated below the lower anchor,
    # mutually exclusive with the other query's witness there
    for t1, ax1, r1, t2, ax2, r2 in pairs:
        hi, lo = (t1, t2) if t1 <= t2 else (t2, t1)
        hi_ax, hi_root = (ax1, r1) if t1 <= t2 else (ax2, r2)
        if hi == lo:
            continue
        if _gate_below(slots, hi_ax, hi_root, hi, lo):
            return CIndepVerdict(
                DEPENDENT, rule="R3",
                detail="predicate at merged node %d can be gated below node %d" % (hi, lo),
            )
    return None


def cindep(q1: TreePattern, q2: TreePattern) -> CIndepVerdict:
    """Syntactic condition-independence decision (same-answer-node form)."""
    if q1.root.label != q2.root.label or q1.out.label != q2.out.label:
        return CIndepVerdict(INDEPENDENT, rule="disjoint-support")
    if not _has_predicates(q1) or not _has_predicates(q2):
        return CIndepVerdict(INDEPENDENT, rule="predicate-free")
    preds1, preds2 = _pred_map(q1), _pred_map(q2)
    for slots in aligned_merges([q1, q2]):
        verdict = _alignment_interaction(q1, q2, slots, preds1, preds2)
        if verdict is not None:
            return verdict
    return CIndepVerdict(INDEPENDENT, rule="no-interaction")


def cindep_gate(packed: TreePattern, continued: TreePattern) -> CIndepVerdict:
    """The rewriting gate's variant: the first query's matches anchor
    somewhere on the second query's root-to-answer path, so its main branch
    aligns into the other's without the answer nodes coalescing."""
    if packed.root.label != continued.root.label:
        return CIndepVerdict(INDEPENDENT, rule="disjoint-support")
    if not _has_predicates(packed) or not _has_predicates(continued):
        return CIndepVerdict(INDEPENDENT, rule="predicate-free")
    preds1, preds2 = _pred_map(packed), _pred_map(continued)
    for slots in aligned_merges([packed, continued], pin_out=[False, True]):
        verdict = _alignment_interaction(packed, continued, slots, preds1, preds2)
        if verdict is not None:
            return verdict
    return CIndepVerdict(INDEPENDENT, rule="no-interaction")


# ---------------------------------------------------------------------------
# Semantic falsification oracle
# ---------------------------------------------------------------------------


def _random_pdoc(rng: random.Random, labels: list[str], max_depth: int = 3,
                 max_children: int = 2) -> PDocument:
    counter = [0]

    def fresh() -> str:
        counter[0] += 1
        return "m%d" % counter[0]

    def prob() -> Fraction:
        return Fraction(rng.randint(1, 3), rng.randint(4, 5))

    def attach(parent: POrd, depth: int):
        for _ in range(rng.randint(0 if depth > 1 else 1, max_children)):
            kind = rng.random()
            if kind < 0.4:
                parent.children.append(node(depth))
            elif kind < 0.7:
                parent.children.append(PDist(IND, [(prob(), node(depth))]))
            else:
                k = rng.randint(1, 2)
                alts = [
                    (Fraction(rng.randint(1, 2), 2 * k + 1), node(depth))
                    for _ in range(k)
                ]
                parent.children.append(PDist(MUX, alts))

    def node(depth: int) -> POrd:
        n = POrd(fresh(), rng.choice(labels))
        if depth < max_depth:
            attach(n, depth + 1)
        return n

    root = POrd(fresh(), labels[0])
    attach(root, 1)
    return PDocument(root, "random")


def _instantiate(pred: PatNode, fresh) -> POrd:
    """Canonical document subtree for a predicate pattern (every edge direct)."""
    n = POrd(fresh(), pred.label)
    for _ax, c in pred.edges:
        n.children.append(_instantiate(c, fresh))
    return n


def _guided_pdoc(rng: random.Random, q1: TreePattern, q2: TreePattern,
                 merges: list) -> Optional[PDocument]:
    """A p-document built around one alignment of the two patterns, with the
    predicate witnesses randomly gated, shared, or made mutually exclusive.

    This is the falsifier's targeted mode: it realizes exactly the document
    shapes on which condition-independence can break.
    """
    if not merges:
        return None
    counter = [0]

    def fresh() -> str:
        counter[0] += 1
        return "g%d" % counter[0]

    def prob() -> Fraction:
        return Fraction(rng.randint(1, 3), rng.randint(4, 5))

    slots = rng.choice(merges)
    chain = [POrd(fresh(), slot.label) for slot in slots]
    for up, down in zip(chain, chain[1:]):
        up.children.append(down)
    preds1, preds2 = _pred_map(q1), _pred_map(q2)
    pending: dict[int, list[POrd]] = {}
    for t, slot in enumerate(slots):
        for member_idx, node in slot.parts:
            pmap = preds1 if member_idx == 0 else preds2
            for ax, pred in pmap[id(node)]:
                anchor = t
                if ax == DESC and rng.random() < 0.7:
                    anchor = rng.randint(t, len(slots) - 1)
                pending.setdefault(anchor, []).append(_instantiate(pred, fresh))
    for anchor, witnesses in pending.items():
        rng.shuffle(witnesses)
        host = chain[anchor]
        while witnesses:
            w = witnesses.pop()
            if witnesses and rng.random() < 0.6:
                other = witnesses.pop()
                if other.label == w.label and rng.random() < 0.5:
                    # shared witness: one node serving both predicates
                    w.children.extend(other.children)
                    host.children.append(PDist(IND, [(prob(), w)]))
                else:
                    host.children.append(PDist(MUX, [(prob() / 2, w), (prob() / 2, other)]))
                continue
            style = rng.random()
            if style < 0.4:
                host.children.append(w)
            elif style < 0.8:
                host.children.append(PDist(IND, [(prob(), w)]))
            else:
                host.children.append(PDist(MUX, [(prob(), w)]))
    return PDocument(chain[0], "guided")


def cindep_falsify(q1: TreePattern, q2: TreePattern, seed: int = 0,
                   trials: int = 100) -> CIndepVerdict:
    """Check the defining identity on random small p-documents.

    Alternates pattern-guided documents (alignment chains with gated
    witnesses) and unconstrained random ones.  Returns a Dependent verdict
    with a counterexample p-document and node if a violation is found,
    otherwise ConsistentWithIndependence.
    """
    rng = random.Random(seed)
    labels = sorted(
        {n.label for n in q1.nodes()} | {n.label for n in q2.nodes()}
    )
    if q1.root.label == q2.root.label:
        labels.remove(q1.root.label)
        labels.insert(0, q1.root.label)
    joint_query = IntersectionPattern([q1, q2])
    merges = aligned_merges([q1, q2])
    for trial in range(max(1, trials)):
        if trial % 2 == 0:
            p = _guided_pdoc(rng, q1, q2, merges) or _random_pdoc(rng, labels)
        else:
            p = _random_pdoc(rng, labels)
        counterexample = check_identity(q1, q2, joint_query, p)
        if counterexample is not None:
            return CIndepVerdict(
                DEPENDENT,
                rule="falsified",
                detail="identity violated at node %s" % counterexample,
                counterexample=(p, counterexample),
            )
    return CIndepVerdict(INDEPENDENT, rule="ConsistentWithIndependence")


def check_identity(q1: TreePattern, q2: TreePattern,
                   joint_query: IntersectionPattern, p: PDocument) -> Optional[str]:
    """First node violating the condition-independence identity, if any."""
    a1 = peval(q1, p)
    a2 = peval(q2, p)
    joint = peval_cap(joint_query, p)
    for n in set(a1) | set(a2) | set(joint):
        app = appearance_prob(p, n)
        left = joint.get(n, Fraction(0))
        right = a1.get(n, Fraction(0)) * a2.get(n, Fraction(0)) / app
        if left != right:
            return n
    return None
