"""Exact probabilistic evaluation of patterns over p-documents.

`peval` runs a bottom-up dynamic program over the p-document tracking, for
each node, the exact distribution over the set of pattern subtrees already
satisfied in the world-subtree below it.  `oracle_peval` computes the same
quantity literally, by enumerating worlds; it is the reference the DP is
checked against and is deliberately kept independent of it.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Union

from .model import IND, MUX, PDist, PDocument, POrd, enumerate_worlds
from .pattern import (
    CHILD,
    IntersectionPattern,
    PatNode,
    Pattern,
    TreePattern,
    eval_doc,
)

ProbAnswer = dict[str, Fraction]

EMPTY = frozenset()


class StateSpaceExceeded(RuntimeError):
    """Joint DP state space grew past the configured bound."""


class _Evaluator:
    """Per-answer-candidate DP over one p-document."""

    def __init__(self, members: list[TreePattern], p: PDocument, state_bound: int = 0):
        self.p = p
        self.state_bound = state_bound
        self.nodes: list[PatNode] = []
        self.index: dict[int, int] = {}
        for m in members:
            for pn in m.nodes():
                self.index[id(pn)] = len(self.nodes)
                self.nodes.append(pn)
        self.edges: list[list[tuple[str, int]]] = [
            [(ax, self.index[id(c)]) for ax, c in pn.edges] for pn in self.nodes
        ]
        self.labels = [pn.label for pn in self.nodes]
        self.roots = [self.index[id(m.root)] for m in members]
        self.outs = frozenset(self.index[id(m.out)] for m in members)

    def _check(self, dist: dict) -> dict:
        if self.state_bound and len(dist) > self.state_bound:
            raise StateSpaceExceeded()
        return dist

    def _node_sets(self, x: POrd, sa: frozenset, sb: frozenset, n_id: str):
        """Given the merged child availability, which pattern nodes match at x
        (with the answer constraint) and at-or-below x."""
        a = set()
        for i, lbl in enumerate(self.labels):
            if lbl != x.label:
                continue
            if i in self.outs and x.id != n_id:
                continue
            ok = True
            for ax, j in self.edges[i]:
                if ax == CHILD:
                    if j not in sa:
                        ok = False
                        break
                elif j not in sb:
                    ok = False
                    break
            if ok:
                a.add(i)
        return frozenset(a), sb

    def _contrib(self, node, n_id: str) -> dict:
        """Distribution over (at-some-kept-child, at-or-below) contributions of
        one child link of an ordinary node."""
        if isinstance(node, POrd):
            out: dict = {}
            for (a, b), pr in self._state(node, n_id).items():
                key = (a, a | b)
                out[key] = out.get(key, Fraction(0)) + pr
            return self._check(out)
        if node.kind == MUX:
            out = {}
            total = Fraction(0)
            for prob, child in node.children:
                total += prob
                for key, pr in self._contrib(child, n_id).items():
                    out[key] = out.get(key, Fraction(0)) + prob * pr
            if total < 1:
                key = (EMPTY, EMPTY)
                out[key] = out.get(key, Fraction(0)) + (1 - total)
            return self._check(out)
        assert node.kind == IND
        acc = {(EMPTY, EMPTY): Fraction(1)}
        for prob, child in node.children:
            branch = [(prob, self._contrib(child, n_id))]
            merged: dict = {}
            for (sa1, sb1), pr1 in acc.items():
                for factor, dist in branch:
                    for (sa2, sb2), pr2 in dist.items():
                        key = (sa1 | sa2, sb1 | sb2)
                        merged[key] = merged.get(key, Fraction(0)) + pr1 * factor * pr2
                if prob < 1:
                    key = (sa1, sb1)
                    merged[key] = merged.get(key, Fraction(0)) + pr1 * (1 - prob)
            acc = self._check(merged)
        return acc

    def _state(self, x: POrd, n_id: str) -> dict:
        """Distribution over (matched-at-x, matched-strictly-below-x) for the
        world-subtree of x, conditioned on x being kept."""
        acc = {(EMPTY, EMPTY): Fraction(1)}
        for child in x.children:
            dist = self._contrib(child, n_id)
            merged: dict = {}
            for (sa1, sb1), pr1 in acc.items():
                for (sa2, sb2), pr2 in dist.items():
                    key = (sa1 | sa2, sb1 | sb2)
                    merged[key] = merged.get(key, Fraction(0)) + pr1 * pr2
            acc = self._check(merged)
        out: dict = {}
        for (sa, sb), pr in acc.items():
            key = self._node_sets(x, sa, sb, n_id)
            out[key] = out.get(key, Fraction(0)) + pr
        return out

    def prob_at(self, n_id: str) -> Fraction:
        total = Fraction(0)
        for (a, _b), pr in self._state(self.p.root, n_id).items():
            if all(r in a for r in self.roots):
                total += pr
        return total


def _members(q: Pattern) -> list[TreePattern]:
    return q.members if isinstance(q, IntersectionPattern) else [q]


def peval(q: TreePattern, p: PDocument) -> ProbAnswer:
    """Per-node probability that the pattern selects it in a random world.

    Nodes with probability zero are omitted.
    """
    ev = _Evaluator([q], p)
    answer: ProbAnswer = {}
    out_label = q.out.label
    for node in p.ordinary_nodes():
        if node.label != out_label:
            continue
        pr = ev.prob_at(node.id)
        if pr > 0:
            answer[node.id] = pr
    return answer


def peval_cap(
    Q: Union[IntersectionPattern, TreePattern],
    p: PDocument,
    state_bound: int = 8192,
    oracle_bound: int = 20,
) -> ProbAnswer:
    """Joint probability that every intersection member selects the node.

    Falls back to world enumeration when the joint DP state space exceeds
    the bound.
    """
    members = _members(Q)
    if len(members) == 1:
        return peval(members[0], p)
    out_labels = {m.out.label for m in members}
    if len(out_labels) != 1:
        return {}
    out_label = out_labels.pop()
    try:
        ev = _Evaluator(members, p, state_bound=state_bound)
        answer: ProbAnswer = {}
        for node in p.ordinary_nodes():
            if node.label != out_label:
                continue
            pr = ev.prob_at(node.id)
            if pr > 0:
                answer[node.id] = pr
        return answer
    except StateSpaceExceeded:
        return oracle_peval(Q, p, max_dist_nodes=oracle_bound)


def oracle_peval(
    q: Pattern, p: PDocument, max_dist_nodes: int = 20
) -> ProbAnswer:
    """Reference evaluator: the defining sum over enumerated worlds."""
    answer: ProbAnswer = {}
    for world in enumerate_worlds(p, max_dist_nodes=max_dist_nodes):
        for node_id in eval_doc(q, world.document):
            answer[node_id] = answer.get(node_id, Fraction(0)) + world.probability
    return {n: pr for n, pr in answer.items() if pr > 0}


def prob_answer_to_json(ans: ProbAnswer) -> list[dict]:
    from .model import format_prob

    return [{"node": n, "p": format_prob(ans[n])} for n in sorted(ans)]
