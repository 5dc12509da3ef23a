"""Random instance generation for the end-to-end verifier.

Instances are built query-first: the p-document contains a chain matching
the query's main branch, predicate witnesses behind random gates, and noise
subtrees, so that answers usually have positive probability.  Views are
prefixes of the query with predicates dropped and edges relaxed, hence each
view contains the query or a prefix of it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .model import IND, MUX, PDist, PDocument, POrd
from .pattern import CHILD, DESC, PatNode, TreePattern, slice_pattern
from .views import ViewDef


@dataclass
class GenParams:
    max_dist_nodes: int = 8
    max_depth: int = 4
    label_alphabet: tuple = ("a", "b", "c", "d")
    query_depth: int = 3
    pred_count: int = 2
    n_views: int = 3
    witness_labels: tuple = ("u", "w")


@dataclass
class Instance:
    pdoc: PDocument
    query: TreePattern
    views: list[ViewDef]
    seed: int = 0


def _random_query(rng: random.Random, params: GenParams) -> TreePattern:
    depth = rng.randint(2, params.query_depth)
    labels = [rng.choice(params.label_alphabet) for _ in range(depth)]
    nodes = [PatNode(lbl) for lbl in labels]
    for up, down in zip(nodes, nodes[1:]):
        up.edges.append((rng.choice([CHILD, CHILD, DESC]), down))
    q = TreePattern(nodes[0], nodes[-1])
    for _ in range(rng.randint(0, params.pred_count)):
        anchor = rng.choice(nodes)
        wl = rng.choice(params.witness_labels)
        pred = PatNode(wl)
        if rng.random() < 0.3:
            pred.edges.append((CHILD, PatNode(rng.choice(params.witness_labels))))
        anchor.edges.append((rng.choice([CHILD, CHILD, DESC]), pred))
    return q


def _predicate_split_views(rng: random.Random, q: TreePattern) -> list[ViewDef]:
    """Complementary views: each drops one side of a random predicate split;
    a bare main-branch view supplies appearance probabilities."""
    copy, memo = q.copy_with_map()
    mb_new = {id(n) for n in copy.mb()}
    pred_edges = [
        (node, i)
        for node in copy.nodes()
        if id(node) in mb_new
        for i, (_ax, child) in enumerate(node.edges)
        if id(child) not in mb_new
    ]
    picks = [rng.random() < 0.5 for _ in pred_edges]
    if all(picks) or not any(picks):
        picks[0] = not picks[0]

    def drop(side: bool) -> TreePattern:
        kept, kmemo = copy.copy_with_map()
        for (node, i), mine in sorted(
            zip(pred_edges, picks), key=lambda e: -e[0][1]
        ):
            if mine == side:
                del kmemo[id(node)].edges[i]
        return kept

    from .pattern import mb_only

    return [
        ViewDef("v1", drop(True)),
        ViewDef("v2", drop(False)),
        ViewDef("v3", mb_only(q)),
    ]


def _derived_view(rng: random.Random, q: TreePattern, name: str) -> ViewDef:
    depth = len(q.mb())
    a = rng.randint(max(1, depth - 2), depth)
    prefix = slice_pattern(q, a).prefix
    # drop a random subset of predicates; sometimes relax a /-edge
    copy, memo = prefix.copy_with_map()
    mb_new = {id(n) for n in copy.mb()}
    for node in list(copy.nodes()):
        if id(node) not in mb_new:
            continue
        kept = []
        for ax, child in node.edges:
            if id(child) in mb_new:
                if ax == CHILD and rng.random() < 0.2:
                    ax = DESC
                kept.append((ax, child))
            elif rng.random() < 0.5:
                kept.append((ax, child))
        node.edges = kept
    return ViewDef(name, copy)


def _gate(rng: random.Random, node, budget: list[int]):
    """Wrap a subtree behind a random distributional gate when budget allows."""
    if budget[0] <= 0 or rng.random() < 0.3:
        return node
    budget[0] -= 1
    p = Fraction(rng.randint(1, 3), rng.randint(4, 5))
    if rng.random() < 0.5:
        return PDist(IND, [(p, node)])
    return PDist(MUX, [(p, node)])


def _instantiate_pattern(rng: random.Random, q: TreePattern, fresh, budget: list[int],
                         params: GenParams) -> POrd:
    """Document chain realizing the query with gated witnesses and noise."""
    mb = q.mb()
    axes = q.mb_axes()
    mb_ids = {id(n) for n in mb}

    def witness(pnode: PatNode) -> POrd:
        doc = POrd(fresh(), pnode.label)
        for _ax, c in pnode.edges:
            doc.children.append(_gate(rng, witness(c), budget))
        return doc

    chain = []
    for i, pnode in enumerate(mb):
        doc = POrd(fresh(), pnode.label)
        for ax, child in pnode.edges:
            if id(child) in mb_ids:
                continue
            doc.children.append(_gate(rng, witness(child), budget))
        if rng.random() < 0.25:
            doc.children.append(POrd(fresh(), rng.choice(params.label_alphabet)))
        chain.append(doc)
        if i == 0:
            continue
        hang: object = doc
        if axes[i - 1] == DESC and rng.random() < 0.3:
            hang = POrd(fresh(), rng.choice(params.label_alphabet), [doc])
        # chain links may be uncertain too (distributional nodes collapse,
        # so a gated link still yields a child edge in every world)
        if budget[0] > 0 and rng.random() < 0.3:
            budget[0] -= 1
            p = Fraction(rng.randint(2, 4), 5)
            hang = PDist(IND, [(p, hang)])
        chain[-2].children.append(hang)
    return chain[0]


def gen_instance(seed: int, params: GenParams = GenParams()) -> Instance:
    rng = random.Random(seed)
    counter = [0]

    def fresh() -> str:
        counter[0] += 1
        return "n%d" % counter[0]

    q = _random_query(rng, params)
    budget = [params.max_dist_nodes]
    root = _instantiate_pattern(rng, q, fresh, budget, params)
    # occasionally a second, partially matching branch under the root
    if budget[0] > 1 and rng.random() < 0.5:
        decoy_q = _random_query(rng, params)
        decoy = _instantiate_pattern(rng, decoy_q, fresh, budget, params)
        wrapped = _gate(rng, decoy, budget)
        root.children.append(wrapped)
    pdoc = PDocument(root, "generated")
    pred_edges = sum(
        1 for n in q.mb() for _ in q.predicates_of(n)
    )
    if pred_edges >= 2 and rng.random() < 0.4:
        views = _predicate_split_views(rng, q)
    else:
        views = [_derived_view(rng, q, "v%d" % i) for i in range(1, params.n_views + 1)]
    return Instance(pdoc=pdoc, query=q, views=views, seed=seed)
