"""Single-view rewriting with compensation.

The decision procedure slices the query at the view's main-branch depth,
checks that compensating the view reproduces the query, that the view's
packed predicates cannot interact with the compensation (condition
independence), and finally either a restricted shape (a descendant-free main
branch on one side) or the prefix-suffix condition on the view's last token.

The probability side reads a view extension only.  Restricted plans divide
the plan's probability by the packed output-predicate factor; general plans
combine per-occurrence events by inclusion-exclusion, computing joint events
through intersection patterns that navigate between occurrences via the
``#id:`` markers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .cindep import cindep_gate
from .model import PDocument, POrd
from .pattern import (
    CHILD,
    DESC,
    IntersectionPattern,
    PatNode,
    TreePattern,
    _copy_node,
    compensate,
    doc_plan,
    equivalent,
    mb_only,
    slice_pattern,
    strip_out_predicates,
    structure,
    to_query,
)
from .probeval import ProbAnswer, peval, peval_cap
from .views import Occurrence, ViewDef, ViewExtension


class EventCapExceeded(RuntimeError):
    """More ancestor occurrences than the inclusion-exclusion cap allows."""


@dataclass
class RewriteParts:
    k: int
    compensation: TreePattern  # suffix of the query at depth k
    v_prime: TreePattern       # view without output-node predicates
    q_prime: TreePattern       # query prefix without depth-k predicates
    q_dprime: TreePattern      # bare prefix main branch compensated with the suffix
    restricted: bool


@dataclass
class Rejection:
    view: str
    stage: str  # depth | equivalence | c-independence | prefix-suffix
    detail: str


def last_token_pattern(v: TreePattern) -> TreePattern:
    """The view's last token as a /-connected pattern with its predicates."""
    st = structure(v)
    mb_ids = {id(n) for n in v.mb()}
    nodes = []
    for orig in st.last_token_nodes:
        copy = PatNode(orig.label)
        for ax, child in orig.edges:
            if id(child) in mb_ids:
                continue
            copy.edges.append((ax, _copy_node(child, {})))
        nodes.append(copy)
    for up, down in zip(nodes, nodes[1:]):
        up.edges.append((CHILD, down))
    return TreePattern(nodes[0], nodes[-1])


@dataclass
class TpPlan:
    view: str
    view_pattern: TreePattern
    compensation: TreePattern
    restricted: bool
    u: int
    last_token: TreePattern
    out_check: TreePattern  # the view's output node with its predicates

    @property
    def mode(self) -> str:
        return "restricted" if self.restricted else "general"

    def plan_pattern(self) -> TreePattern:
        return doc_plan(self.view, self.view_pattern.out.label, self.compensation)

    def to_json(self) -> dict:
        return {
            "kind": "tp",
            "view": self.view,
            "compensation": to_query(self.compensation),
            "mode": self.mode,
        }


def make_tp_plan(v: ViewDef, compensation: TreePattern) -> TpPlan:
    """Assemble the plan record for a view and compensation (gates not
    re-checked here; use find_tp_rewritings for the decision procedure)."""
    k = structure(v.pattern).depth
    st = structure(v.pattern)
    restricted = (
        DESC not in v.pattern.mb_axes() or DESC not in compensation.mb_axes()
    )
    return TpPlan(
        view=v.name,
        view_pattern=v.pattern,
        compensation=compensation,
        restricted=restricted,
        u=st.u,
        last_token=last_token_pattern(v.pattern),
        out_check=slice_pattern(v.pattern, k).suffix,
    )


def derive_parts(q: TreePattern, v: ViewDef) -> Union[RewriteParts, Rejection]:
    """Slice the query at the view's depth and test plan equivalence."""
    k = len(v.pattern.mb())
    q_mb = q.mb()
    if k > len(q_mb):
        return Rejection(v.name, "depth", "view main branch deeper than the query")
    if q_mb[k - 1].label != v.pattern.out.label:
        return Rejection(
            v.name, "depth",
            "query label at depth %d is %r, view output is %r"
            % (k, q_mb[k - 1].label, v.pattern.out.label),
        )
    sl = slice_pattern(q, k)
    unfolded = compensate(v.pattern, sl.suffix)
    if not equivalent(unfolded, q):
        return Rejection(v.name, "equivalence", "comp(view, query suffix) is not equivalent to the query")
    restricted = DESC not in v.pattern.mb_axes() or DESC not in sl.suffix.mb_axes()
    return RewriteParts(
        k=k,
        compensation=sl.suffix,
        v_prime=strip_out_predicates(v.pattern),
        q_prime=strip_out_predicates(sl.prefix),
        q_dprime=compensate(mb_only(sl.prefix), sl.suffix),
        restricted=restricted,
    )


def find_tp_rewritings_detailed(
    q: TreePattern, V: list[ViewDef]
) -> tuple[list[TpPlan], list[Rejection]]:
    plans: list[TpPlan] = []
    rejections: list[Rejection] = []
    for v in V:
        parts = derive_parts(q, v)
        if isinstance(parts, Rejection):
            rejections.append(parts)
            continue
        verdict = cindep_gate(parts.v_prime, parts.q_dprime)
        if not verdict.independent:
            rejections.append(
                Rejection(v.name, "c-independence",
                          "%s (%s)" % (verdict.rule, verdict.detail))
            )
            continue
        st = structure(v.pattern)
        if not parts.restricted:
            offenders = [
                node.label
                for node in st.last_token_nodes[: max(0, st.u - 1)]
                if v.pattern.predicates_of(node)
            ]
            if offenders:
                rejections.append(
                    Rejection(
                        v.name, "prefix-suffix",
                        "u = %d and token node %r carries predicates" % (st.u, offenders[0]),
                    )
                )
                continue
        plans.append(make_tp_plan(v, parts.compensation))
    return plans, rejections


def find_tp_rewritings(q: TreePattern, V: list[ViewDef]) -> list[TpPlan]:
    """All single-view plans whose answer probabilities are recoverable."""
    return find_tp_rewritings_detailed(q, V)[0]


# ---------------------------------------------------------------------------
# Probability recovery from extensions
# ---------------------------------------------------------------------------


def _occurrence_divisor(plan: TpPlan, ext: ViewExtension, occ: Occurrence) -> Fraction:
    sub = ext.subtree(occ)
    value = peval(plan.out_check, sub).get(occ.ext_root_id, Fraction(0))
    assert value > 0, "output-predicate factor vanished for a selected occurrence"
    return value


def fr_restricted(plan: TpPlan, ext: ViewExtension) -> ProbAnswer:
    """Evaluate the plan over the extension and divide away the packed
    output-predicate factor of the view."""
    assert plan.restricted
    raw = peval(plan.plan_pattern(), ext.pdoc)
    result: ProbAnswer = {}
    for ext_id, pr in raw.items():
        orig = ext.orig_of(ext_id)
        occ = ext.occurrences[ext.occurrence_index_of_node(ext_id)]
        value = pr / _occurrence_divisor(plan, ext, occ)
        assert orig not in result, "restricted plan selected a node twice"
        result[orig] = value
    return result


def _marker_depth(sub: PDocument, target_ext_id: str) -> int:
    """Ordinary nodes from the subtree root to the target, inclusive."""
    path: list[str] = []

    def dfs(node, depth: int) -> Optional[int]:
        if isinstance(node, POrd):
            depth += 1
            if node.id == target_ext_id:
                return depth
            children = node.children
        else:
            children = [c for _, c in node.children]
        for c in children:
            found = dfs(c, depth)
            if found is not None:
                return found
        return None

    found = dfs(sub.root, 0)
    assert found is not None, "occurrence root not found in extension subtree"
    return found


def _spine_member(plan: TpPlan, s: int, target_orig: str) -> TreePattern:
    """The intersection member testing a deeper occurrence from the top one.

    For disjoint token images (s > m) the whole last token is matched below
    the top occurrence; for overlapping images (s <= m) only its out-of-overlap
    tail is, rooted at the top occurrence itself.
    """
    token, _ = plan.last_token.copy_with_map()
    chain = token.mb()
    m = len(chain)
    if s > m:
        root = PatNode(plan.view_pattern.out.label)
        root.edges.append((DESC, token.root))
        spine = TreePattern(root, token.out)
    else:
        # the tail from token position m-s+1 (1-based) onward, rooted at the
        # top occurrence's own node
        spine = TreePattern(chain[m - s], token.out)
    spine.out.edges.append((CHILD, PatNode("#id:" + target_orig)))
    return compensate(spine, plan.compensation)


def fr_general(plan: TpPlan, ext: ViewExtension, event_cap: int = 12) -> ProbAnswer:
    """Inclusion-exclusion over the answer node's occurrences in the extension."""
    comp = plan.compensation
    out_label = comp.out.label
    # candidate answers: nodes the compensation reaches inside some occurrence
    local: dict[int, ProbAnswer] = {}
    candidates: set[str] = set()
    for occ in ext.occurrences:
        sub = ext.subtree(occ)
        local[occ.index] = peval(comp, sub)
        candidates.update(ext.orig_of(e) for e in local[occ.index])
    result: ProbAnswer = {}
    for orig in sorted(candidates):
        occs = [
            occ for occ in ext.occurrences
            if orig in occ.contained_orig_ids
            and local[occ.index].get(ext.ext_id_in_occurrence(occ, orig), Fraction(0)) > 0
        ]
        # ancestors first: an ancestor occurrence contains strictly more nodes
        occs.sort(key=lambda o: -len(o.contained_orig_ids))
        if len(occs) > event_cap:
            raise EventCapExceeded(
                "%d occurrences of %s exceed the inclusion-exclusion cap %d"
                % (len(occs), orig, event_cap)
            )
        total = Fraction(0)
        for size in range(1, len(occs) + 1):
            sign = 1 if size % 2 == 1 else -1
            for subset in itertools.combinations(occs, size):
                top = subset[0]
                sub = ext.subtree(top)
                members = [comp.copy()]
                for deeper in subset[1:]:
                    target_ext = ext.ext_id_in_occurrence(top, deeper.orig_root_id)
                    s = _marker_depth(sub, target_ext)
                    members.append(_spine_member(plan, s, deeper.orig_root_id))
                alpha = IntersectionPattern(members)
                value = peval_cap(alpha, sub).get(
                    ext.ext_id_in_occurrence(top, orig), Fraction(0)
                )
                term = (top.beta / _occurrence_divisor(plan, ext, top)) * value
                total += sign * term
        if total > 0:
            result[orig] = total
    return result


def exec_tp_plan(plan: TpPlan, ext: ViewExtension, event_cap: int = 12) -> ProbAnswer:
    if plan.restricted:
        return fr_restricted(plan, ext)
    return fr_general(plan, ext, event_cap=event_cap)
