import json
from fractions import Fraction

import pytest

from pxview.model import parse_pdoc
from pxview.pattern import (
    IntersectionPattern,
    iso_equal,
    linear_pattern,
    parse_tp,
    to_query,
)
from pxview.probeval import oracle_peval, peval, peval_cap
from pxview.rewrite_cap import (
    CapPlan,
    ProductMode,
    SystemMode,
    appearance_from_views,
    build_system,
    decompose_views,
    exec_plan,
    find_product_rewriting,
    solve_system,
    tprewrite_cap,
)
from pxview.views import ViewDef, compensated_view, materialize_prob

F = Fraction

EX16_Q = "a[1]/b[2]/c[3]/d"
EX16_VIEWS = {
    "v1": "a[1]/b/c[3]/d",
    "v2": "a/b[2]/c[3]/d",
    "v3": "a[1]/b[2]/c/d",
    "v4": "a//d",
}


def ex16_views():
    return [ViewDef(name, parse_tp(text)) for name, text in EX16_VIEWS.items()]


def ex16_pdoc():
    # four independent choice points: one witness per predicate, plus a
    # gated answer node
    return parse_pdoc(json.dumps({
        "name": "a",
        "root": {"id": "a1", "label": "a", "children": [
            {"dist": "ind", "children": [{"p": "1/2", "node": {"id": "w1", "label": "1", "children": []}}]},
            {"id": "b1", "label": "b", "children": [
                {"dist": "ind", "children": [{"p": "1/3", "node": {"id": "w2", "label": "2", "children": []}}]},
                {"id": "c1", "label": "c", "children": [
                    {"dist": "ind", "children": [{"p": "3/5", "node": {"id": "w3", "label": "3", "children": []}}]},
                    {"dist": "ind", "children": [{"p": "7/10", "node": {"id": "d1", "label": "d", "children": []}}]}
                ]}
            ]}
        ]}
    }))


class TestDecomposition:
    def test_example16_dviews(self):
        q = parse_tp(EX16_Q)
        views = ex16_views()
        dec = decompose_views(q, [v.pattern for v in views])
        texts = {to_query(w) for w in dec.dviews}
        assert texts == {"a[1]/b/c/d", "a/b[2]/c/d", "a/b/c[3]/d", "a/b/c/d"}
        by_text = {to_query(w): i for i, w in enumerate(dec.dviews)}
        w1, w2, w3, w4 = (by_text[t] for t in
                          ["a[1]/b/c/d", "a/b[2]/c/d", "a/b/c[3]/d", "a/b/c/d"])
        assert dec.per_view[0] == frozenset({w1, w3, w4})
        assert dec.per_view[1] == frozenset({w2, w3, w4})
        assert dec.per_view[2] == frozenset({w1, w2, w4})
        assert dec.per_view[3] == frozenset({w4})
        assert dec.for_query == frozenset({w1, w2, w3, w4})

    def test_predicate_free_view(self):
        q = parse_tp("a/b/c")
        dec = decompose_views(q, [parse_tp("a//c")])
        assert [to_query(w) for w in dec.dviews] == ["a/b/c"]
        assert dec.per_view[0] == frozenset({0})

    def test_same_node_predicates_merge(self):
        q = parse_tp("a[x][y]/b")
        dec = decompose_views(q, [parse_tp("a[x][y]/b")])
        texts = {to_query(w) for w in dec.dviews}
        assert "a[x][y]/b" in texts
        merged = next(i for i, w in enumerate(dec.dviews) if to_query(w) == "a[x][y]/b")
        assert merged in dec.per_view[0]


class TestSystem:
    def test_example16_coefficients(self):
        q = parse_tp(EX16_Q)
        views = ex16_views()
        dec = decompose_views(q, [v.pattern for v in views])
        sys = build_system(q, dec)
        assert sys.solution == [F(1, 2), F(1, 2), F(1, 2), F(-1, 2)]

    def test_dropping_v4_unsolvable(self):
        q = parse_tp(EX16_Q)
        views = ex16_views()[:3]
        dec = decompose_views(q, [v.pattern for v in views])
        sys = build_system(q, dec)
        assert sys.solution is None

    def test_view_equal_to_query(self):
        q = parse_tp(EX16_Q)
        dec = decompose_views(q, [q])
        sys = build_system(q, dec)
        assert sys.solution == [F(1)]

    def test_row_space_monotone(self):
        q = parse_tp(EX16_Q)
        views = ex16_views()
        patterns = [v.pattern for v in views]
        base = build_system(q, decompose_views(q, patterns))
        assert base.solution is not None
        for extra in ["a[1]//d", "a/b[2]/c/d"]:
            grown = build_system(q, decompose_views(q, patterns + [parse_tp(extra)]))
            assert grown.solution is not None


class TestProductRewriting:
    def per_plan(self, per_queries):
        v1 = ViewDef("v1_bon", per_queries["v1_bon"])
        v2 = ViewDef("v2_bon", per_queries["v2_bon"])
        w = compensated_view("v2c", v2, parse_tp("bonus[name/laptop]"))
        return find_product_rewriting(per_queries["q_rbon"], [v1, w]), v1, v2, w

    def test_example15_plan_found(self, per_queries):
        plan, v1, v2, w = self.per_plan(per_queries)
        assert plan is not None and isinstance(plan.mode, ProductMode)
        assert {m.name for m in plan.members} == {"v1_bon", "v2c"}
        assert plan.mode.appearance_view == "v2_bon"

    def test_example15_execution(self, per_pdoc, per_queries):
        plan, v1, v2, w = self.per_plan(per_queries)
        extensions = {
            "v1_bon": materialize_prob(v1, per_pdoc),
            "v2_bon": materialize_prob(v2, per_pdoc),
        }
        got = exec_plan(plan, extensions)
        assert got == {"n5": F(27, 40)}
        joint = peval_cap(IntersectionPattern([v1.pattern, w.pattern]), per_pdoc)
        assert got == joint == peval(per_queries["q_rbon"], per_pdoc)

    def test_single_view_trivial(self, per_pdoc, per_queries):
        q = per_queries["q_bon"]
        plan = find_product_rewriting(q, [ViewDef("self", q)])
        assert plan is not None and len(plan.members) == 1
        assert plan.mode.appearance_view is None
        ext = {"self": materialize_prob(ViewDef("self", q), per_pdoc)}
        assert exec_plan(plan, ext) == peval(q, per_pdoc)

    def test_appearance_from_views(self, per_pdoc, per_queries):
        q = per_queries["q_rbon"]
        v1 = ViewDef("v1_bon", per_queries["v1_bon"])
        v2 = ViewDef("v2_bon", per_queries["v2_bon"])
        exts = {
            "v1_bon": materialize_prob(v1, per_pdoc),
            "v2_bon": materialize_prob(v2, per_pdoc),
        }
        got = appearance_from_views(q, [v1, v2], exts)
        assert got == {"n5": F(1), "n7": F(1)}
        assert appearance_from_views(q, [v1], exts) is None

    def test_plan_json(self, per_queries):
        plan, *_ = self.per_plan(per_queries)
        obj = plan.to_json()
        assert obj["kind"] == "cap"
        assert obj["mode"] == {"product": {"appearance_view": "v2_bon"}}
        views = {m["view"]: m["compensation"] for m in obj["members"]}
        assert views["v1_bon"] is None
        assert views["v2_bon"] == "bonus[name[laptop]]"


def matching_views(edges, s=6):
    labels = ["a"] * s + ["b"]
    axes = ["/"] * (s - 1) + ["//"]
    views = []
    for idx, edge in enumerate(edges):
        text_nodes = []
        for pos in range(1, s + 1):
            text_nodes.append("a[%d]" % pos if pos in edge else "a")
        views.append(ViewDef("e%d" % idx, parse_tp("/".join(text_nodes) + "//b")))
    views.append(ViewDef("mb", linear_pattern(labels, axes)))
    return views


def matching_query(s=6):
    return parse_tp("/".join("a[%d]" % i for i in range(1, s + 1)) + "//b")


class TestHardnessInstance:
    def test_perfect_matching_found(self):
        q = matching_query()
        views = matching_views([{1, 2, 3}, {4, 5, 6}, {1, 2, 4}])
        plan = find_product_rewriting(q, views)
        assert plan is not None
        names = {m.name for m in plan.members}
        assert names == {"e0", "e1", "mb"}

    def test_no_perfect_matching(self):
        q = matching_query()
        views = matching_views([{1, 2, 3}, {1, 4, 5}, {1, 2, 6}, {1, 3, 4}])
        assert find_product_rewriting(q, views) is None

    def test_found_plan_is_sound(self):
        q = matching_query(s=3)
        views = matching_views([{1, 2, 3}], s=3)
        plan = find_product_rewriting(q, views)
        assert plan is not None
        p = parse_pdoc(json.dumps({
            "name": "a",
            "root": {"id": "x1", "label": "a", "children": [
                {"dist": "ind", "children": [{"p": "1/2", "node": {"id": "p1", "label": "1", "children": []}}]},
                {"id": "x2", "label": "a", "children": [
                    {"dist": "ind", "children": [{"p": "1/3", "node": {"id": "p2", "label": "2", "children": []}}]},
                    {"id": "x3", "label": "a", "children": [
                        {"dist": "ind", "children": [{"p": "2/3", "node": {"id": "p3", "label": "3", "children": []}}]},
                        {"dist": "ind", "children": [{"p": "3/4", "node": {"id": "y", "label": "b", "children": []}}]}
                    ]}
                ]}
            ]}
        }))
        exts = {v.name: materialize_prob(v, p) for v in views}
        got = exec_plan(plan, exts)
        assert got == peval(q, p) == oracle_peval(q, p)


class TestTPRewriteCap:
    def test_example16_found(self):
        q = parse_tp(EX16_Q)
        outcome = tprewrite_cap(q, ex16_views())
        assert outcome.found
        assert isinstance(outcome.plan.mode, SystemMode)
        names = [m.name for m in outcome.plan.members]
        assert set(names) == {"v1", "v2", "v3", "v4"}
        assert outcome.plan.mode.coefficients == [F(1, 2), F(1, 2), F(1, 2), F(-1, 2)]

    def test_example16_execution(self):
        q = parse_tp(EX16_Q)
        p = ex16_pdoc()
        outcome = tprewrite_cap(q, ex16_views())
        exts = {v.name: materialize_prob(v, p) for v in ex16_views()}
        got = exec_plan(outcome.plan, exts)
        assert got == peval(q, p) == {"d1": F(7, 100)}

    def test_contains_query_itself(self, per_pdoc, per_queries):
        q = per_queries["q_bon"]
        outcome = tprewrite_cap(q, [ViewDef("self", q)])
        assert outcome.found
        exts = {"self": materialize_prob(ViewDef("self", q), per_pdoc)}
        assert exec_plan(outcome.plan, exts) == peval(q, per_pdoc)

    def test_unsolvable_with_descendant_main_branch(self):
        q = parse_tp("a[1]/a[2]//b")
        V = [ViewDef("v1", parse_tp("a[1]/a//b")), ViewDef("v2", parse_tp("a/a[2]//b"))]
        outcome = tprewrite_cap(q, V)
        assert outcome.status == "unsolvable"
        # the deterministic canonical plan nevertheless exists
        Q = IntersectionPattern([v.pattern for v in V])
        from pxview.pattern import equiv_tp_cap
        assert equiv_tp_cap(q, Q)

    def test_compensation_covers_missing_predicate(self):
        # the compensated form of a[1]/b reproduces the query, so this is
        # solvable even though the raw system over {v1, v2} would not be
        q = parse_tp("a[1]/b[2]")
        V = [ViewDef("v1", parse_tp("a[1]/b")), ViewDef("v2", parse_tp("a/b[2]"))]
        outcome = tprewrite_cap(q, V)
        assert outcome.found

    def test_unknown_with_child_only_main_branch(self):
        # two same-node predicates split across views: their joint
        # probability is not recoverable, and the /-only main branch means
        # the procedure cannot conclude impossibility either
        q = parse_tp("a[x][y]/b")
        V = [ViewDef("v1", parse_tp("a[x]/b")), ViewDef("v2", parse_tp("a[y]/b"))]
        outcome = tprewrite_cap(q, V)
        assert outcome.status == "unknown"

    def test_no_canonical(self):
        q = parse_tp("a[1]/b")
        outcome = tprewrite_cap(q, [ViewDef("v", parse_tp("a/b[x]"))])
        assert outcome.status == "no-canonical"

    def test_compensated_members_used(self, per_pdoc, per_queries):
        # the system route over the personnel views needs the compensated
        # form of the plain bonus view
        q = per_queries["q_rbon"]
        V = [
            ViewDef("v1_bon", per_queries["v1_bon"]),
            ViewDef("v2_bon", per_queries["v2_bon"]),
        ]
        outcome = tprewrite_cap(q, V)
        assert outcome.found
        exts = {v.name: materialize_prob(v, per_pdoc) for v in V}
        assert exec_plan(outcome.plan, exts) == {"n5": F(27, 40)}

    def test_redundant_views_tolerated(self):
        q = parse_tp(EX16_Q)
        p = ex16_pdoc()
        views = ex16_views()
        extra = ViewDef("v5", parse_tp("a[1]//d"))
        outcome = tprewrite_cap(q, views + [extra])
        assert outcome.found
        exts = {v.name: materialize_prob(v, p) for v in views + [extra]}
        assert exec_plan(outcome.plan, exts) == {"d1": F(7, 100)}
