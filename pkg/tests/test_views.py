from fractions import Fraction

from pxview.model import PDocument, subtree_at
from pxview.pattern import parse_tp
from pxview.probeval import peval
from pxview.views import (
    ViewDef,
    compensated_view,
    materialize_det,
    materialize_prob,
    strip_markers,
)

F = Fraction


class TestMaterializeDet:
    def test_v1_over_per(self, per_doc, per_queries):
        ext = materialize_det(ViewDef("v1", per_queries["v1_bon"]), per_doc)
        assert ext.root.label == "doc(v1)"
        assert [c.id for c in ext.root.children] == ["n5"]
        assert {c.label for c in ext.root.children} == {"bonus"}

    def test_v2_over_per(self, per_doc, per_queries):
        ext = materialize_det(ViewDef("v2", per_queries["v2_bon"]), per_doc)
        assert [c.id for c in ext.root.children] == ["n5", "n7"]

    def test_empty_result(self, per_doc):
        ext = materialize_det(ViewDef("v", parse_tp("personnel//zzz")), per_doc)
        assert ext.root.children == []


class TestMaterializeProb:
    def test_v1_extension(self, per_pdoc, per_queries):
        ext = materialize_prob(ViewDef("v1", per_queries["v1_bon"]), per_pdoc)
        assert len(ext.occurrences) == 1
        occ = ext.occurrences[0]
        assert occ.orig_root_id == "n5"
        assert occ.beta == F(3, 4)

    def test_v2_extension(self, per_pdoc, per_queries):
        ext = materialize_prob(ViewDef("v2", per_queries["v2_bon"]), per_pdoc)
        assert [(o.orig_root_id, o.beta) for o in ext.occurrences] == [
            ("n5", F(1)),
            ("n7", F(1)),
        ]

    def test_empty_support(self, per_pdoc):
        ext = materialize_prob(ViewDef("v", parse_tp("personnel//zzz")), per_pdoc)
        assert ext.occurrences == []
        ind = ext.pdoc.root.children[0]
        assert ind.children == []

    def test_probability_fidelity(self, per_pdoc, per_queries):
        # querying the extension with doc(v)/lbl(v) returns each occurrence
        # with exactly the original probability
        for name, key in [("v1", "v1_bon"), ("v2", "v2_bon")]:
            view = ViewDef(name, per_queries[key])
            ext = materialize_prob(view, per_pdoc)
            probe = parse_tp("doc(%s)/bonus" % name)
            got = peval(probe, ext.pdoc)
            originals = peval(view.pattern, per_pdoc)
            translated = {ext.orig_of(k): v for k, v in got.items()}
            assert translated == originals

    def test_marker_integrity(self, per_pdoc, per_queries):
        ext = materialize_prob(ViewDef("v2", per_queries["v2_bon"]), per_pdoc)
        for node in ext.pdoc.ordinary_nodes():
            if node.label.startswith("#id:") or node.label.startswith("doc("):
                continue
            markers = [
                c for c in node.children
                if getattr(c, "label", "").startswith("#id:")
            ]
            assert len(markers) == 1
            assert markers[0].label == "#id:" + ext.orig_of(node.id)

    def test_subtree_fidelity(self, per_pdoc, per_queries):
        ext = materialize_prob(ViewDef("v2", per_queries["v2_bon"]), per_pdoc)
        for occ in ext.occurrences:
            inside = strip_markers(ext.subtree(occ).root)
            original = subtree_at(per_pdoc, occ.orig_root_id).root

            def shape(n):
                if hasattr(n, "kind"):
                    return ("d", n.kind, tuple(sorted((p, shape(c)) for p, c in n.children)))
                return ("o", n.label, tuple(sorted(shape(c) for c in n.children)))

            assert shape(inside) == shape(original)

    def test_occurrence_containment(self, per_pdoc, per_queries):
        ext = materialize_prob(ViewDef("v2", per_queries["v2_bon"]), per_pdoc)
        assert [o.orig_root_id for o in ext.occurrences_containing("n55")] == ["n5"]
        assert [o.orig_root_id for o in ext.occurrences_containing("n73")] == ["n7"]

    def test_nested_occurrences(self, chain3_pdoc):
        ext = materialize_prob(ViewDef("v", parse_tp("a//b[e]/c/b/c")), chain3_pdoc)
        assert [o.orig_root_id for o in ext.occurrences] == ["c2", "c3"]
        # c3 occurs both as its own occurrence and inside c2's subtree
        assert [o.orig_root_id for o in ext.occurrences_containing("c3")] == ["c2", "c3"]

    def test_extension_indistinguishability(self, chain3_pdoc, chain4_pdoc):
        view = ViewDef("v", parse_tp("a//b[e]/c/b/c"))
        e3 = materialize_prob(view, chain3_pdoc)
        e4 = materialize_prob(view, chain4_pdoc)
        assert e3.pdoc == e4.pdoc
        assert e3.to_json() == e4.to_json()

    def test_serialization_carries_occurrences(self, per_pdoc, per_queries):
        ext = materialize_prob(ViewDef("v2", per_queries["v2_bon"]), per_pdoc)
        obj = ext.to_json()
        assert {"ext", "orig"} == set(obj["occurrences"][0].keys())
        pairs = {(e["ext"], e["orig"]) for e in obj["occurrences"]}
        assert ("x0:n5", "n5") in pairs


def test_compensated_view_links_base(per_queries):
    base = ViewDef("v2", per_queries["v2_bon"])
    w = compensated_view("w", base, parse_tp("bonus[name/laptop]"))
    assert w.extension_source() is base
    assert w.pattern == parse_tp("personnel//project//bonus[name/laptop]")
    assert base.extension_source() is base
