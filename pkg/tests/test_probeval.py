import random
from fractions import Fraction

from pxview.cindep import _random_pdoc
from pxview.model import appearance_prob, parse_pdoc
from pxview.pattern import IntersectionPattern, compensate, contains, parse_tp
from pxview.probeval import oracle_peval, peval, peval_cap, prob_answer_to_json

F = Fraction


class TestPevalExamples:
    def test_example_values(self, per_pdoc, per_queries):
        assert peval(per_queries["q_bon"], per_pdoc) == {"n5": F(9, 10)}
        assert peval(per_queries["v1_bon"], per_pdoc) == {"n5": F(3, 4)}
        assert peval(per_queries["q_rbon"], per_pdoc) == {"n5": F(27, 40)}
        assert peval(per_queries["v2_bon"], per_pdoc) == {"n5": F(1), "n7": F(1)}

    def test_root_only(self, per_pdoc):
        assert peval(parse_tp("personnel"), per_pdoc) == {"n1": F(1)}

    def test_oracle_matches_examples(self, per_pdoc, per_queries):
        for q in per_queries.values():
            assert oracle_peval(q, per_pdoc) == peval(q, per_pdoc)

    def test_chain_fixtures(self, chain3_pdoc, chain4_pdoc):
        q = parse_tp("a//b[e]/c/b/c//d")
        v = parse_tp("a//b[e]/c/b/c")
        assert peval(q, chain3_pdoc) == {"d1": F(288, 1000)}
        assert peval(q, chain4_pdoc) == {"d1": F(264, 1000)}
        assert peval(v, chain3_pdoc) == {"c2": F(12, 100), "c3": F(24, 100)}
        assert peval(v, chain4_pdoc) == {"c2": F(12, 100), "c3": F(24, 100)}
        assert oracle_peval(q, chain3_pdoc) == peval(q, chain3_pdoc)
        assert oracle_peval(q, chain4_pdoc) == peval(q, chain4_pdoc)


class TestPevalCap:
    def test_single_member(self, per_pdoc, per_queries):
        Q = IntersectionPattern([per_queries["q_bon"]])
        assert peval_cap(Q, per_pdoc) == peval(per_queries["q_bon"], per_pdoc)

    def test_two_view_joint(self, per_pdoc, per_queries):
        compensated = compensate(per_queries["v2_bon"], parse_tp("bonus[name/laptop]"))
        Q = IntersectionPattern([per_queries["v1_bon"], compensated])
        assert peval_cap(Q, per_pdoc) == {"n5": F(27, 40)}

    def test_cap_matches_oracle(self, per_pdoc, per_queries):
        Q = IntersectionPattern([per_queries["v1_bon"], per_queries["v2_bon"]])
        assert peval_cap(Q, per_pdoc) == oracle_peval(Q, per_pdoc)

    def test_fallback_on_state_bound(self, per_pdoc, per_queries):
        Q = IntersectionPattern([per_queries["q_rbon"], per_queries["v2_bon"]])
        assert peval_cap(Q, per_pdoc, state_bound=1) == oracle_peval(Q, per_pdoc)


class TestRandomAgreement:
    QUERIES = [
        "a/b",
        "a//b",
        "a[b]/c//b",
        "a[.//c]/b[c]",
        "a//a[b][c]",
        "a/b[.//a]//c",
        "a//b//c",
        "a[b/c][.//d]//d",
    ]

    def test_peval_equals_oracle(self):
        rng = random.Random(7)
        for trial in range(60):
            p = _random_pdoc(rng, ["a", "b", "c", "d"])
            q = parse_tp(self.QUERIES[trial % len(self.QUERIES)])
            assert peval(q, p) == oracle_peval(q, p), (trial, p.serialize())

    def test_cap_equals_oracle(self):
        rng = random.Random(11)
        pairs = [
            ("a//b", "a/b"),
            ("a[c]/b", "a//b"),
            ("a[.//c]//b", "a//b[c]"),
        ]
        for trial in range(30):
            p = _random_pdoc(rng, ["a", "b", "c"])
            q1, q2 = pairs[trial % len(pairs)]
            Q = IntersectionPattern([parse_tp(q1), parse_tp(q2)])
            assert peval_cap(Q, p) == oracle_peval(Q, p), (trial, p.serialize())

    def test_monotone_under_containment(self):
        rng = random.Random(3)
        q_small, q_big = parse_tp("a[c]/b"), parse_tp("a//b")
        assert contains(q_small, q_big)
        for _ in range(25):
            p = _random_pdoc(rng, ["a", "b", "c"])
            small, big = peval(q_small, p), peval(q_big, p)
            for node, pr in small.items():
                assert pr <= big.get(node, F(0))

    def test_bounded_by_appearance(self):
        rng = random.Random(5)
        q = parse_tp("a[c]//b")
        for _ in range(25):
            p = _random_pdoc(rng, ["a", "b", "c"])
            for node, pr in peval(q, p).items():
                assert pr <= appearance_prob(p, node)


def test_prob_answer_json(per_pdoc, per_queries):
    ans = peval(per_queries["v2_bon"], per_pdoc)
    assert prob_answer_to_json(ans) == [
        {"node": "n5", "p": "1"},
        {"node": "n7", "p": "1"},
    ]
