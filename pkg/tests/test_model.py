import json
from fractions import Fraction

import pytest

from pxview.model import (
    IND,
    MUX,
    InvalidPDocument,
    PDist,
    PDocument,
    PDocParseError,
    POrd,
    UnknownNode,
    WorldBoundExceeded,
    appearance_prob,
    enumerate_worlds,
    format_prob,
    parse_pdoc,
    parse_prob,
    subtree_at,
    validate_pdoc,
)

F = Fraction


def test_parse_prob_forms():
    assert parse_prob("0.75") == F(3, 4)
    assert parse_prob("3/4") == F(3, 4)
    assert parse_prob("1") == F(1)
    assert parse_prob("0.4725") == F(189, 400)
    assert format_prob(F(6, 8)) == "3/4"
    assert format_prob(F(2, 2)) == "1"


def test_parse_prob_rejects_floats_and_junk():
    with pytest.raises(PDocParseError):
        parse_prob("x")
    with pytest.raises(PDocParseError):
        parse_prob(0.75)


def test_parse_minimal_document():
    p = parse_pdoc('{"name":"a","root":{"id":"n1","label":"a"}}')
    assert p.root.label == "a"
    assert p.dist_count() == 0


def test_parse_mux_probabilities():
    text = json.dumps(
        {
            "name": "a",
            "root": {
                "id": "n1",
                "label": "a",
                "children": [
                    {
                        "dist": "mux",
                        "children": [
                            {"p": "0.7", "node": {"id": "n2", "label": "b"}},
                            {"p": "0.3", "node": {"id": "n3", "label": "c"}},
                        ],
                    }
                ],
            },
        }
    )
    p = parse_pdoc(text)
    dist = p.root.children[0]
    assert [edge_p for edge_p, _ in dist.children] == [F(7, 10), F(3, 10)]


def test_mux_sum_over_one_rejected():
    text = json.dumps(
        {
            "name": "a",
            "root": {
                "id": "n1",
                "label": "a",
                "children": [
                    {
                        "dist": "mux",
                        "children": [
                            {"p": "0.7", "node": {"id": "n2", "label": "b"}},
                            {"p": "0.4", "node": {"id": "n3", "label": "c"}},
                        ],
                    }
                ],
            },
        }
    )
    with pytest.raises(InvalidPDocument) as err:
        parse_pdoc(text)
    assert err.value.rule == "mux-sum"


def test_zero_probability_child_rejected():
    text = json.dumps(
        {
            "name": "a",
            "root": {
                "id": "n1",
                "label": "a",
                "children": [
                    {"dist": "ind", "children": [{"p": "0", "node": {"id": "n2", "label": "b"}}]}
                ],
            },
        }
    )
    with pytest.raises(InvalidPDocument) as err:
        parse_pdoc(text)
    assert err.value.rule == "positive-prob"


def test_validate_distributional_leaf_and_root():
    leafy = PDocument(POrd("n1", "a", [PDist(MUX, [])]))
    rules = {v.rule for v in validate_pdoc(leafy)}
    assert "leaf-ordinary" in rules
    # a distributional root cannot even be constructed from JSON
    with pytest.raises((InvalidPDocument, PDocParseError)):
        parse_pdoc('{"name":"x","root":{"dist":"mux","children":[]}}')


def test_validate_per_fixture_ok(per_pdoc):
    assert validate_pdoc(per_pdoc) == []


def test_duplicate_ids_flagged():
    p = PDocument(POrd("n1", "a", [POrd("n1", "b")]))
    assert any(v.rule == "unique-ids" for v in validate_pdoc(p))


def test_serialization_roundtrip(per_pdoc):
    again = parse_pdoc(per_pdoc.serialize())
    assert again == per_pdoc
    assert again.serialize() == per_pdoc.serialize()


def test_enumerate_worlds_no_dist_nodes():
    p = parse_pdoc('{"name":"a","root":{"id":"n1","label":"a"}}')
    worlds = enumerate_worlds(p)
    assert len(worlds) == 1
    assert worlds[0].probability == 1


def test_enumerate_worlds_single_mux():
    text = json.dumps(
        {
            "name": "a",
            "root": {
                "id": "n1",
                "label": "a",
                "children": [
                    {"dist": "mux", "children": [{"p": "2/5", "node": {"id": "n2", "label": "b"}}]}
                ],
            },
        }
    )
    worlds = enumerate_worlds(parse_pdoc(text))
    table = {w.document.ids(): w.probability for w in worlds}
    assert table == {
        frozenset({"n1", "n2"}): F(2, 5),
        frozenset({"n1"}): F(3, 5),
    }


def test_world_probabilities_sum_to_one(per_pdoc):
    worlds = enumerate_worlds(per_pdoc)
    assert sum(w.probability for w in worlds) == 1


def test_per_world_probability(per_pdoc, per_doc):
    worlds = enumerate_worlds(per_pdoc)
    target = [w for w in worlds if w.document.ids() == per_doc.ids()]
    assert len(target) == 1
    assert target[0].probability == F(4725, 10000)
    assert target[0].document == per_doc


def test_world_bound():
    kids = [
        {"dist": "ind", "children": [{"p": "1/2", "node": {"id": "k%d" % i, "label": "b"}}]}
        for i in range(21)
    ]
    p = parse_pdoc(json.dumps({"name": "a", "root": {"id": "n1", "label": "a", "children": kids}}))
    with pytest.raises(WorldBoundExceeded):
        enumerate_worlds(p)


def test_appearance_prob(per_pdoc):
    assert appearance_prob(per_pdoc, "n1") == 1
    assert appearance_prob(per_pdoc, "n5") == 1
    assert appearance_prob(per_pdoc, "n41") == F(3, 4)
    assert appearance_prob(per_pdoc, "n55") == F(9, 10)
    assert appearance_prob(per_pdoc, "n57") == F(7, 10)
    with pytest.raises(UnknownNode):
        appearance_prob(per_pdoc, "nope")


def test_appearance_matches_world_sum(per_pdoc):
    worlds = enumerate_worlds(per_pdoc)
    for node in per_pdoc.ordinary_nodes():
        total = sum(w.probability for w in worlds if node.id in w.document.ids())
        assert appearance_prob(per_pdoc, node.id) == total


def test_appearance_through_dist_chain():
    text = json.dumps(
        {
            "name": "a",
            "root": {
                "id": "n1",
                "label": "a",
                "children": [
                    {
                        "dist": "mux",
                        "children": [
                            {
                                "p": "7/10",
                                "node": {
                                    "dist": "ind",
                                    "children": [
                                        {"p": "1/2", "node": {"id": "n2", "label": "b"}}
                                    ],
                                },
                            }
                        ],
                    }
                ],
            },
        }
    )
    assert appearance_prob(parse_pdoc(text), "n2") == F(7, 20)


def test_subtree_at(per_pdoc):
    assert subtree_at(per_pdoc, "n1").root is not per_pdoc.root
    assert subtree_at(per_pdoc, "n1") == PDocument(per_pdoc.root, per_pdoc.name)
    sub = subtree_at(per_pdoc, "n5")
    assert sub.root.label == "bonus"
    assert sub.dist_count() == 3  # the laptop mux, the amount mux, the nested ind
    leaf = subtree_at(per_pdoc, "n73")
    assert leaf.root.children == []


def test_enumerate_worlds_deterministic(per_pdoc):
    a = enumerate_worlds(per_pdoc)
    b = enumerate_worlds(per_pdoc)
    assert [(w.document.ids(), w.probability) for w in a] == [
        (w.document.ids(), w.probability) for w in b
    ]
