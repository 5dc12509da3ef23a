"""Query answering over probabilistic XML using materialized views."""

from .model import (
    Document,
    PDocument,
    appearance_prob,
    enumerate_worlds,
    parse_doc,
    parse_pdoc,
    subtree_at,
    validate_pdoc,
)
from .pattern import (
    IntersectionPattern,
    TreePattern,
    compensate,
    contains,
    equiv_tp_cap,
    eval_doc,
    interleavings,
    is_extended_skeleton,
    minimize,
    parse_pattern,
    satisfiable,
    slice_pattern,
    structure,
    to_query,
    unfold,
)
from .probeval import oracle_peval, peval, peval_cap
from .views import ViewDef, ViewExtension, materialize_det, materialize_prob
from .cindep import cindep, cindep_falsify

__all__ = [
    "Document",
    "PDocument",
    "appearance_prob",
    "enumerate_worlds",
    "parse_doc",
    "parse_pdoc",
    "subtree_at",
    "validate_pdoc",
    "IntersectionPattern",
    "TreePattern",
    "compensate",
    "contains",
    "equiv_tp_cap",
    "eval_doc",
    "interleavings",
    "is_extended_skeleton",
    "minimize",
    "parse_pattern",
    "satisfiable",
    "slice_pattern",
    "structure",
    "to_query",
    "unfold",
    "oracle_peval",
    "peval",
    "peval_cap",
    "ViewDef",
    "ViewExtension",
    "materialize_det",
    "materialize_prob",
    "cindep",
    "cindep_falsify",
]
