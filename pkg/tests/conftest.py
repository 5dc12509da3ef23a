import json
from pathlib import Path

import pytest

from pxview.model import parse_doc, parse_pdoc
from pxview.pattern import parse_tp

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load_pdoc(name):
    return parse_pdoc((FIXTURES / name).read_text())


def load_doc(name):
    return parse_doc((FIXTURES / name).read_text())


@pytest.fixture(scope="session")
def per_pdoc():
    return load_pdoc("pdoc_per.json")


@pytest.fixture(scope="session")
def per_doc():
    return load_doc("doc_per.json")


@pytest.fixture(scope="session")
def per_queries():
    raw = json.loads((FIXTURES / "queries_per.json").read_text())
    return {k: parse_tp(v) for k, v in raw.items() if not k.startswith("_")}


@pytest.fixture(scope="session")
def chain3_pdoc():
    return load_pdoc("pdoc_chain3.json")


@pytest.fixture(scope="session")
def chain4_pdoc():
    return load_pdoc("pdoc_chain4.json")
