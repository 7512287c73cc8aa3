import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

from wikimars.store import Store, make_fact


@pytest.fixture
def store():
    return Store()


def fact(pred, *args, **attrs):
    """Shorthand fact builder: fact("p", "Q1", "Q2", P580=value)."""
    return make_fact(pred, args, attrs or None)
