"""Fact store: canonical dedup, indexes, matching, snapshots."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fact
from oracles import qv, tv, year
from wikimars import values as V
from wikimars.errors import MalformedFactError, SnapshotFormatError
from wikimars.store import AttributeSet, Fact, Store, is_skolem, make_fact, term_from_json, term_to_json


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


@given(st.integers(-50, 50), st.integers(0, 9))
def test_term_json_round_trip_time(m, pad):
    # use day-aligned instants so the ISO encoding is lossless at seconds
    v = V.TimeValue(m * 86400, (m - pad) * 86400, (m + pad) * 86400)
    assert V.dv_eq(term_from_json(term_to_json(v)), v)


def test_term_json_round_trip_various():
    for t in [
        "Q42",
        "_sk7",
        qv("5.5", "5.0", "6.0", "Q11573"),
        V.QuantityValue.empty(),
        V.TimeValue.empty(),
        V.GeoCoordinatesValue(1.5, -2.5, 0.25, "Q111"),
        V.GeoCoordinatesValue.empty(),
        V.StringValue("hello"),
        V.IriValue("http://example.org/x"),
        V.MonolingualTextValue("chat", "fr"),
        V.MultilingualTextValue({"en": "cat", "fr": "chat"}),
    ]:
        back = term_from_json(term_to_json(t))
        if isinstance(t, str):
            assert back == t
        else:
            assert V.dv_eq(back, t)


# ---------------------------------------------------------------------------
# Attribute sets
# ---------------------------------------------------------------------------


def test_attribute_set_canonical_order_and_dedup():
    a = AttributeSet((("P2", (qv(1),)), ("P1", ("Q5", "Q4")), ("P1", ("Q4",))))
    b = AttributeSet((("P1", ("Q4", "Q5")), ("P2", (qv(1),))))
    assert a == b
    assert a.attrs() == ("P1", "P2")
    assert a.values("P1") == ("Q4", "Q5")
    assert a.values("P9") == ()
    assert a.value_count() == 3


def test_attribute_set_json_round_trip():
    a = AttributeSet.from_dict({"P580": [year(1990)], "rank": ["normal"]})
    assert AttributeSet.from_json(a.to_json()) == a


# ---------------------------------------------------------------------------
# Facts and assertion
# ---------------------------------------------------------------------------


def test_assert_dedup_and_attr_identity(store):
    f1 = fact("spouse", "Q1", "Q2")
    assert store.assert_fact(f1) == "inserted"
    assert store.assert_fact(fact("spouse", "Q1", "Q2")) == "duplicate"
    # same triple with attrs is a distinct fact (no subsumption)
    f2 = fact("spouse", "Q1", "Q2", P580=year(1990))
    assert store.assert_fact(f2) == "inserted"
    assert len(store) == 2


def test_attr_key_order_irrelevant(store):
    a = make_fact("p1", ("Q1", "Q2"), {"P1": ["Q3"], "P2": ["Q4"]})
    b = make_fact("p1", ("Q1", "Q2"), {"P2": ["Q4"], "P1": ["Q3"]})
    assert store.assert_fact(a) == "inserted"
    assert store.assert_fact(b) == "duplicate"


def test_malformed_facts_rejected(store):
    with pytest.raises(MalformedFactError):
        store.assert_fact(Fact("p1", ()))
    with pytest.raises(MalformedFactError):
        store.assert_fact(fact("overlaps", "Q1", "Q2"))  # datatype relation


def test_nary_facts_supported(store):
    assert store.assert_fact(fact("p3", "Q1", "Q2", "Q3")) == "inserted"


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------


def _sample(store):
    store.assert_fact(fact("spouse", "Q1", "Q2", P580=year(1990)))
    store.assert_fact(fact("spouse", "Q3", "Q5"))
    store.assert_fact(fact("child", "Q1", "Q5"))
    return store


def test_match_basic(store):
    _sample(store)
    hits = list(store.match("spouse", ["Q1", "?y"]))
    assert len(hits) == 1 and hits[0][1] == {"y": "Q2"}


def test_match_wildcard_predicate(store):
    _sample(store)
    hits = list(store.match("?p", ["?x", "Q5"]))
    assert {h[1]["p"] for h in hits} == {"spouse", "child"}


def test_match_attr_constraints(store):
    _sample(store)
    hits = list(store.match("spouse", [None, None], [("P580", "?z")]))
    assert len(hits) == 1 and V.dv_eq(hits[0][1]["z"], year(1990))
    assert list(store.match("spouse", ["Q3", None], [("P580", None)])) == []


def test_match_all_wildcards_enumerates_store(store):
    _sample(store)
    hits = [f for f, _ in store.match(None, [None, None])]
    assert sorted(h.key() for h in hits) == [f.key() for f in store.sorted_facts()]


def test_repeated_variable_must_agree(store):
    store.assert_fact(fact("p1", "Q1", "Q1"))
    store.assert_fact(fact("p1", "Q1", "Q2"))
    hits = list(store.match("p1", ["?x", "?x"]))
    assert len(hits) == 1 and hits[0][1] == {"x": "Q1"}


# ---------------------------------------------------------------------------
# Skolems
# ---------------------------------------------------------------------------


def test_fresh_skolems_distinct(store):
    a, b = store.fresh_skolem(), store.fresh_skolem()
    assert a != b and is_skolem(a) and is_skolem(b)
    assert not a.startswith(("Q", "P"))


def test_skolem_counter_persisted(tmp_path, store):
    used = {store.fresh_skolem(), store.fresh_skolem()}
    store.assert_fact(fact("p1", "Q1", sorted(used)[0]))
    path = tmp_path / "s.snap"
    store.snapshot(path)
    loaded = Store.load(path)
    assert loaded.fresh_skolem() not in used


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------


def test_snapshot_round_trip_and_determinism(tmp_path, store):
    _sample(store)
    p1, p2 = tmp_path / "a.snap", tmp_path / "b.snap"
    store.snapshot(p1)
    loaded = Store.load(p1)
    assert {f.key() for f in loaded} == {f.key() for f in store}
    loaded.snapshot(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_snapshot_empty_round_trip(tmp_path, store):
    path = tmp_path / "e.snap"
    store.snapshot(path)
    assert len(Store.load(path)) == 0


def test_snapshot_bad_header(tmp_path):
    path = tmp_path / "bad.snap"
    path.write_text("not json\n")
    with pytest.raises(SnapshotFormatError):
        Store.load(path)
    path.write_text(json.dumps({"format": "wikimars-snapshot", "version": 99}) + "\n")
    with pytest.raises(SnapshotFormatError):
        Store.load(path)


def test_closed_flag_round_trip(tmp_path, store):
    store.closed = True
    path = tmp_path / "c.snap"
    store.snapshot(path)
    assert Store.load(path).closed is True


def test_load_facts_plain_jsonl(tmp_path, store):
    path = tmp_path / "facts.jsonl"
    path.write_text(json.dumps({"p": "p1", "args": ["Q1", "Q2"]}) + "\n")
    assert store.load_facts(path) == 1
    assert fact("p1", "Q1", "Q2") in store
