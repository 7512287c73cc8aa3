"""The relation/function registries and their closure under negation."""

import pytest

from oracles import qv, tv
from wikimars import theory
from wikimars import values as V
from wikimars.errors import WikimarsError


def test_every_relation_has_a_negation():
    for name, sig in theory.RELATIONS.items():
        neg = theory.negate(name)
        assert neg in theory.RELATIONS
        assert theory.RELATIONS[neg].arity == sig.arity


def test_negation_is_pointwise_complement():
    a, b = tv(1, 0, 5), tv(4, 3, 8)
    for name in ("overlaps", "before", "could_be_before", "main_eq", "eq"):
        sig, neg = theory.relation(name), theory.relation(theory.negate(name))
        assert sig.fn(a, b) != neg.fn(a, b)


def test_alias_relations():
    a, b = qv(1, 0, 2), qv(5, 4, 6)
    assert theory.relation("disjoint").fn(a, b)
    assert not theory.relation("not_disjoint").fn(a, b)
    assert theory.relation("neq").fn(a, b)
    assert theory.relation("not_neq").fn(a, a)
    assert theory.relation("nonempty").fn(a)
    assert theory.relation("not_nonempty").fn(V.QuantityValue.empty())


def test_unary_state_predicates():
    assert theory.relation("precise").fn(qv(5))
    assert theory.relation("precise").fn(V.StringValue("x"))  # precise datatype
    assert theory.relation("imprecise").fn(tv(1, 0, 2))
    assert theory.relation("empty").fn(V.TimeValue.empty())
    assert not theory.relation("empty").fn(V.StringValue("x"))


def test_could_be_before_tolerates_empty():
    empty = V.TimeValue.empty()
    assert not theory.relation("could_be_before").fn(empty, tv(5))
    assert theory.relation("not_could_be_before").fn(empty, tv(5))
    # while the plain flavoured relation raises
    with pytest.raises(WikimarsError):
        theory.relation("can_be_before").fn(empty, tv(5))


def test_part_functions_tolerate_empty():
    empty = V.TimeValue.empty()
    assert theory.function("could_be_before").fn(empty, tv(5)).is_empty
    assert theory.function("could_be_after").fn(tv(5), empty).is_empty
    r = theory.function("could_be_before").fn(tv(1, 0, 3), tv(8, 6, 9))
    assert (r.earliest, r.latest) == (0, 3)


def test_text_functions():
    mono = V.MonolingualTextValue("chat", "fr")
    assert theory.function("lang").fn(mono) == V.StringValue("fr")
    multi = V.MultilingualTextValue({"en": "cat"})
    assert theory.function("text_for_lang").fn(multi, V.StringValue("en")) == V.StringValue("cat")
    assert theory.function("text_for_lang").fn(multi, "en") == V.StringValue("cat")


def test_unknown_lookups_raise():
    with pytest.raises(WikimarsError):
        theory.relation("no_such_relation")
    with pytest.raises(WikimarsError):
        theory.function("no_such_function")
    with pytest.raises(WikimarsError):
        theory.negate("no_such_relation")


def test_geo_direction_relations():
    n = V.GeoCoordinatesValue(60.0, 0.0, 1.0)
    s = V.GeoCoordinatesValue(50.0, 0.0, 1.0)
    assert theory.relation("north_of").fn(n, s)
    assert theory.relation("must_be_north_of").fn(n, s)
    assert theory.relation("south_of").fn(s, n)
    assert theory.relation("not_north_of").fn(s, n)
