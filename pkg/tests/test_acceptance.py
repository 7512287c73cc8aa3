"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Every criterion is checked against independent oracles or exact
hand-computed expectations; none of the thresholds here may be loosened.
"""

import random

from conftest import fact
from oracles import (
    ONTOLOGY_ORACLE_RULES,
    naive_triple_closure,
    oracle_compare,
    oracle_extreme,
    oracle_hull_points,
    oracle_intersect_points,
    oracle_part_points,
    points,
    qv,
    tv,
    year,
)
from wikimars import characterize as C
from wikimars import constraints as K
from wikimars import language as L
from wikimars import theory
from wikimars import values as V
from wikimars.engine import ClosureLimits, close
from wikimars.ingest import builtin_ontology_rules, data_file_text, ingest_entities
from wikimars.store import Fact, Store


def _ok(n, title):
    print(f"[ACCEPTANCE {n}] {title}: PASS")


def _close_text(store, text):
    return close(store, C.compile_program(L.parse_program(text))).store


def _triples(store):
    return {(f.pred, *f.args) for f in store if not f.attrs.pairs}


# ---------------------------------------------------------------------------
# 1. Symmetric rule copies the full attribute set, exactly.
# ---------------------------------------------------------------------------


def test_criterion_1_symmetric_rule_attribute_copy():
    store = Store()
    base = fact("spouse", "Q1", "Q2",
                P580=year(1988), P276=["Q1997"], P582=year(1996))
    store.assert_fact(base)
    _close_text(store, "spouse(x, y)@S -> spouse(y, x) with copyAll.")
    assert len(store) == 2
    (mirror,) = [f for f in store if f.args == ("Q2", "Q1")]
    assert mirror.pred == "spouse"
    assert mirror.attrs == base.attrs  # exact match, zero tolerance
    _ok(1, "symmetric rule reproduces the attribute set exactly")


# ---------------------------------------------------------------------------
# 2. Ontology rule suite equals the naive brute-force oracle.
# ---------------------------------------------------------------------------


def test_criterion_2_ontology_suite_vs_oracle():
    store = Store()
    # 6-deep subclass chain
    chain = [f"Q{i}" for i in range(1, 7)]
    for a, b in zip(chain, chain[1:]):
        store.assert_fact(fact("subclass_of", a, b))
    # 3 subproperty links, with the properties applied to data
    store.assert_fact(fact("subproperty_of", "p_a", "p_b"))
    store.assert_fact(fact("subproperty_of", "p_b", "p_c"))
    store.assert_fact(fact("subproperty_of", "p_d", "p_c"))
    for p in ("p_a", "p_d"):
        store.assert_fact(fact("instance_of", p, "Wikidata_property"))
    store.assert_fact(fact("p_a", "Q10", "Q11"))
    store.assert_fact(fact("p_d", "Q12", "Q13"))
    # one symmetric and one transitive property
    store.assert_fact(fact("instance_of", "p_sym", "symmetric_property"))
    store.assert_fact(fact("p_sym", "Q20", "Q21"))
    store.assert_fact(fact("instance_of", "p_tr", "transitive_property"))
    store.assert_fact(fact("p_tr", "Q30", "Q31"))
    store.assert_fact(fact("p_tr", "Q31", "Q32"))
    store.assert_fact(fact("instance_of", "Q40", "Q1"))

    expected = naive_triple_closure(_triples(store), ONTOLOGY_ORACLE_RULES)
    close(store, C.compile_plan(builtin_ontology_rules()), provenance=False)
    assert _triples(store) == expected
    assert len([f for f in store if f.pred == "subclass_of"]) == 15  # C(6,2)
    assert ("p_sym", "Q21", "Q20") in expected
    assert ("p_tr", "Q30", "Q32") in expected
    assert ("p_c", "Q10", "Q11") in expected and ("p_c", "Q12", "Q13") in expected
    _ok(2, "ontology closure equals the naive oracle")


# ---------------------------------------------------------------------------
# 3. human-subclass-of-person scenario at desk scale.
# ---------------------------------------------------------------------------


def test_criterion_3_person_human_scenario():
    store = Store()
    store.assert_fact(fact("subclass_of", "human", "omnivore"))
    store.assert_fact(fact("subclass_of", "human", "person"))
    store.assert_fact(fact("subclass_of", "person", "agent"))
    people = [f"Q{i}" for i in range(100, 150)]
    for q in people:
        store.assert_fact(fact("instance_of", q, "human"))
    close(store, C.compile_plan(builtin_ontology_rules()), provenance=False)
    persons = {f.args[0] for f in store
               if f.pred == "instance_of" and f.args[1] == "person"}
    assert persons == set(people)  # all 50, not "only about 30"
    agents = {f.args[0] for f in store
              if f.pred == "instance_of" and f.args[1] == "agent"}
    assert agents == set(people)
    _ok(3, "50 humans all become persons after closure")


# ---------------------------------------------------------------------------
# 4. female_human class recognition.
# ---------------------------------------------------------------------------


def test_criterion_4_female_human_recognition():
    store = Store()
    females = {f"Q{i}" for i in range(1, 9)}
    for i in range(1, 21):
        q = f"Q{i}"
        store.assert_fact(fact("instance_of", q, "human"))
        store.assert_fact(
            fact("sex_or_gender", q, "female" if q in females else "male")
        )
    _close_text(store, data_file_text("female_human.marpl"))
    got = {f.args[0] for f in store
           if f.pred == "instance_of" and f.args[1] == "female_human"}
    assert got == females
    _ok(4, "female_human holds for exactly the 8 expected items")


# ---------------------------------------------------------------------------
# 5. Characterization semantics: lazy plan == materialized expansion
#    on >= 500 random (ontology, characterization, store) triples.
# ---------------------------------------------------------------------------

_CHAR_CHOICES = [
    "",
    "qualifier P585 combine fn=iv_intersect guard=nonempty.\n",
    "qualifier P1545 additive.\n",
    "qualifier P585 combine fn=iv_intersect guard=nonempty.\n"
    "qualifier P1545 additive.\n",
    "qualifier P580 blend combine(P580=time_last, P582=time_first)"
    " fn=could_be_before guard=not_could_be_before.\n"
    "qualifier P582 blend combine(P582=time_first, P580=time_last)"
    " fn=could_be_after guard=not_could_be_after.\n",
    "qualifier P585 combine fn=iv_intersect guard=nonempty.\n"
    "qualifier P580 blend combine(P580=time_last, P582=time_first)"
    " fn=could_be_before guard=not_could_be_before.\n",
]

_RULE_CHOICES = [
    "p_a(x, y)@S -> p_b(y, x) with copyAll.",
    "p_a(x, y) -> p_b(y, x).",
    "p_a(x, y), p_b(y, z) -> p_c(x, z).",
    "p_a(x, y)@S -> p_c(x, y)@{P1545 : Q9}.",
    "p_a(x, y) -> p_b(y, x).\np_b(x, y) -> p_c(x, y).",
]


def _random_attrs(rng):
    attrs = {}
    if rng.random() < 0.6:
        n = rng.randrange(1, 3)
        attrs["P585"] = [
            tv(rng.randrange(-5, 6), rng.randrange(-8, -4), rng.randrange(5, 9))
            for _ in range(n)
        ]
    for attr in ("P580", "P582"):
        if rng.random() < 0.4:
            lo = rng.randrange(-6, 4)
            hi = lo + rng.randrange(1, 5)
            attrs[attr] = tv(rng.randrange(lo, hi + 1), lo, hi)
    if rng.random() < 0.3:
        attrs["P1545"] = [qv(rng.randrange(1, 4))]
    return attrs


def _random_store(rng):
    store = Store()
    ents = ["Q1", "Q2", "Q3", "Q4"]
    for _ in range(rng.randrange(2, 7)):
        pred = rng.choice(["p_a", "p_b"])
        store.assert_fact(
            fact(pred, rng.choice(ents), rng.choice(ents), **_random_attrs(rng))
        )
    return store


def _dual_route_equal(prog_text, base):
    prog = L.parse_program(prog_text)
    lazy = close(base.copy(), C.compile_program(prog), provenance=False).store
    exp_rules, exp_fns = C.expand_materialized(prog.rules, prog.fns, prog.chars)
    expanded = close(base.copy(), C.compile_expanded(exp_rules, exp_fns),
                     provenance=False).store
    assert {f.key() for f in lazy} == {f.key() for f in expanded}
    return lazy


def test_criterion_5_characterization_dual_route_equivalence():
    rng = random.Random(20260824)
    runs = 0
    for _ in range(500):
        prog_text = rng.choice(_CHAR_CHOICES) + rng.choice(_RULE_CHOICES)
        _dual_route_equal(prog_text, _random_store(rng))
        runs += 1
    assert runs >= 500

    # deliberate guard-blocking: disjoint combining values derive nothing
    base = Store()
    base.assert_fact(fact("p_a", "Q1", "Q2", P585=[tv(0, 0, 1), tv(8, 7, 9)]))
    lazy = _dual_route_equal(_CHAR_CHOICES[1] + _RULE_CHOICES[1], base)
    assert not list(lazy.match("p_b", ["Q2", "Q1"]))

    # deliberate blend-blocking: an end strictly before its start
    base = Store()
    base.assert_fact(fact("p_a", "Q1", "Q2", P580=tv(8, 7, 9), P582=tv(0, 0, 1)))
    base.assert_fact(fact("p_a", "Q3", "Q4", P580=tv(0, 0, 1), P582=tv(8, 7, 9)))
    lazy = _dual_route_equal(_CHAR_CHOICES[4] + _RULE_CHOICES[1], base)
    assert not list(lazy.match("p_b", ["Q2", "Q1"]))  # impossible order blocked
    assert list(lazy.match("p_b", ["Q4", "Q3"]))  # consistent order derived
    _ok(5, "lazy and expanded closures agree on 500+ random triples")


# ---------------------------------------------------------------------------
# 6. Imprecise-value algebra vs the discretized oracle, >= 10^4 checks.
# ---------------------------------------------------------------------------


def _rand_tv(rng):
    lo = rng.randrange(-10, 8)
    hi = lo + rng.randrange(0, 6)
    return tv(rng.randrange(lo, hi + 1), lo, hi)


def _rand_qv(rng):
    lo = rng.randrange(-10, 8)
    hi = lo + rng.randrange(0, 6)
    return qv(rng.randrange(lo, hi + 1), lo, hi)


def test_criterion_6_imprecise_algebra_vs_oracle():
    rng = random.Random(42)
    checks = 0

    def rel(name, *args):
        return theory.relation(name).fn(*args)

    for _ in range(900):
        a, b = _rand_tv(rng), _rand_tv(rng)
        qa, qb = _rand_qv(rng), _rand_qv(rng)

        # set relations
        assert rel("overlaps", a, b) == bool(points(a) & points(b))
        assert rel("disjoint", a, b) == (not (points(a) & points(b)))
        checks += 2

        # orderings in all three flavours, for times and quantities
        for must, main, can, base in [
            ("must_be_before", "before", "can_be_before", "before"),
            ("must_be_after", "after", "can_be_after", "after"),
        ]:
            assert rel(must, a, b) == oracle_compare("must", base, a, b)
            assert rel(can, a, b) == oracle_compare("can", base, a, b)
            assert rel(main, a, b) == (
                (a.main < b.main) if base == "before" else (a.main > b.main)
            )
            # must => main => can
            assert (not rel(must, a, b)) or rel(main, a, b)
            assert (not rel(main, a, b)) or rel(can, a, b)
            checks += 5
        for must, main, can, base in [
            ("must_lt", "lt_main", "can_lt", "lt"),
            ("must_le", "le_main", "can_le", "le"),
            ("must_gt", "gt_main", "can_gt", "gt"),
            ("must_ge", "ge_main", "can_ge", "ge"),
        ]:
            assert rel(must, qa, qb) == oracle_compare("must", base, qa, qb)
            assert rel(can, qa, qb) == oracle_compare("can", base, qa, qb)
            assert (not rel(must, qa, qb)) or rel(main, qa, qb)
            assert (not rel(main, qa, qb)) or rel(can, qa, qb)
            checks += 4

        # intersection and hull
        inter = V.iv_intersect(a, b)
        assert points(inter) == oracle_intersect_points(a, b)
        if not inter.is_empty:
            assert inter.main == min(max(a.main, inter.earliest), inter.latest)
        hull = V.iv_hull(a, b)
        assert points(hull) == oracle_hull_points(a, b)
        checks += 2

        # restriction (part) functions
        part = theory.function("could_be_before").fn(a, b)
        assert points(part) == oracle_part_points(a, b, "can", "before")
        part = theory.function("could_be_after").fn(a, b)
        assert points(part) == oracle_part_points(a, b, "can", "after")
        part = theory.function("must_be_before_part").fn(a, b)
        assert points(part) == oracle_part_points(a, b, "must", "before")
        part = theory.function("must_be_after_part").fn(a, b)
        assert points(part) == oracle_part_points(a, b, "must", "after")
        checks += 4

        # componentwise extremes
        assert (lambda r: (r.main, r.earliest, r.latest))(
            theory.function("time_first").fn(a, b)
        ) == oracle_extreme("first", a, b)
        assert (lambda r: (r.main, r.earliest, r.latest))(
            theory.function("time_last").fn(a, b)
        ) == oracle_extreme("last", a, b)
        checks += 2

    assert checks >= 10_000
    _ok(6, f"{checks} randomized algebra checks match the point oracle")


# ---------------------------------------------------------------------------
# 7. Constraint checking: duplicate-value dedup, zero case, counting
#    quantifier vs brute force.
# ---------------------------------------------------------------------------


def test_criterion_7_constraints():
    builtins = K.builtin_constraints()
    (distinct,) = [c for c in builtins if c.name == "distinct_values"]
    (single,) = [c for c in builtins if c.name == "single_value"]

    # duplicate-value fixture: exactly one deduplicated violation
    store = Store()
    store.assert_fact(fact("property_constraint", "father", "distinct_values_constraint"))
    store.assert_fact(fact("father", "Q1", "Qv"))
    store.assert_fact(fact("father", "Q2", "Qv"))
    store.assert_fact(fact("father", "Q3", "Qw"))
    vs = K.find_violations(store, distinct)
    assert len(vs) == 1
    b = vs[0].bindings
    assert {b["s1"], b["s2"]} == {"Q1", "Q2"}
    assert b["o1"] == b["o2"] == "Qv" and b["p"] == "father"

    # distinct-value fixture: zero violations
    store = Store()
    store.assert_fact(fact("property_constraint", "father", "distinct_values_constraint"))
    store.assert_fact(fact("father", "Q1", "Qv"))
    store.assert_fact(fact("father", "Q2", "Qw"))
    assert K.find_violations(store, distinct) == []

    # counting-quantifier single-value constraint vs brute force
    rng = random.Random(77)
    for _ in range(25):
        store = Store()
        store.assert_fact(fact("property_constraint", "p_a", "single_value_constraint"))
        for _ in range(rng.randrange(0, 15)):
            store.assert_fact(
                fact("p_a", f"Q{rng.randrange(1, 6)}", f"Q{rng.randrange(10, 15)}")
            )
        expected = {
            s for s in (f"Q{i}" for i in range(1, 6))
            if len(list(store.match("p_a", [s, "?o"]))) > 1
        }
        got = {v.bindings["s"] for v in K.find_violations(store, single)}
        assert got == expected
    _ok(7, "constraint search matches hand counts and brute force")


# ---------------------------------------------------------------------------
# 8. 100-entity ingestion fixture with hand-counted report.
# ---------------------------------------------------------------------------


def _stmt(obj_qid=None, rank="normal", snaktype="value", qualifiers=None,
          references=0):
    snak = {"snaktype": snaktype}
    if snaktype == "value":
        snak["datavalue"] = {"type": "wikibase-entityid", "value": {"id": obj_qid}}
    st = {"mainsnak": snak, "rank": rank}
    if qualifiers:
        st["qualifiers"] = qualifiers
    if references:
        st["references"] = [{"snaks": {}}] * references
    return st


def _hundred_entities():
    docs = []
    for i in range(1, 101):
        claims = {}
        quals = {"P580": [{"snaktype": "value",
                           "datavalue": {"type": "time",
                                         "value": {"time": "+1990-00-00T00:00:00Z",
                                                   "precision": 9}}}]}
        claims["P26"] = [_stmt(f"Q{i + 1000}", qualifiers=quals,
                               references=(1 if i % 7 == 0 else 0))]
        if i % 3 == 0:
            claims["P26"].append(_stmt(f"Q{i + 2000}", rank="preferred"))
        if i % 5 == 0:
            claims["P26"].append(_stmt(f"Q{i + 3000}", rank="deprecated"))
        if i % 10 == 0:
            claims["P106"] = [_stmt(snaktype="somevalue")]
        if i % 4 == 0:
            claims["P39"] = [_stmt(snaktype="novalue")]
        docs.append({"id": f"Q{i}", "claims": claims})
    return docs


def test_criterion_8_hundred_entity_ingestion():
    docs = _hundred_entities()
    store = Store()
    report = ingest_entities(docs, store)
    # hand counts: 100 base + 33 preferred + 10 somevalue facts;
    # 20 deprecated dropped; 25 novalue mainsnaks; 14 referenced statements
    assert report.facts == 100 + 33 + 10 == len(store)
    assert report.skolems == 10
    assert report.deprecated_skipped == 20
    assert report.novalue_skipped == 25
    assert report.references_ignored == 14
    assert report.malformed == 0

    ranks = [f.attrs.values("rank")[0] for f in store]
    assert ranks.count("preferred") == 33 and ranks.count("normal") == 110
    qualified = [f for f in store if f.attrs.values("P580")]
    assert len(qualified) == 100
    (t,) = qualified[0].attrs.values("P580")
    assert (t.earliest, t.latest) == (V.instant(1990), V.instant(1991) - 1)

    # re-ingestion is isomorphic modulo skolem renaming
    from wikimars.store import is_skolem

    def shape(s):
        def mask(x):
            return "~sk" if is_skolem(x) else x
        return sorted(
            (f.pred, tuple(mask(a) for a in f.args),
             tuple((a, tuple(mask(v) for v in f.attrs.values(a)))
                   for a in f.attrs.attrs()))
            for f in s
        )

    other = Store()
    for _ in range(3):
        other.fresh_skolem()  # desynchronize the skolem counter
    ingest_entities(docs, other)
    assert shape(store) == shape(other)
    skolems = {a for f in store for a in f.args if is_skolem(a)}
    assert skolems != {a for f in other for a in f.args if is_skolem(a)}
    _ok(8, "143 facts, 10 skolems, counters match hand counts")


# ---------------------------------------------------------------------------
# 9. Engine invariants.
# ---------------------------------------------------------------------------


def test_criterion_9_engine_invariants(tmp_path):
    plan = C.compile_plan(builtin_ontology_rules())
    rng = random.Random(5)

    def random_store(r):
        s = Store()
        for _ in range(25):
            kind = r.random()
            if kind < 0.2:
                s.assert_fact(fact("instance_of", r.choice(["p_a", "p_b"]),
                                   r.choice(["symmetric_property",
                                             "transitive_property"])))
            elif kind < 0.4:
                s.assert_fact(fact("subclass_of", f"Q{r.randrange(1, 5)}",
                                   f"Q{r.randrange(1, 5)}"))
            else:
                s.assert_fact(fact(r.choice(["p_a", "p_b"]),
                                   f"Q{r.randrange(1, 6)}", f"Q{r.randrange(1, 6)}"))
        return s

    # idempotence
    s = random_store(rng)
    close(s, plan, provenance=False)
    n = len(s)
    again = close(s, plan, provenance=False)
    assert len(s) == n and again.report.rounds == 1

    # input-order independence, byte identical
    facts = sorted(s, key=Fact.key)
    blobs = []
    for i, order in enumerate([facts, list(reversed(facts)),
                               rng.sample(facts, len(facts))]):
        t = Store()
        for f in order:
            t.assert_fact(f)
        close(t, plan, provenance=False)
        p = tmp_path / f"perm{i}.snap"
        t.snapshot(p)
        blobs.append(p.read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]

    # semi-naive equals the naive oracle on randomized instances
    for seed in range(15):
        s = random_store(random.Random(seed))
        base = _triples(s)
        close(s, plan, provenance=False)
        assert _triples(s) == naive_triple_closure(base, ONTOLOGY_ORACLE_RULES)

    # limit aborts
    s = Store()
    for i in range(30):
        s.assert_fact(fact("subclass_of", f"Q{i}", f"Q{i + 1}"))
    r = close(s, plan, ClosureLimits(max_rounds=1))
    assert r.report.limit_hit and "max_rounds" in r.report.limit_hit
    s2 = Store()
    for i in range(30):
        s2.assert_fact(fact("subclass_of", f"Q{i}", f"Q{i + 1}"))
    r = close(s2, plan, ClosureLimits(max_facts=40))
    assert r.report.limit_hit and "max_facts" in r.report.limit_hit
    _ok(9, "idempotent, order-independent, oracle-equal, limit-abiding")
