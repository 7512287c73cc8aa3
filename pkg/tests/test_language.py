"""Parser, pretty printer, identifier classification, safety, normalization."""

import pytest

from wikimars import language as L
from wikimars import values as V
from wikimars.errors import ParseError


# ---------------------------------------------------------------------------
# Identifier classification
# ---------------------------------------------------------------------------


def test_classify_ident():
    assert L.classify_ident("x") == L.Var("x")
    assert L.classify_ident("y2") == L.Var("y2")
    assert L.classify_ident("?anything") == L.Var("anything")
    assert L.classify_ident("S") == L.SetVar("S")
    assert L.classify_ident("U1") == L.SetVar("U1")
    assert L.classify_ident("Q42") == "Q42"  # entity ids beat set variables
    assert L.classify_ident("P26") == "P26"
    assert L.classify_ident("spouse") == "spouse"
    assert L.classify_ident("Wikidata_property") == "Wikidata_property"


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------


def test_parse_symmetric_rule_with_copy_all():
    rule = L.parse_rule("spouse(x, y)@S -> spouse(y, x) with copyAll.")
    assert rule.fn_name == "copyAll"
    assert rule.body[0] == L.RelAtom("spouse", (L.Var("x"), L.Var("y")), L.SetVar("S"))
    assert rule.head == L.RelAtom("spouse", (L.Var("y"), L.Var("x")), None)


def test_parse_explicit_set_terms():
    rule = L.parse_rule(
        "spouse(x, y)@{start : z1, loc : z2, end : z3}"
        " -> spouse(y, x)@{start : z1, loc : z2, end : z3}."
    )
    assert isinstance(rule.body[0].sett, L.ExplicitSet)
    assert len(rule.body[0].sett.pairs) == 3


def test_parse_set_and_datatype_atoms():
    rule = L.parse_rule(
        "pred_p(x, y)@S, (P580 : z) in S, before(z, z) -> pred_q(x, y)."
    )
    assert isinstance(rule.body[1], L.SetMemberAtom)
    assert rule.body[2] == L.DatatypeAtom("before", (L.Var("z"), L.Var("z")))


def test_parse_equality_and_fnapp():
    rule = L.parse_rule(
        "pred_p(x, y)@S, (P580 : z) in S, time_first(z, z) = w, w != z -> pred_q(x, w)."
    )
    eq = rule.body[2]
    assert isinstance(eq, L.EqAtom) and isinstance(eq.left, L.FnApp)
    assert rule.body[3] == L.EqAtom(L.Var("w"), L.Var("z"), negated=True)


def test_unknown_function_is_a_parse_error():
    with pytest.raises(ParseError):
        L.parse_rule("pred_p(x, y)@{P580 : f(z)} -> pred_q(x, y).")
    with pytest.raises(ParseError):
        L.parse_rule("pred_p(x, z), nosuchfn(z, z) = w -> pred_q(x, w).")


def test_relation_arity_checked():
    with pytest.raises(ParseError):
        L.parse_rule("pred_p(x, y), before(x) -> pred_q(x, y).")


def test_value_literals():
    rule = L.parse_rule(
        'pred_p(x, time(1990, 1985, 1995)) -> '
        'pred_q(x, qty(5, 4, 6, unit=Q11573)).'
    )
    t = rule.body[0].args[1]
    assert isinstance(t, V.TimeValue) and t.earliest == V.instant(1985)
    q = rule.head.args[1]
    assert q.unit == "Q11573" and q.lower == 4
    r2 = L.parse_rule('pred_p(x, mono("chat", fr)) -> pred_q(x, iri("http://e.org")).')
    assert r2.body[0].args[1] == V.MonolingualTextValue("chat", "fr")
    r3 = L.parse_rule("pred_p(x, time()) -> pred_q(x, geo(lat=1.5, lon=2.5, prec=0.5)).")
    assert r3.body[0].args[1].is_empty


def test_comments_and_errors_carry_position():
    prog = L.parse_program("# comment\npred_p(x, y) -> pred_q(x, y).\n")
    assert len(prog.rules) == 1
    with pytest.raises(ParseError) as e:
        L.parse_program("pred_p(x y) -> pred_q(x, y).")
    assert e.value.line == 1 and e.value.column is not None


def test_duplicate_function_names_rejected():
    text = "fn f1 { => (P1 : Q1); }\nfn f1 { => (P2 : Q2); }\n"
    with pytest.raises(ParseError):
        L.parse_program(text)


def test_parse_fndef_and_chardecls():
    prog = L.parse_program(
        "fn keepStart { (P580 : z) in S => (P580 : z); }\n"
        "qualifier P585 combine fn=iv_intersect guard=nonempty.\n"
        "qualifier P1545 additive.\n"
        "qualifier P9999 ignore.\n"
        "qualifier P580 blend combine(P580=time_last, P582=time_first)"
        " fn=could_be_before guard=not_could_be_before.\n"
    )
    assert prog.fns[0].name == "keepStart"
    kinds = [type(c.policy).__name__ for c in prog.chars]
    assert kinds == ["Combining", "Additive", "Ignore", "Blending"]
    blend = prog.chars[3].policy
    assert blend.inputs == (("P580", "time_last"), ("P582", "time_first"))


def test_chardecl_validation():
    with pytest.raises(ParseError):
        L.parse_program("qualifier P585 combine fn=nosuch guard=nonempty.")
    with pytest.raises(ParseError):  # combine guard must be unary
        L.parse_program("qualifier P585 combine fn=iv_intersect guard=before.")
    with pytest.raises(ParseError):  # first blend input must be the attribute
        L.parse_program(
            "qualifier P580 blend combine(P582=time_first, P580=time_last)"
            " fn=could_be_before guard=not_could_be_before."
        )


# ---------------------------------------------------------------------------
# Constraints and formulae
# ---------------------------------------------------------------------------


def test_parse_constraint_with_counting():
    prog = L.parse_program(
        "constraint one_spouse(s) warning: exists<=1 y . spouse(s, y).\n"
    )
    c = prog.constraints[0]
    assert c.name == "one_spouse" and c.severity == "warning"
    q = c.formula
    assert q.kind == "atmost" and q.count == 1 and q.vars == (L.Var("y"),)


def test_parse_formula_connectives():
    f = L.parse_formula("pred_p(x, y) & !pred_q(y, x) | x = y -> forall z . pred_p(z, z)")
    assert isinstance(f, L.Implies)
    assert isinstance(f.left, L.Or)
    assert isinstance(f.right, L.Quant)


def test_parse_formula_set_quantifier():
    f = L.parse_formula("forall S . spouse(x, y)@S -> (P580 : z) in S")
    assert isinstance(f.vars[0], L.SetVar)


# ---------------------------------------------------------------------------
# Pretty-printer round trips
# ---------------------------------------------------------------------------

CORPUS = [
    "spouse(x, y)@S -> spouse(y, x) with copyAll.",
    "spouse(x, y)@{start : z1, loc : z2, end : z3} -> spouse(y, x)@{start : z1, loc : z2, end : z3}.",
    "instance_of(p, symmetric_property), p(y, x) -> p(x, y).",
    "pred_p(x, y)@S, (P580 : z) in S, before(z, z) -> pred_q(x, y).",
    'pred_p(x, time(1990-06-15, 1990, 1991)) -> pred_q(x, qty(5, 4, 6, unit=Q11573)).',
    "fn keepStart { (P580 : z) in S => (P580 : z); }",
    "qualifier P585 combine fn=iv_intersect guard=nonempty.",
    "constraint sym(p, x, y): property_constraint(p, symmetric_constraint) & p(x, y) -> p(y, x).",
    "constraint c1(s): exists>=2 y . spouse(s, y).",
]


@pytest.mark.parametrize("text", CORPUS)
def test_print_parse_round_trip(text):
    prog = L.parse_program(text)
    printed = L.print_program(prog)
    again = L.parse_program(printed)
    assert L.print_program(again) == printed
    assert again.rules == prog.rules
    assert again.fns == prog.fns
    assert again.chars == prog.chars
    assert again.constraints == prog.constraints


# ---------------------------------------------------------------------------
# Safety
# ---------------------------------------------------------------------------


def test_safety_nothing_relational():
    rule = L.parse_rule("lt_main(x, y) -> pred_q(x, y).")
    violations = L.check_safety(rule)
    # both variables are unsafe (reported per occurrence: body and head)
    assert violations
    assert {v.split()[1] for v in violations} == {"x", "y"}


def test_safety_ok_with_relational_occurrence():
    rule = L.parse_rule("pred_p(x, y), lt_main(y, y) -> pred_q(x, y).")
    assert L.check_safety(rule) == []


def test_safety_set_member_var_is_relational():
    rule = L.parse_rule("pred_p(x, y)@S, (P580 : z) in S -> pred_q(x, z).")
    assert L.check_safety(rule) == []
    # ...but not if the set variable is unattached
    rule2 = L.parse_rule("pred_p(x, y), (P580 : z) in U -> pred_q(x, z).")
    assert L.check_safety(rule2) != []


def test_ontology_rules_are_safe():
    from wikimars.ingest import builtin_ontology_rules

    for rule in builtin_ontology_rules():
        assert L.check_safety(rule) == []


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def test_normalize_explicit_set_becomes_membership_atoms():
    rule = L.parse_rule(
        "spouse(x, y)@{start : z1, loc : z2, end : z3} -> spouse(y, x)."
    )
    norm = L.normalize(rule)
    rel = [a for a in norm.body if isinstance(a, L.RelAtom)]
    members = [a for a in norm.body if isinstance(a, L.SetMemberAtom)]
    assert len(rel) == 1 and isinstance(rel[0].sett, L.SetVar)
    assert len(members) == 3
    assert all(m.setvar == rel[0].sett for m in members)


def test_normalize_identity_on_normalized_rule():
    rule = L.parse_rule("pred_p(x, y)@S, pred_q(y, z)@U -> pred_r(x, z).")
    assert L.normalize(rule) == rule


def test_normalize_renames_shared_set_variable():
    rule = L.parse_rule("pred_p(x, y)@S, pred_q(y, z)@S -> pred_r(x, z)@S.")
    norm = L.normalize(rule)
    rel = [a for a in norm.body if isinstance(a, L.RelAtom)]
    assert rel[0].sett != rel[1].sett
    eqs = [a for a in norm.body if isinstance(a, L.SetEqAtom)]
    assert len(eqs) == 1
    assert L.is_normalized(norm)


def test_parse_query():
    atom, sets = L.parse_query("spouse(?x, Q2)@S, (P580 : z) in S")
    assert atom.pred == "spouse" and atom.args[0] == L.Var("x")
    assert len(sets) == 1
    with pytest.raises(ParseError):
        L.parse_query("(P580 : z) in S")
