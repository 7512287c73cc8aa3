"""Constraint evaluation over a (closed) store.

Formulae get standard Tarskian semantics with active-domain quantification:
object variables range over every entity and data value occurring in the
store, set variables over the attribute sets of its facts.  A violation is a
binding of a constraint's free variables falsifying its formula; violations
are found by searching for satisfying bindings of the negated formula.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import language as L
from . import theory
from . import values as V
from .errors import EvaluationError, WikimarsError
from .store import AttributeSet, Fact, Store, is_skolem, term_to_json, _term_eq
from .values import canon_key


# ---------------------------------------------------------------------------
# Active domain
# ---------------------------------------------------------------------------


def active_domain(store: Store) -> list:
    """Entities and data values occurring anywhere in the store, sorted."""
    seen: dict[tuple, object] = {}
    for fact in store:
        seen.setdefault(canon_key(fact.pred), fact.pred)
        for a in fact.args:
            seen.setdefault(canon_key(a), a)
        for attr, vals in fact.attrs.pairs:
            seen.setdefault(canon_key(attr), attr)
            for v in vals:
                seen.setdefault(canon_key(v), v)
    return [seen[k] for k in sorted(seen)]


def attribute_sets(store: Store) -> list[AttributeSet]:
    """The attribute sets occurring in the store (the set-variable domain)."""
    seen: dict[tuple, AttributeSet] = {}
    for fact in store:
        key = tuple((a, tuple(canon_key(v) for v in vs)) for a, vs in fact.attrs.pairs)
        seen.setdefault(key, fact.attrs)
    return [seen[k] for k in sorted(seen)]


# ---------------------------------------------------------------------------
# Formula evaluation
# ---------------------------------------------------------------------------


def _eval_term(t, env):
    if isinstance(t, L.Var):
        if t.name not in env:
            raise EvaluationError(f"unbound variable {t.name}")
        return env[t.name]
    if isinstance(t, L.FnApp):
        args = [_eval_term(a, env) for a in t.args]
        return theory.function(t.fn).fn(*args)
    if isinstance(t, L.SetVar):
        raise EvaluationError(f"set variable {t.name} used as an object term")
    return t


def _eval_setterm(t, env):
    if isinstance(t, L.SetVar):
        val = env.get(t.name)
        if not isinstance(val, AttributeSet):
            raise EvaluationError(f"unbound set variable {t.name}")
        return val
    if isinstance(t, L.ExplicitSet):
        pairs: dict[str, list] = {}
        for a, b in t.pairs:
            attr = _eval_term(a, env)
            if not isinstance(attr, str):
                raise EvaluationError(f"attribute id evaluated to non-entity {attr!r}")
            pairs.setdefault(attr, []).append(_eval_term(b, env))
        return AttributeSet.from_dict(pairs)
    raise EvaluationError(f"not a set term: {t!r}")


def _rel_atom_holds(store: Store, atom: L.RelAtom, env) -> bool:
    pred = _eval_term(atom.pred, env)
    args = [_eval_term(a, env) for a in atom.args]
    # Datatype names act as intrinsic unary type predicates in formulae.
    if isinstance(pred, str) and pred in V.DATATYPE_BY_NAME and len(args) == 1:
        if isinstance(args[0], V.DATATYPE_BY_NAME[pred]):
            return True
    if not isinstance(pred, str):
        raise EvaluationError(f"predicate evaluated to non-entity {pred!r}")
    want_attrs = None
    if atom.sett is not None:
        want_attrs = _eval_setterm(atom.sett, env)
    for fact in store.candidates(pred, args):
        if fact.pred != pred or len(fact.args) != len(args):
            continue
        if not all(_term_eq(p, a) for p, a in zip(args, fact.args)):
            continue
        if want_attrs is None or fact.attrs == want_attrs:
            return True
    return False


def eval_formula(store: Store, formula, bindings: dict | None = None) -> bool:
    """Evaluate a formula; ``bindings`` maps variable names to terms or
    attribute sets and must cover every free variable."""
    env = dict(bindings or {})
    return _eval(store, formula, env)


def _eval(store: Store, f, env) -> bool:
    if isinstance(f, L.RelAtom):
        return _rel_atom_holds(store, f, env)
    if isinstance(f, L.SetMemberAtom):
        attrs = _eval_setterm(f.setvar, env)
        a = _eval_term(f.attr, env)
        b = _eval_term(f.value, env)
        return any(
            _term_eq(a, attr) and any(_term_eq(b, v) for v in vals)
            for attr, vals in attrs.pairs
        )
    if isinstance(f, L.DatatypeAtom):
        args = [_eval_term(a, env) for a in f.args]
        try:
            return theory.relation(f.rel).fn(*args)
        except WikimarsError as exc:
            raise EvaluationError(f"datatype atom {f.rel}: {exc}") from exc
    if isinstance(f, L.EqAtom):
        eq = _term_eq(_eval_term(f.left, env), _eval_term(f.right, env))
        return eq != f.negated
    if isinstance(f, L.Not):
        return not _eval(store, f.sub, env)
    if isinstance(f, L.And):
        return all(_eval(store, s, env) for s in f.subs)
    if isinstance(f, L.Or):
        return any(_eval(store, s, env) for s in f.subs)
    if isinstance(f, L.Implies):
        return (not _eval(store, f.left, env)) or _eval(store, f.right, env)
    if isinstance(f, L.Quant):
        return _eval_quant(store, f, env)
    raise EvaluationError(f"cannot evaluate formula node {f!r}")


def _domain_for(store: Store, var) -> list:
    if isinstance(var, L.SetVar):
        return attribute_sets(store)
    return active_domain(store)


def _eval_quant(store: Store, q: L.Quant, env) -> bool:
    def assignments(vars_):
        if not vars_:
            yield env
            return
        v, rest = vars_[0], vars_[1:]
        for d in _domain_for(store, v):
            env[v.name] = d
            yield from assignments(rest)
        env.pop(v.name, None)

    if q.kind == "forall":
        return all(_eval(store, q.sub, e) for e in assignments(list(q.vars)))
    if q.kind == "exists":
        return any(_eval(store, q.sub, e) for e in assignments(list(q.vars)))
    # counting quantifiers bind a single variable
    var = q.vars[0]
    count = 0
    for d in _domain_for(store, var):
        env[var.name] = d
        if _eval(store, q.sub, env):
            count += 1
            if q.kind == "atleast" and count >= q.count:
                env.pop(var.name, None)
                return True
            if q.kind == "atmost" and count > q.count:
                env.pop(var.name, None)
                return False
    env.pop(var.name, None)
    if q.kind == "atleast":
        return count >= q.count
    if q.kind == "atmost":
        return count <= q.count
    if q.kind == "exactly":
        return count == q.count
    raise EvaluationError(f"unknown quantifier kind {q.kind!r}")


# ---------------------------------------------------------------------------
# Negation (for the query formulation of a constraint)
# ---------------------------------------------------------------------------


def push_negation(f):
    """Negation normal form of !f down to the atom level."""
    if isinstance(f, L.Not):
        return f.sub
    if isinstance(f, L.And):
        return L.Or(tuple(push_negation(s) for s in f.subs))
    if isinstance(f, L.Or):
        return L.And(tuple(push_negation(s) for s in f.subs))
    if isinstance(f, L.Implies):
        return L.And((f.left, push_negation(f.right)))
    if isinstance(f, L.Quant):
        if f.kind == "forall":
            return L.Quant("exists", f.vars, push_negation(f.sub))
        if f.kind == "exists":
            return L.Quant("forall", f.vars, push_negation(f.sub))
        if f.kind == "atleast":
            return L.Quant("atmost", f.vars, f.sub, f.count - 1)
        if f.kind == "atmost":
            return L.Quant("atleast", f.vars, f.sub, f.count + 1)
        if f.kind == "exactly":
            return L.Or(
                (
                    L.Quant("atmost", f.vars, f.sub, f.count - 1)
                    if f.count > 0
                    else L.Quant("atleast", f.vars, f.sub, 1),
                    L.Quant("atleast", f.vars, f.sub, f.count + 1),
                )
            )
    if isinstance(f, L.EqAtom):
        return L.EqAtom(f.left, f.right, not f.negated)
    return L.Not(f)


def _flatten_and(f) -> list:
    if isinstance(f, L.And):
        out = []
        for s in f.subs:
            out.extend(_flatten_and(s))
        return out
    return [f]


def _free_vars(f) -> set[str]:
    out: set[str] = set()

    def term(t, bound):
        if isinstance(t, L.Var):
            if t.name not in bound:
                out.add(t.name)
        elif isinstance(t, L.FnApp):
            for a in t.args:
                term(a, bound)

    def walk(g, bound):
        if isinstance(g, L.RelAtom):
            for t in (g.pred, *g.args):
                term(t, bound)
            if isinstance(g.sett, L.SetVar):
                if g.sett.name not in bound:
                    out.add(g.sett.name)
            elif isinstance(g.sett, L.ExplicitSet):
                for a, b in g.sett.pairs:
                    term(a, bound), term(b, bound)
        elif isinstance(g, L.SetMemberAtom):
            term(g.attr, bound), term(g.value, bound)
            if g.setvar.name not in bound:
                out.add(g.setvar.name)
        elif isinstance(g, (L.DatatypeAtom,)):
            for t in g.args:
                term(t, bound)
        elif isinstance(g, L.EqAtom):
            term(g.left, bound), term(g.right, bound)
        elif isinstance(g, L.Not):
            walk(g.sub, bound)
        elif isinstance(g, (L.And, L.Or)):
            for s in g.subs:
                walk(s, bound)
        elif isinstance(g, L.Implies):
            walk(g.left, bound), walk(g.right, bound)
        elif isinstance(g, L.Quant):
            walk(g.sub, bound | {v.name for v in g.vars})

    walk(f, set())
    return out


# ---------------------------------------------------------------------------
# Violation search
# ---------------------------------------------------------------------------


@dataclass
class Violation:
    constraint: str
    severity: str
    bindings: dict
    witnesses: list = field(default_factory=list)

    def to_json(self):
        return {
            "constraint": self.constraint,
            "severity": self.severity,
            "bindings": {
                k: (v.to_json() if isinstance(v, AttributeSet) else term_to_json(v))
                for k, v in self.bindings.items()
            },
            "witnesses": [f.to_json() for f in self.witnesses],
        }


def _joinable(atom) -> bool:
    """Positive relational conjuncts usable for index joins."""
    if not isinstance(atom, L.RelAtom):
        return False
    if isinstance(atom.pred, L.FnApp) or any(isinstance(a, L.FnApp) for a in atom.args):
        return False
    return atom.sett is None or isinstance(atom.sett, L.SetVar)


def _pattern(t, env):
    if isinstance(t, L.Var):
        return env.get(t.name)
    return t


def _join(store: Store, atoms, env, facts, results):
    if not atoms:
        results.append((dict(env), list(facts)))
        return
    atom = atoms[0]
    pred_p = _pattern(atom.pred, env)
    args_p = [_pattern(a, env) for a in atom.args]
    want_set = atom.sett.name if isinstance(atom.sett, L.SetVar) else None
    bound_set = env.get(want_set) if want_set else None
    for fact in sorted(store.candidates(pred_p, args_p), key=Fact.key):
        if len(fact.args) != len(atom.args):
            continue
        trial = dict(env)
        if not _unify(atom.pred, fact.pred, trial):
            continue
        if not all(_unify(p, a, trial) for p, a in zip(atom.args, fact.args)):
            continue
        if want_set:
            if isinstance(bound_set, AttributeSet):
                if fact.attrs != bound_set:
                    continue
            else:
                trial[want_set] = fact.attrs
        facts.append(fact)
        _join(store, atoms[1:], trial, facts, results)
        facts.pop()


def _unify(pat, actual, env) -> bool:
    if isinstance(pat, L.Var):
        if pat.name in env:
            return _term_eq(env[pat.name], actual)
        env[pat.name] = actual
        return True
    return _term_eq(pat, actual)


def _has_skolem(value) -> bool:
    if is_skolem(value):
        return True
    if isinstance(value, AttributeSet):
        return any(_has_skolem(v) for _, vs in value.pairs for v in vs)
    return False


def find_violations(store: Store, constraint: L.Constraint,
                    include_skolems: bool = True) -> list[Violation]:
    """Bindings of the constraint's free variables falsifying its formula.

    Works on the query formulation: satisfying assignments of the negated
    formula, found by index joins over its positive relational conjuncts and
    active-domain enumeration of any leftover free variables.  Violations
    whose binding values coincide as a multiset (symmetric duplicates) are
    reported once, under the canonically smallest binding.
    """
    negated = push_negation(constraint.formula)
    conjuncts = _flatten_and(negated)
    join_atoms = [c for c in conjuncts if _joinable(c)]
    residual = [c for c in conjuncts if not _joinable(c)]
    declared = [v.name for v in constraint.free_vars]
    needed = set(declared) | _free_vars(constraint.formula)

    results: list[tuple[dict, list]] = []
    _join(store, join_atoms, {}, [], results)

    solutions: list[tuple[dict, list]] = []
    domain = None
    for env, facts in results:
        missing = sorted(n for n in needed if n not in env)
        if missing:
            if domain is None:
                domain = active_domain(store)

            def enumerate_missing(i, e):
                if i == len(missing):
                    if all(_eval(store, c, dict(e)) for c in residual):
                        solutions.append((dict(e), facts))
                    return
                for d in domain:
                    e[missing[i]] = d
                    enumerate_missing(i + 1, e)
                del e[missing[i]]

            enumerate_missing(0, dict(env))
        else:
            if all(_eval(store, c, dict(env)) for c in residual):
                solutions.append((env, facts))

    out: list[Violation] = []
    seen: set = set()
    ordered = []
    for env, facts in solutions:
        bindings = {name: env[name] for name in declared if name in env}
        key = tuple(_vkey(bindings.get(n)) for n in declared)
        ordered.append((key, bindings, facts))
    ordered.sort(key=lambda r: r[0])
    for key, bindings, facts in ordered:
        dedup_key = tuple(sorted(key))
        if dedup_key in seen:
            continue
        seen.add(dedup_key)
        if not include_skolems and any(_has_skolem(v) for v in bindings.values()):
            continue
        witnesses = sorted({f.key(): f for f in facts}.values(), key=Fact.key)
        out.append(Violation(constraint.name, constraint.severity, bindings, witnesses))
    return out


def _vkey(v):
    if v is None:
        return ("?",)
    if isinstance(v, AttributeSet):
        return ("A", tuple((a, tuple(canon_key(x) for x in vs)) for a, vs in v.pairs))
    return canon_key(v)


def check_all(store: Store, constraints, include_skolems: bool = True) -> list[Violation]:
    """Evaluate every constraint; merged, deterministically ordered report."""
    out = []
    for c in sorted(constraints, key=lambda c: c.name):
        out.extend(find_violations(store, c, include_skolems=include_skolems))
    return out


# ---------------------------------------------------------------------------
# Built-in constraint templates
# ---------------------------------------------------------------------------

_BUILTIN_TEXT = """\
constraint distinct_values(p, s1, s2, o1, o2):
  property_constraint(p, distinct_values_constraint)
  & p(s1, o1) & p(s2, o2) & s1 != s2 -> o1 != o2.

constraint symmetric(p, x, y):
  property_constraint(p, symmetric_constraint) & p(x, y) -> p(y, x).

constraint single_value(p, s):
  property_constraint(p, single_value_constraint)
  & (exists o . p(s, o)) -> exists<=1 o . p(s, o).
"""


def builtin_constraints() -> list[L.Constraint]:
    """Templates activated by ``property_constraint(p, <type>)`` facts."""
    return list(L.parse_program(_BUILTIN_TEXT).constraints)


def value_type_constraints(registry: dict[str, str]) -> list[L.Constraint]:
    """One value-type constraint per registered property: objects of the
    property must belong to its declared datatype."""
    out = []
    for prop, datatype in sorted(registry.items()):
        if datatype not in V.DATATYPE_BY_NAME:
            raise WikimarsError(f"unknown datatype name for {prop}: {datatype!r}")
        s, o = L.Var("s"), L.Var("o")
        formula = L.Implies(
            L.RelAtom(prop, (s, o), None), L.RelAtom(datatype, (o,), None)
        )
        out.append(L.Constraint(f"value_type_{prop}", (s, o), formula, "violation"))
    return out


# ---------------------------------------------------------------------------
# Report formatting
# ---------------------------------------------------------------------------


def violations_jsonl(violations) -> str:
    return "".join(json.dumps(v.to_json(), sort_keys=True) + "\n" for v in violations)


def violations_table(violations) -> str:
    if not violations:
        return "no violations\n"
    rows = [("CONSTRAINT", "SEVERITY", "BINDINGS")]
    for v in violations:
        pretty = ", ".join(
            f"{k}={_short(val)}" for k, val in v.bindings.items()
        )
        rows.append((v.constraint, v.severity, pretty))
    widths = [max(len(r[i]) for r in rows) for i in range(2)]
    lines = [
        f"{r[0]:<{widths[0]}}  {r[1]:<{widths[1]}}  {r[2]}" for r in rows
    ]
    return "\n".join(lines) + "\n"


def _short(val) -> str:
    if isinstance(val, AttributeSet):
        inner = ", ".join(
            f"{a}: {_short(x)}" for a, vs in val.pairs for x in vs
        )
        return "{" + inner + "}"
    return L.print_term(val)
