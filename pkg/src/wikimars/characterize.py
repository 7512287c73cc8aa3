"""Per-qualifier characterizations: lazy execution plans and the reference
materialized expansion.

Both routes share one clause evaluator.  The expansion route rewrites every
rule into guard-carrying variants split on attribute presence/absence and
evaluates them with characterization handling switched off; the plan route
gathers qualifier values lazily per match.  The two must produce identical
closures (property-tested).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

from . import theory
from . import language as L
from .errors import CompileError, SafetyError
from .store import AttributeSet, Fact
from .values import canon_key


BLOCKED = object()  # guard failure for the derivation at hand


# ---------------------------------------------------------------------------
# Internal term/atom forms used by the materialized expansion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CombineTerm:
    """Left fold of a binary datatype function over all values of an attribute
    gathered from the matched body facts, in body-atom order."""

    fn: str
    attr: str


@dataclass(frozen=True)
class BlendTerm:
    fn: str
    left: CombineTerm
    right: CombineTerm


@dataclass(frozen=True)
class AttrPresentAtom:
    attr: str


@dataclass(frozen=True)
class AttrAbsentAtom:
    attr: str


# ---------------------------------------------------------------------------
# Characterization map
# ---------------------------------------------------------------------------


class CharacterizationMap:
    """Attribute id -> policy; unlisted attributes default to ignore."""

    def __init__(self, decls=()):
        self._policies: dict[str, object] = {}
        for decl in decls:
            if decl.attr in self._policies:
                raise CompileError(f"attribute {decl.attr} characterized twice")
            self._policies[decl.attr] = decl.policy

    def policy(self, attr: str):
        return self._policies.get(attr, L.Ignore())

    def items(self):
        return sorted(self._policies.items())

    @classmethod
    def ignore_all(cls) -> "CharacterizationMap":
        return cls(())


# ---------------------------------------------------------------------------
# Resolved attribute functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResolvedFn:
    clauses: tuple = ()
    mentions_all: bool = False

    @property
    def mentioned(self) -> frozenset:
        out = set()
        for cl in self.clauses:
            for attr, _ in cl.outputs:
                if isinstance(attr, str):
                    out.add(attr)
        return frozenset(out)


def _wildcard_clause(setvar: L.SetVar) -> L.FnClause:
    a, v = L.Var("__a"), L.Var("__v")
    return L.FnClause((L.SetMemberAtom(a, v, setvar),), ((a, v),))


def resolve_fn(rule: L.Rule, fndefs: dict[str, L.FnDef]) -> ResolvedFn:
    """Combine the rule's named function and any head set term into one recipe."""
    clauses: list[L.FnClause] = []
    mentions_all = False
    if rule.fn_name == "copyAll" and rule.fn_name not in fndefs:
        for atom in rule.body:
            if isinstance(atom, L.RelAtom):
                clauses.append(_wildcard_clause(atom.sett))
        mentions_all = True
    elif rule.fn_name is not None:
        if rule.fn_name not in fndefs:
            raise CompileError(f"unknown attribute function {rule.fn_name!r}")
        clauses.extend(fndefs[rule.fn_name].clauses)
    sett = rule.head.sett
    if isinstance(sett, L.ExplicitSet):
        clauses.append(L.FnClause((), sett.pairs))
    elif isinstance(sett, L.SetVar):
        clauses.append(_wildcard_clause(sett))
        mentions_all = True
    for cl in clauses:
        for attr, _ in cl.outputs:
            if isinstance(attr, L.Var):
                mentions_all = True
    return ResolvedFn(tuple(clauses), mentions_all)


# ---------------------------------------------------------------------------
# Execution plan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlanRule:
    index: int
    rule: L.Rule  # normalized
    fn: ResolvedFn
    apply_chars: bool = True

    def body_rel_atoms(self):
        return [a for a in self.rule.body if isinstance(a, L.RelAtom)]


@dataclass(frozen=True)
class ExecutionPlan:
    rules: tuple
    chars: CharacterizationMap


def compile_plan(rules, fndefs=(), chars=()) -> ExecutionPlan:
    """Validate, normalize, and compile rules into a lazy execution plan."""
    cmap = chars if isinstance(chars, CharacterizationMap) else CharacterizationMap(chars)
    fnmap = fndefs if isinstance(fndefs, dict) else {f.name: f for f in fndefs}
    plan_rules = []
    for i, rule in enumerate(rules):
        violations = L.check_safety(rule)
        if violations:
            raise SafetyError(f"rule {i}: " + "; ".join(violations))
        norm = L.normalize(rule)
        plan_rules.append(PlanRule(i, norm, resolve_fn(norm, fnmap)))
    return ExecutionPlan(tuple(plan_rules), cmap)


def compile_program(program: L.Program) -> ExecutionPlan:
    return compile_plan(program.rules, program.fns, program.chars)


def compile_expanded(rules, fndefs=(), apply_chars=False) -> ExecutionPlan:
    """Plan over already-expanded rules; characterization handling is off."""
    fnmap = fndefs if isinstance(fndefs, dict) else {f.name: f for f in fndefs}
    plan_rules = []
    for i, rule in enumerate(rules):
        norm = L.normalize(rule)
        plan_rules.append(PlanRule(i, norm, resolve_fn(norm, fnmap), apply_chars=False))
    return ExecutionPlan(tuple(plan_rules), CharacterizationMap.ignore_all())


# ---------------------------------------------------------------------------
# Term and clause evaluation (shared by both routes)
# ---------------------------------------------------------------------------


class MatchEnv:
    """Evaluation context for one rule match: variable bindings, per-atom
    attribute sets, and the matched facts in body-atom order."""

    def __init__(self, bindings=None, sets=None, facts=None):
        self.bindings: dict[str, object] = bindings or {}
        self.sets: dict[str, AttributeSet] = sets or {}
        self.facts: list[Fact] = facts or []

    def gather(self, attr: str) -> list:
        """All values of attr across matched facts, body order then canonical."""
        out = []
        for fact in self.facts:
            out.extend(fact.attrs.values(attr))
        return out


def eval_term(t, env: MatchEnv):
    if isinstance(t, L.Var):
        if t.name not in env.bindings:
            raise CompileError(f"unbound variable {t.name}")
        return env.bindings[t.name]
    if isinstance(t, L.FnApp):
        sig = theory.function(t.fn)
        return sig.fn(*(eval_term(a, env) for a in t.args))
    if isinstance(t, CombineTerm):
        vals = env.gather(t.attr)
        if not vals:
            raise CompileError(f"combine over absent attribute {t.attr}")
        return reduce(theory.function(t.fn).fn, vals)
    if isinstance(t, BlendTerm):
        return theory.function(t.fn).fn(eval_term(t.left, env), eval_term(t.right, env))
    return t  # entity constant or data value


def term_ground(t, env: MatchEnv) -> bool:
    if isinstance(t, L.Var):
        return t.name in env.bindings
    if isinstance(t, L.FnApp):
        return all(term_ground(a, env) for a in t.args)
    return True


def unify_term(pattern, actual, bindings: dict) -> bool:
    from .store import _term_eq

    if isinstance(pattern, L.Var):
        if pattern.name in bindings:
            return _term_eq(bindings[pattern.name], actual)
        bindings[pattern.name] = actual
        return True
    return _term_eq(pattern, actual)


def _solve_clause_conds(conds, idx, env: MatchEnv, bindings: dict):
    if idx == len(conds):
        yield bindings
        return
    cond = conds[idx]
    if isinstance(cond, L.SetMemberAtom):
        attrs = env.sets.get(cond.setvar.name)
        if attrs is None:
            raise CompileError(f"clause references unknown set variable {cond.setvar.name}")
        for attr, vals in attrs.pairs:
            for val in vals:
                trial = dict(bindings)
                if unify_term(cond.attr, attr, trial) and unify_term(cond.value, val, trial):
                    yield from _solve_clause_conds(conds, idx + 1, env, trial)
    elif isinstance(cond, L.DatatypeAtom):
        sub = MatchEnv(bindings, env.sets, env.facts)
        args = [eval_term(a, sub) for a in cond.args]
        if theory.relation(cond.rel).fn(*args):
            yield from _solve_clause_conds(conds, idx + 1, env, bindings)
    else:
        raise CompileError(f"unsupported clause condition: {cond!r}")


def eval_clauses(fn: ResolvedFn, env: MatchEnv) -> list:
    """Explicit attribute contributions of the rule's function, as (attr, value)."""
    out = []
    for clause in fn.clauses:
        for solution in _solve_clause_conds(clause.conds, 0, env, dict(env.bindings)):
            sub = MatchEnv(solution, env.sets, env.facts)
            for attr_t, val_t in clause.outputs:
                attr = eval_term(attr_t, sub)
                if not isinstance(attr, str):
                    raise CompileError(f"attribute id must be an entity, got {attr!r}")
                out.append((attr, eval_term(val_t, sub)))
    return out


# ---------------------------------------------------------------------------
# Head attribute computation (lazy route)
# ---------------------------------------------------------------------------


def head_attrs(plan: ExecutionPlan, plan_rule: PlanRule, env: MatchEnv):
    """Attribute set for the head of one match, or BLOCKED on guard failure.

    Union of explicit function-clause contributions with per-attribute
    characterization handlers for every attribute the function does not
    mention.
    """
    contributions = eval_clauses(plan_rule.fn, env)
    if plan_rule.apply_chars and not plan_rule.fn.mentions_all:
        mentioned = plan_rule.fn.mentioned
        present = sorted({a for fact in env.facts for a in fact.attrs.attrs()})
        for attr in present:
            if attr in mentioned:
                continue
            policy = plan.chars.policy(attr)
            if isinstance(policy, L.Ignore):
                continue
            if isinstance(policy, L.Additive):
                for v in env.gather(attr):
                    contributions.append((attr, v))
                continue
            if isinstance(policy, L.Combining):
                vals = env.gather(attr)
                if not vals:
                    continue
                combined = reduce(theory.function(policy.fn).fn, vals)
                if not theory.relation(policy.guard).fn(combined):
                    return BLOCKED
                contributions.append((attr, combined))
                continue
            if isinstance(policy, L.Blending):
                (a0, fn0), (co, fn_co) = policy.inputs
                vals = env.gather(attr)
                if not vals:
                    continue
                combined = reduce(theory.function(fn0).fn, vals)
                co_vals = env.gather(co)
                if not co_vals:
                    contributions.append((attr, combined))
                    continue
                co_combined = reduce(theory.function(fn_co).fn, co_vals)
                blended = theory.function(policy.blend_fn).fn(combined, co_combined)
                if theory.relation(policy.guard).fn(blended, co_combined):
                    return BLOCKED
                contributions.append((attr, blended))
                continue
            raise CompileError(f"unknown policy {policy!r}")
    grouped: dict[str, list] = {}
    for attr, val in contributions:
        grouped.setdefault(attr, []).append(val)
    return AttributeSet(tuple((a, tuple(vs)) for a, vs in grouped.items()))


# ---------------------------------------------------------------------------
# Materialized expansion (Definition-8 style reference)
# ---------------------------------------------------------------------------


def expand_materialized(rules, fndefs=(), chars=()):
    """Fold characterizations into per-rule functions and guard atoms.

    Each rule gets a private function; rules are split into variants on the
    presence or absence of every combining/blending attribute (absence is
    expressed with internal body atoms, which plain MAPL cannot state).
    Returns (rules, fndefs) whose plain evaluation equals the lazy plan.
    """
    cmap = chars if isinstance(chars, CharacterizationMap) else CharacterizationMap(chars)
    fnmap = fndefs if isinstance(fndefs, dict) else {f.name: f for f in fndefs}
    out_rules: list[L.Rule] = []
    out_fns: dict[str, L.FnDef] = {}

    for i, rule in enumerate(rules):
        violations = L.check_safety(rule)
        if violations:
            raise SafetyError(f"rule {i}: " + "; ".join(violations))
        norm = L.normalize(rule)
        base = resolve_fn(norm, fnmap)
        variants = [(list(norm.body), list(base.clauses))]
        if not base.mentions_all:
            mentioned = base.mentioned
            for attr, policy in cmap.items():
                if attr in mentioned:
                    continue
                if isinstance(policy, L.Ignore):
                    continue
                if isinstance(policy, L.Additive):
                    extra = [
                        _attr_copy_clause(attr, atom.sett)
                        for atom in norm.body
                        if isinstance(atom, L.RelAtom)
                    ]
                    variants = [(b, c + extra) for b, c in variants]
                    continue
                new_variants = []
                if isinstance(policy, L.Combining):
                    comb = CombineTerm(policy.fn, attr)
                    for b, c in variants:
                        new_variants.append((b + [AttrAbsentAtom(attr)], list(c)))
                        new_variants.append(
                            (
                                b + [AttrPresentAtom(attr), L.DatatypeAtom(policy.guard, (comb,))],
                                c + [L.FnClause((), ((attr, comb),))],
                            )
                        )
                else:  # Blending
                    (a0, fn0), (co, fn_co) = policy.inputs
                    comb = CombineTerm(fn0, attr)
                    co_comb = CombineTerm(fn_co, co)
                    blended = BlendTerm(policy.blend_fn, comb, co_comb)
                    for b, c in variants:
                        new_variants.append((b + [AttrAbsentAtom(attr)], list(c)))
                        new_variants.append(
                            (
                                b + [AttrPresentAtom(attr), AttrAbsentAtom(co)],
                                c + [L.FnClause((), ((attr, comb),))],
                            )
                        )
                        new_variants.append(
                            (
                                b
                                + [
                                    AttrPresentAtom(attr),
                                    AttrPresentAtom(co),
                                    L.DatatypeAtom(
                                        theory.negate(policy.guard), (blended, co_comb)
                                    ),
                                ],
                                c + [L.FnClause((), ((attr, blended),))],
                            )
                        )
                variants = new_variants
        for j, (body, clauses) in enumerate(variants):
            fname = f"__r{i}_{j}"
            out_fns[fname] = L.FnDef(fname, tuple(clauses))
            head = L.RelAtom(norm.head.pred, norm.head.args, None)
            out_rules.append(L.Rule(tuple(body), head, fname))
    return out_rules, list(out_fns.values())


def _attr_copy_clause(attr: str, setvar: L.SetVar) -> L.FnClause:
    v = L.Var("__v")
    return L.FnClause((L.SetMemberAtom(attr, v, setvar),), ((attr, v),))
