"""Forward-chaining closure over an execution plan (semi-naive fixpoint).

The closure is deterministic and independent of input fact order and rule
order: each round applies all rules to the round-start store, and newly
derived facts are inserted in canonical order between rounds.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from . import language as L
from . import theory
from .characterize import (
    BLOCKED,
    AttrAbsentAtom,
    AttrPresentAtom,
    ExecutionPlan,
    MatchEnv,
    PlanRule,
    eval_term,
    head_attrs,
    term_ground,
    unify_term,
)
from .errors import EvaluationError, WikimarsError
from .store import Fact, Store, _term_eq

MAX_PROVENANCE_PER_FACT = 8


@dataclass
class ClosureLimits:
    max_rounds: int = 64
    max_facts: int = 10_000_000
    max_attr_values_per_fact: int = 1000

    def __post_init__(self):
        if min(self.max_rounds, self.max_facts, self.max_attr_values_per_fact) <= 0:
            raise ValueError("closure limits must be positive")


@dataclass
class ClosureReport:
    rounds: int = 0
    derived_per_rule: dict = field(default_factory=dict)
    limit_hit: str | None = None
    wall_time: float = 0.0

    def to_json(self):
        return {
            "rounds": self.rounds,
            "derived_per_rule": {str(k): v for k, v in sorted(self.derived_per_rule.items())},
            "limit_hit": self.limit_hit,
            "wall_time_seconds": round(self.wall_time, 6),
        }


@dataclass
class ClosureResult:
    store: Store
    report: ClosureReport
    provenance: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Body matching
# ---------------------------------------------------------------------------


def _split_body(plan_rule: PlanRule):
    """Reorder body atoms into match phases.

    Relational atoms keep their order; set atoms next (they may bind new
    variables); equality/datatype checks after; presence/absence and guard
    atoms carrying combine terms run last, once all facts are known.
    """
    rel, sets, checks, final = [], [], [], []
    for atom in plan_rule.rule.body:
        if isinstance(atom, L.RelAtom):
            rel.append(atom)
        elif isinstance(atom, (L.SetMemberAtom, L.SetEqAtom)):
            sets.append(atom)
        elif isinstance(atom, (AttrPresentAtom, AttrAbsentAtom)):
            final.append(atom)
        elif isinstance(atom, L.DatatypeAtom) and _has_combine(atom.args):
            final.append(atom)
        else:
            checks.append(atom)
    return rel, sets, checks, final


def _has_combine(args) -> bool:
    from .characterize import BlendTerm, CombineTerm

    return any(isinstance(a, (CombineTerm, BlendTerm)) for a in args)


def _concrete(t, bindings):
    """Pattern position for index lookup: term if bound/ground, else None."""
    if isinstance(t, L.Var):
        return bindings.get(t.name)
    if isinstance(t, L.FnApp):
        return None
    return t


def _unify_atom(atom: L.RelAtom, fact: Fact, bindings, deferred) -> bool:
    if len(fact.args) != len(atom.args):
        return False
    if not unify_term(atom.pred, fact.pred, bindings):
        return False
    for pat, actual in zip(atom.args, fact.args):
        if isinstance(pat, L.FnApp):
            deferred.append((pat, actual))
        elif not unify_term(pat, actual, bindings):
            return False
    return True


def _iter_matches(store: Store, plan_rule: PlanRule, delta=None, stamps=None, round_no=None):
    """Yield MatchEnv for every body instantiation.

    When ``delta`` (a set of facts) is given, only matches using at least one
    delta fact are produced, via the standard per-position old/delta/full
    scheme.  With ``stamps``/``round_no``, the same scheme runs on insertion
    rounds instead of an explicit set.
    """
    rel, sets, checks, final = _split_body(plan_rule)

    def fact_class(fact) -> str:
        if stamps is not None:
            s = stamps.get(fact, 0)
            if s == round_no - 1:
                return "delta"
            return "old" if s < round_no - 1 else "new"
        if delta is not None:
            return "delta" if fact in delta else "old"
        return "old"

    semi_naive = delta is not None or stamps is not None
    positions = range(len(rel)) if rel else []
    delta_choices = list(positions) if semi_naive and rel else [None]
    if semi_naive and not rel:
        return  # no relational atoms: nothing can involve a delta fact

    seen_envs = set()
    for delta_pos in delta_choices:
        stack_results = []

        def rec(i, bindings, setmap, facts, deferred):
            if i == len(rel):
                stack_results.append((dict(bindings), dict(setmap), list(facts), list(deferred)))
                return
            atom = rel[i]
            pred_c = _concrete(atom.pred, bindings)
            args_c = [_concrete(a, bindings) for a in atom.args]
            for fact in sorted(store.candidates(pred_c, args_c), key=Fact.key):
                if delta_pos is not None:
                    cls = fact_class(fact)
                    if i == delta_pos and cls != "delta":
                        continue
                    if i < delta_pos and cls != "old":
                        continue
                trial = dict(bindings)
                dtrial = list(deferred)
                if not _unify_atom(atom, fact, trial, dtrial):
                    continue
                setmap[atom.sett.name] = fact.attrs
                facts.append(fact)
                rec(i + 1, trial, setmap, facts, dtrial)
                facts.pop()
                del setmap[atom.sett.name]

        rec(0, {}, {}, [], [])

        for bindings, setmap, facts, deferred in stack_results:
            for env in _expand_set_atoms(sets, 0, bindings, setmap, facts):
                if not _check_phase(checks, deferred, env, plan_rule):
                    continue
                if not _final_phase(final, env, plan_rule):
                    continue
                key = (
                    tuple(sorted((k, _keyify(v)) for k, v in env.bindings.items())),
                    tuple(f.key() for f in env.facts),
                )
                if key in seen_envs:
                    continue
                seen_envs.add(key)
                yield env


def _keyify(v):
    from .values import canon_key

    try:
        return canon_key(v)
    except TypeError:
        return repr(v)


def _expand_set_atoms(sets, i, bindings, setmap, facts):
    if i == len(sets):
        yield MatchEnv(dict(bindings), dict(setmap), list(facts))
        return
    atom = sets[i]
    if isinstance(atom, L.SetEqAtom):
        left = setmap.get(atom.left.name)
        right = setmap.get(atom.right.name)
        if left is not None and left == right:
            yield from _expand_set_atoms(sets, i + 1, bindings, setmap, facts)
        return
    attrs = setmap.get(atom.setvar.name)
    if attrs is None:
        return
    for attr, vals in attrs.pairs:
        for val in vals:
            trial = dict(bindings)
            if unify_term(atom.attr, attr, trial) and unify_term(atom.value, val, trial):
                yield from _expand_set_atoms(sets, i + 1, trial, setmap, facts)


def _check_phase(checks, deferred, env: MatchEnv, plan_rule) -> bool:
    try:
        for fnapp, actual in deferred:
            if not _term_eq(eval_term(fnapp, env), actual):
                return False
        for atom in checks:
            if isinstance(atom, L.EqAtom):
                eq = _term_eq(eval_term(atom.left, env), eval_term(atom.right, env))
                if eq == atom.negated:
                    return False
            elif isinstance(atom, L.DatatypeAtom):
                args = [eval_term(a, env) for a in atom.args]
                if not theory.relation(atom.rel).fn(*args):
                    return False
            else:
                raise EvaluationError(f"unexpected body atom {atom!r}")
    except WikimarsError as exc:
        raise EvaluationError(
            f"rule {plan_rule.index}: {exc} (facts: "
            + "; ".join(str(f.to_json()) for f in env.facts)
            + ")"
        ) from exc
    return True


def _final_phase(final, env: MatchEnv, plan_rule) -> bool:
    try:
        for atom in final:
            if isinstance(atom, AttrPresentAtom):
                if not env.gather(atom.attr):
                    return False
            elif isinstance(atom, AttrAbsentAtom):
                if env.gather(atom.attr):
                    return False
            else:  # guard DatatypeAtom with combine terms
                args = [eval_term(a, env) for a in atom.args]
                if not theory.relation(atom.rel).fn(*args):
                    return False
    except WikimarsError as exc:
        raise EvaluationError(f"rule {plan_rule.index}: {exc}") from exc
    return True


def _derive_head(plan: ExecutionPlan, plan_rule: PlanRule, env: MatchEnv):
    attrs = head_attrs(plan, plan_rule, env)
    if attrs is BLOCKED:
        return None
    head = plan_rule.rule.head
    try:
        pred = eval_term(head.pred, env)
        args = tuple(eval_term(a, env) for a in head.args)
    except WikimarsError as exc:
        raise EvaluationError(f"rule {plan_rule.index}: {exc}") from exc
    if not isinstance(pred, str):
        raise EvaluationError(
            f"rule {plan_rule.index}: head predicate evaluated to non-entity {pred!r}"
        )
    return Fact(pred, args, attrs)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def step(store: Store, plan: ExecutionPlan, delta) -> list[Fact]:
    """Facts derivable from matches using >= 1 delta fact, minus store contents."""
    delta = set(delta)
    out = {}
    for plan_rule in plan.rules:
        for env in _iter_matches(store, plan_rule, delta=delta):
            fact = _derive_head(plan, plan_rule, env)
            if fact is not None and fact not in store:
                out[fact] = None
    return sorted(out, key=Fact.key)


def close(
    store: Store,
    plan: ExecutionPlan,
    limits: ClosureLimits | None = None,
    provenance: bool = True,
) -> ClosureResult:
    """Least fixpoint of the plan over the store (in place), within limits."""
    limits = limits or ClosureLimits()
    report = ClosureReport(derived_per_rule={r.index: 0 for r in plan.rules})
    prov: dict[Fact, list] = {}
    stamps: dict[Fact, int] = {f: 0 for f in store}
    start = time.monotonic()
    round_no = 0
    while True:
        round_no += 1
        if round_no > limits.max_rounds:
            report.limit_hit = f"max_rounds={limits.max_rounds} exceeded"
            round_no -= 1
            break
        new: dict[Fact, None] = {}
        for plan_rule in plan.rules:
            for env in _iter_matches(store, plan_rule, stamps=stamps, round_no=round_no):
                fact = _derive_head(plan, plan_rule, env)
                if fact is None:
                    continue
                if fact.attrs.value_count() > limits.max_attr_values_per_fact:
                    report.limit_hit = (
                        f"max_attr_values_per_fact={limits.max_attr_values_per_fact} "
                        f"exceeded by rule {plan_rule.index}"
                    )
                    report.rounds = round_no
                    report.wall_time = time.monotonic() - start
                    return ClosureResult(store, report, prov)
                fresh = fact not in store and fact not in new
                if fresh:
                    new[fact] = None
                    report.derived_per_rule[plan_rule.index] += 1
                if provenance and (fresh or fact in new or stamps.get(fact, 0) > 0):
                    records = prov.setdefault(fact, [])
                    record = (plan_rule.index, tuple(env.facts))
                    if record not in records and len(records) < MAX_PROVENANCE_PER_FACT:
                        records.append(record)
        if not new:
            break
        for fact in sorted(new, key=Fact.key):
            store.assert_fact(fact)
            stamps[fact] = round_no
        if len(store) > limits.max_facts:
            report.limit_hit = f"max_facts={limits.max_facts} exceeded"
            break
    report.rounds = round_no
    report.wall_time = time.monotonic() - start
    return ClosureResult(store, report, prov)


# ---------------------------------------------------------------------------
# Explanation
# ---------------------------------------------------------------------------


@dataclass
class DerivationNode:
    fact: Fact
    rule_index: int | None = None
    children: list = field(default_factory=list)

    def to_json(self):
        out = {"fact": self.fact.to_json()}
        if self.rule_index is not None:
            out["rule"] = self.rule_index
            out["premises"] = [c.to_json() for c in self.children]
        return out

    def format(self, indent=0) -> str:
        pad = "  " * indent
        line = pad + json.dumps(self.fact.to_json(), sort_keys=True)
        if self.rule_index is not None:
            line += f"   [rule {self.rule_index}]"
        lines = [line]
        for c in self.children:
            lines.append(c.format(indent + 1))
        return "\n".join(lines)


def explain(result: ClosureResult, fact: Fact) -> DerivationNode:
    """Derivation tree for a fact in the closed store, back to base facts."""
    if fact not in result.store:
        raise EvaluationError(f"fact not in store: {fact.to_json()}")

    def build(f: Fact, seen: frozenset) -> DerivationNode:
        records = result.provenance.get(f)
        if not records:
            return DerivationNode(f)
        for rule_idx, premises in records:
            if any(p.key() in seen for p in premises) or f in premises:
                continue
            node = DerivationNode(f, rule_idx)
            sub_seen = seen | {f.key()}
            node.children = [build(p, sub_seen) for p in premises]
            return node
        return DerivationNode(f)

    return build(fact, frozenset())
