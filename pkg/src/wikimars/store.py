"""The eMARS: a finite store of multi-attributed facts with indexes.

Entities (items, properties, skolems) are plain strings; data values are the
immutable classes from :mod:`wikimars.values`.  Facts are deduplicated by
exact canonical equality of (predicate, args, attribute set).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Iterator

from . import theory
from . import values as V
from .errors import MalformedFactError, SnapshotFormatError
from .values import DataValue, canon_key

Term = str | DataValue

SKOLEM_PREFIX = "_sk"

SNAPSHOT_FORMAT = "wikimars-snapshot"
SNAPSHOT_VERSION = 1


def is_skolem(term) -> bool:
    return isinstance(term, str) and term.startswith(SKOLEM_PREFIX)


def is_entity(term) -> bool:
    return isinstance(term, str)


# ---------------------------------------------------------------------------
# Term (de)serialization
# ---------------------------------------------------------------------------


def term_to_json(term: Term):
    if isinstance(term, str):
        return term
    if isinstance(term, V.TimeValue):
        if term.is_empty:
            return {"type": "time", "empty": True}
        out = {
            "type": "time",
            "main": V.format_instant(term.main),
            "earliest": V.format_instant(term.earliest),
            "latest": V.format_instant(term.latest),
        }
        if term.tz_offset_minutes:
            out["tz"] = term.tz_offset_minutes
        if term.calendar:
            out["calendar"] = term.calendar
        return out
    if isinstance(term, V.QuantityValue):
        if term.is_empty:
            return {"type": "quantity", "empty": True}
        return {
            "type": "quantity",
            "main": str(term.main),
            "lower": str(term.lower),
            "upper": str(term.upper),
            "unit": term.unit,
        }
    if isinstance(term, V.GeoCoordinatesValue):
        if term.is_empty:
            return {"type": "globecoordinate", "empty": True}
        return {
            "type": "globecoordinate",
            "lat": term.lat,
            "lon": term.lon,
            "precision": term.precision,
            "globe": term.globe,
        }
    if isinstance(term, V.StringValue):
        return {"type": "string", "value": term.text}
    if isinstance(term, V.IriValue):
        return {"type": "iri", "value": term.iri}
    if isinstance(term, V.MonolingualTextValue):
        return {"type": "monolingualtext", "text": term.text, "lang": term.lang}
    if isinstance(term, V.MultilingualTextValue):
        return {"type": "multilingualtext", "texts": dict(term.texts)}
    raise TypeError(f"not a term: {term!r}")


def term_from_json(obj) -> Term:
    if isinstance(obj, str):
        return obj
    if not isinstance(obj, dict) or "type" not in obj:
        raise MalformedFactError(f"bad term encoding: {obj!r}")
    t = obj["type"]
    if t == "time":
        if obj.get("empty"):
            return V.TimeValue.empty()
        return V.TimeValue(
            V.parse_instant(obj["main"]),
            V.parse_instant(obj["earliest"]) if "earliest" in obj else None,
            V.parse_instant(obj["latest"]) if "latest" in obj else None,
            obj.get("tz", 0),
            obj.get("calendar"),
        )
    if t == "quantity":
        if obj.get("empty"):
            return V.QuantityValue.empty()
        return V.QuantityValue(
            Decimal(obj["main"]),
            Decimal(obj["lower"]) if "lower" in obj else None,
            Decimal(obj["upper"]) if "upper" in obj else None,
            obj.get("unit", "1"),
        )
    if t == "globecoordinate":
        if obj.get("empty"):
            return V.GeoCoordinatesValue.empty()
        return V.GeoCoordinatesValue(
            obj["lat"], obj["lon"], obj.get("precision", 0.0), obj.get("globe", "Q2")
        )
    if t == "string":
        return V.StringValue(obj["value"])
    if t == "iri":
        return V.IriValue(obj["value"])
    if t == "monolingualtext":
        return V.MonolingualTextValue(obj["text"], obj["lang"])
    if t == "multilingualtext":
        return V.MultilingualTextValue(tuple(obj["texts"].items()))
    raise MalformedFactError(f"unknown term type: {t!r}")


# ---------------------------------------------------------------------------
# Attribute sets and facts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttributeSet:
    """Canonically ordered map attribute id -> non-empty tuple of values."""

    pairs: tuple[tuple[str, tuple[Term, ...]], ...] = ()

    def __post_init__(self):
        canon: dict[str, list] = {}
        source = self.pairs.items() if isinstance(self.pairs, dict) else self.pairs
        for attr, vals in source:
            if isinstance(vals, (str,)) or not isinstance(vals, Iterable):
                vals = (vals,)
            bucket = canon.setdefault(attr, [])
            for v in vals:
                if all(not _term_eq(v, w) for w in bucket):
                    bucket.append(v)
        out = tuple(
            (attr, tuple(sorted(vals, key=canon_key)))
            for attr, vals in sorted(canon.items())
            if vals
        )
        object.__setattr__(self, "pairs", out)

    @classmethod
    def from_dict(cls, d: dict) -> "AttributeSet":
        return cls(tuple(d.items()))

    def values(self, attr: str) -> tuple[Term, ...]:
        for a, vals in self.pairs:
            if a == attr:
                return vals
        return ()

    def attrs(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.pairs)

    def items(self):
        return self.pairs

    def value_count(self) -> int:
        return sum(len(vals) for _, vals in self.pairs)

    def __bool__(self):
        return bool(self.pairs)

    def to_json(self):
        return {a: [term_to_json(v) for v in vals] for a, vals in self.pairs}

    @classmethod
    def from_json(cls, obj) -> "AttributeSet":
        return cls(tuple((a, tuple(term_from_json(v) for v in vals)) for a, vals in obj.items()))


def _term_eq(a, b) -> bool:
    if isinstance(a, str) or isinstance(b, str):
        return a == b
    return V.dv_eq(a, b)


@dataclass(frozen=True)
class Fact:
    pred: str
    args: tuple[Term, ...]
    attrs: AttributeSet = field(default_factory=AttributeSet)

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def key(self) -> tuple:
        return (
            self.pred,
            tuple(canon_key(a) for a in self.args),
            tuple((a, tuple(canon_key(v) for v in vs)) for a, vs in self.attrs.pairs),
        )

    def to_json(self):
        out = {"p": self.pred, "args": [term_to_json(a) for a in self.args]}
        if self.attrs:
            out["attrs"] = self.attrs.to_json()
        return out

    @classmethod
    def from_json(cls, obj) -> "Fact":
        return cls(
            obj["p"],
            tuple(term_from_json(a) for a in obj["args"]),
            AttributeSet.from_json(obj.get("attrs", {})),
        )


def make_fact(pred: str, args, attrs=None) -> Fact:
    if attrs is None:
        attrs = AttributeSet()
    elif isinstance(attrs, dict):
        attrs = AttributeSet.from_dict(attrs)
    return Fact(pred, tuple(args), attrs)


# ---------------------------------------------------------------------------
# Store
# ---------------------------------------------------------------------------


class Store:
    """Fact set with predicate and (predicate, position, term) indexes.

    Concurrency contract: many readers or one writer; the inference engine
    batches writes between read phases.
    """

    def __init__(self):
        self._facts: set[Fact] = set()
        self._by_pred: dict[str, set[Fact]] = {}
        self._by_parg: dict[tuple[str, int, tuple], set[Fact]] = {}
        self._skolem_counter = 0
        self.closed = False  # set after a closure run; persisted in snapshots

    def __len__(self):
        return len(self._facts)

    def __contains__(self, fact: Fact):
        return fact in self._facts

    def __iter__(self) -> Iterator[Fact]:
        return iter(self._facts)

    def sorted_facts(self) -> list[Fact]:
        return sorted(self._facts, key=Fact.key)

    def predicates(self) -> list[str]:
        return sorted(self._by_pred)

    def copy(self) -> "Store":
        s = Store()
        for f in self._facts:
            s.assert_fact(f)
        s._skolem_counter = self._skolem_counter
        s.closed = self.closed
        return s

    # -- mutation -----------------------------------------------------------

    def assert_fact(self, fact: Fact) -> str:
        """Insert a fact; returns 'inserted' or 'duplicate'."""
        if not fact.args:
            raise MalformedFactError("fact with no arguments")
        if fact.pred in theory.RELATIONS:
            raise MalformedFactError(
                f"datatype relation {fact.pred!r} cannot be a fact predicate"
            )
        if not isinstance(fact.pred, str):
            raise MalformedFactError("fact predicate must be an entity id")
        if fact in self._facts:
            return "duplicate"
        self._facts.add(fact)
        self._by_pred.setdefault(fact.pred, set()).add(fact)
        for i, arg in enumerate(fact.args):
            self._by_parg.setdefault((fact.pred, i, canon_key(arg)), set()).add(fact)
        return "inserted"

    def fresh_skolem(self) -> str:
        self._skolem_counter += 1
        return f"{SKOLEM_PREFIX}{self._skolem_counter}"

    # -- matching -----------------------------------------------------------

    def candidates(self, pred, args) -> Iterable[Fact]:
        """Smallest indexed superset of facts matching the bound positions."""
        if isinstance(pred, str) and not pred.startswith("?"):
            best = self._by_pred.get(pred, set())
            for i, a in enumerate(args):
                if a is not None and not (isinstance(a, str) and a.startswith("?")):
                    s = self._by_parg.get((pred, i, canon_key(a)), set())
                    if len(s) < len(best):
                        best = s
            return best
        return self._facts

    def match(self, pred=None, args=None, attr_constraints=None):
        """Yield (fact, bindings) for every fact unifying with the pattern.

        Pattern positions are a concrete term, a ``?name`` variable, or None
        (anonymous wildcard).  ``attr_constraints`` is a list of (attr, value)
        pairs requiring membership in the fact's attribute set.
        """
        args = list(args or [])
        results = []
        for fact in self.candidates(pred, args):
            if len(fact.args) != len(args):
                continue
            bindings: dict[str, Term] = {}
            if not _bind(pred, fact.pred, bindings):
                continue
            if not all(_bind(p, a, bindings) for p, a in zip(args, fact.args)):
                continue
            ok = True
            for attr_p, val_p in attr_constraints or []:
                if not _match_attr(fact.attrs, attr_p, val_p, bindings):
                    ok = False
                    break
            if ok:
                results.append((fact, bindings))
        results.sort(key=lambda r: r[0].key())
        yield from results

    # -- persistence --------------------------------------------------------

    def snapshot(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            header = {
                "format": SNAPSHOT_FORMAT,
                "version": SNAPSHOT_VERSION,
                "skolems": self._skolem_counter,
                "closed": self.closed,
            }
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for fact in self.sorted_facts():
                fh.write(json.dumps(fact.to_json(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Store":
        store = cls()
        with open(path, encoding="utf-8") as fh:
            head_line = fh.readline()
            try:
                header = json.loads(head_line)
            except json.JSONDecodeError as exc:
                raise SnapshotFormatError(f"unreadable snapshot header: {exc}") from exc
            if not isinstance(header, dict) or header.get("format") != SNAPSHOT_FORMAT:
                raise SnapshotFormatError("not a wikimars snapshot")
            if header.get("version") != SNAPSHOT_VERSION:
                raise SnapshotFormatError(
                    f"unsupported snapshot version: {header.get('version')!r}"
                )
            for line in fh:
                line = line.strip()
                if line:
                    store.assert_fact(Fact.from_json(json.loads(line)))
            store._skolem_counter = header.get("skolems", 0)
            store.closed = bool(header.get("closed", False))
        return store

    def load_facts(self, path) -> int:
        """Read a plain JSON-lines fact file (no header) into the store."""
        n = 0
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    if self.assert_fact(Fact.from_json(json.loads(line))) == "inserted":
                        n += 1
        return n


def _bind(pattern, actual, bindings) -> bool:
    if pattern is None:
        return True
    if isinstance(pattern, str) and pattern.startswith("?"):
        name = pattern[1:]
        if name in bindings:
            return _term_eq(bindings[name], actual)
        bindings[name] = actual
        return True
    return _term_eq(pattern, actual)


def _match_attr(attrs: AttributeSet, attr_p, val_p, bindings) -> bool:
    for attr, vals in attrs.pairs:
        trial = dict(bindings)
        if not _bind(attr_p, attr, trial):
            continue
        for v in sorted(vals, key=canon_key):
            trial2 = dict(trial)
            if _bind(val_p, v, trial2):
                bindings.update(trial2)
                return True
    return False
