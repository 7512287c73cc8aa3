"""Named datatype relations and functions available to rules and constraints.

Every relation has an auto-registered negation (``not_<name>``), keeping the
relation set closed under negation.  Guard relations used by qualifier
characterizations (``could_be_before`` and friends) tolerate empty sentinels
instead of raising, so they are usable as blend guards.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import values as V
from .errors import WikimarsError


@dataclass(frozen=True)
class RelationSig:
    name: str
    arity: int
    fn: Callable[..., bool]


@dataclass(frozen=True)
class FunctionSig:
    name: str
    arity: int
    fn: Callable


RELATIONS: dict[str, RelationSig] = {}
FUNCTIONS: dict[str, FunctionSig] = {}


def _rel(name: str, arity: int, fn):
    RELATIONS[name] = RelationSig(name, arity, fn)
    RELATIONS["not_" + name] = RelationSig(
        "not_" + name, arity, lambda *args, _f=fn: not _f(*args)
    )


def _fn(name: str, arity: int, fn):
    FUNCTIONS[name] = FunctionSig(name, arity, fn)


def _imprecise_or_false(v) -> bool:
    return isinstance(v, V.IMPRECISE_TYPES)


# --- equality ---------------------------------------------------------------

_rel("eq", 2, V.dv_eq)
RELATIONS["neq"] = RELATIONS["not_eq"]
RELATIONS["not_neq"] = RELATIONS["eq"]

# --- imprecise-value predicates --------------------------------------------

_rel("empty", 1, lambda v: _imprecise_or_false(v) and v.is_empty)
_rel("precise", 1, lambda v: not _imprecise_or_false(v) or V.iv_state(v) == "precise")
_rel("imprecise", 1, lambda v: _imprecise_or_false(v) and V.iv_state(v) == "imprecise")
RELATIONS["nonempty"] = RELATIONS["not_empty"]
RELATIONS["not_nonempty"] = RELATIONS["empty"]

_rel("overlaps", 2, lambda a, b: V.iv_relate("overlaps", a, b))
RELATIONS["disjoint"] = RELATIONS["not_overlaps"]
RELATIONS["not_disjoint"] = RELATIONS["overlaps"]
_rel("main_eq", 2, lambda a, b: V.iv_relate("main_eq", a, b))
RELATIONS["main_neq"] = RELATIONS["not_main_eq"]
RELATIONS["not_main_neq"] = RELATIONS["main_eq"]

# --- quantity orderings -----------------------------------------------------

for _r in ("lt", "le", "gt", "ge"):
    _rel(f"{_r}_main", 2, lambda a, b, r=_r: V.qty_compare("main", r, a, b))
    _rel(f"must_{_r}", 2, lambda a, b, r=_r: V.qty_compare("must", r, a, b))
    _rel(f"can_{_r}", 2, lambda a, b, r=_r: V.qty_compare("can", r, a, b))

# --- time orderings ---------------------------------------------------------

for _r in ("before", "after"):
    _rel(_r, 2, lambda a, b, r=_r: V.time_compare("main", r, a, b))
    _rel(f"must_be_{_r}", 2, lambda a, b, r=_r: V.time_compare("must", r, a, b))
    _rel(f"can_be_{_r}", 2, lambda a, b, r=_r: V.time_compare("can", r, a, b))


def _could_be(rel):
    def check(a, b):
        if not isinstance(a, V.TimeValue) or not isinstance(b, V.TimeValue):
            return False
        if a.is_empty or b.is_empty:
            return False
        return V.time_compare("can", rel, a, b)

    return check


# Empty-tolerant variants used as blending guards.
_rel("could_be_before", 2, _could_be("before"))
_rel("could_be_after", 2, _could_be("after"))

# --- geocoordinate directions ----------------------------------------------

for _d in ("north", "south", "east", "west"):
    _rel(f"{_d}_of", 2, lambda a, b, d=_d: V.geo_relate(d, "plain", a, b))
    _rel(f"must_be_{_d}_of", 2, lambda a, b, d=_d: V.geo_relate(d, "must", a, b))
    _rel(f"can_be_{_d}_of", 2, lambda a, b, d=_d: V.geo_relate(d, "can", a, b))

# --- string relations -------------------------------------------------------

for _r in ("lt", "le", "gt", "ge"):
    _rel(f"str_{_r}", 2, lambda a, b, r=_r: V.str_relate(r, a, b))
_rel("matches", 2, lambda a, b: V.str_relate("matches", a, b))

# --- functions --------------------------------------------------------------

_fn("iv_intersect", 2, V.iv_intersect)
_fn("iv_hull", 2, V.iv_hull)
_fn("time_first", 2, lambda a, b: V.time_extreme("first", a, b))
_fn("time_last", 2, lambda a, b: V.time_extreme("last", a, b))


def _part(flavour, rel):
    def f(a, b):
        if isinstance(a, V.TimeValue) and a.is_empty:
            return V.TimeValue.empty()
        if isinstance(b, V.TimeValue) and b.is_empty:
            return V.TimeValue.empty()
        return V.time_part(a, b, flavour, rel)

    return f


_fn("could_be_before", 2, _part("can", "before"))
_fn("could_be_after", 2, _part("can", "after"))
_fn("must_be_before_part", 2, _part("must", "before"))
_fn("must_be_after_part", 2, _part("must", "after"))
_fn("text", 1, lambda v: V.text_extract("text", v))
_fn("lang", 1, lambda v: V.text_extract("lang", v))
_fn("text_for_lang", 2, lambda v, tag: V.text_extract("text_for_lang", v, _tag(tag)))


def _tag(t):
    if isinstance(t, V.StringValue):
        return t.text
    if isinstance(t, str):
        return t
    raise WikimarsError(f"language tag expected, got {t!r}")


def negate(name: str) -> str:
    """Name of the registered negation of a relation."""
    if name.startswith("not_") and name[4:] in RELATIONS:
        return name[4:]
    if "not_" + name in RELATIONS:
        return "not_" + name
    raise WikimarsError(f"no negation registered for relation {name!r}")


def relation(name: str) -> RelationSig:
    try:
        return RELATIONS[name]
    except KeyError:
        raise WikimarsError(f"unknown datatype relation: {name}") from None


def function(name: str) -> FunctionSig:
    try:
        return FUNCTIONS[name]
    except KeyError:
        raise WikimarsError(f"unknown datatype function: {name}") from None
