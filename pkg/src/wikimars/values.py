"""Data values for the seven Wikidata-style datatypes and their algebra.

Three datatypes (time, quantity, geocoordinates) are imprecise: each value
carries a main value plus explicit closed bounds describing the range of
possible values.  All operations here are pure functions on immutable,
canonicalized values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation

from .errors import (
    DatatypeMismatchError,
    EmptyValueError,
    GlobeMismatchError,
    LongitudeWrapError,
    PatternError,
    UnitMismatchError,
)

WIKIDATA_ENTITY_PREFIX = "http://www.wikidata.org/entity/"


# ---------------------------------------------------------------------------
# Timeline arithmetic.  Timestamps are integer seconds since the epoch on a
# proleptic Gregorian timeline, supporting arbitrary (including negative)
# years, which stdlib datetime does not.
# ---------------------------------------------------------------------------

SECONDS_PER_DAY = 86400


def _days_from_civil(y: int, m: int, d: int) -> int:
    # Howard Hinnant's days-from-civil, valid for all proleptic Gregorian dates.
    y -= m <= 2
    era = (y if y >= 0 else y - 399) // 400
    yoe = y - era * 400
    doy = (153 * (m + (-3 if m > 2 else 9)) + 2) // 5 + d - 1
    doe = yoe * 365 + yoe // 4 - yoe // 100 + doy
    return era * 146097 + doe - 719468


def _civil_from_days(z: int) -> tuple[int, int, int]:
    z += 719468
    era = (z if z >= 0 else z - 146096) // 146097
    doe = z - era * 146097
    yoe = (doe - doe // 1460 + doe // 36524 - doe // 146096) // 365
    y = yoe + era * 400
    doy = doe - (365 * yoe + yoe // 4 - yoe // 100)
    mp = (5 * doy + 2) // 153
    d = doy - (153 * mp + 2) // 5 + 1
    m = mp + (3 if mp < 10 else -9)
    return y + (m <= 2), m, d


def instant(y: int, m: int = 1, d: int = 1, h: int = 0, mi: int = 0, s: int = 0) -> int:
    """Seconds since epoch for a proleptic Gregorian date/time (UTC)."""
    return _days_from_civil(y, m, d) * SECONDS_PER_DAY + h * 3600 + mi * 60 + s


def instant_civil(t: int) -> tuple[int, int, int, int, int, int]:
    days, rem = divmod(t, SECONDS_PER_DAY)
    y, m, d = _civil_from_days(days)
    h, rem = divmod(rem, 3600)
    mi, s = divmod(rem, 60)
    return y, m, d, h, mi, s


_INSTANT_RE = re.compile(
    r"^(?P<sign>[+-]?)(?P<y>\d+)"
    r"(?:-(?P<m>\d\d)(?:-(?P<d>\d\d)"
    r"(?:[T ](?P<h>\d\d):(?P<mi>\d\d)(?::(?P<s>\d\d))?)?)?)?Z?$"
)


def parse_instant(text: str) -> int:
    """Parse an ISO-8601-shaped timestamp (partial dates mean their first instant)."""
    if isinstance(text, int):
        return text
    m = _INSTANT_RE.match(text.strip())
    if m is None:
        raise ValueError(f"unparseable timestamp: {text!r}")
    year = int(m.group("y"))
    if m.group("sign") == "-":
        year = -year
    g = lambda k, default: int(m.group(k)) if m.group(k) else default
    return instant(year, g("m", 1) or 1, g("d", 1) or 1, g("h", 0), g("mi", 0), g("s", 0))


def format_instant(t: int) -> str:
    y, m, d, h, mi, s = instant_civil(t)
    sign = "-" if y < 0 else ""
    return f"{sign}{abs(y):04d}-{m:02d}-{d:02d}T{h:02d}:{mi:02d}:{s:02d}Z"


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeValue:
    """A point or range on the timeline; empty sentinel has all fields None."""

    main: int | None
    earliest: int | None
    latest: int | None
    tz_offset_minutes: int = 0
    calendar: str | None = None

    def __post_init__(self):
        if self.main is None:
            if self.earliest is not None or self.latest is not None:
                raise ValueError("empty TimeValue must have no bounds")
            return
        e, l = self.earliest, self.latest
        if e is None:
            e = self.main
        if l is None:
            l = self.main
        if e > l:
            e, l = l, e
        if not e <= self.main <= l:
            raise ValueError("TimeValue main outside [earliest, latest]")
        object.__setattr__(self, "earliest", e)
        object.__setattr__(self, "latest", l)

    @classmethod
    def empty(cls) -> "TimeValue":
        return cls(None, None, None)

    @classmethod
    def point(cls, t: int) -> "TimeValue":
        return cls(t, t, t)

    @property
    def is_empty(self) -> bool:
        return self.main is None


@dataclass(frozen=True)
class QuantityValue:
    """A decimal quantity with closed bounds and a unit; '1' is the unitless unit."""

    main: Decimal | None
    lower: Decimal | None
    upper: Decimal | None
    unit: str = "1"

    def __post_init__(self):
        if self.main is None:
            if self.lower is not None or self.upper is not None:
                raise ValueError("empty QuantityValue must have no bounds")
            return
        to_dec = lambda x: x if isinstance(x, Decimal) else Decimal(str(x))
        main = to_dec(self.main).normalize()
        lo = to_dec(self.lower).normalize() if self.lower is not None else main
        up = to_dec(self.upper).normalize() if self.upper is not None else main
        if lo > up:
            lo, up = up, lo
        if not lo <= main <= up:
            raise ValueError("QuantityValue main outside [lower, upper]")
        unit = self.unit or "1"
        if unit.startswith(WIKIDATA_ENTITY_PREFIX):
            unit = unit[len(WIKIDATA_ENTITY_PREFIX):]
        object.__setattr__(self, "main", main)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "unit", unit)

    @classmethod
    def empty(cls) -> "QuantityValue":
        return cls(None, None, None, "1")

    @classmethod
    def point(cls, x, unit: str = "1") -> "QuantityValue":
        d = x if isinstance(x, Decimal) else Decimal(str(x))
        return cls(d, d, d, unit)

    @property
    def is_empty(self) -> bool:
        return self.main is None


@dataclass(frozen=True)
class GeoCoordinatesValue:
    """A point with a square uncertainty region of +/- precision degrees."""

    lat: float | None
    lon: float | None
    precision: float = 0.0
    globe: str = "Q2"

    def __post_init__(self):
        if self.lat is None:
            if self.lon is not None:
                raise ValueError("empty GeoCoordinatesValue must have no longitude")
            return
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError("latitude out of range")
        if not -180.0 < self.lon <= 180.0:
            raise ValueError("longitude out of range")
        if self.precision < 0:
            raise ValueError("negative precision")
        globe = self.globe or "Q2"
        if globe.startswith(WIKIDATA_ENTITY_PREFIX):
            globe = globe[len(WIKIDATA_ENTITY_PREFIX):]
        object.__setattr__(self, "lat", float(self.lat))
        object.__setattr__(self, "lon", float(self.lon))
        object.__setattr__(self, "precision", float(self.precision))
        object.__setattr__(self, "globe", globe)

    @classmethod
    def empty(cls) -> "GeoCoordinatesValue":
        return cls(None, None)

    @property
    def is_empty(self) -> bool:
        return self.lat is None

    def lat_range(self) -> tuple[float, float]:
        return (max(self.lat - self.precision, -90.0), min(self.lat + self.precision, 90.0))

    def lon_range(self) -> tuple[float, float]:
        # Clipped; wraparound handling is refused elsewhere.
        return (max(self.lon - self.precision, -180.0), min(self.lon + self.precision, 180.0))


_LANG_TAG_RE = re.compile(r"^[a-z0-9]+(-[a-z0-9]+)*$")


def _canon_lang(tag: str) -> str:
    tag = tag.lower()
    if not _LANG_TAG_RE.match(tag):
        raise ValueError(f"malformed language tag: {tag!r}")
    return tag


@dataclass(frozen=True)
class StringValue:
    text: str


@dataclass(frozen=True)
class IriValue:
    iri: str


@dataclass(frozen=True)
class MonolingualTextValue:
    text: str
    lang: str

    def __post_init__(self):
        object.__setattr__(self, "lang", _canon_lang(self.lang))


@dataclass(frozen=True)
class MultilingualTextValue:
    texts: tuple[tuple[str, str], ...]  # sorted (lang, text) pairs

    def __post_init__(self):
        if isinstance(self.texts, dict):
            pairs = self.texts.items()
        else:
            pairs = self.texts
        canon = {}
        for lang, text in pairs:
            lang = _canon_lang(lang)
            if lang in canon and canon[lang] != text:
                raise ValueError(f"duplicate language tag: {lang}")
            canon[lang] = text
        object.__setattr__(self, "texts", tuple(sorted(canon.items())))

    def get(self, lang: str) -> str:
        lang = _canon_lang(lang)
        for tag, text in self.texts:
            if tag == lang:
                return text
        return ""


DataValue = (
    TimeValue
    | QuantityValue
    | GeoCoordinatesValue
    | StringValue
    | IriValue
    | MonolingualTextValue
    | MultilingualTextValue
)

IMPRECISE_TYPES = (TimeValue, QuantityValue, GeoCoordinatesValue)

DATATYPE_NAMES = {
    TimeValue: "TimeValue",
    QuantityValue: "QuantityValue",
    GeoCoordinatesValue: "GeoCoordinatesValue",
    StringValue: "StringValue",
    IriValue: "IriValue",
    MonolingualTextValue: "MonolingualTextValue",
    MultilingualTextValue: "MultilingualTextValue",
}
DATATYPE_BY_NAME = {name: cls for cls, name in DATATYPE_NAMES.items()}


def is_data_value(x) -> bool:
    return isinstance(
        x,
        (
            TimeValue,
            QuantityValue,
            GeoCoordinatesValue,
            StringValue,
            IriValue,
            MonolingualTextValue,
            MultilingualTextValue,
        ),
    )


def datatype_name(v) -> str:
    return DATATYPE_NAMES[type(v)]


# ---------------------------------------------------------------------------
# Canonical sort keys (used for deterministic ordering of attribute values)
# ---------------------------------------------------------------------------


def canon_key(term) -> tuple:
    """Total order key over entities and data values of any datatype."""
    if isinstance(term, str):
        return ("e", term)
    if isinstance(term, TimeValue):
        if term.is_empty:
            return ("t",)
        return ("t", term.main, term.earliest, term.latest, term.tz_offset_minutes, term.calendar or "")
    if isinstance(term, QuantityValue):
        if term.is_empty:
            return ("q",)
        return ("q", term.unit, str(term.main), str(term.lower), str(term.upper))
    if isinstance(term, GeoCoordinatesValue):
        if term.is_empty:
            return ("g",)
        return ("g", term.globe, term.lat, term.lon, term.precision)
    if isinstance(term, StringValue):
        return ("s", term.text)
    if isinstance(term, IriValue):
        return ("i", term.iri)
    if isinstance(term, MonolingualTextValue):
        return ("m", term.lang, term.text)
    if isinstance(term, MultilingualTextValue):
        return ("M", term.texts)
    raise TypeError(f"not a term: {term!r}")


# ---------------------------------------------------------------------------
# Equality
# ---------------------------------------------------------------------------


def dv_eq(a, b) -> bool:
    """Structural equality of canonical forms; False across datatypes."""
    if type(a) is not type(b):
        return False
    return a == b


def dv_neq(a, b) -> bool:
    return not dv_eq(a, b)


# ---------------------------------------------------------------------------
# Imprecise-value algebra
# ---------------------------------------------------------------------------


def _require_imprecise(v):
    if not isinstance(v, IMPRECISE_TYPES):
        raise DatatypeMismatchError(f"{datatype_name(v)} is a precise datatype")


def _check_pair(a, b):
    if type(a) is not type(b):
        raise DatatypeMismatchError(
            f"mixed datatypes: {datatype_name(a)} vs {datatype_name(b)}"
        )
    _require_imprecise(a)
    if isinstance(a, QuantityValue) and not (a.is_empty or b.is_empty):
        if a.unit != b.unit:
            raise UnitMismatchError(f"units differ: {a.unit} vs {b.unit}")
    if isinstance(a, GeoCoordinatesValue) and not (a.is_empty or b.is_empty):
        if a.globe != b.globe:
            raise GlobeMismatchError(f"globes differ: {a.globe} vs {b.globe}")


def iv_state(v) -> str:
    """'empty', 'precise', or 'imprecise' for an imprecise-datatype value."""
    _require_imprecise(v)
    if v.is_empty:
        return "empty"
    if isinstance(v, TimeValue):
        return "precise" if v.earliest == v.main == v.latest else "imprecise"
    if isinstance(v, QuantityValue):
        return "precise" if v.lower == v.main == v.upper else "imprecise"
    return "precise" if v.precision == 0 else "imprecise"


def _range_1d(v):
    if isinstance(v, TimeValue):
        return (v.earliest, v.latest)
    return (v.lower, v.upper)


def iv_relate(rel: str, a, b) -> bool:
    """overlaps / disjoint / main_eq / main_neq over same-datatype imprecise values."""
    _check_pair(a, b)
    if rel in ("main_eq", "main_neq"):
        if a.is_empty or b.is_empty:
            raise EmptyValueError("main comparison on empty value")
        if isinstance(a, GeoCoordinatesValue):
            eq = a.lat == b.lat and a.lon == b.lon
        elif isinstance(a, TimeValue):
            eq = a.main == b.main
        else:
            eq = a.main == b.main
        return eq if rel == "main_eq" else not eq
    if rel not in ("overlaps", "disjoint"):
        raise ValueError(f"unknown relation {rel!r}")
    if a.is_empty or b.is_empty:
        over = False
    elif isinstance(a, GeoCoordinatesValue):
        over = _ranges_overlap(a.lat_range(), b.lat_range()) and _ranges_overlap(
            a.lon_range(), b.lon_range()
        )
    else:
        over = _ranges_overlap(_range_1d(a), _range_1d(b))
    return over if rel == "overlaps" else not over


def _ranges_overlap(r1, r2) -> bool:
    return max(r1[0], r2[0]) <= min(r1[1], r2[1])


def _clamp(x, lo, hi):
    return lo if x < lo else hi if x > hi else x


def iv_intersect(a, b):
    """Smallest value whose range is the intersection; empty sentinel if disjoint.

    The main value stays at the first argument's main when possible, else it is
    clamped to the nearest bound (ranges are what commutes, not mains).
    """
    _check_pair(a, b)
    if a.is_empty or b.is_empty:
        return type(a).empty()
    if isinstance(a, GeoCoordinatesValue):
        lat_r = _range_isect(a.lat_range(), b.lat_range())
        lon_r = _range_isect(a.lon_range(), b.lon_range())
        if lat_r is None or lon_r is None:
            return GeoCoordinatesValue.empty()
        lat = _clamp(a.lat, *lat_r)
        lon = _clamp(a.lon, *lon_r)
        prec = max(lat_r[1] - lat, lat - lat_r[0], lon_r[1] - lon, lon - lon_r[0])
        return GeoCoordinatesValue(lat, lon, prec, a.globe)
    lo = max(_range_1d(a)[0], _range_1d(b)[0])
    hi = min(_range_1d(a)[1], _range_1d(b)[1])
    if lo > hi:
        return type(a).empty()
    main = _clamp(a.main, lo, hi)
    if isinstance(a, TimeValue):
        return TimeValue(main, lo, hi, a.tz_offset_minutes, a.calendar)
    return QuantityValue(main, lo, hi, a.unit)


def _range_isect(r1, r2):
    lo, hi = max(r1[0], r2[0]), min(r1[1], r2[1])
    return None if lo > hi else (lo, hi)


def iv_hull(a, b):
    """Smallest value whose range includes both operands; keeps a's main."""
    _check_pair(a, b)
    if a.is_empty:
        return b
    if b.is_empty:
        return a
    if isinstance(a, GeoCoordinatesValue):
        lat_r = (min(a.lat_range()[0], b.lat_range()[0]), max(a.lat_range()[1], b.lat_range()[1]))
        lon_r = (min(a.lon_range()[0], b.lon_range()[0]), max(a.lon_range()[1], b.lon_range()[1]))
        prec = max(lat_r[1] - a.lat, a.lat - lat_r[0], lon_r[1] - a.lon, a.lon - lon_r[0])
        return GeoCoordinatesValue(a.lat, a.lon, prec, a.globe)
    lo = min(_range_1d(a)[0], _range_1d(b)[0])
    hi = max(_range_1d(a)[1], _range_1d(b)[1])
    if isinstance(a, TimeValue):
        return TimeValue(a.main, lo, hi, a.tz_offset_minutes, a.calendar)
    return QuantityValue(a.main, lo, hi, a.unit)


# ---------------------------------------------------------------------------
# Ordering relations of three flavours (closed intervals)
# ---------------------------------------------------------------------------

_STRICT = {"lt": True, "gt": True, "le": False, "ge": False}
_LESSWARD = {"lt": True, "le": True, "gt": False, "ge": False}


def _interval_compare(flavour: str, rel: str, ar, br) -> bool:
    """Compare two closed intervals (or points for flavour 'main')."""
    if rel not in _STRICT:
        raise ValueError(f"unknown relation {rel!r}")
    alo, ahi = ar
    blo, bhi = br
    strict = _STRICT[rel]
    if not _LESSWARD[rel]:
        # a > b  <=>  b < a (mirror and reuse the lessward logic)
        alo, ahi, blo, bhi = blo, bhi, alo, ahi
    if flavour == "must":
        return ahi < blo if strict else ahi <= blo
    if flavour == "can":
        return alo < bhi if strict else alo <= bhi
    raise ValueError(f"unknown flavour {flavour!r}")


def qty_compare(flavour: str, rel: str, a: QuantityValue, b: QuantityValue) -> bool:
    _check_qty(a, b)
    if flavour == "main":
        return _point_rel(rel, a.main, b.main)
    return _interval_compare(flavour, rel, (a.lower, a.upper), (b.lower, b.upper))


def _check_qty(a, b):
    if not isinstance(a, QuantityValue) or not isinstance(b, QuantityValue):
        raise DatatypeMismatchError("qty_compare requires QuantityValue operands")
    if a.is_empty or b.is_empty:
        raise EmptyValueError("ordering on empty quantity")
    if a.unit != b.unit:
        raise UnitMismatchError(f"units differ: {a.unit} vs {b.unit}")


def _point_rel(rel, x, y):
    return {"lt": x < y, "le": x <= y, "gt": x > y, "ge": x >= y}[rel]


def time_compare(flavour: str, rel: str, a: TimeValue, b: TimeValue) -> bool:
    """before = strictly earlier on the timeline; after = strictly later."""
    if not isinstance(a, TimeValue) or not isinstance(b, TimeValue):
        raise DatatypeMismatchError("time_compare requires TimeValue operands")
    if a.is_empty or b.is_empty:
        raise EmptyValueError("ordering on empty time value")
    base = {"before": "lt", "after": "gt"}[rel]
    if flavour == "main":
        return _point_rel(base, a.main, b.main)
    return _interval_compare(flavour, base, (a.earliest, a.latest), (b.earliest, b.latest))


def geo_relate(direction: str, flavour: str, a: GeoCoordinatesValue, b: GeoCoordinatesValue) -> bool:
    if not isinstance(a, GeoCoordinatesValue) or not isinstance(b, GeoCoordinatesValue):
        raise DatatypeMismatchError("geo_relate requires GeoCoordinatesValue operands")
    if a.is_empty or b.is_empty:
        raise EmptyValueError("direction relation on empty coordinates")
    if a.globe != b.globe:
        raise GlobeMismatchError(f"globes differ: {a.globe} vs {b.globe}")
    if direction in ("east", "west"):
        for v in (a, b):
            if v.lon - v.precision < -180.0 or v.lon + v.precision > 180.0:
                raise LongitudeWrapError(
                    "longitude range crosses the antimeridian; comparison undefined"
                )
    axis = "lat" if direction in ("north", "south") else "lon"
    rel = "gt" if direction in ("north", "east") else "lt"
    if flavour == "plain":
        return _point_rel(rel, getattr(a, axis), getattr(b, axis))
    ar = a.lat_range() if axis == "lat" else a.lon_range()
    br = b.lat_range() if axis == "lat" else b.lon_range()
    return _interval_compare(flavour, rel, ar, br)


# ---------------------------------------------------------------------------
# Time part / extreme functions
# ---------------------------------------------------------------------------


def time_part(a: TimeValue, b: TimeValue, flavour: str, rel: str) -> TimeValue:
    """Restrict a to the points that must/can be before/after b's range.

    Points are integer seconds; 'before' is strict, so can-before keeps points
    up to b.latest - 1.  Returns the empty sentinel when nothing survives.
    """
    if not isinstance(a, TimeValue) or not isinstance(b, TimeValue):
        raise DatatypeMismatchError("time_part requires TimeValue operands")
    if a.is_empty or b.is_empty:
        raise EmptyValueError("time_part on empty operand")
    if rel == "before":
        cutoff = (b.latest if flavour == "can" else b.earliest) - 1
        lo, hi = a.earliest, min(a.latest, cutoff)
    elif rel == "after":
        cutoff = (b.earliest if flavour == "can" else b.latest) + 1
        lo, hi = max(a.earliest, cutoff), a.latest
    else:
        raise ValueError(f"unknown relation {rel!r}")
    if lo > hi:
        return TimeValue.empty()
    return TimeValue(_clamp(a.main, lo, hi), lo, hi, a.tz_offset_minutes, a.calendar)


def could_be_before(a: TimeValue, b: TimeValue) -> TimeValue:
    return time_part(a, b, "can", "before")


def could_be_after(a: TimeValue, b: TimeValue) -> TimeValue:
    return time_part(a, b, "can", "after")


def time_extreme(which: str, a: TimeValue, b: TimeValue) -> TimeValue:
    """Componentwise min ('first') or max ('last') of two time values."""
    if not isinstance(a, TimeValue) or not isinstance(b, TimeValue):
        raise DatatypeMismatchError("time_extreme requires TimeValue operands")
    if a.is_empty or b.is_empty:
        raise EmptyValueError("time_extreme on empty operand")
    pick = min if which == "first" else max
    return TimeValue(
        pick(a.main, b.main),
        pick(a.earliest, b.earliest),
        pick(a.latest, b.latest),
        a.tz_offset_minutes,
        a.calendar,
    )


# ---------------------------------------------------------------------------
# String relations and extractors
# ---------------------------------------------------------------------------


def str_relate(rel: str, a, b) -> bool:
    """Lexicographic order / regex match; monolingual tags must agree."""
    if isinstance(a, MonolingualTextValue) and isinstance(b, MonolingualTextValue):
        if a.lang != b.lang:
            return False
        at, bt = a.text, b.text
    elif isinstance(a, (StringValue, MonolingualTextValue)) and isinstance(b, StringValue):
        at, bt = a.text, b.text
    elif isinstance(a, StringValue) and isinstance(b, MonolingualTextValue):
        if rel == "matches":
            raise DatatypeMismatchError("pattern must be a StringValue")
        return False
    else:
        raise DatatypeMismatchError("string relation on non-string operands")
    if rel == "matches":
        try:
            return re.search(bt, at) is not None
        except re.error as exc:
            raise PatternError(f"bad pattern {bt!r}: {exc}") from exc
    if isinstance(a, MonolingualTextValue) and isinstance(b, StringValue):
        return False  # ordering requires equal language tags
    return _point_rel(rel, at, bt)


def text_extract(fn: str, v, lang: str | None = None) -> StringValue:
    if fn == "text":
        if isinstance(v, (StringValue,)):
            return v
        if isinstance(v, MonolingualTextValue):
            return StringValue(v.text)
        if isinstance(v, IriValue):
            return StringValue(v.iri)
        raise DatatypeMismatchError("text() expects a string-like value")
    if fn == "lang":
        if isinstance(v, MonolingualTextValue):
            return StringValue(v.lang)
        raise DatatypeMismatchError("lang() expects MonolingualTextValue")
    if fn == "text_for_lang":
        if isinstance(v, MultilingualTextValue):
            return StringValue(v.get(lang))
        raise DatatypeMismatchError("text_for_lang() expects MultilingualTextValue")
    raise ValueError(f"unknown extractor {fn!r}")
