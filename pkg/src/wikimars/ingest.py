"""Turning Wikibase entity JSON into store facts.

Each non-deprecated statement with a value mainsnak becomes one fact
``P(subject, object)``; qualifier snaks become attributes, the statement rank
becomes the reserved ``rank`` attribute, and unknown-value snaks introduce
fresh skolem entities.  Reference records are counted and dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from importlib import resources

from . import language as L
from . import values as V
from .errors import MalformedFactError, WikimarsError
from .language import parse_program
from .store import AttributeSet, Fact, Store

RANK_ATTR = "rank"
RANKS = ("preferred", "normal", "deprecated")

#: Wikibase time precision code -> span in years, for codes coarser than a
#: year.  Codes 10-14 (month..second) are handled positionally.
_YEAR_SPANS = {p: 10 ** (9 - p) for p in range(10)}


@dataclass
class IngestReport:
    """Counters for one ingestion run, plus machine-readable skip records."""

    facts: int = 0
    skolems: int = 0
    novalue_skipped: int = 0
    deprecated_skipped: int = 0
    references_ignored: int = 0
    malformed: int = 0
    novalue_records: list = field(default_factory=list)
    malformed_records: list = field(default_factory=list)

    def to_json(self):
        return {
            "facts": self.facts,
            "skolems": self.skolems,
            "novalue_skipped": self.novalue_skipped,
            "deprecated_skipped": self.deprecated_skipped,
            "references_ignored": self.references_ignored,
            "malformed": self.malformed,
            "novalue_records": self.novalue_records,
            "malformed_records": self.malformed_records,
        }


# ---------------------------------------------------------------------------
# Snak datavalue conversion
# ---------------------------------------------------------------------------


def _time_bounds(y, m, d, h, mi, s, precision):
    """Closed [earliest, latest] instants covered by a Wikibase time value."""
    if precision >= 14:
        t = V.instant(y, m, d, h, mi, s)
        return t, t
    if precision == 13:
        t = V.instant(y, m, d, h, mi, 0)
        return t, t + 59
    if precision == 12:
        t = V.instant(y, m, d, h, 0, 0)
        return t, t + 3599
    if precision == 11:
        t = V.instant(y, m, d)
        return t, t + V.SECONDS_PER_DAY - 1
    if precision == 10:
        start = V.instant(y, m, 1)
        ny, nm = (y + 1, 1) if m == 12 else (y, m + 1)
        return start, V.instant(ny, nm, 1) - 1
    if precision == 9:
        return V.instant(y, 1, 1), V.instant(y + 1, 1, 1) - 1
    span = _YEAR_SPANS.get(precision)
    if span is None:
        raise MalformedFactError(f"unknown time precision code: {precision!r}")
    aligned = (y // span) * span
    return V.instant(aligned, 1, 1), V.instant(aligned + span, 1, 1) - 1


def time_value_from_wikibase(value: dict) -> V.TimeValue:
    """Build a TimeValue from a Wikibase ``time`` datavalue payload."""
    text = value["time"]
    m = V._INSTANT_RE.match(text.strip())
    if m is None:
        raise MalformedFactError(f"unparseable wikibase time: {text!r}")
    y = int(m.group("y"))
    if m.group("sign") == "-":
        y = -y
    g = lambda k: int(m.group(k)) if m.group(k) else 0
    mo, d = g("m") or 1, g("d") or 1
    h, mi, s = g("h"), g("mi"), g("s")
    precision = int(value.get("precision", 11))
    earliest, latest = _time_bounds(y, mo, d, h, mi, s, precision)
    main = min(max(V.instant(y, mo, d, h, mi, s), earliest), latest)
    calendar = value.get("calendarmodel") or None
    if calendar and calendar.startswith(V.WIKIDATA_ENTITY_PREFIX):
        calendar = calendar[len(V.WIKIDATA_ENTITY_PREFIX):]
    return V.TimeValue(main, earliest, latest, int(value.get("timezone", 0)), calendar)


def datavalue_to_term(snak: dict):
    """Convert a value snak's datavalue into an entity id or DataValue."""
    dv = snak.get("datavalue")
    if not isinstance(dv, dict) or "value" not in dv or "type" not in dv:
        raise MalformedFactError(f"snak without a usable datavalue: {snak!r}")
    value, vtype = dv["value"], dv["type"]
    try:
        if vtype == "wikibase-entityid":
            ent = value.get("id")
            if not isinstance(ent, str) or not ent:
                raise MalformedFactError(f"entityid without id: {value!r}")
            return ent
        if vtype == "time":
            return time_value_from_wikibase(value)
        if vtype == "quantity":
            main = Decimal(value["amount"])
            lower = Decimal(value["lowerBound"]) if value.get("lowerBound") is not None else None
            upper = Decimal(value["upperBound"]) if value.get("upperBound") is not None else None
            return V.QuantityValue(main, lower, upper, value.get("unit", "1"))
        if vtype == "globecoordinate":
            return V.GeoCoordinatesValue(
                value["latitude"],
                value["longitude"],
                value.get("precision") or 0.0,
                value.get("globe", "Q2"),
            )
        if vtype == "monolingualtext":
            return V.MonolingualTextValue(value["text"], value["language"])
        if vtype == "string":
            if snak.get("datatype") == "url":
                return V.IriValue(value)
            return V.StringValue(value)
    except MalformedFactError:
        raise
    except (KeyError, TypeError, ValueError, InvalidOperation, AttributeError) as exc:
        raise MalformedFactError(f"malformed {vtype} datavalue: {exc}") from exc
    raise MalformedFactError(f"unknown datavalue type: {vtype!r}")


# ---------------------------------------------------------------------------
# Entity documents
# ---------------------------------------------------------------------------


def _snak_object(snak: dict, store: Store, report: IngestReport):
    """Resolve a snak to a term, a fresh skolem, or None (novalue)."""
    kind = snak.get("snaktype", "value")
    if kind == "novalue":
        return None
    if kind == "somevalue":
        report.skolems += 1
        return store.fresh_skolem()
    if kind == "value":
        return datavalue_to_term(snak)
    raise MalformedFactError(f"unknown snaktype: {kind!r}")


def _ingest_statement(subject: str, prop: str, st: dict, store: Store,
                      report: IngestReport, keep_deprecated: bool) -> None:
    rank = st.get("rank", "normal")
    if rank not in RANKS:
        raise MalformedFactError(f"unknown rank: {rank!r}")
    if rank == "deprecated" and not keep_deprecated:
        report.deprecated_skipped += 1
        return
    report.references_ignored += len(st.get("references", []))
    mainsnak = st.get("mainsnak")
    if not isinstance(mainsnak, dict):
        raise MalformedFactError("statement without mainsnak")
    obj = _snak_object(mainsnak, store, report)
    if obj is None:
        report.novalue_skipped += 1
        report.novalue_records.append({"subject": subject, "property": prop})
        return
    attrs: list[tuple[str, object]] = [(RANK_ATTR, rank)]
    for qprop, snaks in sorted((st.get("qualifiers") or {}).items()):
        for snak in snaks:
            qval = _snak_object(snak, store, report)
            if qval is None:
                report.novalue_skipped += 1
                report.novalue_records.append(
                    {"subject": subject, "property": prop, "qualifier": qprop}
                )
                continue
            attrs.append((qprop, qval))
    pairs: dict[str, list] = {}
    for a, v in attrs:
        pairs.setdefault(a, []).append(v)
    fact = Fact(prop, (subject, obj), AttributeSet.from_dict(pairs))
    store.assert_fact(fact)
    report.facts += 1


def ingest_entities(documents, store: Store, keep_deprecated: bool = False) -> IngestReport:
    """Map entity documents into the store; malformed snaks are counted and skipped."""
    report = IngestReport()
    for doc in documents:
        subject = doc.get("id")
        if not isinstance(subject, str) or not subject:
            report.malformed += 1
            report.malformed_records.append({"error": "document without id"})
            continue
        for prop, statements in sorted((doc.get("claims") or {}).items()):
            for st in statements:
                try:
                    _ingest_statement(subject, prop, st, store, report, keep_deprecated)
                except WikimarsError as exc:
                    report.malformed += 1
                    report.malformed_records.append(
                        {"subject": subject, "property": prop, "error": str(exc)}
                    )
    return report


def load_entity_documents(path) -> list[dict]:
    """Read entity documents from a JSON array or JSON-lines file."""
    with open(path, encoding="utf-8") as fh:
        head = fh.read(1)
        fh.seek(0)
        if head == "[":
            docs = json.load(fh)
        else:
            docs = [json.loads(line) for line in fh if line.strip()]
    if not isinstance(docs, list):
        raise MalformedFactError("entity file must hold a list of documents")
    return docs


# ---------------------------------------------------------------------------
# Rule sets
# ---------------------------------------------------------------------------


def typing_rules(registry: dict[str, str]) -> list[L.Rule]:
    """One rule per registered property typing its values, e.g. P569(s,o) -> TimeValue(o)."""
    rules = []
    for prop, datatype in sorted(registry.items()):
        if datatype not in V.DATATYPE_BY_NAME:
            raise WikimarsError(f"unknown datatype name for {prop}: {datatype!r}")
        rule = L.Rule(
            body=(L.RelAtom(prop, (L.Var("s"), L.Var("o")), None),),
            head=L.RelAtom(datatype, (L.Var("o"),), None),
            fn_name=None,
        )
        rules.append(rule)
    return rules


def data_file_text(name: str) -> str:
    """Contents of a packaged rule/constraint file under wikimars/data."""
    return resources.files("wikimars.data").joinpath(name).read_text(encoding="utf-8")


def builtin_ontology_rules() -> list[L.Rule]:
    """The six built-in ontology rules: subclass/subproperty transitivity,
    instance propagation, subproperty application, symmetric mirroring, and
    transitive chaining."""
    return list(parse_program(data_file_text("ontology.marpl")).rules)
