"""wikimars: multi-attributed reasoning and constraint checking.

A store of facts whose statements carry attribute sets (Wikidata-style
qualifiers), a rule language whose consequents compute attribute sets via
per-qualifier characterizations, a semi-naive forward-chaining engine, and a
constraint checker with counting quantifiers over the closed store.
"""

from .characterize import ExecutionPlan, compile_plan, compile_program, expand_materialized
from .constraints import (
    Violation,
    builtin_constraints,
    check_all,
    eval_formula,
    find_violations,
    value_type_constraints,
)
from .engine import ClosureLimits, ClosureReport, ClosureResult, close, explain, step
from .errors import (
    EvaluationError,
    LimitExceededError,
    MalformedFactError,
    ParseError,
    SafetyError,
    SnapshotFormatError,
    WikimarsError,
)
from .ingest import IngestReport, builtin_ontology_rules, ingest_entities, typing_rules
from .language import (
    Constraint,
    Program,
    Rule,
    parse_formula,
    parse_program,
    parse_query,
    parse_rule,
)
from .store import AttributeSet, Fact, Store, make_fact
from .values import (
    DataValue,
    GeoCoordinatesValue,
    IriValue,
    MonolingualTextValue,
    MultilingualTextValue,
    QuantityValue,
    StringValue,
    TimeValue,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeSet",
    "ClosureLimits",
    "ClosureReport",
    "ClosureResult",
    "Constraint",
    "DataValue",
    "EvaluationError",
    "ExecutionPlan",
    "Fact",
    "GeoCoordinatesValue",
    "IngestReport",
    "IriValue",
    "LimitExceededError",
    "MalformedFactError",
    "MonolingualTextValue",
    "MultilingualTextValue",
    "ParseError",
    "Program",
    "QuantityValue",
    "Rule",
    "SafetyError",
    "SnapshotFormatError",
    "Store",
    "StringValue",
    "TimeValue",
    "Violation",
    "WikimarsError",
    "builtin_constraints",
    "builtin_ontology_rules",
    "check_all",
    "close",
    "compile_plan",
    "compile_program",
    "eval_formula",
    "expand_materialized",
    "explain",
    "find_violations",
    "ingest_entities",
    "make_fact",
    "parse_formula",
    "parse_program",
    "parse_query",
    "parse_rule",
    "step",
    "typing_rules",
    "value_type_constraints",
]
