"""FastAPI application: request/response models and endpoint handlers."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .. import constraints as C
from .. import engine
from .. import ingest as I
from .. import language as L
from ..characterize import compile_program
from ..cli import run_query
from ..errors import (
    EvaluationError,
    MalformedFactError,
    ParseError,
    SafetyError,
    WikimarsError,
)
from ..store import Fact, Store


class LimitsModel(BaseModel):
    max_rounds: int = 64
    max_facts: int = 10_000_000
    max_attr_values_per_fact: int = 1000


class IngestRequest(BaseModel):
    entities: list[dict]
    keep_deprecated: bool = False


class IngestResponse(BaseModel):
    facts: list[dict]
    report: dict


class CloseRequest(BaseModel):
    facts: list[dict]
    rules: str = ""  # rule/characterization/function source text
    builtin_ontology: bool = False
    registry: dict[str, str] = Field(default_factory=dict)
    limits: LimitsModel = Field(default_factory=LimitsModel)
    provenance: bool = False


class CloseResponse(BaseModel):
    facts: list[dict]
    report: dict
    closed: bool


class CheckRequest(BaseModel):
    facts: list[dict]
    constraints: str = ""
    builtin: bool = False
    registry: dict[str, str] = Field(default_factory=dict)
    include_skolems: bool = True


class CheckResponse(BaseModel):
    violations: list[dict]


class QueryRequest(BaseModel):
    facts: list[dict]
    query: str


class QueryResponse(BaseModel):
    facts: list[dict]


class ExplainRequest(BaseModel):
    facts: list[dict]
    rules: str = ""
    builtin_ontology: bool = False
    fact: str  # query pattern selecting the fact(s) to explain
    limits: LimitsModel = Field(default_factory=LimitsModel)


class ExplainResponse(BaseModel):
    trees: list[dict]


def _store_from(facts: list[dict]) -> Store:
    store = Store()
    for obj in facts:
        store.assert_fact(Fact.from_json(obj))
    return store


def _plan_from(rules_text: str, builtin_ontology: bool, registry: dict):
    prog = L.parse_program(rules_text) if rules_text else L.Program()
    if builtin_ontology:
        prog.rules = I.builtin_ontology_rules() + prog.rules
    if registry:
        prog.rules += I.typing_rules(registry)
    return compile_program(prog)


def create_app() -> FastAPI:
    app = FastAPI(title="wikimars", version="0.1.0")

    @app.exception_handler(WikimarsError)
    async def _wikimars_error(request, exc: WikimarsError):
        status = 422 if isinstance(exc, (ParseError, MalformedFactError, SafetyError)) else 400
        from fastapi.responses import JSONResponse

        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/ingest", response_model=IngestResponse)
    def ingest(req: IngestRequest):
        store = Store()
        report = I.ingest_entities(req.entities, store, keep_deprecated=req.keep_deprecated)
        return IngestResponse(
            facts=[f.to_json() for f in store.sorted_facts()], report=report.to_json()
        )

    @app.post("/close", response_model=CloseResponse)
    def close(req: CloseRequest):
        store = _store_from(req.facts)
        plan = _plan_from(req.rules, req.builtin_ontology, req.registry)
        limits = engine.ClosureLimits(**req.limits.model_dump())
        result = engine.close(store, plan, limits, provenance=req.provenance)
        return CloseResponse(
            facts=[f.to_json() for f in store.sorted_facts()],
            report=result.report.to_json(),
            closed=result.report.limit_hit is None,
        )

    @app.post("/check", response_model=CheckResponse)
    def check(req: CheckRequest):
        store = _store_from(req.facts)
        constraints = list(L.parse_program(req.constraints).constraints) if req.constraints else []
        if req.builtin:
            constraints += C.builtin_constraints()
        if req.registry:
            constraints += C.value_type_constraints(req.registry)
        violations = C.check_all(store, constraints, include_skolems=req.include_skolems)
        return CheckResponse(violations=[v.to_json() for v in violations])

    @app.post("/query", response_model=QueryResponse)
    def query(req: QueryRequest):
        store = _store_from(req.facts)
        return QueryResponse(facts=[f.to_json() for f in run_query(store, req.query)])

    @app.post("/explain", response_model=ExplainResponse)
    def explain(req: ExplainRequest):
        store = _store_from(req.facts)
        plan = _plan_from(req.rules, req.builtin_ontology, {})
        limits = engine.ClosureLimits(**req.limits.model_dump())
        result = engine.close(store, plan, limits, provenance=True)
        matches = run_query(result.store, req.fact)
        if not matches:
            raise HTTPException(status_code=404, detail=f"no fact matches {req.fact!r}")
        trees = [engine.explain(result, f).to_json() for f in matches]
        return ExplainResponse(trees=trees)

    return app


__all__ = ["create_app", "EvaluationError"]
