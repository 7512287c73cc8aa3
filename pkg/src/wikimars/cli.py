"""Batch command line: ingest -> close -> check / query / explain.

Snapshots (JSON-lines with a header) are the only currency between stages, so
every stage is reproducible and testable in isolation.  Exit codes: 0 ok,
1 violations found, 2 evaluation error, 64 usage error, 65 parse error,
66 closure limit exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import constraints as C
from . import engine
from . import ingest as I
from . import language as L
from .characterize import compile_program
from .errors import (
    EvaluationError,
    LimitExceededError,
    MalformedFactError,
    ParseError,
    SafetyError,
    SnapshotFormatError,
    WikimarsError,
)
from .store import Store

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_EVAL_ERROR = 2
EXIT_USAGE = 64
EXIT_PARSE = 65
EXIT_LIMIT = 66


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # map argparse usage errors onto exit 64
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Config files: plain "key = value" lines, '#' comments.  Keys are the long
# flag names without the leading dashes; repeatable flags take a
# comma-separated list; booleans are true/false.
# ---------------------------------------------------------------------------


def load_config(path: str) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


_REPEATABLE = {"rules", "constraints"}
_BOOLEAN = {"keep_deprecated", "no_provenance", "human", "builtin",
            "builtin_ontology", "hide_skolems"}
_INTEGER = {"max_rounds", "max_facts", "max_attr_values", "port"}


def _apply_config(parser: argparse.ArgumentParser, config: dict):
    defaults = {}
    for key, value in config.items():
        if key in _REPEATABLE:
            defaults[key] = [v.strip() for v in value.split(",") if v.strip()]
        elif key in _BOOLEAN:
            if value.lower() not in ("true", "false"):
                raise UsageError(f"config key {key}: expected true/false")
            defaults[key] = value.lower() == "true"
        elif key in _INTEGER:
            defaults[key] = int(value)
        else:
            defaults[key] = value
    parser.set_defaults(**defaults)


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _require_files(*paths):
    for p in paths:
        if p and not Path(p).exists():
            raise UsageError(f"no such file: {p}")


def _load_registry(path):
    if not path:
        return {}
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise MalformedFactError("property registry must be a JSON object")
    return data


def _load_programs(paths) -> L.Program:
    prog = L.Program()
    for p in paths or []:
        prog.merge(L.parse_program(Path(p).read_text(encoding="utf-8")))
    return prog


def _emit(obj, path, human, human_text=None):
    text = (human_text if human and human_text is not None
            else json.dumps(obj, sort_keys=True, indent=2) + "\n")
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _limits(args) -> engine.ClosureLimits:
    return engine.ClosureLimits(
        max_rounds=args.max_rounds,
        max_facts=args.max_facts,
        max_attr_values_per_fact=args.max_attr_values,
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    _require_files(args.entities, args.registry)
    docs = I.load_entity_documents(args.entities)
    registry = _load_registry(args.registry)  # validated fail-fast
    I.typing_rules(registry)
    store = Store()
    report = I.ingest_entities(docs, store, keep_deprecated=args.keep_deprecated)
    store.snapshot(args.out)
    human = None
    if args.human:
        j = report.to_json()
        human = "".join(f"{k}: {j[k]}\n" for k in sorted(j) if not k.endswith("_records"))
    _emit(report.to_json(), args.report, args.human, human)
    return EXIT_OK


def _closure_program(args) -> tuple:
    prog = _load_programs(args.rules)
    if args.builtin_ontology:
        prog.rules = I.builtin_ontology_rules() + prog.rules
    if args.registry:
        prog.rules += I.typing_rules(_load_registry(args.registry))
    return compile_program(prog)


def cmd_close(args) -> int:
    _require_files(args.input, args.registry, *(args.rules or []))
    store = Store.load(args.input)
    plan = _closure_program(args)
    result = engine.close(store, plan, _limits(args), provenance=not args.no_provenance)
    if result.report.limit_hit is None:
        store.closed = True
    store.snapshot(args.out)
    j = result.report.to_json()
    human = "".join(f"{k}: {json.dumps(j[k])}\n" for k in sorted(j)) if args.human else None
    _emit(j, args.report, args.human, human)
    if result.report.limit_hit is not None:
        print(f"closure aborted: {result.report.limit_hit}", file=sys.stderr)
        return EXIT_LIMIT
    return EXIT_OK


def _gather_constraints(args) -> list:
    prog = _load_programs(args.constraints)
    out = list(prog.constraints)
    if args.builtin:
        out += C.builtin_constraints()
    if args.registry:
        out += C.value_type_constraints(_load_registry(args.registry))
    return out


def cmd_check(args) -> int:
    _require_files(args.input, args.registry, *(args.constraints or []))
    store = Store.load(args.input)
    if not store.closed:
        print("warning: store snapshot is not marked closed; "
              "constraint results may be incomplete", file=sys.stderr)
    constraints = _gather_constraints(args)
    violations = C.check_all(store, constraints, include_skolems=not args.hide_skolems)
    if args.human:
        text = C.violations_table(violations)
    else:
        text = C.violations_jsonl(violations)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_VIOLATIONS if violations else EXIT_OK


def run_query(store: Store, text: str) -> list:
    atom, set_atoms = L.parse_query(text)
    if set_atoms and not isinstance(atom.sett, L.SetVar):
        raise ParseError("set atoms require the query atom to carry @SetVar")

    def pat(t):
        if isinstance(t, L.Var):
            return "?" + t.name
        if isinstance(t, (str,)) or t is None:
            return t
        if isinstance(t, L.FnApp):
            raise ParseError("function applications are not allowed in queries")
        return t  # data value

    attr_constraints = [
        (pat(sa.attr), pat(sa.value))
        for sa in set_atoms
        if sa.setvar.name == atom.sett.name
    ]
    for sa in set_atoms:
        if sa.setvar.name != atom.sett.name:
            raise ParseError(f"set atom uses unknown set variable {sa.setvar.name}")
    return [f for f, _ in store.match(pat(atom.pred), [pat(a) for a in atom.args],
                                      attr_constraints)]


def cmd_query(args) -> int:
    _require_files(args.input)
    store = Store.load(args.input)
    facts = run_query(store, args.pattern)
    if args.human:
        for f in facts:
            attrs = ", ".join(
                f"{a}: {L.print_term(v)}" for a, vs in f.attrs.pairs for v in vs
            )
            argl = ", ".join(L.print_term(a) for a in f.args)
            sys.stdout.write(f"{f.pred}({argl})" + (f" @ {{{attrs}}}" if attrs else "") + "\n")
    else:
        for f in facts:
            sys.stdout.write(json.dumps(f.to_json(), sort_keys=True) + "\n")
    return EXIT_OK


def cmd_explain(args) -> int:
    _require_files(args.input, args.registry, *(args.rules or []))
    store = Store.load(args.input)
    plan = _closure_program(args)
    result = engine.close(store, plan, _limits(args), provenance=True)
    matches = run_query(result.store, args.fact)
    if not matches:
        raise EvaluationError(f"no fact matches {args.fact!r}")
    for fact in matches:
        tree = engine.explain(result, fact)
        if args.human:
            sys.stdout.write(tree.format() + "\n")
        else:
            sys.stdout.write(json.dumps(tree.to_json(), sort_keys=True) + "\n")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ingest_args = argparse.Namespace(
        entities=args.entities, registry=args.registry,
        keep_deprecated=args.keep_deprecated, out=str(out_dir / "base.snap"),
        report=str(out_dir / "ingest-report.json"), human=False,
    )
    rc = cmd_ingest(ingest_args)
    if rc:
        return rc
    close_args = argparse.Namespace(
        input=str(out_dir / "base.snap"), out=str(out_dir / "closed.snap"),
        rules=args.rules, builtin_ontology=args.builtin_ontology,
        registry=args.registry, no_provenance=args.no_provenance,
        max_rounds=args.max_rounds, max_facts=args.max_facts,
        max_attr_values=args.max_attr_values,
        report=str(out_dir / "closure-report.json"), human=False,
    )
    rc = cmd_close(close_args)
    if rc:
        return rc
    check_args = argparse.Namespace(
        input=str(out_dir / "closed.snap"), constraints=args.constraints,
        builtin=args.builtin, registry=args.registry,
        hide_skolems=args.hide_skolems, human=args.human,
        out=str(out_dir / ("violations." + ("txt" if args.human else "jsonl"))),
    )
    return cmd_check(check_args)


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_limit_flags(p):
    p.add_argument("--max-rounds", type=int, default=64)
    p.add_argument("--max-facts", type=int, default=10_000_000)
    p.add_argument("--max-attr-values", type=int, default=1000)


def _add_close_flags(p):
    p.add_argument("--rules", action="append", metavar="FILE")
    p.add_argument("--builtin-ontology", action="store_true",
                   help="include the built-in ontology rules")
    p.add_argument("--registry", metavar="FILE",
                   help="property registry JSON (adds typing rules)")
    p.add_argument("--no-provenance", action="store_true")
    _add_limit_flags(p)


def _add_check_flags(p):
    p.add_argument("--constraints", action="append", metavar="FILE")
    p.add_argument("--builtin", action="store_true",
                   help="include the built-in constraint templates")
    p.add_argument("--hide-skolems", action="store_true",
                   help="suppress violations mentioning skolem entities")


def build_parser() -> _Parser:
    parser = _Parser(prog="wikimars", description=__doc__)
    parser.add_argument("--config", metavar="FILE",
                        help="key = value file supplying flag defaults")
    sub = parser.add_subparsers(dest="command")
    parser.subcommands = {}

    def add_parser(name, **kw):
        p = sub.add_parser(name, **kw)
        parser.subcommands[name] = p
        return p

    p = add_parser("ingest", help="entity JSON -> store snapshot")
    p.add_argument("--entities", required=True, metavar="FILE")
    p.add_argument("--registry", metavar="FILE")
    p.add_argument("--keep-deprecated", action="store_true")
    p.add_argument("--out", required=True, metavar="SNAP")
    p.add_argument("--report", metavar="FILE")
    p.add_argument("--human", action="store_true")
    p.set_defaults(fn=cmd_ingest)

    p = add_parser("close", help="snapshot + rules -> closed snapshot")
    p.add_argument("--in", dest="input", required=True, metavar="SNAP")
    p.add_argument("--out", required=True, metavar="SNAP")
    _add_close_flags(p)
    p.add_argument("--report", metavar="FILE")
    p.add_argument("--human", action="store_true")
    p.set_defaults(fn=cmd_close)

    p = add_parser("check", help="closed snapshot + constraints -> violations")
    p.add_argument("--in", dest="input", required=True, metavar="SNAP")
    _add_check_flags(p)
    p.add_argument("--registry", metavar="FILE",
                   help="property registry JSON (adds value-type constraints)")
    p.add_argument("--out", metavar="FILE")
    p.add_argument("--human", action="store_true")
    p.set_defaults(fn=cmd_check)

    p = add_parser("query", help="match a pattern against a snapshot")
    p.add_argument("--in", dest="input", required=True, metavar="SNAP")
    p.add_argument("pattern")
    p.add_argument("--human", action="store_true")
    p.set_defaults(fn=cmd_query)

    p = add_parser("explain", help="derivation tree for a closed fact")
    p.add_argument("--in", dest="input", required=True, metavar="SNAP")
    _add_close_flags(p)
    p.add_argument("fact", help="query pattern selecting the fact(s) to explain")
    p.add_argument("--human", action="store_true")
    p.set_defaults(fn=cmd_explain)

    p = add_parser("pipeline", help="ingest, close, and check in one run")
    p.add_argument("--entities", required=True, metavar="FILE")
    p.add_argument("--keep-deprecated", action="store_true")
    _add_close_flags(p)
    _add_check_flags(p)
    p.add_argument("--out-dir", required=True, metavar="DIR")
    p.add_argument("--human", action="store_true")
    p.set_defaults(fn=cmd_pipeline)

    p = add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns, _ = parser.parse_known_args(argv)
        if getattr(ns, "config", None):
            _require_files(ns.config)
            config = load_config(ns.config)
            _apply_config(parser, config)
            # subparsers parse into their own namespace, so they need the
            # config defaults too
            subparser = parser.subcommands.get(getattr(ns, "command", None))
            if subparser is not None:
                _apply_config(subparser, config)
        args = parser.parse_args(argv)
        if not getattr(args, "fn", None):
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, SnapshotFormatError, MalformedFactError, SafetyError,
            json.JSONDecodeError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except LimitExceededError as exc:
        print(f"limit exceeded: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (EvaluationError, WikimarsError) as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL_ERROR


def entrypoint():  # console script
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
