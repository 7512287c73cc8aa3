"""Concrete syntax, AST, and well-formedness checks for rules and constraints.

Grammar sketch (documented in docs/grammar.md):

    rule        := body '->' headatom ['with' NAME] '.'
    body        := atom (',' atom)*
    atom        := pred '(' term (',' term)* ')' ['@' setterm]
                 | '(' term ':' term ')' 'in' SETVAR
                 | term ('=' | '!=') term
    setterm     := SETVAR | '{' term ':' term (',' term ':' term)* '}'
    fndef       := 'fn' NAME '{' clause* '}'
    clause      := [cond (',' cond)*] '=>' '(' term ':' term ')' (',' ...)* ';'
    chardecl    := 'qualifier' ATTR ('ignore' | 'additive'
                 | 'combine' 'fn' '=' NAME 'guard' '=' NAME
                 | 'blend' 'combine' '(' ATTR '=' NAME (',' ATTR '=' NAME)* ')'
                             'fn' '=' NAME 'guard' '=' NAME) '.'
    constraint  := 'constraint' NAME ['(' var (',' var)* ')'] [severity] ':' formula '.'
    formula     := implication with '&' '|' '!' , 'forall'/'exists' vars '.' sub,
                   counting 'exists' ('>='|'<='|'=') INT var '.' sub

Identifier classification: ``x``, ``y2``, ``?anything`` are object variables;
``S``, ``U1`` (single uppercase letter + digits, except Q/P entity ids) are
set variables; everything else is a constant.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal

from . import theory
from . import values as V
from .errors import ParseError, SafetyError
from .values import DataValue

# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class SetVar:
    name: str


@dataclass(frozen=True)
class FnApp:
    fn: str
    args: tuple


ObjTerm = Var | str | DataValue | FnApp


@dataclass(frozen=True)
class ExplicitSet:
    pairs: tuple  # of (ObjTerm, ObjTerm)


@dataclass(frozen=True)
class RelAtom:
    pred: ObjTerm
    args: tuple
    sett: object = None  # SetVar | ExplicitSet | None


@dataclass(frozen=True)
class SetMemberAtom:
    attr: ObjTerm
    value: ObjTerm
    setvar: SetVar


@dataclass(frozen=True)
class DatatypeAtom:
    rel: str
    args: tuple


@dataclass(frozen=True)
class EqAtom:
    left: ObjTerm
    right: ObjTerm
    negated: bool = False


@dataclass(frozen=True)
class SetEqAtom:
    """Internal: produced by normalization when body atoms shared a set var."""

    left: SetVar
    right: SetVar


@dataclass(frozen=True)
class Rule:
    body: tuple
    head: RelAtom
    fn_name: str | None = None


@dataclass(frozen=True)
class FnClause:
    conds: tuple  # SetMemberAtom | DatatypeAtom
    outputs: tuple  # of (ObjTerm attr, ObjTerm value)


@dataclass(frozen=True)
class FnDef:
    name: str
    clauses: tuple


# --- characterization policies ---------------------------------------------


@dataclass(frozen=True)
class Ignore:
    pass


@dataclass(frozen=True)
class Additive:
    pass


@dataclass(frozen=True)
class Combining:
    fn: str
    guard: str


@dataclass(frozen=True)
class Blending:
    inputs: tuple  # ((attr, combine_fn), (co_attr, combine_fn))
    blend_fn: str
    guard: str


@dataclass(frozen=True)
class CharDecl:
    attr: str
    policy: object


# --- formulae ---------------------------------------------------------------


@dataclass(frozen=True)
class Not:
    sub: object


@dataclass(frozen=True)
class And:
    subs: tuple


@dataclass(frozen=True)
class Or:
    subs: tuple


@dataclass(frozen=True)
class Implies:
    left: object
    right: object


@dataclass(frozen=True)
class Quant:
    kind: str  # forall | exists | atleast | atmost | exactly
    vars: tuple  # Var | SetVar
    sub: object
    count: int | None = None


@dataclass(frozen=True)
class Constraint:
    name: str
    free_vars: tuple
    formula: object
    severity: str = "violation"


@dataclass
class Program:
    rules: list = field(default_factory=list)
    fns: list = field(default_factory=list)
    chars: list = field(default_factory=list)
    constraints: list = field(default_factory=list)

    def merge(self, other: "Program") -> "Program":
        self.rules += other.rules
        self.fns += other.fns
        self.chars += other.chars
        self.constraints += other.constraints
        return self


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<tzoff>[+-]\d\d:\d\d)
  | (?P<date>[+-]?\d{1,6}-\d\d(?:-\d\d(?:[T]\d\d:\d\d(?::\d\d)?)?)?Z?)
  | (?P<number>[+-]?\d+\.\d+)
  | (?P<int>[+-]?\d+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<arrow>->|=>)
  | (?P<op><=|>=|!=|[(){},:;.@=|&!])
  | (?P<ident>\??[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

KEYWORDS = {
    "with",
    "in",
    "fn",
    "qualifier",
    "constraint",
    "forall",
    "exists",
    "ignore",
    "additive",
    "combine",
    "blend",
    "guard",
    "warning",
    "violation",
}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind != "ws":
            tokens.append(Token(kind, tok, line, col))
        nl = tok.count("\n")
        if nl:
            line += nl
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


_OBJ_VAR_RE = re.compile(r"^[a-z][0-9]*$")
_SET_VAR_RE = re.compile(r"^[A-Z][0-9]*$")
_ENTITY_ID_RE = re.compile(r"^[QP][0-9]+$")

VALUE_LITERAL_HEADS = {"time", "qty", "geo", "mono", "multi", "iri"}


def classify_ident(name: str):
    """Return a Var, SetVar, or constant string for a bare identifier."""
    if name.startswith("?"):
        return Var(name[1:])
    if _ENTITY_ID_RE.match(name):
        return name
    if _OBJ_VAR_RE.match(name):
        return Var(name)
    if _SET_VAR_RE.match(name):
        return SetVar(name)
    return name


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead=0) -> Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind != "string"

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text or tok.kind == "string":
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def error(self, msg: str):
        tok = self.peek()
        raise ParseError(msg, tok.line, tok.col)

    # -- program ------------------------------------------------------------

    def parse_program(self) -> Program:
        prog = Program()
        fn_names = set()
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.text == "fn":
                fndef = self.parse_fndef()
                if fndef.name in fn_names:
                    raise ParseError(f"duplicate function name {fndef.name!r}", tok.line, tok.col)
                fn_names.add(fndef.name)
                prog.fns.append(fndef)
            elif tok.text == "qualifier":
                prog.chars.append(self.parse_chardecl())
            elif tok.text == "constraint":
                prog.constraints.append(self.parse_constraint())
            else:
                prog.rules.append(self.parse_rule())
        return prog

    # -- rules ---------------------------------------------------------------

    def parse_rule(self) -> Rule:
        body = [self.parse_atom()]
        while self.accept(","):
            body.append(self.parse_atom())
        self.expect("->")
        head = self.parse_atom()
        if not isinstance(head, RelAtom):
            self.error("rule head must be a relational atom")
        fn_name = None
        if self.accept("with"):
            tok = self.next()
            if tok.kind != "ident":
                raise ParseError("function name expected after 'with'", tok.line, tok.col)
            fn_name = tok.text
        self.expect(".")
        return Rule(tuple(body), head, fn_name)

    def parse_atom(self):
        tok = self.peek()
        if tok.text == "(":
            # set atom: ( a : b ) in S
            self.next()
            a = self.parse_term()
            self.expect(":")
            b = self.parse_term()
            self.expect(")")
            self.expect("in")
            sv = self.parse_setvar()
            return SetMemberAtom(a, b, sv)
        left = self.parse_term(allow_pred=True)
        if self.at("(") and (isinstance(left, (Var, str))):
            self.next()
            args = [self.parse_term()]
            while self.accept(","):
                args.append(self.parse_term())
            self.expect(")")
            if isinstance(left, str) and left in theory.RELATIONS:
                sig = theory.RELATIONS[left]
                if sig.arity != len(args):
                    self.error(f"relation {left} expects {sig.arity} arguments")
                return DatatypeAtom(left, tuple(args))
            if isinstance(left, str) and left in theory.FUNCTIONS:
                app = FnApp(left, tuple(args))
                if self.accept("="):
                    return EqAtom(app, self.parse_term())
                if self.accept("!="):
                    return EqAtom(app, self.parse_term(), negated=True)
                self.error(f"datatype function {left!r} used as a predicate")
            sett = None
            if self.accept("@"):
                sett = self.parse_setterm()
            return RelAtom(left, tuple(args), sett)
        if self.accept("="):
            return EqAtom(left, self.parse_term())
        if self.accept("!="):
            return EqAtom(left, self.parse_term(), negated=True)
        self.error("atom expected")

    def parse_setvar(self) -> SetVar:
        tok = self.next()
        sv = classify_ident(tok.text) if tok.kind == "ident" else None
        if not isinstance(sv, SetVar):
            raise ParseError("set variable expected", tok.line, tok.col)
        return sv

    def parse_setterm(self):
        if self.at("{"):
            self.next()
            pairs = []
            if not self.at("}"):
                while True:
                    a = self.parse_term()
                    self.expect(":")
                    b = self.parse_term()
                    pairs.append((a, b))
                    if not self.accept(","):
                        break
            self.expect("}")
            return ExplicitSet(tuple(pairs))
        return self.parse_setvar()

    # -- terms ---------------------------------------------------------------

    def parse_term(self, allow_pred=False):
        tok = self.peek()
        if tok.kind == "string":
            self.next()
            return V.StringValue(_unquote(tok.text))
        if tok.kind in ("int", "number"):
            self.error("bare numbers are not terms; use qty(...) or time(...)")
        if tok.kind != "ident":
            self.error("term expected")
        name = tok.text
        if name in VALUE_LITERAL_HEADS and self.peek(1).text == "(":
            return self.parse_value_literal()
        sym = classify_ident(name)
        if isinstance(sym, SetVar) and not allow_pred:
            self.error(f"set variable {name} used as an object term")
        # function application (datatype functions only)
        if self.peek(1).text == "(" and not allow_pred:
            if isinstance(sym, str) and name not in KEYWORDS:
                self.next()
                self.next()  # '('
                args = [self.parse_term()]
                while self.accept(","):
                    args.append(self.parse_term())
                self.expect(")")
                if name not in theory.FUNCTIONS:
                    raise ParseError(f"unknown datatype function {name!r}", tok.line, tok.col)
                sig = theory.FUNCTIONS[name]
                if sig.arity != len(args):
                    raise ParseError(
                        f"function {name} expects {sig.arity} arguments", tok.line, tok.col
                    )
                return FnApp(name, tuple(args))
        self.next()
        return sym

    def parse_value_literal(self):
        head = self.next().text
        self.expect("(")
        if head == "time":
            return self._time_literal()
        if head == "qty":
            return self._qty_literal()
        if head == "geo":
            return self._geo_literal()
        if head == "mono":
            text = self._string_arg()
            self.expect(",")
            lang = self._lang_arg()
            self.expect(")")
            return V.MonolingualTextValue(text, lang)
        if head == "multi":
            pairs = {}
            if not self.at(")"):
                while True:
                    lang = self._lang_arg()
                    self.expect("=")
                    pairs[lang] = self._string_arg()
                    if not self.accept(","):
                        break
            self.expect(")")
            return V.MultilingualTextValue(tuple(pairs.items()))
        if head == "iri":
            text = self._string_arg()
            self.expect(")")
            return V.IriValue(text)
        self.error(f"unknown value literal {head!r}")

    def _string_arg(self) -> str:
        tok = self.next()
        if tok.kind != "string":
            raise ParseError("quoted string expected", tok.line, tok.col)
        return _unquote(tok.text)

    def _lang_arg(self) -> str:
        tok = self.next()
        if tok.kind == "string":
            return _unquote(tok.text)
        if tok.kind == "ident":
            return tok.text
        raise ParseError("language tag expected", tok.line, tok.col)

    def _instant_arg(self) -> int:
        tok = self.next()
        if tok.kind == "date":
            return V.parse_instant(tok.text)
        if tok.kind == "int":
            return V.instant(int(tok.text))
        raise ParseError("date expected", tok.line, tok.col)

    def _time_literal(self):
        if self.accept(")"):
            return V.TimeValue.empty()
        fields = {}
        order = ["main", "earliest", "latest"]
        pos = 0
        while True:
            tok = self.peek()
            if tok.kind == "ident" and self.peek(1).text == "=":
                key = self.next().text
                self.next()
                if key == "tz":
                    tz = self.next()
                    if tz.kind != "tzoff":
                        raise ParseError("timezone offset expected", tz.line, tz.col)
                    sign = -1 if tz.text[0] == "-" else 1
                    h, m = tz.text[1:].split(":")
                    fields["tz"] = sign * (int(h) * 60 + int(m))
                elif key == "calendar":
                    cal = self.next()
                    fields["calendar"] = cal.text
                elif key in order:
                    fields[key] = self._instant_arg()
                else:
                    raise ParseError(f"unknown time field {key!r}", tok.line, tok.col)
            else:
                if pos >= len(order):
                    self.error("too many positional time fields")
                fields[order[pos]] = self._instant_arg()
                pos += 1
            if not self.accept(","):
                break
        self.expect(")")
        if "main" not in fields:
            self.error("time literal needs a main value")
        return V.TimeValue(
            fields["main"],
            fields.get("earliest"),
            fields.get("latest"),
            fields.get("tz", 0),
            fields.get("calendar"),
        )

    def _decimal_arg(self) -> Decimal:
        tok = self.next()
        if tok.kind in ("int", "number"):
            return Decimal(tok.text)
        raise ParseError("number expected", tok.line, tok.col)

    def _qty_literal(self):
        if self.accept(")"):
            return V.QuantityValue.empty()
        nums = [self._decimal_arg()]
        unit = "1"
        while self.accept(","):
            tok = self.peek()
            if tok.kind == "ident" and tok.text == "unit":
                self.next()
                self.expect("=")
                unit = self.next().text
            else:
                nums.append(self._decimal_arg())
        self.expect(")")
        if len(nums) == 1:
            return V.QuantityValue.point(nums[0], unit)
        if len(nums) == 3:
            return V.QuantityValue(nums[0], nums[1], nums[2], unit)
        self.error("qty literal takes 1 or 3 numbers")

    def _geo_literal(self):
        if self.accept(")"):
            return V.GeoCoordinatesValue.empty()
        fields = {"prec": Decimal(0), "globe": "Q2"}
        while True:
            tok = self.next()
            if tok.kind != "ident" or not self.accept("="):
                raise ParseError("geo literal uses key=value fields", tok.line, tok.col)
            if tok.text == "globe":
                fields["globe"] = self.next().text
            elif tok.text in ("lat", "lon", "prec"):
                fields[tok.text] = self._decimal_arg()
            else:
                raise ParseError(f"unknown geo field {tok.text!r}", tok.line, tok.col)
            if not self.accept(","):
                break
        self.expect(")")
        if "lat" not in fields or "lon" not in fields:
            self.error("geo literal needs lat and lon")
        return V.GeoCoordinatesValue(
            float(fields["lat"]), float(fields["lon"]), float(fields["prec"]), fields["globe"]
        )

    # -- function definitions ------------------------------------------------

    def parse_fndef(self) -> FnDef:
        self.expect("fn")
        tok = self.next()
        if tok.kind != "ident":
            raise ParseError("function name expected", tok.line, tok.col)
        name = tok.text
        self.expect("{")
        clauses = []
        while not self.accept("}"):
            conds = []
            if not self.at("=>"):
                while True:
                    atom = self.parse_atom()
                    if not isinstance(atom, (SetMemberAtom, DatatypeAtom)):
                        self.error("function clause conditions are set atoms or datatype atoms")
                    conds.append(atom)
                    if not self.accept(","):
                        break
            self.expect("=>")
            outputs = []
            while True:
                self.expect("(")
                a = self.parse_term()
                self.expect(":")
                b = self.parse_term()
                self.expect(")")
                outputs.append((a, b))
                if not self.accept(","):
                    break
            self.expect(";")
            clauses.append(FnClause(tuple(conds), tuple(outputs)))
        return FnDef(name, tuple(clauses))

    # -- characterizations ---------------------------------------------------

    def parse_chardecl(self) -> CharDecl:
        self.expect("qualifier")
        attr_tok = self.next()
        if attr_tok.kind != "ident":
            raise ParseError("attribute id expected", attr_tok.line, attr_tok.col)
        attr = attr_tok.text
        tok = self.next()
        if tok.text == "ignore":
            policy = Ignore()
        elif tok.text == "additive":
            policy = Additive()
        elif tok.text == "combine":
            fn = self._kv("fn")
            guard = self._kv("guard")
            self._check_fn(fn, tok)
            self._check_rel(guard, 1, tok)
            policy = Combining(fn, guard)
        elif tok.text == "blend":
            self.expect("combine")
            self.expect("(")
            inputs = []
            while True:
                a = self.next().text
                self.expect("=")
                f = self.next().text
                self._check_fn(f, tok)
                inputs.append((a, f))
                if not self.accept(","):
                    break
            self.expect(")")
            fn = self._kv("fn")
            guard = self._kv("guard")
            self._check_fn(fn, tok)
            self._check_rel(guard, 2, tok)
            if len(inputs) != 2 or inputs[0][0] != attr:
                raise ParseError(
                    "blend takes exactly two combine inputs, the first being the "
                    "characterized attribute",
                    tok.line,
                    tok.col,
                )
            policy = Blending(tuple(inputs), fn, guard)
        else:
            raise ParseError(f"unknown characterization {tok.text!r}", tok.line, tok.col)
        self.expect(".")
        return CharDecl(attr, policy)

    def _kv(self, key: str) -> str:
        self.expect(key)
        self.expect("=")
        tok = self.next()
        if tok.kind != "ident":
            raise ParseError(f"name expected after {key}=", tok.line, tok.col)
        return tok.text

    def _check_fn(self, name, tok):
        if name not in theory.FUNCTIONS:
            raise ParseError(f"unknown datatype function {name!r}", tok.line, tok.col)

    def _check_rel(self, name, arity, tok):
        if name not in theory.RELATIONS:
            raise ParseError(f"unknown datatype relation {name!r}", tok.line, tok.col)
        if theory.RELATIONS[name].arity != arity:
            raise ParseError(
                f"relation {name!r} has arity {theory.RELATIONS[name].arity}, expected {arity}",
                tok.line,
                tok.col,
            )

    # -- constraints ---------------------------------------------------------

    def parse_constraint(self) -> Constraint:
        self.expect("constraint")
        tok = self.next()
        if tok.kind != "ident":
            raise ParseError("constraint name expected", tok.line, tok.col)
        name = tok.text
        free_vars = []
        if self.accept("("):
            while True:
                v = self.parse_term()
                if not isinstance(v, Var):
                    self.error("free-variable list must contain object variables")
                free_vars.append(v)
                if not self.accept(","):
                    break
            self.expect(")")
        severity = "violation"
        if self.peek().text in ("warning", "violation"):
            severity = self.next().text
        self.expect(":")
        formula = self.parse_formula()
        self.expect(".")
        return Constraint(name, tuple(free_vars), formula, severity)

    # -- formulae ------------------------------------------------------------

    def parse_formula(self):
        return self._implication()

    def _implication(self):
        left = self._disjunction()
        if self.accept("->"):
            return Implies(left, self._implication())
        return left

    def _disjunction(self):
        subs = [self._conjunction()]
        while self.accept("|"):
            subs.append(self._conjunction())
        return subs[0] if len(subs) == 1 else Or(tuple(subs))

    def _conjunction(self):
        subs = [self._unary()]
        while self.accept("&"):
            subs.append(self._unary())
        return subs[0] if len(subs) == 1 else And(tuple(subs))

    def _unary(self):
        if self.accept("!"):
            return Not(self._unary())
        tok = self.peek()
        if tok.text in ("forall", "exists"):
            return self._quantifier()
        if tok.text == "(":
            save = self.i
            try:
                return self.parse_atom()  # set atom starts with '(' too
            except ParseError:
                self.i = save
            self.next()
            sub = self.parse_formula()
            self.expect(")")
            return sub
        return self.parse_atom()

    def _quantifier(self):
        tok = self.next()
        kind = tok.text
        count = None
        if kind == "exists":
            if self.accept(">="):
                kind, count = "atleast", self._int()
            elif self.accept("<="):
                kind, count = "atmost", self._int()
            elif self.accept("="):
                kind, count = "exactly", self._int()
        vars_ = []
        while True:
            t = self.next()
            sym = classify_ident(t.text) if t.kind == "ident" else None
            if not isinstance(sym, (Var, SetVar)):
                raise ParseError("quantified variable expected", t.line, t.col)
            vars_.append(sym)
            if not self.accept(","):
                break
        if count is not None and len(vars_) != 1:
            self.error("counting quantifiers bind exactly one variable")
        self.expect(".")
        sub = self._unary2()
        return Quant(kind, tuple(vars_), sub, count)

    def _unary2(self):
        # quantifier body extends through connectives to the right
        return self._implication()

    def _int(self) -> int:
        tok = self.next()
        if tok.kind != "int":
            raise ParseError("integer expected", tok.line, tok.col)
        return int(tok.text)


def _unquote(text: str) -> str:
    body = text[1:-1]
    return re.sub(r"\\(.)", lambda m: m.group(1), body)


# ---------------------------------------------------------------------------
# Public parsing entry points
# ---------------------------------------------------------------------------


def parse_program(text: str) -> Program:
    return _Parser(text).parse_program()


def parse_rule(text: str) -> Rule:
    return _Parser(text).parse_rule()


def parse_formula(text: str):
    p = _Parser(text)
    f = p.parse_formula()
    p.accept(".")
    if p.peek().kind != "eof":
        p.error("trailing input after formula")
    return f


def parse_query(text: str):
    """Parse ``pred(args)[@S][, (a : b) in S]*`` into (RelAtom, set atoms)."""
    p = _Parser(text)
    atom = p.parse_atom()
    if not isinstance(atom, RelAtom):
        raise ParseError("query must start with a relational atom")
    sets = []
    while p.accept(","):
        sa = p.parse_atom()
        if not isinstance(sa, SetMemberAtom):
            raise ParseError("only set atoms may follow the query atom")
        sets.append(sa)
    p.accept(".")
    if p.peek().kind != "eof":
        p.error("trailing input after query")
    return atom, tuple(sets)


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------


def print_term(t) -> str:
    if isinstance(t, Var):
        return t.name if _OBJ_VAR_RE.match(t.name) else "?" + t.name
    if isinstance(t, SetVar):
        return t.name
    if isinstance(t, FnApp):
        return f"{t.fn}({', '.join(print_term(a) for a in t.args)})"
    if isinstance(t, str):
        return t
    if isinstance(t, V.StringValue):
        return _quote(t.text)
    if isinstance(t, V.IriValue):
        return f"iri({_quote(t.iri)})"
    if isinstance(t, V.MonolingualTextValue):
        return f"mono({_quote(t.text)}, {t.lang})"
    if isinstance(t, V.MultilingualTextValue):
        inner = ", ".join(f"{lang}={_quote(text)}" for lang, text in t.texts)
        return f"multi({inner})"
    if isinstance(t, V.TimeValue):
        if t.is_empty:
            return "time()"
        parts = [
            f"main={V.format_instant(t.main)}",
            f"earliest={V.format_instant(t.earliest)}",
            f"latest={V.format_instant(t.latest)}",
        ]
        if t.tz_offset_minutes:
            sign = "-" if t.tz_offset_minutes < 0 else "+"
            m = abs(t.tz_offset_minutes)
            parts.append(f"tz={sign}{m // 60:02d}:{m % 60:02d}")
        if t.calendar:
            parts.append(f"calendar={t.calendar}")
        return f"time({', '.join(parts)})"
    if isinstance(t, V.QuantityValue):
        if t.is_empty:
            return "qty()"
        parts = [str(t.main), str(t.lower), str(t.upper)]
        if t.unit != "1":
            parts.append(f"unit={t.unit}")
        return f"qty({', '.join(parts)})"
    if isinstance(t, V.GeoCoordinatesValue):
        if t.is_empty:
            return "geo()"
        s = f"geo(lat={t.lat}, lon={t.lon}, prec={t.precision}"
        if t.globe != "Q2":
            s += f", globe={t.globe}"
        return s + ")"
    raise TypeError(f"unprintable term: {t!r}")


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def print_atom(a) -> str:
    if isinstance(a, RelAtom):
        s = f"{print_term(a.pred)}({', '.join(print_term(x) for x in a.args)})"
        if isinstance(a.sett, SetVar):
            s += f"@{a.sett.name}"
        elif isinstance(a.sett, ExplicitSet):
            inner = ", ".join(f"{print_term(k)} : {print_term(v)}" for k, v in a.sett.pairs)
            s += "@{" + inner + "}"
        return s
    if isinstance(a, SetMemberAtom):
        return f"({print_term(a.attr)} : {print_term(a.value)}) in {a.setvar.name}"
    if isinstance(a, DatatypeAtom):
        return f"{a.rel}({', '.join(print_term(x) for x in a.args)})"
    if isinstance(a, EqAtom):
        op = "!=" if a.negated else "="
        return f"{print_term(a.left)} {op} {print_term(a.right)}"
    if isinstance(a, SetEqAtom):
        return f"{a.left.name} = {a.right.name}"  # internal form
    raise TypeError(f"unprintable atom: {a!r}")


def print_rule(r: Rule) -> str:
    body = ", ".join(print_atom(a) for a in r.body)
    s = f"{body} -> {print_atom(r.head)}"
    if r.fn_name:
        s += f" with {r.fn_name}"
    return s + "."


def print_formula(f) -> str:
    if isinstance(f, Not):
        return f"!{_wrap(f.sub)}"
    if isinstance(f, And):
        return " & ".join(_wrap(s) for s in f.subs)
    if isinstance(f, Or):
        return " | ".join(_wrap(s) for s in f.subs)
    if isinstance(f, Implies):
        return f"{_wrap(f.left)} -> {print_formula(f.right)}"
    if isinstance(f, Quant):
        q = {
            "forall": "forall",
            "exists": "exists",
            "atleast": f"exists>={f.count}",
            "atmost": f"exists<={f.count}",
            "exactly": f"exists={f.count}",
        }[f.kind]
        vs = ", ".join(print_term(v) for v in f.vars)
        return f"{q} {vs} . {print_formula(f.sub)}"
    return print_atom(f)


def _wrap(f) -> str:
    if isinstance(f, (And, Or, Implies, Quant)):
        return f"({print_formula(f)})"
    return print_formula(f)


def print_program(prog: Program) -> str:
    lines = []
    for fn in prog.fns:
        lines.append(f"fn {fn.name} {{")
        for cl in fn.clauses:
            conds = ", ".join(print_atom(c) for c in cl.conds)
            outs = ", ".join(f"({print_term(a)} : {print_term(b)})" for a, b in cl.outputs)
            lines.append(f"  {conds + ' ' if conds else ''}=> {outs};")
        lines.append("}")
    for ch in prog.chars:
        lines.append(print_chardecl(ch))
    for r in prog.rules:
        lines.append(print_rule(r))
    for c in prog.constraints:
        fv = f"({', '.join(print_term(v) for v in c.free_vars)})" if c.free_vars else ""
        sev = f" {c.severity}" if c.severity != "violation" else ""
        lines.append(f"constraint {c.name}{fv}{sev}: {print_formula(c.formula)}.")
    return "\n".join(lines) + "\n"


def print_chardecl(ch: CharDecl) -> str:
    p = ch.policy
    if isinstance(p, Ignore):
        tail = "ignore"
    elif isinstance(p, Additive):
        tail = "additive"
    elif isinstance(p, Combining):
        tail = f"combine fn={p.fn} guard={p.guard}"
    else:
        inner = ", ".join(f"{a}={f}" for a, f in p.inputs)
        tail = f"blend combine({inner}) fn={p.blend_fn} guard={p.guard}"
    return f"qualifier {ch.attr} {tail}."


# ---------------------------------------------------------------------------
# Safety and normalization
# ---------------------------------------------------------------------------


def _term_vars(t):
    if isinstance(t, Var):
        yield t
    elif isinstance(t, FnApp):
        for a in t.args:
            yield from _term_vars(a)


def _direct_vars(terms):
    for t in terms:
        if isinstance(t, Var):
            yield t


def relational_vars(rule: Rule) -> set[Var]:
    """Variables bound by matching body relational atoms (incl. their set terms)."""
    rel: set[Var] = set()
    setvars: set[str] = set()
    for atom in rule.body:
        if isinstance(atom, RelAtom):
            rel.update(_direct_vars((atom.pred, *atom.args)))
            if isinstance(atom.sett, ExplicitSet):
                for a, b in atom.sett.pairs:
                    rel.update(_direct_vars((a, b)))
            elif isinstance(atom.sett, SetVar):
                setvars.add(atom.sett.name)
    for atom in rule.body:
        if isinstance(atom, SetMemberAtom) and atom.setvar.name in setvars:
            rel.update(_direct_vars((atom.attr, atom.value)))
    return rel


def check_safety(rule: Rule) -> list[str]:
    """List each variable required to be relational that is not."""
    rel = relational_vars(rule)
    violations = []
    seen = set()

    def need(v: Var, where: str):
        if v not in rel and (v.name, where) not in seen:
            seen.add((v.name, where))
            violations.append(f"variable {v.name} in {where} is not relational")

    head = rule.head
    for v in _term_vars(head.pred):
        need(v, "rule head")
    for t in head.args:
        for v in _term_vars(t):
            need(v, "rule head")
    if isinstance(head.sett, ExplicitSet):
        for a, b in head.sett.pairs:
            for v in (*_term_vars(a), *_term_vars(b)):
                need(v, "rule head")
    for atom in rule.body:
        if isinstance(atom, DatatypeAtom):
            for t in atom.args:
                for v in _term_vars(t):
                    need(v, f"datatype atom {atom.rel}")
        elif isinstance(atom, EqAtom):
            for v in (*_term_vars(atom.left), *_term_vars(atom.right)):
                need(v, "equality atom")
        elif isinstance(atom, RelAtom):
            for t in (atom.pred, *atom.args):
                if isinstance(t, FnApp):
                    for v in _term_vars(t):
                        need(v, "function application")
        if isinstance(atom, (RelAtom, SetMemberAtom)):
            pairs = ()
            if isinstance(atom, SetMemberAtom):
                pairs = ((atom.attr, atom.value),)
            elif isinstance(atom.sett, ExplicitSet):
                pairs = atom.sett.pairs
            for a, b in pairs:
                for t in (a, b):
                    if isinstance(t, FnApp):
                        for v in _term_vars(t):
                            need(v, "function application")
    return violations


def normalize(rule: Rule) -> Rule:
    """Give every body relational atom its own set variable.

    Explicit body set terms become membership atoms; a set variable shared by
    two body atoms is renamed apart with an internal set-equality atom so the
    original single-set semantics is preserved.
    """
    used = {a.sett.name for a in rule.body if isinstance(a, RelAtom) and isinstance(a.sett, SetVar)}
    used.update(a.setvar.name for a in rule.body if isinstance(a, SetMemberAtom))
    if isinstance(rule.head.sett, SetVar):
        used.add(rule.head.sett.name)
    counter = [0]

    def fresh() -> SetVar:
        while True:
            counter[0] += 1
            name = f"S{counter[0]}"
            if name not in used:
                used.add(name)
                return SetVar(name)

    first_rename: dict[str, SetVar] = {}
    claimed: set[str] = set()
    new_body = []
    extra = []
    for atom in rule.body:
        if not isinstance(atom, RelAtom):
            new_body.append(atom)
            continue
        if isinstance(atom.sett, SetVar):
            old = atom.sett.name
            if old in claimed:
                sv = fresh()
                extra.append(SetEqAtom(first_rename[old], sv))
            else:
                sv = atom.sett  # keep an already-unique name unchanged
                claimed.add(old)
                first_rename[old] = sv
        else:
            sv = fresh()
            if isinstance(atom.sett, ExplicitSet):
                for a, b in atom.sett.pairs:
                    extra.append(SetMemberAtom(a, b, sv))
        new_body.append(RelAtom(atom.pred, atom.args, sv))
    # rewrite set atoms referring to old names
    rewritten = []
    for atom in new_body:
        if isinstance(atom, SetMemberAtom) and atom.setvar.name in first_rename:
            rewritten.append(SetMemberAtom(atom.attr, atom.value, first_rename[atom.setvar.name]))
        else:
            rewritten.append(atom)
    head = rule.head
    if isinstance(head.sett, SetVar) and head.sett.name in first_rename:
        head = RelAtom(head.pred, head.args, first_rename[head.sett.name])
    return Rule(tuple(rewritten + extra), head, rule.fn_name)


def is_normalized(rule: Rule) -> bool:
    seen = set()
    for atom in rule.body:
        if isinstance(atom, RelAtom):
            if not isinstance(atom.sett, SetVar) or atom.sett.name in seen:
                return False
            seen.add(atom.sett.name)
    return True
