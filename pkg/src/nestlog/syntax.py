"""Reader and writer for probability-annotated logic programs.

The surface language is a small Prolog subset: ``P :: fact.`` annotations,
``head.`` facts and ``head :- body.`` rules, with the usual control and
arithmetic operators available inside bodies.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator

from .errors import MixedDefinitionError, NonCallableError, ParseError, ProbabilityRangeError
from .terms import Atom, Float, Int, Struct, Term, Var, indicator, is_callable

__all__ = [
    "AnnotatedFact",
    "Clause",
    "Program",
    "format_term",
    "parse_program",
    "parse_query",
    "parse_term",
]


@dataclass(frozen=True)
class Clause:
    head: Term
    body: tuple = ()

    def __post_init__(self):
        if not is_callable(self.head):
            raise NonCallableError(f"clause head is not callable: {format_term(self.head)}")


@dataclass(frozen=True)
class AnnotatedFact:
    index: int
    probability: float
    template: Term

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ProbabilityRangeError(
                f"probability {self.probability} of {format_term(self.template)} outside [0,1]")
        if not is_callable(self.template):
            raise NonCallableError(f"annotated fact is not callable: {format_term(self.template)}")


@dataclass
class Program:
    annotated_facts: list[AnnotatedFact] = field(default_factory=list)
    clauses: list[Clause] = field(default_factory=list)
    predicate_index: dict[tuple[str, int], list] = field(default_factory=dict)

    def __post_init__(self):
        # (name, arity) -> {first-arg key -> entries}; built lazily
        self._first_arg: dict[tuple[str, int], dict] = {}
        # derived data cached by the interpreter; dropped whenever the index changes
        self.runtime_cache: dict = {}
        if not self.predicate_index:
            self.reindex()

    @classmethod
    def from_parts(cls, facts: list[AnnotatedFact], clauses: list[Clause]) -> Program:
        return cls(list(facts), list(clauses))

    def reindex(self) -> None:
        index: dict[tuple[str, int], list] = {}
        kinds: dict[tuple[str, int], type] = {}
        # source order across both lists is kept via the fact index / clause position
        entries = [(f.template, f) for f in self.annotated_facts] + [(c.head, c) for c in self.clauses]
        for head, entry in entries:
            key = indicator(head)
            seen = kinds.setdefault(key, type(entry))
            if seen is not type(entry):
                name, arity = key
                raise MixedDefinitionError(
                    f"{name}/{arity} is defined by both annotated facts and clauses")
            index.setdefault(key, []).append(entry)
        self.predicate_index = index
        self._first_arg = {}
        self.runtime_cache = {}

    def entries(self, key: tuple[str, int]) -> list | None:
        return self.predicate_index.get(key)

    def entries_for_first_arg(self, key: tuple[str, int], first) -> list | None:
        """Entries that may match a call whose (dereferenced) first argument is ``first``."""
        table = self._first_arg.get(key)
        if table is None:
            table = self._build_first_arg(key)
        if first is None:
            return table[None]
        return table.get(first, table[_VAR_ONLY])

    def _build_first_arg(self, key):
        entries = self.predicate_index.get(key, [])
        heads = [e.template if isinstance(e, AnnotatedFact) else e.head for e in entries]
        consts = {_first_key(h.args[0]) for h in heads} - {None}
        table = {None: entries}
        for c in consts:
            table[c] = [e for e, h in zip(entries, heads) if _first_key(h.args[0]) in (c, None)]
        table[_VAR_ONLY] = [e for e, h in zip(entries, heads) if _first_key(h.args[0]) is None]
        self._first_arg[key] = table
        return table


_VAR_ONLY = object()


def _first_key(t):
    """Hashable index key of a first argument, or None when it can match anything."""
    tt = type(t)
    if tt is Var:
        return None
    if tt is Struct:
        return (t.functor, len(t.args))
    return t


# --------------------------------------------------------------------------
# Tokenizer

_SYMBOL_CHARS = set("+-*/\\^<>=~:.?@#&$")
_NUMBER_RE = re.compile(r"\d+(\.\d+)?([eE][+-]?\d+)?")
_NAME_RE = re.compile(r"[a-z][A-Za-z0-9_]*")
_VAR_RE = re.compile(r"[A-Z_][A-Za-z0-9_]*")


@dataclass
class _Tok:
    kind: str  # num, var, name, qname, punct, end, eof
    text: str
    value: object
    line: int
    col: int
    # name immediately followed by "(": functional notation
    functional: bool = False
    # "-" immediately followed by a digit
    neg_number: bool = False


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, n = 0, len(text)
    line, line_start = 1, 0

    def pos():
        return line, i - line_start + 1

    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            i += 1
            line_start = i
            continue
        if ch.isspace():
            i += 1
            continue
        if ch == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "/" and text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                raise ParseError("unterminated block comment", *pos())
            line += text.count("\n", i, end)
            if "\n" in text[i:end]:
                line_start = text.rfind("\n", i, end) + 1
            i = end + 2
            continue
        ln, col = pos()
        if ch.isdigit():
            m = _NUMBER_RE.match(text, i)
            s = m.group(0)
            value = Float(float(s)) if (m.group(1) or m.group(2)) else Int(int(s))
            toks.append(_Tok("num", s, value, ln, col))
            i = m.end()
            continue
        if ch.isalpha() and ch.islower():
            m = _NAME_RE.match(text, i)
            i = m.end()
            toks.append(_Tok("name", m.group(0), m.group(0), ln, col,
                             functional=i < n and text[i] == "("))
            continue
        if ch == "_" or ch.isupper():
            m = _VAR_RE.match(text, i)
            i = m.end()
            toks.append(_Tok("var", m.group(0), m.group(0), ln, col))
            continue
        if ch == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise ParseError("unterminated quoted atom", ln, col)
                c = text[j]
                if c == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                if c == "\\" and j + 1 < n:
                    esc = text[j + 1]
                    buf.append({"n": "\n", "t": "\t", "\\": "\\", "'": "'"}.get(esc, esc))
                    j += 2
                    continue
                if c == "\n":
                    raise ParseError("newline in quoted atom", ln, col)
                buf.append(c)
                j += 1
            i = j + 1
            name = "".join(buf)
            toks.append(_Tok("qname", name, name, ln, col, functional=i < n and text[i] == "("))
            continue
        if ch in "(),|[]{}":
            toks.append(_Tok("punct", ch, ch, ln, col))
            i += 1
            continue
        if ch in "!;":
            i += 1
            toks.append(_Tok("name", ch, ch, ln, col, functional=i < n and text[i] == "("))
            continue
        if ch in _SYMBOL_CHARS:
            j = i
            while j < n and text[j] in _SYMBOL_CHARS:
                j += 1
            s = text[i:j]
            if s == "." and (j >= n or text[j].isspace() or text[j] == "%"):
                toks.append(_Tok("end", ".", ".", ln, col))
                i = j
                continue
            i = j
            toks.append(_Tok("name", s, s, ln, col,
                             functional=i < n and text[i] == "(",
                             neg_number=s == "-" and i < n and text[i].isdigit()))
            continue
        raise ParseError(f"unexpected character {ch!r}", ln, col)
    toks.append(_Tok("eof", "", None, line, i - line_start + 1))
    return toks


# --------------------------------------------------------------------------
# Operator-precedence parser

_INFIX = {
    ":-": (1200, "xfx"),
    "::": (1150, "xfx"),
    ";": (1100, "xfy"),
    "->": (1050, "xfy"),
    ",": (1000, "xfy"),
    "=": (700, "xfx"),
    "\\=": (700, "xfx"),
    "==": (700, "xfx"),
    "\\==": (700, "xfx"),
    "is": (700, "xfx"),
    "<": (700, "xfx"),
    "=<": (700, "xfx"),
    ">": (700, "xfx"),
    ">=": (700, "xfx"),
    "=:=": (700, "xfx"),
    "=\\=": (700, "xfx"),
    "+": (500, "yfx"),
    "-": (500, "yfx"),
    "*": (400, "yfx"),
    "/": (400, "yfx"),
    "//": (400, "yfx"),
    "mod": (400, "yfx"),
}
_PREFIX = {"-": (200, "fy")}


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0
        self.varmap: dict[str, Var] = {}
        self.anon = 0

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        raise ParseError(msg, tok.line, tok.col)

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        t = self.next()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            got = t.text or t.kind
            self.error(f"expected {want!r}, found {got!r}", t)
        return t

    def starts_term(self, t: _Tok) -> bool:
        if t.kind in ("num", "var", "name", "qname"):
            return not (t.kind == "name" and t.text in _INFIX and t.text not in _PREFIX
                        and not t.functional)
        return t.kind == "punct" and t.text in "(["

    def var(self, name: str) -> Var:
        if name == "_":
            self.anon += 1
            return Var(f"_#{self.anon}")
        v = self.varmap.get(name)
        if v is None:
            v = self.varmap[name] = Var(name)
        return v

    def parse(self, max_prec: int) -> tuple[Term, int]:
        left, left_prec = self.primary(max_prec)
        while True:
            t = self.peek()
            if t.kind == "punct" and t.text == ",":
                op = ","
            elif t.kind == "name" and t.text in _INFIX:
                op = t.text
            else:
                break
            prec, typ = _INFIX[op]
            if prec > max_prec:
                break
            left_max = prec if typ == "yfx" else prec - 1
            right_max = prec if typ == "xfy" else prec - 1
            if left_prec > left_max:
                break
            self.next()
            right, _ = self.parse(right_max)
            left, left_prec = Struct(op, (left, right)), prec
        return left, left_prec

    def primary(self, max_prec: int) -> tuple[Term, int]:
        t = self.next()
        if t.kind == "num":
            return t.value, 0
        if t.kind == "var":
            return self.var(t.text), 0
        if t.kind == "punct":
            if t.text == "(":
                inner, _ = self.parse(1200)
                self.expect("punct", ")")
                return inner, 0
            if t.text == "[":
                self.expect("punct", "]")
                return Atom("[]"), 0
            if t.text == "{":
                self.expect("punct", "}")
                return Atom("{}"), 0
            self.error(f"unexpected {t.text!r}", t)
        if t.kind in ("name", "qname"):
            name = t.value
            if t.functional:
                self.next()  # "("
                args = [self.parse(999)[0]]
                while self.peek().kind == "punct" and self.peek().text == ",":
                    self.next()
                    args.append(self.parse(999)[0])
                self.expect("punct", ")")
                return Struct(name, tuple(args)), 0
            if t.kind == "name" and t.neg_number and self.peek().kind == "num":
                num = self.next().value
                return (Int(-num.value) if type(num) is Int else Float(-num.value)), 0
            if t.kind == "name" and name in _PREFIX and self.starts_term(self.peek()):
                prec, _ = _PREFIX[name]
                if prec <= max_prec:
                    arg, _ = self.parse(prec)
                    return Struct(name, (arg,)), prec
            prec = _INFIX[name][0] if (t.kind == "name" and name in _INFIX) else 0
            return Atom(name), (prec if prec <= max_prec else 0)
        if t.kind == "end":
            self.error("unexpected end of clause", t)
        self.error("unexpected end of input", t)


def parse_term(text: str) -> Term:
    """Parse a single term; a trailing ``.`` is optional."""
    p = _Parser(text)
    if p.peek().kind == "eof":
        p.error("empty input")
    term, _ = p.parse(1200)
    if p.peek().kind == "end":
        p.next()
    if p.peek().kind != "eof":
        p.error(f"unexpected {p.peek().text!r} after term")
    return term


def parse_query(text: str) -> Term:
    term = parse_term(text)
    if not is_callable(term):
        raise NonCallableError(f"query is not callable: {text.strip()}")
    return term


def _conjuncts(body: Term) -> Iterator[Term]:
    while type(body) is Struct and body.functor == "," and len(body.args) == 2:
        yield body.args[0]
        body = body.args[1]
    yield body


def parse_program(text: str) -> Program:
    facts: list[AnnotatedFact] = []
    clauses: list[Clause] = []
    p = _Parser(text)
    while p.peek().kind != "eof":
        start = p.peek()
        p.varmap = {}
        term, _ = p.parse(1200)
        p.expect("end")
        if type(term) is Struct and term.functor == "::" and len(term.args) == 2:
            prob, template = term.args
            if type(prob) not in (Int, Float):
                p.error("probability label must be a number literal", start)
            if not is_callable(template) or (type(template) is Struct and template.functor == ":-"):
                p.error("probability label must annotate a fact", start)
            value = float(prob.value)
            if not 0.0 <= value <= 1.0:
                raise ProbabilityRangeError(
                    f"line {start.line}: probability {value} outside [0,1]")
            facts.append(AnnotatedFact(len(facts), value, template))
            continue
        if type(term) is Struct and term.functor == ":-" and len(term.args) == 2:
            head, body = term.args
            goals = tuple(_conjuncts(body))
        elif type(term) is Struct and term.functor == ":-":
            p.error("directives are not supported", start)
        else:
            head, goals = term, ()
        if not is_callable(head):
            p.error("clause head is not callable", start)
        for g in goals:
            if type(g) in (Int, Float):
                p.error("body goal is not callable", start)
        clauses.append(Clause(head, goals))
    return Program.from_parts(facts, clauses)


# --------------------------------------------------------------------------
# Writer

_PLAIN_ATOM = re.compile(r"[a-z][A-Za-z0-9_]*\Z")
_SOLO = {"!", ";", "[]", "{}"}


def _quote_atom(name: str) -> str:
    if _PLAIN_ATOM.match(name) or name in _SOLO:
        return name
    if name and all(c in _SYMBOL_CHARS for c in name) and "." not in name:
        return name
    escaped = name.replace("\\", "\\\\").replace("'", "\\'").replace("\n", "\\n").replace("\t", "\\t")
    return f"'{escaped}'"


def format_term(t: Term, names: dict[Var, str] | None = None) -> str:
    """Canonical text for ``t``.

    Variables are renamed ``_V0``, ``_V1``... in order of first appearance, so
    ``parse_query(format_term(t))`` is a variant of ``t``. Pass ``names`` to share
    a renaming across several terms.
    """
    if names is None:
        names = {}
    out: list[str] = []

    def emit(x):
        tx = type(x)
        if tx is Var:
            name = names.get(x)
            if name is None:
                name = names[x] = f"_V{len(names)}"
            out.append(name)
        elif tx is Atom:
            out.append(_quote_atom(x.name))
        elif tx is Int:
            out.append(str(x.value))
        elif tx is Float:
            out.append(repr(x.value))
        else:
            f = x.functor
            # "[]" and "{}" are only atoms on their own, never before "("
            out.append(f"'{f}'" if f in ("[]", "{}") else _quote_atom(f))
            out.append("(")
            for i, a in enumerate(x.args):
                if i:
                    out.append(",")
                emit(a)
            out.append(")")

    emit(t)
    return "".join(out)
