"""Reading and writing the textual formats.

Kinds and extensions:

* ``.lp``     programs, fact files and induced hypotheses
* ``.ex``     examples, ``pos(atom).`` / ``neg(atom).`` one per line
* ``.modes``  ``modeh(Recall, scheme).`` / ``modeb(Recall, scheme).``
* ``.mrules`` ``name: P(x,y) :- Q(x,z), R(z,y).`` with optional ``@ P>Q, P>R``

Identifiers starting with an uppercase letter or ``_`` are variables; those
starting with a lowercase letter or digit are constants (all-digit ones are
integers).  ``%`` starts a comment that runs to end of line.  Inside metarule
files the roles flip: uppercase names are predicate variables and lowercase
names are first-order variables.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .logic import Atom, Clause, Compound, Const, ExampleSet, Program, Var
from .mdie import ModeDecl, Placemarker
from .mil import MetaAtom, Metarule


class ParseError(ValueError):
    def __init__(self, line: int, column: int, expected: str, found: str, offset: int = -1):
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        self.offset = offset
        super().__init__(f"line {line}, column {column}: expected {expected}, found {found!r}")


class UnknownPlacemarker(ParseError):
    pass


class InvalidRecall(ParseError):
    pass


class DuplicateMetarule(ParseError):
    pass


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|%[^\n]*)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<name>[a-z0-9][A-Za-z0-9_]*)
  | (?P<punct>:-|[(),.*+\-#:>@])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(line, pos - line_start + 1, "a token", text[pos], pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos, line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", pos, line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, expected, cls=ParseError, tok=None):
        tok = tok or self.tok
        return cls(tok.line, tok.column, expected, tok.text or "end of input", tok.offset)

    def at(self, text) -> bool:
        return self.tok.kind in ("punct",) and self.tok.text == text

    def expect(self, text) -> Token:
        if not self.at(text):
            raise self.error(repr(text))
        tok = self.tok
        self.i += 1
        return tok

    def accept(self, text) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def done(self) -> bool:
        return self.tok.kind == "eof"

    # --- first-order syntax

    def term(self):
        tok = self.tok
        if tok.kind == "var":
            self.i += 1
            return Var(tok.text)
        if tok.kind == "name":
            self.i += 1
            if self.at("("):
                return Compound(tok.text, self.arglist(self.term))
            return _constant(tok.text)
        raise self.error("a term")

    def arglist(self, item):
        self.expect("(")
        args = [item()]
        while self.accept(","):
            args.append(item())
        self.expect(")")
        return args

    def atom(self) -> Atom:
        tok = self.tok
        if tok.kind != "name" or tok.text[0].isdigit():
            raise self.error("a predicate name")
        self.i += 1
        if self.at("("):
            return Atom(tok.text, self.arglist(self.term))
        return Atom(tok.text)

    def clause(self) -> Clause:
        head = self.atom()
        body = []
        if self.accept(":-"):
            body.append(self.atom())
            while self.accept(","):
                body.append(self.atom())
        self.expect(".")
        return Clause(head, body)


def _constant(text: str) -> Const:
    return Const(int(text)) if text.isdigit() else Const(text)


# --------------------------------------------------------------------------
# programs

def parse_program(text: str) -> Program:
    p = _Parser(text)
    clauses = []
    while not p.done():
        clauses.append(p.clause())
    return Program(clauses)


def parse_clauses(text: str) -> list[Clause]:
    return list(parse_program(text).clauses)


def format_term(t) -> str:
    if isinstance(t, Var):
        return repr(t)
    if isinstance(t, Const):
        return str(t.value)
    if isinstance(t, Compound):
        return f"{t.functor}({','.join(format_term(a) for a in t.args)})"
    if isinstance(t, Atom):
        if not t.args:
            return t.predicate
        return f"{t.predicate}({','.join(format_term(a) for a in t.args)})"
    raise TypeError(f"not a term: {t!r}")


def format_clause(c: Clause) -> str:
    if not c.body:
        return f"{format_term(c.head)}."
    return f"{format_term(c.head)} :- {', '.join(format_term(b) for b in c.body)}."


def serialize_program(clauses) -> str:
    if isinstance(clauses, Program):
        clauses = clauses.clauses
    return "".join(format_clause(c) + "\n" for c in clauses)


def pretty_clause(c: Clause) -> str:
    """Clause text with variables renamed A, B, C... in order of appearance."""
    from .logic import substitute

    names = {}
    for v in c.variables:
        names[v] = Var(_letters(len(names)))
    return format_clause(Clause(substitute(c.head, names), [substitute(b, names) for b in c.body]))


def _letters(i: int) -> str:
    s = ""
    i += 1
    while i:
        i, r = divmod(i - 1, 26)
        s = chr(65 + r) + s
    return s


# --------------------------------------------------------------------------
# examples

def parse_examples(text: str) -> ExampleSet:
    p = _Parser(text)
    pos, neg = [], []
    while not p.done():
        start = p.tok
        c = p.clause()
        if c.body or c.head.predicate not in ("pos", "neg") or c.head.arity != 1:
            raise p.error("pos(atom). or neg(atom).", tok=start)
        inner = c.head.args[0]
        if isinstance(inner, Compound):
            atom = Atom(inner.functor, inner.args)
        elif isinstance(inner, Const) and isinstance(inner.value, str):
            atom = Atom(inner.value)
        else:
            raise p.error("an example atom", tok=start)
        if not atom.is_ground():
            raise p.error("a ground example", tok=start)
        (pos if c.head.predicate == "pos" else neg).append(atom)
    return ExampleSet(pos, neg)


def serialize_examples(examples: ExampleSet) -> str:
    lines = [f"pos({format_term(a)})." for a in examples.positives]
    lines += [f"neg({format_term(a)})." for a in examples.negatives]
    return "".join(line + "\n" for line in lines)


# --------------------------------------------------------------------------
# modes

def parse_modes(text: str) -> list[ModeDecl]:
    p = _Parser(text)
    modes = []
    while not p.done():
        p.accept(":-")
        tok = p.tok
        if tok.kind != "name" or tok.text not in ("modeh", "modeb"):
            raise p.error("modeh or modeb")
        p.i += 1
        p.expect("(")
        rtok = p.tok
        if p.accept("*"):
            recall = None
        elif rtok.kind == "name" and rtok.text.isdigit():
            recall = int(rtok.text)
            if recall < 1:
                raise p.error("recall >= 1 or *", InvalidRecall)
            p.i += 1
        else:
            raise p.error("recall (positive integer or *)")
        p.expect(",")
        ptok = p.tok
        if ptok.kind != "name" or ptok.text[0].isdigit():
            raise p.error("a predicate name")
        p.i += 1
        args = p.arglist(lambda: _placemarker(p)) if p.at("(") else []
        p.expect(")")
        p.expect(".")
        modes.append(ModeDecl("head" if tok.text == "modeh" else "body", recall, ptok.text, tuple(args)))
    return modes


def _placemarker(p: _Parser) -> Placemarker:
    tok = p.tok
    if tok.kind == "punct" and tok.text in "+-#" and len(tok.text) == 1:
        p.i += 1
        ttok = p.tok
        if ttok.kind != "name":
            raise p.error("a type name")
        p.i += 1
        return Placemarker(tok.text, ttok.text)
    raise p.error("a placemarker (+type, -type or #type)", UnknownPlacemarker)


def format_mode(m: ModeDecl) -> str:
    kw = "modeh" if m.kind == "head" else "modeb"
    recall = "*" if m.recall is None else str(m.recall)
    scheme = m.predicate
    if m.args:
        scheme += "(" + ",".join(f"{a.polarity}{a.type_name}" for a in m.args) + ")"
    return f"{kw}({recall}, {scheme})."


def serialize_modes(modes) -> str:
    return "".join(format_mode(m) + "\n" for m in modes)


# --------------------------------------------------------------------------
# metarules

def parse_metarules(text: str) -> list[Metarule]:
    p = _Parser(text)
    rules: list[Metarule] = []
    names = set()
    while not p.done():
        ntok = p.tok
        if ntok.kind != "name":
            raise p.error("a metarule name")
        p.i += 1
        p.expect(":")
        head = _meta_atom(p)
        p.expect(":-")
        body = [_meta_atom(p)]
        while p.accept(","):
            body.append(_meta_atom(p))
        order = []
        if p.accept("@"):
            order.append(_order_pair(p))
            while p.accept(","):
                order.append(_order_pair(p))
        p.expect(".")
        if ntok.text in names:
            raise p.error(f"a metarule name other than {ntok.text!r}", DuplicateMetarule, tok=ntok)
        names.add(ntok.text)
        rules.append(Metarule(ntok.text, head, tuple(body), tuple(order)))
    return rules


def _meta_atom(p: _Parser) -> MetaAtom:
    tok = p.tok
    if tok.kind not in ("var", "name") or tok.text[0].isdigit():
        raise p.error("a predicate variable or symbol")
    p.i += 1

    def fo_var():
        t = p.tok
        if t.kind != "name" or t.text[0].isdigit():
            raise p.error("a first-order variable")
        p.i += 1
        return t.text

    args = p.arglist(fo_var) if p.at("(") else []
    return MetaAtom(tok.text, tuple(args))


def _order_pair(p: _Parser) -> tuple[str, str]:
    hi = p.tok
    if hi.kind != "var":
        raise p.error("a predicate variable")
    p.i += 1
    p.expect(">")
    lo = p.tok
    if lo.kind != "var":
        raise p.error("a predicate variable")
    p.i += 1
    return (hi.text, lo.text)


def format_metarule(m: Metarule) -> str:
    def fmt(a: MetaAtom):
        return f"{a.predicate}({','.join(a.args)})" if a.args else a.predicate

    text = f"{m.name}: {fmt(m.head)} :- {', '.join(fmt(b) for b in m.body)}"
    if m.order:
        text += " @ " + ", ".join(f"{hi}>{lo}" for hi, lo in m.order)
    return text + "."


def serialize_metarules(rules) -> str:
    return "".join(format_metarule(m) + "\n" for m in rules)


# --------------------------------------------------------------------------
# files

KINDS = {".lp": "facts", ".ex": "examples", ".modes": "modes", ".mrules": "metarules"}


@dataclass
class SourceFile:
    path: str
    kind: str
    declarations: Union[list, ExampleSet]


def load(path, kind: str = None) -> SourceFile:
    path = Path(path)
    kind = kind or KINDS.get(path.suffix)
    if kind is None:
        raise ValueError(f"cannot infer file kind from {path.name!r}")
    text = path.read_text(encoding="utf-8")
    if kind in ("facts", "hypothesis"):
        decls = parse_clauses(text)
    elif kind == "examples":
        decls = parse_examples(text)
    elif kind == "modes":
        decls = parse_modes(text)
    elif kind == "metarules":
        decls = parse_metarules(text)
    else:
        raise ValueError(f"unknown file kind {kind!r}")
    return SourceFile(str(path), kind, decls)


def dump(path, kind: str, items) -> None:
    writer = {
        "facts": serialize_program,
        "hypothesis": serialize_program,
        "examples": serialize_examples,
        "modes": serialize_modes,
        "metarules": serialize_metarules,
    }[kind]
    Path(path).write_text(writer(items), encoding="utf-8", newline="\n")
