"""Clause representation and the text format for probabilistic logic programs.

Supported syntax, one clause per statement::

    0.3::neighbor(X,Y).                 % fixed probability
    t(0.2)::fire(X).                    % learnable, initial value 0.2
    t(_)::alarm(X) :- fire(X).          % learnable, initial value 0.5
    calls(X,Y) :- alarm(X), \\+ quiet(Y). % deterministic rule

Terms are constants (lowercase names or numbers) or variables (uppercase or
``_`` prefixed names).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Union

DEFAULT_INIT = 0.5


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


def is_variable(term: str) -> bool:
    return term[0].isupper() or term[0] == "_"


@dataclass(frozen=True, order=True)
class Atom:
    predicate: str
    args: tuple[str, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def is_ground(self) -> bool:
        return not any(is_variable(a) for a in self.args)

    def variables(self) -> list[str]:
        return [a for a in self.args if is_variable(a)]

    def substitute(self, binding: dict[str, str]) -> "Atom":
        return Atom(self.predicate, tuple(binding.get(a, a) for a in self.args))

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(self.args)})"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    negated: bool = False

    def __str__(self) -> str:
        return f"\\+{self.atom}" if self.negated else str(self.atom)


@dataclass(frozen=True)
class Deterministic:
    def __str__(self) -> str:
        return ""


@dataclass(frozen=True)
class Fixed:
    p: float

    def __str__(self) -> str:
        return f"{self.p!r}::"


@dataclass(frozen=True)
class Learnable:
    init: float
    param_id: int

    def __str__(self) -> str:
        return f"t({self.init!r})::"


Label = Union[Deterministic, Fixed, Learnable]


def is_probabilistic(label: Label) -> bool:
    return not isinstance(label, Deterministic)


@dataclass(frozen=True)
class Clause:
    head: Atom
    body: tuple[Literal, ...] = ()
    label: Label = Deterministic()

    @property
    def is_fact(self) -> bool:
        return not self.body

    def variables(self) -> list[str]:
        """Distinct variables in order of first appearance, head first."""
        seen: dict[str, None] = {}
        for atom in (self.head, *(lit.atom for lit in self.body)):
            for v in atom.variables():
                seen.setdefault(v)
        return list(seen)

    def __str__(self) -> str:
        text = f"{self.label}{self.head}"
        if self.body:
            text += " :- " + ", ".join(str(lit) for lit in self.body)
        return text + "."


@dataclass(frozen=True)
class Program:
    clauses: tuple[Clause, ...]
    constants: frozenset[str] = field(default_factory=frozenset)

    @property
    def params(self) -> list[tuple[int, float]]:
        """``(param_id, init)`` pairs ordered by param_id."""
        out = [
            (c.label.param_id, c.label.init)
            for c in self.clauses
            if isinstance(c.label, Learnable)
        ]
        return sorted(out)

    @property
    def n_params(self) -> int:
        return len(self.params)

    def init_theta(self) -> list[float]:
        return [init for _, init in self.params]

    def param_clause(self, param_id: int) -> int:
        for i, c in enumerate(self.clauses):
            if isinstance(c.label, Learnable) and c.label.param_id == param_id:
                return i
        raise KeyError(param_id)

    def with_constants(self, extra) -> "Program":
        return Program(self.clauses, self.constants | frozenset(extra))

    def __str__(self) -> str:
        return "".join(f"{c}\n" for c in self.clauses)


def format_program(program: Program) -> str:
    return str(program)


# ---------------------------------------------------------------------------
# Tokenizer and recursive-descent parser
# ---------------------------------------------------------------------------

class Token(NamedTuple):
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<newline>\n)
  | (?P<comment>%[^\n]*)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<label>::)
  | (?P<neck>:-)
  | (?P<naf>\\\+)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<comma>,)
  | (?P<dot>\.)
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> Iterator[Token]:
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "newline":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            yield Token(kind, m.group(), line, m.start() - line_start + 1)
        pos = m.end()
    yield Token("eof", "", line, pos - line_start + 1)


class _Parser:
    def __init__(self, text: str):
        self.tokens = list(tokenize(text))
        self.pos = 0
        self.arities: dict[str, int] = {}
        self.n_params = 0
        self.anon = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def expect(self, kind: str) -> Token:
        tok = self.tok
        if tok.kind != kind:
            found = tok.text or "end of input"
            raise self.error(f"expected {kind}, found {found!r}")
        self.pos += 1
        return tok

    def accept(self, kind: str) -> Token | None:
        if self.tok.kind == kind:
            self.pos += 1
            return self.tokens[self.pos - 1]
        return None

    def program(self) -> Program:
        clauses = []
        while self.tok.kind != "eof":
            clauses.append(self.clause())
        constants = frozenset(
            a
            for c in clauses
            for atom in (c.head, *(lit.atom for lit in c.body))
            for a in atom.args
            if not is_variable(a)
        )
        return Program(tuple(clauses), constants)

    def clause(self) -> Clause:
        label: Label = Deterministic()
        start = self.tok
        if start.kind == "number":
            self.pos += 1
            self.expect("label")
            p = float(start.text)
            if not 0.0 <= p <= 1.0:
                raise self.error(f"probability {start.text} outside [0,1]", start)
            label = Fixed(p)
            head = self.atom()
        else:
            head = self.atom()
            if self.accept("label"):
                label = self._learnable(head, start)
                head = self.atom()
        body: list[Literal] = []
        if self.accept("neck"):
            body.append(self.literal())
            while self.accept("comma"):
                body.append(self.literal())
        self.expect("dot")
        return Clause(head, tuple(body), label)

    def _learnable(self, marker: Atom, tok: Token) -> Learnable:
        if marker.predicate != "t" or marker.arity != 1:
            raise self.error(f"invalid probability label {marker}", tok)
        arg = marker.args[0]
        if arg.startswith("_") and arg[1:].isdigit():
            init = DEFAULT_INIT
        else:
            try:
                init = float(arg)
            except ValueError:
                raise self.error(f"invalid learnable label {marker}", tok) from None
            if not 0.0 < init < 1.0:
                raise self.error(f"learnable initial value {arg} outside (0,1)", tok)
        label = Learnable(init, self.n_params)
        self.n_params += 1
        return label

    def literal(self) -> Literal:
        negated = self.accept("naf") is not None
        return Literal(self.atom(), negated)

    def atom(self) -> Atom:
        name = self.expect("name")
        args: list[str] = []
        if self.accept("lparen"):
            args.append(self.term())
            while self.accept("comma"):
                args.append(self.term())
            self.expect("rparen")
        atom = Atom(name.text, tuple(args))
        if self.tok.kind != "label":
            known = self.arities.setdefault(atom.predicate, atom.arity)
            if known != atom.arity:
                raise self.error(
                    f"predicate {atom.predicate} used with arity {atom.arity}, "
                    f"previously {known}",
                    name,
                )
        return atom

    def term(self) -> str:
        tok = self.tok
        if tok.kind in ("name", "number"):
            self.pos += 1
            return tok.text
        if tok.kind == "var":
            self.pos += 1
            if tok.text == "_":
                # each anonymous variable is distinct
                self.anon += 1
                return f"_{self.anon}"
            return tok.text
        raise self.error(f"expected a term, found {tok.text or 'end of input'!r}")


def parse_program(text: str) -> Program:
    """Parse program text into a :class:`Program`, clauses in source order."""
    return _Parser(text).program()


def parse_atom(text: str) -> Atom:
    p = _Parser(text)
    atom = p.atom()
    p.expect("eof")
    return atom
