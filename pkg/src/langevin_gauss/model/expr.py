"""A tiny expression language for vector fields.

Grammar (LL(1); ``^`` binds tighter than unary minus, which binds tighter
than ``* /``, which bind tighter than ``+ -``)::

    field  := expr (';' expr)*
    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'

Variables are ``x1 .. xd``; functions are sin, cos, exp, tanh, sqrt, abs.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


class ExprError(ValueError):
    """Problem with an expression's text or with its arity."""


class ExprSyntaxError(ExprError):
    def __init__(self, msg, line, col):
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line = line
        self.col = col


class EvaluationError(ArithmeticError):
    """Division by zero, overflow or a domain error during evaluation."""


# --- tree -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


# --- tokenizer --------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^();])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(source):
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


# --- parser -----------------------------------------------------------------

class _Parser:
    def __init__(self, source, d):
        self.toks = tokenize(source)
        self.i = 0
        self.d = d

    @property
    def tok(self):
        return self.toks[self.i]

    def advance(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.tok
        if t.text != text:
            found = "end of input" if t.kind == "eof" else repr(t.text)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", t.line, t.col)
        return self.advance()

    def field(self):
        comps = [self.expr()]
        while self.tok.text == ";":
            self.advance()
            comps.append(self.expr())
        if self.tok.kind != "eof":
            raise ExprSyntaxError(f"unexpected {self.tok.text!r}", self.tok.line, self.tok.col)
        return comps

    def expr(self):
        node = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text))
        if t.kind == "name":
            self.advance()
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(t.text, arg)
            m = re.fullmatch(r"x([1-9]\d*)", t.text)
            if m and int(m.group(1)) <= self.d:
                return Var(int(m.group(1)))
            raise ExprError(f"unknown identifier {t.text!r} at line {t.line}, column {t.col}")
        if t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ExprSyntaxError(f"unexpected {found}", t.line, t.col)


def parse_components(source, d):
    return _Parser(source, d).field()


# --- printing ---------------------------------------------------------------

def to_source(node):
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_source(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


# --- evaluation -------------------------------------------------------------

def _eval(node, x):
    if isinstance(node, Num):
        return np.full(x.shape[0], node.value)
    if isinstance(node, Var):
        return x[:, node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.arg, x)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, x))
    a = _eval(node.left, x)
    b = _eval(node.right, x)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    # C pow keeps negative bases real for integral exponents; otherwise NaN -> raises
    return np.power(a, b)


class FieldExpr:
    """Compiled vector field of ``n_components`` expressions in ``d`` variables."""

    def __init__(self, source, d, components):
        self.source = source
        self.d = d
        self.components = tuple(components)

    @property
    def arity(self):
        return self.d

    def __eq__(self, other):
        return isinstance(other, FieldExpr) and self.d == other.d and self.components == other.components

    def __hash__(self):
        return hash((self.d, self.components))

    def __repr__(self):
        return f"FieldExpr({self.to_source()!r}, d={self.d})"

    def to_source(self):
        return "; ".join(to_source(c) for c in self.components)

    def __call__(self, x):
        """Evaluate at points ``x`` of shape ``(n, d)`` (or ``(d,)``).

        Returns shape ``(n, n_components)`` (or ``(n_components,)``).

        Raises
        ------
        EvaluationError
            On division by zero, overflow, domain errors or non-finite input.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        if X.shape[1] != self.d:
            raise ValueError(f"expected points of dimension {self.d}, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise EvaluationError("non-finite evaluation point")
        try:
            with np.errstate(all="raise"):
                out = np.stack([_eval(c, X) for c in self.components], axis=1)
        except (FloatingPointError, ZeroDivisionError, OverflowError) as exc:
            raise EvaluationError(f"evaluation of {self.to_source()!r} failed: {exc}") from exc
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"evaluation of {self.to_source()!r} produced non-finite values")
        return out[0] if single else out


def parse_field_expr(source, d, n_components=None):
    """Parse ``source`` into a :class:`FieldExpr` over ``x1..xd``.

    ``n_components`` defaults to ``d`` (a vector field); pass 1 for a scalar
    potential or ``d*d`` for a matrix field given row-major.
    """
    if d < 1:
        raise ExprError("dimension must be positive")
    comps = parse_components(source, d)
    want = d if n_components is None else n_components
    if len(comps) != want:
        raise ExprError(f"arity mismatch: expected {want} component(s), found {len(comps)}")
    return FieldExpr(source, d, comps)
