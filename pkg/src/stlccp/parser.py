"""Infix text format for STL formulas.

Grammar (temporal prefixes bind tighter than ``&``, which binds tighter
than ``|``)::

    formula := conj ("|" conj)*
    conj    := unary ("&" unary)*
    unary   := ("G" | "F") interval unary
             | atom "U" interval unary
             | atom
    atom    := "(" formula ")" | comparison | region | IDENT | "!" atom
    region  := ("inside" | "outside") "(" IDENT ")"
    interval:= "[" bound "," bound "]"     bound := int | "T" (("+"|"-") int)?

``comparison`` is a linear expression over ``x0 .. x{n-1}`` compared with
``<=`` or ``>=`` against a number.  ``!`` is only allowed in front of
predicates and regions; it is pushed in immediately so the result is NNF.
"""

from __future__ import annotations

import re
from typing import Mapping

from .formula import (Always, And, Eventually, Formula, FormulaError, Or,
                      Pred, Predicate, Until, check_dimension, disj, conj)


class ParseError(ValueError):
    def __init__(self, message: str, pos: int | None = None, text: str = ""):
        self.pos = pos
        self.text = text
        where = f" at position {pos}" if pos is not None else ""
        super().__init__(f"{message}{where}")


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|[()\[\],|&!+\-*])
""", re.VERBOSE)


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("eof", "", len(text)))
    return out


def negate(f: Formula) -> Formula:
    """Push a negation through a formula (NNF); Until is not negatable here."""
    if isinstance(f, Pred):
        return Pred(f.pred.negated())
    if isinstance(f, And):
        return Or(tuple(negate(a) for a in f.args))
    if isinstance(f, Or):
        return And(tuple(negate(a) for a in f.args))
    if isinstance(f, Always):
        return Eventually(f.t1, f.t2, negate(f.arg))
    if isinstance(f, Eventually):
        return Always(f.t1, f.t2, negate(f.arg))
    raise FormulaError("negation of Until is not expressible in this NNF")


class _Parser:
    def __init__(self, text, state_dim, names, regions, horizon):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.n = state_dim
        self.names = names or {}
        self.regions = regions or {}
        self.horizon = horizon

    # token helpers
    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, tok[2], self.text)

    def expect(self, value):
        tok = self.next()
        if tok[1] != value:
            self.error(f"expected {value!r}, found {tok[1] or 'end of input'!r}",
                       tok)
        return tok

    def at_temporal(self, word):
        tok = self.peek()
        return tok[0] == "ident" and tok[1] == word and self.peek(1)[1] == "["

    # grammar
    def parse(self):
        f = self.formula()
        if self.peek()[0] != "eof":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return f

    def formula(self):
        parts = [self.conj()]
        while self.peek()[1] == "|":
            self.next()
            parts.append(self.conj())
        return disj(*parts)

    def conj(self):
        parts = [self.unary()]
        while self.peek()[1] == "&":
            self.next()
            parts.append(self.unary())
        return conj(*parts)

    def unary(self):
        for word, cls in (("G", Always), ("F", Eventually)):
            if self.at_temporal(word):
                self.next()
                t1, t2, tok = self.interval()
                arg = self.unary()
                return self.build(cls, tok, t1, t2, arg)
        lhs = self.atom()
        if self.at_temporal("U"):
            self.next()
            t1, t2, tok = self.interval()
            rhs = self.unary()
            return self.build(Until, tok, t1, t2, lhs, rhs)
        return lhs

    def build(self, cls, tok, *args):
        try:
            return cls(*args)
        except FormulaError as exc:
            raise ParseError(str(exc), tok[2], self.text) from None

    def interval(self):
        tok = self.expect("[")
        t1 = self.bound()
        self.expect(",")
        t2 = self.bound()
        self.expect("]")
        return t1, t2, tok

    def bound(self):
        tok = self.peek()
        if tok[1] == "-":
            self.error("negative interval bound")
        if tok[0] == "ident" and tok[1] == "T":
            self.next()
            if self.horizon is None:
                self.error("interval uses T but no horizon was given", tok)
            value = self.horizon
            if self.peek()[1] in ("+", "-"):
                sign = 1 if self.next()[1] == "+" else -1
                value += sign * self.integer()
            return value
        return self.integer()

    def integer(self):
        tok = self.next()
        if tok[0] != "num" or not tok[1].isdigit():
            self.error(f"expected an integer, found {tok[1]!r}", tok)
        return int(tok[1])

    def atom(self):
        tok = self.peek()
        if tok[1] == "(":
            self.next()
            f = self.formula()
            self.expect(")")
            return f
        if tok[1] == "!":
            self.next()
            inner = self.atom()
            try:
                return negate(inner)
            except FormulaError as exc:
                raise ParseError(str(exc), tok[2], self.text) from None
        if tok[0] == "ident" and tok[1] in ("inside", "outside") \
                and self.peek(1)[1] == "(":
            self.next()
            self.expect("(")
            name_tok = self.next()
            self.expect(")")
            inside, outside = self.region(name_tok)
            return inside if tok[1] == "inside" else outside
        if tok[0] == "ident" and not self.is_variable(tok[1]):
            self.next()
            if tok[1] in self.names:
                return self.names[tok[1]]
            if tok[1] in self.regions:
                return self.regions[tok[1]][0]
            self.error(f"unknown name {tok[1]!r}", tok)
        return self.comparison()

    def region(self, tok):
        if tok[0] != "ident":
            self.error("expected a region name", tok)
        if tok[1] not in self.regions:
            self.error(f"unknown region {tok[1]!r}", tok)
        return self.regions[tok[1]]

    def is_variable(self, word):
        return re.fullmatch(r"x\d+", word) is not None

    # linear expressions
    def comparison(self):
        start = self.peek()
        coeffs, const = self.linexpr()
        op = self.next()
        if op[1] not in ("<=", ">="):
            self.error("expected '<=' or '>='", op)
        rhs_c, rhs_k = self.linexpr()
        # move everything to the left: (coeffs - rhs_c).x + const - rhs_k  op 0
        a = [coeffs.get(i, 0.0) - rhs_c.get(i, 0.0) for i in range(self.n)]
        k = const - rhs_k
        if op[1] == ">=":
            a = [-v for v in a]
            k = -k
        label = self.text[start[2]:self.peek()[2]].strip()
        return Pred(Predicate(tuple(a), -k, label))

    def linexpr(self):
        coeffs, const = {}, 0.0
        sign = 1.0
        if self.peek()[1] in ("+", "-"):
            sign = -1.0 if self.next()[1] == "-" else 1.0
        while True:
            c, var = self.term()
            if var is None:
                const += sign * c
            else:
                coeffs[var] = coeffs.get(var, 0.0) + sign * c
            if self.peek()[1] in ("+", "-"):
                sign = -1.0 if self.next()[1] == "-" else 1.0
            else:
                return coeffs, const

    def term(self):
        tok = self.next()
        if tok[0] == "num":
            value = float(tok[1])
            if self.peek()[1] == "*":
                self.next()
                return value, self.variable()
            return value, None
        if tok[0] == "ident":
            self.i -= 1
            return 1.0, self.variable()
        self.error(f"expected a number or variable, found {tok[1]!r}", tok)

    def variable(self):
        tok = self.next()
        if tok[0] != "ident" or not self.is_variable(tok[1]):
            self.error(f"expected a state variable x<i>, found {tok[1]!r}", tok)
        idx = int(tok[1][1:])
        if idx >= self.n:
            self.error(f"state index {idx} out of range for dimension {self.n}",
                       tok)
        return idx


def parse_formula(text: str, state_dim: int,
                  names: Mapping[str, Formula] | None = None,
                  regions: Mapping[str, tuple[Formula, Formula]] | None = None,
                  horizon: int | None = None) -> Formula:
    """Parse the infix DSL into an NNF formula.

    ``names`` maps identifiers to ready-made formulas; ``regions`` maps a
    region name to its ``(inside, outside)`` formulas.  A bare region name
    means ``inside(R)`` and ``!R`` means ``outside(R)``.  ``horizon`` lets
    interval bounds refer to ``T``.
    """
    f = _Parser(text, state_dim, names, regions, horizon).parse()
    try:
        check_dimension(f, state_dim)
    except FormulaError as exc:
        raise ParseError(str(exc)) from None
    return f
