"""Text grammar for spatial and jet expressions.

Grammar (whitespace insignificant, UTF-8):

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := atom ('^' factor)?          # right-associative
    atom    := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'

Numbers are decimal or scientific literals.  Identifiers resolve, in order,
to function names (exp, sin, cos, sinh, cosh), jet symbols when jet parsing
is enabled (``u``, ``u_x``, ``u_xy``, ... -- ``u`` followed by an underscore
and a run of declared variable names), declared variables, then named
constants.  Division is represented as multiplication by a negative power.
Exponents of ``^`` must reduce to rational constants; they are evaluated in
exact fraction arithmetic so that ``x^(1/3)`` keeps the exact exponent 1/3.

Jet parsing additionally accepts ``D(f, x)`` / ``D(f, x, y)``: the total
derivative of ``f`` with respect to the listed variables, expanded later by
the jet-polynomial lowering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import ParseError
from .spatial import (
    Constant,
    Cos,
    Cosh,
    Exp,
    Power,
    Product,
    Sin,
    Sinh,
    SpatialExpr,
    Sum,
    Var,
    simplify,
    _FUNCTION_BY_NAME,
    _FUNCTIONS,
)

RESERVED_FUNCTIONS = ("exp", "sin", "cos", "sinh", "cosh")


@dataclass(frozen=True)
class JetSymbol:
    """A jet variable: ``orders[i]`` is the derivative order in variable i."""

    orders: tuple[int, ...]

    @property
    def order(self) -> int:
        return sum(self.orders)


@dataclass(frozen=True)
class TotalDerivative:
    """``D(arg, vars...)``: total derivative, expanded during jet lowering."""

    arg: object
    variables: tuple[int, ...]


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # NUMBER IDENT OP LPAREN RPAREN COMMA END
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        start_col = col
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_exp = False
            while j < n:
                c = text[j]
                if c.isdigit() or c == ".":
                    j += 1
                elif c in "eE" and not seen_exp and j + 1 < n and (
                    text[j + 1].isdigit() or (text[j + 1] in "+-" and j + 2 < n and text[j + 2].isdigit())
                ):
                    seen_exp = True
                    j += 2 if text[j + 1] in "+-" else 1
                else:
                    break
            lit = text[i:j]
            try:
                float(lit)
            except ValueError:
                raise ParseError(f"malformed number {lit!r}", line, start_col, {"number"})
            tokens.append(_Token("NUMBER", lit, line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("IDENT", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch in "+-*/^":
            tokens.append(_Token("OP", ch, line, start_col))
        elif ch == "(":
            tokens.append(_Token("LPAREN", ch, line, start_col))
        elif ch == ")":
            tokens.append(_Token("RPAREN", ch, line, start_col))
        elif ch == ",":
            tokens.append(_Token("COMMA", ch, line, start_col))
        else:
            raise ParseError(f"unexpected character {ch!r}", line, start_col, set())
        i += 1
        col += 1
    tokens.append(_Token("END", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(
        self,
        text: str,
        variables: Sequence[str],
        constants: Mapping[str, float],
        jet_mode: bool,
    ):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.variables = list(variables)
        self.constants = dict(constants)
        self.jet_mode = jet_mode

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def _advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def _expect(self, kind: str, text: str | None = None, expected: str = "") -> _Token:
        tok = self.current
        if tok.kind != kind or (text is not None and tok.text != text):
            shown = tok.text or "end of input"
            raise ParseError(
                f"unexpected {shown!r}", tok.line, tok.column, {expected or text or kind.lower()}
            )
        return self._advance()

    def parse(self):
        node = self.expr()
        tok = self.current
        if tok.kind != "END":
            raise ParseError(
                f"unexpected {tok.text!r} after expression", tok.line, tok.column,
                {"operator", "end of input"},
            )
        return node

    def expr(self):
        node = self.term()
        while self.current.kind == "OP" and self.current.text in "+-":
            op = self._advance().text
            rhs = self.term()
            if op == "-":
                rhs = Product((Constant(-1.0), rhs))
            node = Sum((node, rhs))
        return node

    def term(self):
        node = self.factor()
        while self.current.kind == "OP" and self.current.text in "*/":
            op = self._advance().text
            rhs = self.factor()
            if op == "/":
                rhs = Power(rhs, Fraction(-1))
            node = Product((node, rhs))
        return node

    def factor(self):
        if self.current.kind == "OP" and self.current.text == "-":
            self._advance()
            return Product((Constant(-1.0), self.factor()))
        return self.power()

    def power(self):
        base = self.atom()
        if self.current.kind == "OP" and self.current.text == "^":
            caret = self._advance()
            exponent_node = self.factor()
            exponent = _rationalize(exponent_node, caret)
            return Power(base, exponent)
        return base

    def atom(self):
        tok = self.current
        if tok.kind == "NUMBER":
            self._advance()
            return Constant(float(tok.text))
        if tok.kind == "LPAREN":
            self._advance()
            node = self.expr()
            self._expect("RPAREN", expected="')'")
            return node
        if tok.kind == "IDENT":
            self._advance()
            name = tok.text
            if self.current.kind == "LPAREN":
                return self._call(name, tok)
            return self._resolve(name, tok)
        shown = tok.text or "end of input"
        raise ParseError(
            f"unexpected {shown!r}", tok.line, tok.column,
            {"number", "identifier", "'('", "'-'"},
        )

    def _call(self, name: str, tok: _Token):
        self._expect("LPAREN", expected="'('")
        args = [self.expr()]
        while self.current.kind == "COMMA":
            self._advance()
            args.append(self.expr())
        self._expect("RPAREN", expected="')'")
        if name in _FUNCTION_BY_NAME:
            if len(args) != 1:
                raise ParseError(
                    f"{name} takes exactly one argument", tok.line, tok.column, {name + "(arg)"}
                )
            return _FUNCTION_BY_NAME[name](args[0])
        if name == "D" and self.jet_mode:
            if len(args) < 2:
                raise ParseError(
                    "D needs an expression and at least one variable",
                    tok.line, tok.column, {"D(expr, var, ...)"},
                )
            var_ids = []
            for arg in args[1:]:
                if not isinstance(arg, Var):
                    raise ParseError(
                        "D variables must be declared variable names",
                        tok.line, tok.column, set(self.variables),
                    )
                var_ids.append(arg.index)
            return TotalDerivative(args[0], tuple(var_ids))
        raise ParseError(
            f"unknown function {name!r}", tok.line, tok.column, set(RESERVED_FUNCTIONS)
        )

    def _resolve(self, name: str, tok: _Token):
        if self.jet_mode:
            jet = self._try_jet(name, tok)
            if jet is not None:
                return jet
        if name in self.variables:
            return Var(self.variables.index(name), name)
        if name in self.constants:
            return Constant(float(self.constants[name]))
        expected = set(self.variables) | set(self.constants) | set(RESERVED_FUNCTIONS)
        if self.jet_mode:
            expected |= {"u", "u_<vars>", "D"}
        raise ParseError(f"unknown identifier {name!r}", tok.line, tok.column, expected)

    def _try_jet(self, name: str, tok: _Token):
        if name == "u":
            return JetSymbol(tuple(0 for _ in self.variables))
        if not name.startswith("u_"):
            return None
        suffix = name[2:]
        orders = [0] * len(self.variables)
        pos = 0
        while pos < len(suffix):
            # greedy longest declared-variable-name match
            for cand in sorted(self.variables, key=len, reverse=True):
                if suffix.startswith(cand, pos):
                    orders[self.variables.index(cand)] += 1
                    pos += len(cand)
                    break
            else:
                raise ParseError(
                    f"cannot read jet symbol {name!r}: {suffix[pos:]!r} does not start "
                    "with a declared variable",
                    tok.line, tok.column, set(self.variables),
                )
        return JetSymbol(tuple(orders))


def _rationalize(node, caret: _Token) -> Fraction:
    """Evaluate an exponent subtree in exact fraction arithmetic."""

    def walk(e) -> Fraction:
        if isinstance(e, Constant):
            # decimal literals become exact decimal fractions via repr
            value = e.value
            if value == int(value):
                return Fraction(int(value))
            return Fraction(repr(value)).limit_denominator(10**12)
        if isinstance(e, Sum):
            return sum((walk(c) for c in e.children), Fraction(0))
        if isinstance(e, Product):
            result = Fraction(1)
            for c in e.children:
                result *= walk(c)
            return result
        if isinstance(e, Power):
            inner = walk(e.base)
            if e.exponent.denominator != 1:
                raise ParseError(
                    "exponents must be rational constants", caret.line, caret.column,
                    {"rational exponent"},
                )
            return inner ** int(e.exponent)
        raise ParseError(
            "exponents must be rational constants", caret.line, caret.column,
            {"rational exponent"},
        )

    try:
        return walk(node)
    except ZeroDivisionError:
        raise ParseError("division by zero in exponent", caret.line, caret.column, set())


def _reject_jets(node, where: str = "expression"):
    if isinstance(node, (JetSymbol, TotalDerivative)):
        raise ParseError(f"jet symbols are not allowed in this {where}")
    if isinstance(node, (Sum, Product)):
        for c in node.children:
            _reject_jets(c, where)
    elif isinstance(node, Power):
        _reject_jets(node.base, where)
    elif isinstance(node, (Exp, Sin, Cos, Sinh, Cosh)):
        _reject_jets(node.arg, where)


def parse_spatial(
    text: str,
    variables: Sequence[str],
    constants: Mapping[str, float] | None = None,
) -> SpatialExpr:
    """Parse a pure spatial expression and return its simplified AST."""
    parser = _Parser(text, variables, constants or {}, jet_mode=False)
    node = parser.parse()
    _reject_jets(node)
    return simplify(node)


def parse_jet_tree(
    text: str,
    variables: Sequence[str],
    constants: Mapping[str, float] | None = None,
):
    """Parse an expression that may contain jet symbols and D(...) nodes.

    Returns the raw tree (spatial nodes with JetSymbol/TotalDerivative
    leaves); use the jets module to lower it to a JetPolynomial.
    """
    parser = _Parser(text, variables, constants or {}, jet_mode=True)
    return parser.parse()


# ---------------------------------------------------------------------------
# printer
# ---------------------------------------------------------------------------


def format_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _format_fraction(f: Fraction) -> str:
    if f.denominator == 1:
        return f"({f.numerator})" if f.numerator < 0 else str(f.numerator)
    return f"({f.numerator}/{f.denominator})"


def _needs_parens_in_product(e: SpatialExpr) -> bool:
    return isinstance(e, Sum) or (isinstance(e, Constant) and e.value < 0)


def _sign_split(e: SpatialExpr) -> tuple[bool, str]:
    """Render a term as (is_negative, unsigned text)."""
    if isinstance(e, Constant) and e.value < 0:
        return True, format_number(-e.value)
    if isinstance(e, Product) and isinstance(e.children[0], Constant) and e.children[0].value < 0:
        lead = e.children[0].value
        rest = e.children[1:]
        if lead == -1.0:
            if len(rest) == 1:
                return True, _product_factor(rest[0])
            return True, to_text(Product(rest))
        return True, to_text(Product((Constant(-lead),) + rest))
    return False, to_text(e)


def _product_factor(e: SpatialExpr) -> str:
    text = to_text(e)
    return f"({text})" if _needs_parens_in_product(e) else text


def to_text(e: SpatialExpr) -> str:
    """Render an AST in the grammar; parsing the result reproduces the
    simplified AST."""
    if isinstance(e, Constant):
        return format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Sum):
        pieces = []
        for i, child in enumerate(e.children):
            negative, body = _sign_split(child)
            if i == 0:
                pieces.append(f"-{body}" if negative else body)
            else:
                pieces.append(f" - {body}" if negative else f" + {body}")
        return "".join(pieces)
    if isinstance(e, Product):
        if isinstance(e.children[0], Constant) and e.children[0].value < 0:
            negative, body = _sign_split(e)
            return f"-{body}"
        return "*".join(_product_factor(c) for c in e.children)
    if isinstance(e, Power):
        base = to_text(e.base)
        if isinstance(e.base, (Sum, Product, Power)) or (
            isinstance(e.base, Constant) and e.base.value < 0
        ):
            base = f"({base})"
        return f"{base}^{_format_fraction(e.exponent)}"
    if type(e) in _FUNCTIONS:
        return f"{_FUNCTIONS[type(e)][1]}({to_text(e.arg)})"
    raise TypeError(f"unknown node {type(e).__name__}")
