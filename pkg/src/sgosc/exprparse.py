"""Parser for the symbol expression mini-language.

Grammar (EBNF):

    expr    := term (("+" | "-") term)*
    term    := factor (("*" | "/") factor)*
    factor  := unary ("^" signed_number)?
    unary   := "-" unary | atom
    atom    := NUMBER | "pi" | VAR | FUNC "(" args ")" | "(" expr ")"
    args    := arg ("," arg)*
    arg     := expr | "x" | "k"          (bare vectors only inside jb/norm2)
    VAR     := ("x" | "k") DIGITS
    FUNC    := "exp" | "sin" | "cos" | "sqrt" | "jb" | "norm2"

Scalars are reals; x-variables index the position, k-variables the
covariable.  Indices are 1-based (x1..xd, k1..ks) unless index 0 appears for
that family anywhere in the expression, in which case that family switches to
0-based (physics-style x0 time component).  jb(...) is the japanese bracket
sqrt(1 + sum of squares) of its (scalar or vector) arguments; norm2 is the
plain sum of squares.  Division is rejected unless the denominator is a
japanese bracket power or a number, or the caller asserts nonvanishing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .jets import Jet, jb_jet, norm2_jet


class SymbolParseError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_FUNCS = ("exp", "sin", "cos", "sqrt", "jb", "norm2")


@dataclass
class Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> List[Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise SymbolParseError(f"unexpected character {text[pos]!r}", pos)
        if m.group("num") is not None:
            out.append(Token("num", m.group(0).strip(), m.start()))
        elif m.group("name") is not None:
            out.append(Token("name", m.group("name"), m.start()))
        else:
            out.append(Token("op", m.group("op"), m.start()))
        pos = m.end()
    out.append(Token("end", "", len(text)))
    return out


# -- AST ---------------------------------------------------------------------


class Node:
    def jet(self, xj: Sequence[Jet], kj: Sequence[Jet]) -> Jet:
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    def walk(self):
        yield self
        for ch in getattr(self, "children", ()):
            yield from ch.walk()


@dataclass
class Num(Node):
    value: float

    def jet(self, xj, kj):
        return Jet.constant((list(xj) + list(kj))[0].space, self.value)

    def to_text(self):
        return repr(self.value)


@dataclass
class Var(Node):
    family: str  # "x" | "k"
    index: int  # resolved 0-based

    def jet(self, xj, kj):
        seq = xj if self.family == "x" else kj
        return seq[self.index]

    def to_text(self):
        # printed 1-based so the text round-trips regardless of the input style
        return f"{self.family}{self.index + 1}"


@dataclass
class Neg(Node):
    a: Node

    @property
    def children(self):
        return (self.a,)

    def jet(self, xj, kj):
        return -self.a.jet(xj, kj)

    def to_text(self):
        return f"(-{self.a.to_text()})"


@dataclass
class BinOp(Node):
    op: str
    a: Node
    b: Node

    @property
    def children(self):
        return (self.a, self.b)

    def jet(self, xj, kj):
        ja = self.a.jet(xj, kj)
        jb = self.b.jet(xj, kj)
        if self.op == "+":
            return ja + jb
        if self.op == "-":
            return ja - jb
        if self.op == "*":
            return ja * jb
        if self.op == "/":
            return ja / jb
        raise AssertionError(self.op)

    def to_text(self):
        return f"({self.a.to_text()}{self.op}{self.b.to_text()})"


@dataclass
class Pow(Node):
    a: Node
    p: float

    @property
    def children(self):
        return (self.a,)

    def jet(self, xj, kj):
        return self.a.jet(xj, kj) ** self.p

    def to_text(self):
        return f"({self.a.to_text()}^{self.p!r})"


@dataclass
class Call(Node):
    fn: str
    args: tuple  # scalar Nodes or BareVec

    @property
    def children(self):
        return tuple(a for a in self.args if isinstance(a, Node))

    def _arg_jets(self, xj, kj):
        out = []
        for a in self.args:
            if isinstance(a, BareVec):
                out.extend(xj if a.family == "x" else kj)
            else:
                out.append(a.jet(xj, kj))
        return out

    def jet(self, xj, kj):
        if self.fn == "jb":
            return jb_jet(self._arg_jets(xj, kj))
        if self.fn == "norm2":
            return norm2_jet(self._arg_jets(xj, kj))
        (arg,) = self.args
        j = arg.jet(xj, kj)
        if self.fn == "exp":
            return j.exp()
        if self.fn == "sin":
            return j.sin()
        if self.fn == "cos":
            return j.cos()
        if self.fn == "sqrt":
            return j.sqrt()
        raise AssertionError(self.fn)

    def to_text(self):
        parts = []
        for a in self.args:
            parts.append(a.family if isinstance(a, BareVec) else a.to_text())
        return f"{self.fn}({','.join(parts)})"


@dataclass
class BareVec:
    family: str

    def walk(self):
        return iter(())


# -- parser --------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.toks = tokens
        self.i = 0

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def eat(self, kind=None, text=None) -> Token:
        t = self.cur
        if kind is not None and t.kind != kind:
            raise SymbolParseError(f"expected {kind}, found {t.text!r}", t.pos)
        if text is not None and t.text != text:
            raise SymbolParseError(f"expected {text!r}, found {t.text!r}", t.pos)
        self.i += 1
        return t

    def expr(self) -> Node:
        node = self.term()
        while self.cur.kind == "op" and self.cur.text in "+-":
            op = self.eat().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.cur.kind == "op" and self.cur.text in "*/":
            op = self.eat().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        node = self.unary()
        if self.cur.kind == "op" and self.cur.text == "^":
            self.eat()
            sign = 1.0
            if self.cur.kind == "op" and self.cur.text == "-":
                self.eat()
                sign = -1.0
            t = self.eat("num")
            node = Pow(node, sign * float(t.text))
        return node

    def unary(self) -> Node:
        if self.cur.kind == "op" and self.cur.text == "-":
            self.eat()
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> Node:
        t = self.cur
        if t.kind == "num":
            self.eat()
            return Num(float(t.text))
        if t.kind == "name":
            name = t.text
            if name == "pi":
                self.eat()
                return Num(float(np.pi))
            if name in _FUNCS:
                self.eat()
                self.eat("op", "(")
                args = [self.call_arg(name)]
                while self.cur.kind == "op" and self.cur.text == ",":
                    self.eat()
                    args.append(self.call_arg(name))
                self.eat("op", ")")
                if name not in ("jb", "norm2") and (
                    len(args) != 1 or isinstance(args[0], BareVec)
                ):
                    raise SymbolParseError(f"{name} takes one scalar argument", t.pos)
                return Call(name, tuple(args))
            m = re.fullmatch(r"([xk])(\d+)", name)
            if m:
                self.eat()
                return Var(m.group(1), int(m.group(2)))
            raise SymbolParseError(f"unknown name {name!r}", t.pos)
        if t.kind == "op" and t.text == "(":
            self.eat()
            node = self.expr()
            self.eat("op", ")")
            return node
        raise SymbolParseError(f"unexpected token {t.text!r}", t.pos)

    def call_arg(self, fn: str):
        if fn in ("jb", "norm2") and self.cur.kind == "name" and self.cur.text in ("x", "k"):
            nxt = self.toks[self.i + 1]
            if nxt.kind == "op" and nxt.text in (",", ")"):
                fam = self.eat().text
                return BareVec(fam)
        return self.expr()


def _resolve_indices(root: Node, d: int, s: int):
    """1-based indices unless index 0 appears for that family (then 0-based)."""
    vars_ = [n for n in root.walk() if isinstance(n, Var)]
    for fam, dim in (("x", d), ("k", s)):
        fam_vars = [v for v in vars_ if v.family == fam]
        zero_based = any(v.index == 0 for v in fam_vars)
        for v in fam_vars:
            idx = v.index if zero_based else v.index - 1
            if idx < 0 or idx >= dim:
                raise SymbolParseError(
                    f"variable {fam}{v.index} out of range for dimension {dim}", 0
                )
            v.index = idx


def _is_jb_power(node: Node) -> bool:
    if isinstance(node, Num):
        return node.value != 0.0
    if isinstance(node, Call) and node.fn == "jb":
        return True
    if isinstance(node, Pow):
        return _is_jb_power(node.a)
    if isinstance(node, BinOp) and node.op == "*":
        return _is_jb_power(node.a) and _is_jb_power(node.b)
    return False


def _check_divisions(root: Node, allow: bool):
    for n in root.walk():
        if isinstance(n, BinOp) and n.op == "/" and not allow:
            if not _is_jb_power(n.b):
                raise SymbolParseError(
                    "division denominator must be a japanese-bracket power "
                    "(pass allow_division=True to assert it never vanishes)",
                    0,
                )


def parse_expression(text: str, d: int, s: int, allow_division: bool = False) -> Node:
    toks = _tokenize(text)
    p = _Parser(toks)
    root = p.expr()
    if p.cur.kind != "end":
        raise SymbolParseError(f"trailing input {p.cur.text!r}", p.cur.pos)
    _resolve_indices(root, d, s)
    _check_divisions(root, allow_division)
    return root
