"""Sandboxed mini-language for conductor placement.

Scripts are the contract between the LLM gateway and the geometry stage:
instead of executing model-generated general-purpose code, the model emits
a tiny imperative language (let bindings, bounded for loops, arithmetic,
trig, point emission) that this module parses and interprets under a step
budget. The interpreter has no I/O of any kind by construction.

Grammar::

    program := stmt*
    stmt    := "let" IDENT "=" expr
             | "for" IDENT "in" expr ".." expr "{" stmt* "}"
             | "emit" "point" "(" expr "," expr ")"
    expr    := additive over + - | * / | ^ (right assoc) | unary - | primary
    primary := NUMBER | "pi" | IDENT | fn "(" args ")" | "(" expr ")"
    fn      := sin cos tan sqrt abs min max floor

``#`` starts a line comment. Loop ranges are half-open; both bounds must be
compile-time integers and spans may not exceed 10000 iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import LayoutRuntimeError, LayoutSyntaxError

MAX_LOOP_BOUND = 10000
DEFAULT_STEP_BUDGET = 1_000_000

_FUNARITY = {
    "sin": 1, "cos": 1, "tan": 1, "sqrt": 1, "abs": 1, "floor": 1,
    "min": 2, "max": 2,
}
_KEYWORDS = {"let", "for", "in", "emit", "point", "pi"}


# -- AST --------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    line: int
    column: int


@dataclass(frozen=True)
class Num(Node):
    value: float | int


@dataclass(frozen=True)
class Name(Node):
    ident: str


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Neg(Node):
    operand: Node


@dataclass(frozen=True)
class Call(Node):
    func: str
    args: tuple[Node, ...]


@dataclass(frozen=True)
class Let(Node):
    ident: str
    expr: Node


@dataclass(frozen=True)
class For(Node):
    ident: str
    start: Node
    stop: Node
    body: tuple[Node, ...]


@dataclass(frozen=True)
class Emit(Node):
    x: Node
    y: Node


#: Every node kind the interpreter can encounter. There is deliberately no
#: node for file, network, or environment access.
NODE_KINDS = (Num, Name, BinOp, Neg, Call, Let, For, Emit)


@dataclass(frozen=True)
class LayoutScript:
    source: str
    statements: tuple[Node, ...]


# -- lexer ------------------------------------------------------------------

@dataclass(frozen=True)
class _Tok:
    kind: str  # num | ident | op | eof
    text: str
    line: int
    column: int


_OPS = ("..", "+", "-", "*", "/", "^", "(", ")", "{", "}", ",", "=")


def _tokenize(source: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col, i = 1, 1, 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            seen_dot = seen_exp = False
            while j < n:
                c = source[j]
                if c.isdigit():
                    j += 1
                elif c == "." and not seen_dot and not seen_exp \
                        and source[j:j + 2] != "..":
                    seen_dot = True
                    j += 1
                elif c in "eE" and not seen_exp:
                    nxt = source[j + 1:j + 2]
                    if nxt.isdigit() or (nxt in "+-" and source[j + 2:j + 3].isdigit()):
                        seen_exp = True
                        j += 2 if nxt in "+-" else 1
                    else:
                        break
                else:
                    break
            text = source[i:j]
            toks.append(_Tok("num", text, line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            toks.append(_Tok("ident", source[i:j], line, col))
            col += j - i
            i = j
            continue
        matched = None
        for op in _OPS:
            if source.startswith(op, i):
                matched = op
                break
        if matched is None:
            raise LayoutSyntaxError(f"unexpected character {ch!r}", line, col)
        toks.append(_Tok("op", matched, line, col))
        col += len(matched)
        i += len(matched)
    toks.append(_Tok("eof", "", line, col))
    return toks


# -- parser -----------------------------------------------------------------

class _Parser:
    def __init__(self, source: str):
        self.toks = _tokenize(source)
        self.pos = 0

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, message: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        raise LayoutSyntaxError(message, tok.line, tok.column)

    def expect_op(self, op: str) -> _Tok:
        t = self.peek()
        if t.kind != "op" or t.text != op:
            found = t.text or "end of input"
            self.fail(f"expected {op!r}, found {found!r}")
        return self.next()

    def expect_keyword(self, kw: str) -> _Tok:
        t = self.peek()
        if t.kind != "ident" or t.text != kw:
            self.fail(f"expected {kw!r}")
        return self.next()

    def program(self) -> tuple[Node, ...]:
        stmts = []
        while self.peek().kind != "eof":
            stmts.append(self.statement())
        return tuple(stmts)

    def statement(self) -> Node:
        t = self.peek()
        if t.kind == "ident" and t.text == "let":
            self.next()
            name = self.ident_token("variable name")
            self.expect_op("=")
            return Let(t.line, t.column, name.text, self.expr())
        if t.kind == "ident" and t.text == "for":
            self.next()
            name = self.ident_token("loop variable")
            self.expect_keyword("in")
            start = self.expr()
            self.expect_op("..")
            stop = self.expr()
            self.expect_op("{")
            body = []
            while not (self.peek().kind == "op" and self.peek().text == "}"):
                if self.peek().kind == "eof":
                    self.fail("unterminated for block, missing '}'", t)
                body.append(self.statement())
            self.expect_op("}")
            return For(t.line, t.column, name.text, start, stop, tuple(body))
        if t.kind == "ident" and t.text == "emit":
            self.next()
            self.expect_keyword("point")
            self.expect_op("(")
            x = self.expr()
            self.expect_op(",")
            y = self.expr()
            self.expect_op(")")
            return Emit(t.line, t.column, x, y)
        self.fail("expected 'let', 'for' or 'emit'")

    def ident_token(self, what: str) -> _Tok:
        t = self.peek()
        if t.kind != "ident" or t.text in _KEYWORDS:
            self.fail(f"expected {what}")
        return self.next()

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in ("+", "-"):
            op = self.next()
            node = BinOp(op.line, op.column, op.text, node, self.term())
        return node

    def term(self) -> Node:
        node = self.power()
        while self.peek().kind == "op" and self.peek().text in ("*", "/"):
            op = self.next()
            node = BinOp(op.line, op.column, op.text, node, self.power())
        return node

    def power(self) -> Node:
        base = self.unary()
        if self.peek().kind == "op" and self.peek().text == "^":
            op = self.next()
            return BinOp(op.line, op.column, "^", base, self.power())
        return base

    def unary(self) -> Node:
        t = self.peek()
        if t.kind == "op" and t.text == "-":
            self.next()
            return Neg(t.line, t.column, self.unary())
        return self.primary()

    def primary(self) -> Node:
        t = self.peek()
        if t.kind == "num":
            self.next()
            text = t.text
            if "." in text or "e" in text or "E" in text:
                return Num(t.line, t.column, float(text))
            return Num(t.line, t.column, int(text))
        if t.kind == "op" and t.text == "(":
            self.next()
            node = self.expr()
            self.expect_op(")")
            return node
        if t.kind == "ident":
            if t.text == "pi":
                self.next()
                return Num(t.line, t.column, math.pi)
            if t.text in _FUNARITY:
                self.next()
                self.expect_op("(")
                args = [self.expr()]
                while self.peek().kind == "op" and self.peek().text == ",":
                    self.next()
                    args.append(self.expr())
                self.expect_op(")")
                if len(args) != _FUNARITY[t.text]:
                    self.fail(
                        f"{t.text}() takes {_FUNARITY[t.text]} argument(s), "
                        f"got {len(args)}", t)
                return Call(t.line, t.column, t.text, tuple(args))
            if t.text in _KEYWORDS:
                self.fail(f"keyword {t.text!r} cannot start an expression")
            self.next()
            return Name(t.line, t.column, t.text)
        found = t.text or "end of input"
        self.fail(f"expected an expression, found {found!r}")


def parse_layout(source: str) -> LayoutScript:
    """Parse a layout script and statically validate its loop bounds.

    Raises LayoutSyntaxError with line/column on malformed input or on a
    loop whose bounds are not compile-time integers within the allowed span.
    """
    statements = _Parser(source).program()
    _check_static(statements, {})
    return LayoutScript(source=source, statements=statements)


class _NotStatic(Exception):
    pass


def _static_eval(node: Node, env: dict) -> float | int:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        if node.ident in env and env[node.ident] is not None:
            return env[node.ident]
        raise _NotStatic(node.ident)
    if isinstance(node, Neg):
        return -_static_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _static_eval(node.left, env)
        b = _static_eval(node.right, env)
        try:
            return _apply_binop(node.op, a, b)
        except LayoutRuntimeError:
            raise _NotStatic(node.op)
    if isinstance(node, Call):
        args = [_static_eval(a, env) for a in node.args]
        try:
            return _apply_call(node.func, args)
        except LayoutRuntimeError:
            raise _NotStatic(node.func)
    raise _NotStatic(type(node).__name__)


def _check_static(statements, env: dict) -> None:
    for stmt in statements:
        if isinstance(stmt, Let):
            try:
                env[stmt.ident] = _static_eval(stmt.expr, env)
            except _NotStatic:
                env[stmt.ident] = None  # not statically known
        elif isinstance(stmt, For):
            for which, bound in (("start", stmt.start), ("stop", stmt.stop)):
                try:
                    val = _static_eval(bound, env)
                except _NotStatic:
                    raise LayoutSyntaxError(
                        f"loop {which} bound must be a compile-time constant",
                        bound.line, bound.column)
                if not isinstance(val, int):
                    raise LayoutSyntaxError(
                        f"loop {which} bound must be an integer, got {val!r}",
                        bound.line, bound.column)
                if abs(val) > MAX_LOOP_BOUND:
                    raise LayoutSyntaxError(
                        f"loop {which} bound exceeds {MAX_LOOP_BOUND}",
                        bound.line, bound.column)
            inner = dict(env)
            inner[stmt.ident] = None  # loop variable is not static
            _check_static(stmt.body, inner)


# -- interpreter ------------------------------------------------------------

def _apply_binop(op: str, a, b):
    try:
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return a / b
        if op == "^":
            return math.pow(a, b)
    except ZeroDivisionError:
        raise LayoutRuntimeError("division by zero", reason="division_by_zero")
    except (ValueError, OverflowError) as exc:
        raise LayoutRuntimeError(f"invalid arithmetic: {exc}", reason="domain")
    raise LayoutRuntimeError(f"unknown operator {op!r}", reason="internal")


def _apply_call(func: str, args):
    try:
        if func == "sin":
            return math.sin(args[0])
        if func == "cos":
            return math.cos(args[0])
        if func == "tan":
            return math.tan(args[0])
        if func == "sqrt":
            return math.sqrt(args[0])
        if func == "abs":
            return abs(args[0])
        if func == "floor":
            return math.floor(args[0])
        if func == "min":
            return min(args)
        if func == "max":
            return max(args)
    except (ValueError, OverflowError) as exc:
        raise LayoutRuntimeError(f"invalid call to {func}(): {exc}", reason="domain")
    raise LayoutRuntimeError(f"unknown function {func!r}", reason="internal")


class _Interp:
    def __init__(self, budget: int):
        self.budget = budget
        self.steps = 0
        self.points: list[tuple[float, float]] = []

    def tick(self, node: Node):
        self.steps += 1
        if self.steps > self.budget:
            raise LayoutRuntimeError(
                f"step budget of {self.budget} exceeded", reason="budget")

    def eval(self, node: Node, env: dict):
        self.tick(node)
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Name):
            if node.ident not in env:
                raise LayoutRuntimeError(
                    f"undefined variable {node.ident!r}", reason="undefined")
            return env[node.ident]
        if isinstance(node, Neg):
            return -self.eval(node.operand, env)
        if isinstance(node, BinOp):
            value = _apply_binop(node.op,
                                 self.eval(node.left, env),
                                 self.eval(node.right, env))
            self.check_finite(value)
            return value
        if isinstance(node, Call):
            value = _apply_call(node.func, [self.eval(a, env) for a in node.args])
            self.check_finite(value)
            return value
        raise LayoutRuntimeError(
            f"cannot evaluate {type(node).__name__} as an expression",
            reason="type")

    @staticmethod
    def check_finite(value):
        if not math.isfinite(value):
            raise LayoutRuntimeError("non-finite value", reason="nonfinite")

    def run(self, statements, env: dict):
        for stmt in statements:
            self.tick(stmt)
            if isinstance(stmt, Let):
                env[stmt.ident] = self.eval(stmt.expr, env)
            elif isinstance(stmt, Emit):
                x = self.eval(stmt.x, env)
                y = self.eval(stmt.y, env)
                self.check_finite(x)
                self.check_finite(y)
                self.points.append((float(x), float(y)))
            elif isinstance(stmt, For):
                start = self.eval(stmt.start, env)
                stop = self.eval(stmt.stop, env)
                if not isinstance(start, int) or not isinstance(stop, int):
                    raise LayoutRuntimeError("loop bounds must be integers",
                                             reason="type")
                for i in range(start, stop):
                    env[stmt.ident] = i
                    self.run(stmt.body, env)
            else:
                raise LayoutRuntimeError(
                    f"cannot execute {type(stmt).__name__}", reason="type")


def evaluate_layout(script: LayoutScript,
                    step_budget: int = DEFAULT_STEP_BUDGET) -> list[tuple[float, float]]:
    """Run a parsed script and return the emitted points in order.

    Deterministic; raises LayoutRuntimeError on division by zero, non-finite
    intermediate values, type mismatches, or when the step budget runs out.
    """
    if step_budget <= 0:
        raise ValueError("step budget must be positive")
    interp = _Interp(step_budget)
    interp.run(script.statements, {})
    return interp.points


# -- structural pattern description -----------------------------------------

def _walk(nodes):
    for node in nodes:
        yield node
        if isinstance(node, For):
            yield from _walk(node.body)
        elif isinstance(node, Let):
            yield from _walk_expr(node.expr)
        elif isinstance(node, Emit):
            yield from _walk_expr(node.x)
            yield from _walk_expr(node.y)


def _walk_expr(node):
    yield node
    if isinstance(node, BinOp):
        yield from _walk_expr(node.left)
        yield from _walk_expr(node.right)
    elif isinstance(node, Neg):
        yield from _walk_expr(node.operand)
    elif isinstance(node, Call):
        for a in node.args:
            yield from _walk_expr(a)


def describe_pattern(script: LayoutScript) -> str:
    """Short structural description of the placement pattern.

    Used for the summary fact sheet; intentionally coarse: it reports what
    the script's shape implies, never what the prompt asked for.
    """
    loops = [s for s in script.statements if isinstance(s, For)]
    emits_top = [s for s in script.statements if isinstance(s, Emit)]
    if not loops:
        if len(emits_top) == 1:
            return "single explicit placement"
        return "explicit point list"
    outer = loops[0]
    nested = [s for s in outer.body if isinstance(s, For)]
    funcs = {n.func for n in _walk([outer]) if isinstance(n, Call)}
    if nested:
        if "floor" in funcs:
            return "hexagonal grid arrangement"
        return "grid arrangement"
    if {"cos", "sin"} <= funcs:
        return "conductors arranged in a circle"
    if "sin" in funcs or "cos" in funcs:
        return "conductors along a trigonometric curve"
    return "custom arrangement"
