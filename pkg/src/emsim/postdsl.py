"""GetDP-style post-processing DSL: parsing, checking, evaluation.

The accepted subset mirrors the PostProcessing/PostOperation blocks used
for derived-field maps: a processing block declares named quantities as
element-local expressions over mesh regions, an operation block prints
them to files. Expressions combine the solved fields ``{a}``,
``{grad_phi}`` and ``{d a}`` with the material coefficients ``sigma[]``
and ``nu[]``, the frequency-domain derivative ``Dt[...]`` (multiplication
by j omega), ``Norm[...]`` and scalar arithmetic.

Checking is layered deliberately, because each layer is reported as a
separate verdict downstream:

* parse errors (DslSyntaxError) carry line/column plus a bracket hint;
* name/region/material resolution problems are ``dsl_semantics``;
* kind violations such as adding a scalar to a vector are
  ``physics_syntax`` (they break the mathematics, not the grammar);
* pattern-level physics checks (the 0.25 energy factor, the 0.5 loss
  factor, the exact electric field form) are ``physics_semantics``.

Norm of a complex vector is sqrt(sum |component|^2) over peak amplitudes,
which makes sigma[]/2 * Norm[E]^2 the time-averaged loss density without
extra factors. Element values are averaged over the three edge midpoints
of each triangle; for quadratic integrands such as loss density this is
the exact element mean, so integrating the printed density reproduces the
conductor loss report to machine precision.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DslSyntaxError, EvalError

SCALAR = "scalar"
VECTOR = "vector"

PRIMARY_FIELDS = ("a", "grad_phi", "d a")
KNOWN_COEFS = ("sigma", "nu")
KNOWN_FUNCS = ("Norm", "Dt")
FORMULATION_NAMES = frozenset({"MagDyn_a", "MagDyn_av"})
SYNTHETIC_REGIONS = ("Omega", "Omega_c")


@dataclass(frozen=True)
class Diagnostic:
    severity: str            # error | warning
    layer: str               # dsl_semantics | physics_syntax | physics_semantics
    message: str
    line: int = 0
    column: int = 0

    def __str__(self):
        pos = f" (line {self.line}, col {self.column})" if self.line else ""
        return f"[{self.layer}] {self.severity}: {self.message}{pos}"


# -- AST --------------------------------------------------------------------

@dataclass(frozen=True)
class ENum:
    value: float


@dataclass(frozen=True)
class ECoef:
    name: str                # sigma | nu


@dataclass(frozen=True)
class EField:
    name: str                # a | grad_phi | d a | anything the author wrote


@dataclass(frozen=True)
class EFunc:
    func: str                # Norm | Dt
    arg: "Expr"


@dataclass(frozen=True)
class ENeg:
    arg: "Expr"


@dataclass(frozen=True)
class EBin:
    op: str                  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class EPow:
    base: "Expr"
    exponent: "Expr"


Expr = ENum | ECoef | EField | EFunc | ENeg | EBin | EPow


@dataclass(frozen=True)
class PostQuantity:
    name: str
    wrapper: str             # Local | Term (synonyms)
    expr: Expr
    regions: tuple[str, ...]
    jacobian: str = "Vol"
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ProcessingBlock:
    name: str
    formulation: str
    quantities: tuple[PostQuantity, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class PrintSpec:
    quantity: str
    region: str
    file: str
    label: str
    fmt: str = "Gmsh"
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class OperationBlock:
    name: str
    processing: str
    prints: tuple[PrintSpec, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class PostProgram:
    processings: tuple[ProcessingBlock, ...]
    operations: tuple[OperationBlock, ...]

    def find_quantity(self, name: str) -> PostQuantity | None:
        for block in self.processings:
            for q in block.quantities:
                if q.name == name:
                    return q
        return None


# -- lexer ------------------------------------------------------------------

@dataclass(frozen=True)
class _Tok:
    kind: str                # ident | num | str | punct | eof
    text: str
    line: int
    column: int


_PUNCT = "{}[]();,+-*/^"


def _lex(source: str) -> list[_Tok]:
    toks = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch == '"':
            j = source.find('"', i + 1)
            if j < 0:
                raise DslSyntaxError("unterminated string literal", line, col)
            toks.append(_Tok("str", source[i + 1:j], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isdigit() or (ch == "." and source[i + 1:i + 2].isdigit()):
            j = i
            seen_dot = seen_exp = False
            while j < n:
                c = source[j]
                if c.isdigit():
                    j += 1
                elif c == "." and not seen_dot and not seen_exp:
                    seen_dot = True
                    j += 1
                elif c in "eE" and not seen_exp and (
                        source[j + 1:j + 2].isdigit()
                        or (source[j + 1:j + 2] in "+-"
                            and source[j + 2:j + 3].isdigit())):
                    seen_exp = True
                    j += 2 if source[j + 1] in "+-" else 1
                else:
                    break
            toks.append(_Tok("num", source[i:j], line, col))
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
        if ch in _PUNCT:
            toks.append(_Tok("punct", ch, line, col))
            i += 1
            col += 1
            continue
        raise DslSyntaxError(f"unexpected character {ch!r}", line, col)
    toks.append(_Tok("eof", "", line, col))
    return toks


# -- parser -----------------------------------------------------------------

_CLOSERS = {"{": "}", "[": "]", "(": ")"}


class _Parser:
    def __init__(self, source: str):
        self.toks = _lex(source)
        self.pos = 0
        self.brackets: list[_Tok] = []

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def advance(self) -> _Tok:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def fail(self, message: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        hint = None
        if self.brackets:
            b = self.brackets[-1]
            hint = (f"possibly unbalanced {b.text!r} opened at "
                    f"line {b.line}, column {b.column}")
        raise DslSyntaxError(message, tok.line, tok.column, hint=hint)

    def open_bracket(self, ch: str):
        t = self.peek()
        if t.kind != "punct" or t.text != ch:
            found = t.text or "end of input"
            self.fail(f"expected {ch!r}, found {found!r}")
        self.brackets.append(t)
        return self.advance()

    def close_bracket(self, ch: str):
        t = self.peek()
        want = _CLOSERS[ch]
        if t.kind != "punct" or t.text != want:
            found = t.text or "end of input"
            self.fail(f"expected {want!r}, found {found!r}")
        self.brackets.pop()
        return self.advance()

    def punct(self, ch: str):
        t = self.peek()
        if t.kind != "punct" or t.text != ch:
            found = t.text or "end of input"
            self.fail(f"expected {ch!r}, found {found!r}")
        return self.advance()

    def keyword(self, *words: str) -> _Tok:
        t = self.peek()
        if t.kind != "ident" or t.text not in words:
            found = t.text or "end of input"
            self.fail(f"expected {' or '.join(words)}, found {found!r}")
        return self.advance()

    def ident(self, what: str) -> _Tok:
        t = self.peek()
        if t.kind != "ident":
            found = t.text or "end of input"
            self.fail(f"expected {what}, found {found!r}")
        return self.advance()

    def string(self, what: str) -> _Tok:
        t = self.peek()
        if t.kind != "str":
            self.fail(f"expected quoted {what}")
        return self.advance()

    # grammar ---------------------------------------------------------------

    def program(self) -> PostProgram:
        procs, ops = [], []
        while True:
            t = self.peek()
            if t.kind == "eof":
                break
            if t.kind == "ident" and t.text == "PostProcessing":
                self.advance()
                self.open_bracket("{")
                while not self._at_close():
                    procs.append(self.processing_item())
                self.close_bracket("{")
            elif t.kind == "ident" and t.text == "PostOperation":
                self.advance()
                self.open_bracket("{")
                while not self._at_close():
                    ops.append(self.operation_item())
                self.close_bracket("{")
            else:
                found = t.text or "end of input"
                self.fail(f"expected PostProcessing or PostOperation, "
                          f"found {found!r}")
        return PostProgram(processings=tuple(procs), operations=tuple(ops))

    def _at_close(self) -> bool:
        t = self.peek()
        if t.kind == "eof":
            self.fail("unexpected end of input inside a block")
        return t.kind == "punct" and t.text == "}"

    def processing_item(self) -> ProcessingBlock:
        start = self.open_bracket("{")
        self.keyword("Name")
        name = self.ident("processing name")
        self.punct(";")
        self.keyword("NameOfFormulation")
        formulation = self.ident("formulation name")
        self.punct(";")
        self.keyword("PostQuantity", "Quantity")
        self.open_bracket("{")
        quantities = []
        while not self._at_close():
            quantities.append(self.quantity_def())
        self.close_bracket("{")
        self.close_bracket("{")
        return ProcessingBlock(name=name.text, formulation=formulation.text,
                               quantities=tuple(quantities), line=start.line)

    def quantity_def(self) -> PostQuantity:
        start = self.open_bracket("{")
        self.keyword("Name")
        name = self.ident("quantity name")
        self.punct(";")
        self.keyword("Value")
        self.open_bracket("{")
        wrapper = self.keyword("Local", "Term")
        self.open_bracket("{")
        self.open_bracket("[")
        expr = self.expr()
        self.close_bracket("[")
        self.punct(";")
        self.keyword("In")
        regions = self.region_list()
        self.punct(";")
        self.keyword("Jacobian")
        jac = self.ident("jacobian name")
        self.punct(";")
        self.close_bracket("{")
        self.close_bracket("{")
        self.close_bracket("{")
        return PostQuantity(name=name.text, wrapper=wrapper.text, expr=expr,
                            regions=regions, jacobian=jac.text,
                            line=start.line, column=start.column)

    def region_list(self) -> tuple[str, ...]:
        t = self.peek()
        if t.kind == "ident" and t.text == "Region":
            self.advance()
            self.open_bracket("[")
            self.open_bracket("{")
            names = [self.ident("region name").text]
            while self.peek().kind == "punct" and self.peek().text == ",":
                self.advance()
                names.append(self.ident("region name").text)
            self.close_bracket("{")
            self.close_bracket("[")
            return tuple(names)
        return (self.ident("region name").text,)

    def operation_item(self) -> OperationBlock:
        start = self.open_bracket("{")
        self.keyword("Name")
        name = self.ident("operation name")
        self.punct(";")
        self.keyword("NameOfPostProcessing")
        proc = self.ident("processing reference")
        self.punct(";")
        self.keyword("Operation")
        self.open_bracket("{")
        prints = []
        while not self._at_close():
            prints.append(self.print_spec())
        self.close_bracket("{")
        self.close_bracket("{")
        return OperationBlock(name=name.text, processing=proc.text,
                              prints=tuple(prints), line=start.line)

    def print_spec(self) -> PrintSpec:
        start = self.keyword("Print")
        self.open_bracket("[")
        quantity = self.ident("quantity name")
        self.punct(",")
        self.keyword("OnElementsOf")
        region = self.ident("region name")
        self.punct(",")
        self.keyword("File")
        file_tok = self.string("file path")
        self.punct(",")
        self.keyword("Name")
        label = self.string("display name")
        self.punct(",")
        self.keyword("Format")
        fmt = self.ident("format tag")
        self.close_bracket("[")
        self.punct(";")
        return PrintSpec(quantity=quantity.text, region=region.text,
                         file=file_tok.text, label=label.text, fmt=fmt.text,
                         line=start.line, column=start.column)

    # expressions -----------------------------------------------------------

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind == "punct" and self.peek().text in "+-":
            op = self.advance().text
            node = EBin(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().kind == "punct" and self.peek().text in "*/":
            op = self.advance().text
            node = EBin(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek().kind == "punct" and self.peek().text == "-":
            self.advance()
            return ENeg(self.unary())
        if self.peek().kind == "punct" and self.peek().text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "punct" and self.peek().text == "^":
            self.advance()
            return EPow(base, self.unary())
        return base

    def atom(self) -> Expr:
        t = self.peek()
        if t.kind == "num":
            self.advance()
            return ENum(float(t.text))
        if t.kind == "punct" and t.text == "(":
            self.open_bracket("(")
            node = self.expr()
            self.close_bracket("(")
            return node
        if t.kind == "punct" and t.text == "{":
            return self.field_ref()
        if t.kind == "ident":
            self.advance()
            nxt = self.peek()
            if nxt.kind == "punct" and nxt.text == "[":
                self.open_bracket("[")
                if self.peek().kind == "punct" and self.peek().text == "]":
                    self.close_bracket("[")
                    return ECoef(t.text)
                arg = self.expr()
                self.close_bracket("[")
                return EFunc(t.text, arg)
            self.fail(f"bare identifier {t.text!r} is not a valid expression",
                      t)
        found = t.text or "end of input"
        self.fail(f"expected an expression, found {found!r}")

    def field_ref(self) -> Expr:
        self.open_bracket("{")
        first = self.ident("field name")
        if first.text == "d" and self.peek().kind == "ident":
            second = self.advance()
            name = f"d {second.text}"
        else:
            name = first.text
        self.close_bracket("{")
        return EField(name)


def parse_post(source: str) -> PostProgram:
    """Parse DSL source; raise DslSyntaxError with position and hint."""
    return _Parser(source).program()


# -- pretty printing --------------------------------------------------------

def _expr_str(e: Expr, parent_prec: int = 0) -> str:
    if isinstance(e, ENum):
        v = e.value
        return str(int(v)) if v == int(v) else repr(v)
    if isinstance(e, ECoef):
        return f"{e.name}[]"
    if isinstance(e, EField):
        return "{" + e.name + "}"
    if isinstance(e, EFunc):
        return f"{e.func}[{_expr_str(e.arg)}]"
    if isinstance(e, ENeg):
        inner = _expr_str(e.arg, 3)
        out = f"-{inner}"
        return f"({out})" if parent_prec > 2 else out
    if isinstance(e, EPow):
        return f"{_expr_str(e.base, 4)}^{_expr_str(e.exponent, 4)}"
    if isinstance(e, EBin):
        prec = 1 if e.op in "+-" else 2
        left = _expr_str(e.left, prec)
        right = _expr_str(e.right, prec + 1)
        out = f"{left} {e.op} {right}"
        return f"({out})" if parent_prec > prec else out
    raise TypeError(f"not an expression: {e!r}")


def _region_str(regions: tuple[str, ...]) -> str:
    return "Region[{" + ", ".join(regions) + "}]"


def pretty_print(program: PostProgram) -> str:
    """Canonical source text; parsing it back yields an equal program."""
    out = []
    if program.processings:
        out.append("PostProcessing {")
        for block in program.processings:
            out.append(f"  {{ Name {block.name} ; "
                       f"NameOfFormulation {block.formulation} ;")
            out.append("    PostQuantity {")
            for q in block.quantities:
                out.append(f"      {{ Name {q.name} ;")
                out.append(f"        Value {{ {q.wrapper} {{ "
                           f"[ {_expr_str(q.expr)} ] ;")
                out.append(f"          In {_region_str(q.regions)} ; "
                           f"Jacobian {q.jacobian} ; }} }} }}")
            out.append("    }")
            out.append("  }")
        out.append("}")
    if program.operations:
        out.append("PostOperation {")
        for block in program.operations:
            out.append(f"  {{ Name {block.name} ; "
                       f"NameOfPostProcessing {block.processing} ;")
            out.append("    Operation {")
            for p in block.prints:
                out.append(f"      Print[ {p.quantity}, OnElementsOf "
                           f"{p.region}, File \"{p.file}\", "
                           f"Name \"{p.label}\", Format {p.fmt} ];")
            out.append("    }")
            out.append("  }")
        out.append("}")
    return "\n".join(out) + "\n"


# -- kind checking ----------------------------------------------------------

_FIELD_KINDS = {"a": VECTOR, "grad_phi": VECTOR, "d a": VECTOR,
                "v": SCALAR, "b": VECTOR, "h": VECTOR, "e": VECTOR,
                "j": VECTOR}


def kind_of(expr: Expr, sink: list[Diagnostic], where: PostQuantity) -> str:
    """Resolve scalar/vector kind, appending physics_syntax diagnostics."""

    def diag(message):
        sink.append(Diagnostic("error", "physics_syntax", message,
                               where.line, where.column))

    if isinstance(expr, ENum) or isinstance(expr, ECoef):
        return SCALAR
    if isinstance(expr, EField):
        return _FIELD_KINDS.get(expr.name, VECTOR)
    if isinstance(expr, EFunc):
        inner = kind_of(expr.arg, sink, where)
        if expr.func == "Norm":
            return SCALAR
        if expr.func == "Dt":
            if not isinstance(expr.arg, EField):
                diag("Dt[] applies only to field references")
            return inner
        return inner
    if isinstance(expr, ENeg):
        return kind_of(expr.arg, sink, where)
    if isinstance(expr, EPow):
        base = kind_of(expr.base, sink, where)
        expo = kind_of(expr.exponent, sink, where)
        if base != SCALAR or expo != SCALAR:
            diag("'^' requires scalar base and exponent")
        return SCALAR
    if isinstance(expr, EBin):
        left = kind_of(expr.left, sink, where)
        right = kind_of(expr.right, sink, where)
        if expr.op in "+-":
            if left != right:
                diag(f"'{expr.op}' requires matching kinds, "
                     f"got {left} {expr.op} {right}")
            return left if left == right else VECTOR
        if expr.op == "*":
            if left == VECTOR and right == VECTOR:
                diag("'*' cannot multiply two vectors")
                return VECTOR
            return VECTOR if VECTOR in (left, right) else SCALAR
        if left == VECTOR and right == VECTOR:
            diag("'/' cannot divide by a vector")
        elif right == VECTOR:
            diag("division by a vector is undefined")
        return left
    raise TypeError(f"not an expression: {expr!r}")


def _walk_expr(expr: Expr):
    yield expr
    if isinstance(expr, EFunc):
        yield from _walk_expr(expr.arg)
    elif isinstance(expr, ENeg):
        yield from _walk_expr(expr.arg)
    elif isinstance(expr, EBin):
        yield from _walk_expr(expr.left)
        yield from _walk_expr(expr.right)
    elif isinstance(expr, EPow):
        yield from _walk_expr(expr.base)
        yield from _walk_expr(expr.exponent)


# -- semantic validation ----------------------------------------------------

def _is_element_region(name: str, mesh_groups) -> bool:
    if name in SYNTHETIC_REGIONS:
        return True
    return name in mesh_groups and not name.startswith("Gamma")


def _is_conductive_region(name: str) -> bool:
    return name == "Omega_c" or name.startswith("Omega_c_")


def validate_post(program: PostProgram, mesh_groups,
                  formulation_names=FORMULATION_NAMES) -> list[Diagnostic]:
    """Name, region, field and kind checks; empty list means clean."""
    mesh_groups = set(mesh_groups)
    diags: list[Diagnostic] = []

    def err(layer, message, line=0, column=0):
        diags.append(Diagnostic("error", layer, message, line, column))

    seen = set()
    for block in program.processings:
        if block.name in seen:
            err("dsl_semantics", f"duplicate PostProcessing {block.name!r}",
                block.line)
        seen.add(block.name)
        if block.formulation not in formulation_names:
            err("dsl_semantics",
                f"unknown formulation {block.formulation!r}", block.line)
    qnames = set()
    for block in program.processings:
        for q in block.quantities:
            if q.name in qnames:
                err("dsl_semantics", f"duplicate quantity {q.name!r}",
                    q.line, q.column)
            qnames.add(q.name)
            for region in q.regions:
                if not _is_element_region(region, mesh_groups):
                    err("dsl_semantics",
                        f"unknown region {region!r} for quantity {q.name!r}",
                        q.line, q.column)
            if q.jacobian != "Vol":
                err("dsl_semantics",
                    f"unsupported jacobian {q.jacobian!r}", q.line, q.column)
            for node in _walk_expr(q.expr):
                if isinstance(node, EField) and node.name not in PRIMARY_FIELDS:
                    err("dsl_semantics",
                        f"field {{{node.name}}} is not derived from a "
                        f"primary variable", q.line, q.column)
                elif isinstance(node, ECoef) and node.name not in KNOWN_COEFS:
                    err("dsl_semantics",
                        f"unknown coefficient {node.name}[]", q.line, q.column)
                elif isinstance(node, EFunc) and node.func not in KNOWN_FUNCS:
                    err("dsl_semantics",
                        f"unknown function {node.func}[]", q.line, q.column)
            uses_sigma = any(isinstance(n, ECoef) and n.name == "sigma"
                             for n in _walk_expr(q.expr))
            if uses_sigma and not all(_is_conductive_region(r)
                                      for r in q.regions):
                err("dsl_semantics",
                    f"sigma[] in quantity {q.name!r} needs conductive "
                    f"regions, got {list(q.regions)}", q.line, q.column)
            kind_of(q.expr, diags, q)

    op_seen = set()
    proc_names = {b.name for b in program.processings}
    for block in program.operations:
        if block.name in op_seen:
            err("dsl_semantics", f"duplicate PostOperation {block.name!r}",
                block.line)
        op_seen.add(block.name)
        if block.processing not in proc_names:
            err("dsl_semantics",
                f"NameOfPostProcessing {block.processing!r} does not resolve",
                block.line)
        for p in block.prints:
            if p.quantity not in qnames:
                err("dsl_semantics",
                    f"Print of undeclared quantity {p.quantity!r}",
                    p.line, p.column)
            if not _is_element_region(p.region, mesh_groups):
                err("dsl_semantics",
                    f"unknown print region {p.region!r}", p.line, p.column)
            if not p.file:
                err("dsl_semantics", "empty output file path", p.line, p.column)
            elif os.path.isabs(p.file) or ".." in p.file.split("/"):
                err("dsl_semantics",
                    f"output path {p.file!r} escapes the artifact directory",
                    p.line, p.column)
            if p.fmt != "Gmsh":
                err("dsl_semantics", f"unsupported format {p.fmt!r}",
                    p.line, p.column)
    return diags


# -- physics lint -----------------------------------------------------------

def _flatten_product(expr: Expr):
    """Split a multiplicative tree into (numeric coefficient, other factors)."""
    coef = 1.0
    items: list[Expr] = []
    neg = False

    def visit(node, invert=False):
        nonlocal coef, neg
        if isinstance(node, EBin) and node.op == "*" and not invert:
            visit(node.left)
            visit(node.right)
        elif isinstance(node, EBin) and node.op == "/":
            visit(node.left, invert)
            visit(node.right, not invert)
        elif isinstance(node, ENeg):
            neg = not neg
            visit(node.arg, invert)
        elif isinstance(node, ENum):
            coef = coef / node.value if invert else coef * node.value
        else:
            items.append(node)

    visit(expr)
    if neg:
        coef = -coef
    return coef, items


def _flatten_sum(expr: Expr):
    terms: list[Expr] = []

    def visit(node, negate=False):
        if isinstance(node, EBin) and node.op == "+":
            visit(node.left, negate)
            visit(node.right, negate)
        elif isinstance(node, EBin) and node.op == "-":
            visit(node.left, negate)
            visit(node.right, not negate)
        elif isinstance(node, ENeg):
            visit(node.arg, not negate)
        else:
            terms.append(ENeg(node) if negate else node)

    visit(expr)
    return terms


def _is_e_form_term(term: Expr):
    """Classify one additive term of a candidate electric field expression."""
    if isinstance(term, ENeg):
        inner = term.arg
        if isinstance(inner, EFunc) and inner.func == "Dt":
            return "dt_a" if inner.arg == EField("a") else "dt_wrong"
        if inner == EField("grad_phi"):
            return "grad_phi"
        return "other"
    if isinstance(term, EFunc) and term.func == "Dt":
        return "pos_dt"
    if term == EField("grad_phi"):
        return "pos_grad"
    return "other"


def physics_lint(program: PostProgram) -> list[Diagnostic]:
    """Pattern checks for loss and energy density expressions.

    Returned diagnostics carry severity ``warning`` but land on the
    physics_semantics layer, which treats any finding as a failure.
    """
    diags: list[Diagnostic] = []

    def warn(q, message):
        diags.append(Diagnostic("warning", "physics_semantics", message,
                                q.line, q.column))

    for block in program.processings:
        for q in block.quantities:
            coef, items = _flatten_product(q.expr)
            has_sigma = any(i == ECoef("sigma") for i in items)
            has_nu = any(i == ECoef("nu") for i in items)
            norm_sq = [i for i in items
                       if isinstance(i, EPow) and isinstance(i.base, EFunc)
                       and i.base.func == "Norm" and i.exponent == ENum(2.0)]
            if has_nu and not has_sigma and norm_sq:
                arg = norm_sq[0].base.arg
                if arg == EField("d a"):
                    if abs(coef - 0.25) > 1e-12:
                        warn(q, f"magnetic energy density uses factor "
                                f"{coef:g} vs. 0.25")
                else:
                    warn(q, "magnetic energy density should square "
                            "Norm[{d a}]")
            elif has_sigma and norm_sq:
                if abs(coef - 0.5) > 1e-12:
                    warn(q, f"ohmic loss density uses factor {coef:g} vs. 0.5")
                kinds = sorted(_is_e_form_term(t)
                               for t in _flatten_sum(norm_sq[0].base.arg))
                if kinds == ["dt_a", "grad_phi"]:
                    pass
                elif set(kinds) <= {"dt_a", "grad_phi"}:
                    warn(q, "incomplete electric field expression: expected "
                            "-Dt[{a}] - {grad_phi}")
                else:
                    warn(q, "electric field expression should be "
                            "-Dt[{a}] - {grad_phi}")
    return diags


# -- evaluation -------------------------------------------------------------

def region_elements(mesh, name: str) -> np.ndarray:
    if name == "Omega":
        return np.arange(mesh.num_triangles)
    if name == "Omega_c":
        ncond = len(mesh.conductor_names())
        return np.nonzero((mesh.tri_tags >= 1)
                          & (mesh.tri_tags <= ncond))[0]
    if name in mesh.groups and not name.startswith("Gamma"):
        return mesh.region_triangles(name)
    raise EvalError(f"unknown element region {name!r}")


@dataclass(eq=False)
class EvaluatedQuantity:
    name: str
    kind: str                       # scalar | vector
    mask: np.ndarray                # bool per mesh triangle
    values: np.ndarray              # (m,) or (m, 3) complex, zero off-region


@dataclass(eq=False)
class EvaluationResult:
    quantities: dict
    artifacts: list


class _EvalCtx:
    """Per-element sample data: three edge midpoints per triangle."""

    def __init__(self, mesh, result, problem, elems):
        from .solver import _element_gradients

        self.elems = elems
        self.count = len(elems)
        self.omega = problem.excitation.angular_frequency
        tris = mesh.triangles[elems]
        a_tri = result.a_z[tris]
        self.a_mid = 0.5 * (a_tri + np.roll(a_tri, -1, axis=1))
        _, b, c = _element_gradients(mesh)
        bx = np.sum(result.a_z[mesh.triangles] * c, axis=1)
        by = -np.sum(result.a_z[mesh.triangles] * b, axis=1)
        self.b_field = np.column_stack([bx, by])[elems]
        ncond = len(mesh.conductor_names())
        tags = mesh.tri_tags[elems]
        u_elem = np.zeros(self.count, dtype=complex)
        conductive = (tags >= 1) & (tags <= ncond)
        u_elem[conductive] = result.u[tags[conductive] - 1]
        self.u_elem = u_elem
        self.conductive = conductive
        sigma = np.zeros(self.count)
        sigma[conductive] = problem.material.conductivity_S_per_m
        self.sigma = sigma
        self.nu = np.full(self.count, problem.material.reluctivity)

    def scalar_const(self, value):
        return np.full((self.count, 3), complex(value))

    def eval(self, expr: Expr):
        if isinstance(expr, ENum):
            return SCALAR, self.scalar_const(expr.value)
        if isinstance(expr, ECoef):
            if expr.name == "sigma":
                if not np.all(self.conductive):
                    raise EvalError(
                        "sigma[] evaluated on non-conductive elements")
                return SCALAR, np.broadcast_to(
                    self.sigma[:, None], (self.count, 3)).astype(complex)
            if expr.name == "nu":
                return SCALAR, np.broadcast_to(
                    self.nu[:, None], (self.count, 3)).astype(complex)
            raise EvalError(f"unknown coefficient {expr.name}[]")
        if isinstance(expr, EField):
            zero = np.zeros((self.count, 3), dtype=complex)
            if expr.name == "a":
                vec = np.stack([zero, zero, self.a_mid], axis=-1)
                return VECTOR, vec
            if expr.name == "grad_phi":
                comp = np.broadcast_to(self.u_elem[:, None],
                                       (self.count, 3)).astype(complex)
                vec = np.stack([zero, zero, comp], axis=-1)
                return VECTOR, vec
            if expr.name == "d a":
                bx = np.broadcast_to(self.b_field[:, 0][:, None],
                                     (self.count, 3)).astype(complex)
                by = np.broadcast_to(self.b_field[:, 1][:, None],
                                     (self.count, 3)).astype(complex)
                return VECTOR, np.stack([bx, by, zero], axis=-1)
            raise EvalError(f"field {{{expr.name}}} is not available")
        if isinstance(expr, EFunc):
            kind, val = self.eval(expr.arg)
            if expr.func == "Dt":
                return kind, 1j * self.omega * val
            if expr.func == "Norm":
                if kind == VECTOR:
                    mag = np.sqrt(np.sum(np.abs(val) ** 2, axis=-1))
                else:
                    mag = np.abs(val)
                return SCALAR, mag.astype(complex)
            raise EvalError(f"unknown function {expr.func}[]")
        if isinstance(expr, ENeg):
            kind, val = self.eval(expr.arg)
            return kind, -val
        if isinstance(expr, EPow):
            _, base = self.eval(expr.base)
            _, expo = self.eval(expr.exponent)
            return SCALAR, base ** expo
        if isinstance(expr, EBin):
            lk, lv = self.eval(expr.left)
            rk, rv = self.eval(expr.right)
            if expr.op in "+-":
                if lk != rk:
                    raise EvalError(f"kind mismatch in '{expr.op}'")
                return lk, (lv + rv) if expr.op == "+" else (lv - rv)
            if expr.op == "*":
                if lk == VECTOR and rk == VECTOR:
                    raise EvalError("cannot multiply two vectors")
                if lk == VECTOR:
                    return VECTOR, lv * rv[..., None]
                if rk == VECTOR:
                    return VECTOR, lv[..., None] * rv
                return SCALAR, lv * rv
            if rk == VECTOR:
                raise EvalError("cannot divide by a vector")
            if lk == VECTOR:
                return VECTOR, lv / rv[..., None]
            return SCALAR, lv / rv
        raise TypeError(f"not an expression: {expr!r}")


def _confined(base_dir: str, rel_path: str) -> str:
    if not rel_path or os.path.isabs(rel_path):
        raise EvalError(f"output path {rel_path!r} is not a relative path")
    base = os.path.normpath(os.path.abspath(base_dir))
    full = os.path.normpath(os.path.join(base, rel_path))
    if not full.startswith(base + os.sep):
        raise EvalError(f"output path {rel_path!r} escapes the artifact "
                        f"directory")
    return full


def evaluate_post(program: PostProgram, result, problem,
                  out_dir: str | None = None) -> EvaluationResult:
    """Evaluate every quantity; write one VTK + JSON pair per Print.

    Quantity values live on the quantity's declared regions and are padded
    with zeros elsewhere, which is also what Print emits for a wider
    target region.
    """
    import json as _json

    from .vtkio import write_unstructured_grid

    mesh = problem.mesh
    m = mesh.num_triangles
    quantities: dict[str, EvaluatedQuantity] = {}
    for block in program.processings:
        for q in block.quantities:
            elems = np.unique(np.concatenate(
                [region_elements(mesh, r) for r in q.regions]))
            ctx = _EvalCtx(mesh, result, problem, elems)
            kind, sampled = ctx.eval(q.expr)
            per_element = sampled.mean(axis=1)
            mask = np.zeros(m, dtype=bool)
            mask[elems] = True
            if kind == SCALAR:
                values = np.zeros(m, dtype=complex)
                values[elems] = per_element
            else:
                values = np.zeros((m, 3), dtype=complex)
                values[elems] = per_element
            quantities[q.name] = EvaluatedQuantity(
                name=q.name, kind=kind, mask=mask, values=values)

    artifacts = []
    if out_dir is not None:
        for block in program.operations:
            for p in block.prints:
                if p.quantity not in quantities:
                    raise EvalError(f"Print of unknown quantity {p.quantity!r}")
                eq = quantities[p.quantity]
                target = region_elements(mesh, p.region)
                sel = np.zeros(m, dtype=bool)
                sel[target] = True
                keep = sel & eq.mask
                stem, _ = os.path.splitext(p.file)
                vtk_rel = stem + ".vtk"
                json_rel = stem + ".json"
                vtk_path = _confined(out_dir, vtk_rel)
                json_path = _confined(out_dir, json_rel)
                os.makedirs(os.path.dirname(vtk_path), exist_ok=True)
                if eq.kind == SCALAR:
                    masked = np.where(keep, eq.values, 0.0)
                    scalars = {
                        f"{p.quantity}_re": masked.real,
                        f"{p.quantity}_im": masked.imag,
                        f"{p.quantity}_abs": np.abs(masked),
                    }
                    vectors = {}
                    abs_vals = np.abs(masked)
                else:
                    masked = np.where(keep[:, None], eq.values, 0.0)
                    abs_vals = np.sqrt(np.sum(np.abs(masked) ** 2, axis=1))
                    scalars = {f"{p.quantity}_abs": abs_vals}
                    vectors = {
                        f"{p.quantity}_re": masked.real,
                        f"{p.quantity}_im": masked.imag,
                    }
                write_unstructured_grid(vtk_path, mesh.nodes, mesh.triangles,
                                        cell_scalars=scalars,
                                        cell_vectors=vectors,
                                        title=p.label.strip() or p.quantity)
                payload = {
                    "quantity": p.quantity,
                    "label": p.label,
                    "region": p.region,
                    "kind": eq.kind,
                    "triangle_count": int(m),
                    "range": [float(abs_vals.min()), float(abs_vals.max())],
                    "vtk_file": vtk_rel,
                }
                tmp = json_path + ".tmp"
                with open(tmp, "w", encoding="utf-8") as fh:
                    _json.dump(payload, fh, indent=2, sort_keys=True)
                os.replace(tmp, json_path)
                artifacts.append({
                    "quantity": p.quantity,
                    "label": p.label,
                    "region": p.region,
                    "kind": eq.kind,
                    "files": [vtk_rel, json_rel],
                })
    return EvaluationResult(quantities=quantities, artifacts=artifacts)
