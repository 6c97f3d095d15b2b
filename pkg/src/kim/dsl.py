"""Textual model format: parser, canonical serializer, lint.

Grammar (one declaration per line, `#` comments to end of line):

    model NAME
    input name: float|bool [shape]          e.g.  input tiles: float [*, 8]
    param name: gradient|nongradient [shape] [= init] [sign(+|-)]
          [grid(v1, v2, ...)] [link(group)] [frozen]
    latent name = expr
    output name = expr

Expressions are identifiers, op calls, infix `+ - *`, and unary `-`.
Float literals are legal only in param declarations; integer literals only
as the column index of `col` and the length of `window`. Parameters whose
grids carry the same link(group) sweep in lockstep during grid search
(e.g. symmetric clip bounds) instead of contributing a Cartesian axis.
"""

import re
from dataclasses import dataclass, field

from . import graph as G
from . import ops


class DslError(Exception):
    def __init__(self, message, line=None, col=None):
        self.line, self.col = line, col
        where = f" at {line}:{col}" if line is not None else ""
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class Token:
    kind: str   # IDENT INT FLOAT SYM NEWLINE EOF
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<float>(\d+\.\d*|\.\d+)([eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>[()\[\],:=+\-*])
""", re.VERBOSE)


def tokenize(text):
    tokens, line, col = [], 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "newline":
            tokens.append(Token("NEWLINE", s, line, col))
            line, col = line + 1, 1
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind.upper() if kind != "sym" else "SYM", s, line, col))
            col += len(s)
        else:
            col += len(s)
        pos = m.end()
    tokens.append(Token("EOF", "", line, col))
    return tokens


KEYWORDS = {"model", "input", "param", "latent", "output"}
# value-arg positions that accept an integer literal, per op
_INT_POSITIONS = {"col": {1}, "window": {2}}


@dataclass
class DslDocument:
    source: str
    graph: G.PolicyGraph
    spans: dict = field(default_factory=dict)  # name -> (line, col)


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise DslError(message, tok.line, tok.col)

    def expect(self, kind, text=None):
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            self.fail(f"expected {want!r}, found {t.text!r}")
        return self.next()

    def skip_newlines(self):
        while self.peek().kind == "NEWLINE":
            self.next()

    def end_of_decl(self):
        t = self.peek()
        if t.kind not in ("NEWLINE", "EOF"):
            self.fail(f"unexpected {t.text!r} at end of declaration")

    def ident(self, what="name"):
        t = self.peek()
        if t.kind != "IDENT":
            self.fail(f"expected {what}, found {t.text!r}")
        return self.next()

    def number(self, what="number"):
        """Signed float for declarations (init, grid values)."""
        neg = False
        if self.peek().kind == "SYM" and self.peek().text == "-":
            self.next()
            neg = True
        t = self.peek()
        if t.kind not in ("FLOAT", "INT"):
            self.fail(f"expected {what}, found {t.text!r}")
        self.next()
        v = float(t.text)
        return -v if neg else v

    def parse_model(self):
        self.skip_newlines()
        self.expect("IDENT", "model")
        name = self.ident("model name").text
        self.end_of_decl()
        inputs, params, nodes, spans = [], [], [], {}
        while True:
            self.skip_newlines()
            t = self.peek()
            if t.kind == "EOF":
                break
            if t.kind != "IDENT" or t.text not in KEYWORDS - {"model"}:
                self.fail(f"expected a declaration keyword, found {t.text!r}")
            if t.text == "input":
                decl = self.parse_input()
                inputs.append(decl)
            elif t.text == "param":
                decl = self.parse_param()
                params.append(decl)
            else:
                decl = self.parse_node()
                nodes.append(decl)
            spans[decl.name] = (t.line, t.col)
            self.end_of_decl()
        return G.PolicyGraph(name=name, inputs=inputs, parameters=params,
                             nodes=nodes), spans

    def parse_shape(self):
        if not (self.peek().kind == "SYM" and self.peek().text == "["):
            return ()
        self.next()
        dims = []
        while True:
            t = self.peek()
            if t.kind == "SYM" and t.text == "*":
                self.next()
                dims.append("*")
            elif t.kind == "INT":
                dims.append(int(self.next().text))
            else:
                self.fail("expected a dimension (* or integer)")
            t = self.next()
            if t.kind == "SYM" and t.text == "]":
                break
            if not (t.kind == "SYM" and t.text == ","):
                self.fail("expected ',' or ']' in shape", t)
        if len(dims) > 2:
            self.fail("at most two axes are supported")
        if "*" in dims[1:]:
            self.fail("runtime extent is only allowed on axis 0")
        return tuple(dims)

    def parse_input(self):
        self.next()  # input
        name = self.ident().text
        self.expect("SYM", ":")
        t = self.ident("input type (float or bool)")
        if t.text not in ("float", "bool"):
            self.fail("input type must be float or bool", t)
        shape = self.parse_shape()
        return G.InputSpec(name=name, dtype=t.text, shape=shape)

    def parse_param(self):
        self.next()  # param
        name = self.ident().text
        self.expect("SYM", ":")
        t = self.ident("parameter kind (gradient or nongradient)")
        if t.text not in (G.GRADIENT, G.NON_GRADIENT):
            self.fail("parameter kind must be gradient or nongradient", t)
        kind = t.text
        shape = self.parse_shape()
        if "*" in shape:
            self.fail("parameters cannot have runtime extents")
        init = correlation = grid = link = None
        frozen = False
        if self.peek().kind == "SYM" and self.peek().text == "=":
            self.next()
            if self.peek().kind == "SYM" and self.peek().text == "(":
                self.next()
                vals = [self.number("init value")]
                while self.peek().text == ",":
                    self.next()
                    vals.append(self.number("init value"))
                self.expect("SYM", ")")
                init = tuple(vals)
            else:
                init = (self.number("init value"),)
        while self.peek().kind == "IDENT" and self.peek().text in ("sign", "grid", "link", "frozen"):
            word = self.next().text
            if word == "frozen":
                frozen = True
                continue
            self.expect("SYM", "(")
            if word == "sign":
                t = self.next()
                if t.text not in ("+", "-"):
                    self.fail("sign must be + or -", t)
                correlation = "positive" if t.text == "+" else "negative"
            elif word == "grid":
                vals = [self.number("grid value")]
                while self.peek().text == ",":
                    self.next()
                    vals.append(self.number("grid value"))
                grid = tuple(vals)
            else:
                link = self.ident("link group").text
            self.expect("SYM", ")")
        return G.Parameter(name=name, kind=kind, shape=shape, init=init,
                           correlation=correlation or "none", grid=grid,
                           frozen=frozen, link=link)

    def parse_node(self):
        role = self.next().text  # latent | output
        name = self.ident().text
        self.expect("SYM", "=")
        expr = self.parse_sum(allow_int=False)
        if not isinstance(expr, G.Call):
            # a bare reference or literal is not a computation; wrap single
            # names is disallowed to keep every node an operation
            self.fail(f"{role} '{name}' must apply an operation")
        return G.NodeSpec(name=name, expr=expr, role=role)

    def parse_sum(self, allow_int):
        left = self.parse_prod(allow_int)
        while self.peek().kind == "SYM" and self.peek().text in "+-":
            op = self.next().text
            right = self.parse_prod(allow_int)
            if op == "-":
                right = G.Call("neg", (right,))
            left = G.Call("add", (left, right))
        return left

    def parse_prod(self, allow_int):
        left = self.parse_unary(allow_int)
        while self.peek().kind == "SYM" and self.peek().text == "*":
            self.next()
            left = G.Call("mul", (left, self.parse_unary(allow_int)))
        return left

    def parse_unary(self, allow_int):
        if self.peek().kind == "SYM" and self.peek().text == "-":
            self.next()
            return G.Call("neg", (self.parse_unary(allow_int),))
        return self.parse_atom(allow_int)

    def parse_atom(self, allow_int):
        t = self.peek()
        if t.kind == "FLOAT":
            self.fail("float literals are only allowed in param declarations")
        if t.kind == "INT":
            if allow_int:
                self.next()
                return G.IntLit(int(t.text))
            self.fail("integer literals are only allowed in col/window arguments")
        if t.kind == "SYM" and t.text == "(":
            self.next()
            inner = self.parse_sum(allow_int=False)
            self.expect("SYM", ")")
            return inner
        if t.kind != "IDENT":
            self.fail(f"expected an expression, found {t.text!r}")
        name = self.next().text
        if not (self.peek().kind == "SYM" and self.peek().text == "("):
            return G.Ref(name)
        if name not in ops.OPS:
            self.fail(f"unknown operation '{name}'", t)
        self.next()
        args = []
        int_ok = _INT_POSITIONS.get(name, set())
        if not (self.peek().kind == "SYM" and self.peek().text == ")"):
            while True:
                args.append(self.parse_sum(allow_int=len(args) in int_ok))
                if self.peek().text == ",":
                    self.next()
                    continue
                break
        self.expect("SYM", ")")
        return G.Call(name, tuple(args))


def parse_document(text) -> DslDocument:
    g, spans = _Parser(tokenize(text)).parse_model()
    return DslDocument(source=text, graph=g, spans=spans)


def parse(text) -> G.PolicyGraph:
    """Parse and validate; raises DslError with a source span on failure."""
    doc = parse_document(text)
    diags = G.validate_graph(doc.graph)
    if diags:
        d = diags[0]
        line, col = doc.spans.get(d.node, (None, None))
        raise DslError(f"{d}", line, col)
    return doc.graph


def _fmt_num(v):
    return repr(float(v))


def _fmt_shape(shape):
    if not shape:
        return ""
    return " [" + ", ".join(str(d) for d in shape) + "]"


# precedence: add=1 < mul=2 < neg=3 < atoms/calls
def _render(expr, parent=0):
    if isinstance(expr, G.Ref):
        return expr.name
    if isinstance(expr, G.IntLit):
        return str(expr.value)
    op = expr.op
    if op == "add":
        left, right = expr.args
        if isinstance(right, G.Call) and right.op == "neg":
            s = f"{_render(left, 1)} - {_render(right.args[0], 2)}"
        else:
            s = f"{_render(left, 1)} + {_render(right, 2)}"
        return f"({s})" if parent > 1 else s
    if op == "mul":
        left, right = expr.args
        s = f"{_render(left, 2)} * {_render(right, 3)}"
        return f"({s})" if parent > 2 else s
    if op == "neg":
        s = f"-{_render(expr.args[0], 4)}"
        return f"({s})" if parent > 3 else s
    return f"{op}(" + ", ".join(_render(a) for a in expr.args) + ")"


def serialize(g: G.PolicyGraph) -> str:
    """Canonical text: inputs, params, latents, outputs; stable formatting."""
    lines = [f"model {g.name}", ""]
    for i in g.inputs:
        lines.append(f"input {i.name}: {i.dtype}{_fmt_shape(i.shape)}")
    if g.inputs:
        lines.append("")
    for p in g.parameters:
        s = f"param {p.name}: {p.kind}{_fmt_shape(p.shape)}"
        if p.init is not None:
            if p.shape:
                s += " = (" + ", ".join(_fmt_num(v) for v in p.init) + ")"
            else:
                s += f" = {_fmt_num(p.init[0])}"
        if p.correlation != "none":
            s += f" sign({'+' if p.correlation == 'positive' else '-'})"
        if p.grid is not None:
            s += " grid(" + ", ".join(_fmt_num(v) for v in p.grid) + ")"
        if p.link is not None:
            s += f" link({p.link})"
        if p.frozen:
            s += " frozen"
        lines.append(s)
    if g.parameters:
        lines.append("")
    for n in g.latents():
        lines.append(f"latent {n.name} = {_render(n.expr)}")
    for n in g.outputs():
        lines.append(f"output {n.name} = {_render(n.expr)}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Warning:
    code: str     # unused-latent | unused-param | no-input-dependence
    name: str
    message: str


def lint(g: G.PolicyGraph):
    """Style findings on a structurally valid graph."""
    warnings = []
    used = set()
    for n in g.nodes:
        used.update(G.expr_refs(n.expr))
    for n in g.latents():
        if n.name not in used:
            warnings.append(Warning("unused-latent", n.name,
                                    f"latent '{n.name}' is never referenced"))
    for p in g.parameters:
        if p.name not in used:
            warnings.append(Warning("unused-param", p.name,
                                    f"parameter '{p.name}' is never referenced"))
    # transitive input dependence per output
    depends = {i.name for i in g.inputs}
    for n in g.nodes:
        if any(r in depends for r in G.expr_refs(n.expr)):
            depends.add(n.name)
    for n in g.outputs():
        if n.name not in depends:
            warnings.append(Warning("no-input-dependence", n.name,
                                    f"output '{n.name}' does not depend on any input"))
    return warnings
