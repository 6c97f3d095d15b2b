"""Policy-structure data model: inputs, parameters, expression nodes.

A policy is a weighted acyclic graph. Latent and output nodes hold small
expression trees over a fixed operation vocabulary; evaluation flattens
the trees into a straight-line program of primitive steps (one op each)
so the interpreter and the autodiff tape share identical forward kernels.

Values are numpy arrays with a leading batch axis: a per-sample scalar is
(B,), a vector (B, n), a matrix (B, L, C). Parameters are unbatched
scalars or 1-D vectors and broadcast against batched values. Booleans are
0.0/1.0 floats so masks compose with arithmetic.
"""

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import ops

GRADIENT = "gradient"
NON_GRADIENT = "nongradient"


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class Call:
    op: str
    args: tuple

Expr = Union[Ref, IntLit, Call]


@dataclass(frozen=True)
class InputSpec:
    name: str
    dtype: str = "float"          # float | bool
    shape: tuple = ()             # (), (n,), ("*", c); "*" = runtime extent


@dataclass(frozen=True)
class Parameter:
    name: str
    kind: str = GRADIENT          # gradient | nongradient
    shape: tuple = ()             # () scalar or (n,) vector
    init: Optional[tuple] = None  # per-element inits; None = from correlation
    correlation: str = "none"     # positive | negative | none
    grid: Optional[tuple] = None  # candidate values, nongradient scalars only
    frozen: bool = False
    link: Optional[str] = None    # grid-link group: linked grids sweep in lockstep

    def n_scalars(self) -> int:
        return int(self.shape[0]) if self.shape else 1

    def init_value(self):
        """Declared init, or the rough correlation-sign default."""
        if self.init is not None:
            vals = self.init
        else:
            d = {"positive": 0.1, "negative": -0.1, "none": 0.0}[self.correlation]
            vals = (d,) * self.n_scalars()
        if not self.shape:
            return float(vals[0])
        return np.array(vals, dtype=np.float64)


@dataclass(frozen=True)
class NodeSpec:
    name: str
    expr: Call
    role: str = "latent"          # latent | output


@dataclass
class PolicyGraph:
    name: str
    inputs: list = field(default_factory=list)     # [InputSpec]
    parameters: list = field(default_factory=list)  # [Parameter]
    nodes: list = field(default_factory=list)       # [NodeSpec], declaration order

    def __post_init__(self):
        self.inputs = tuple(self.inputs)
        self.parameters = tuple(self.parameters)
        self.nodes = tuple(self.nodes)
        self._program = None

    def __eq__(self, other):
        # Node order is compared per role: the canonical text layout lists
        # latents before outputs, which must not break round-trip equality
        # for graphs declared with the two interleaved.
        if not isinstance(other, PolicyGraph):
            return NotImplemented
        return (self.name, self.inputs, self.parameters,
                self.latents(), self.outputs()) == (
            other.name, other.inputs, other.parameters,
            other.latents(), other.outputs())

    def input_names(self):
        return [i.name for i in self.inputs]

    def param_names(self):
        return [p.name for p in self.parameters]

    def param(self, name):
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)

    def outputs(self):
        return [n for n in self.nodes if n.role == "output"]

    def latents(self):
        return [n for n in self.nodes if n.role == "latent"]

    def program(self):
        """Flattened straight-line program; cached after first build."""
        if self._program is None:
            self._program = _flatten(self)
        return self._program


@dataclass(frozen=True)
class Step:
    """One primitive application: out = op(*args) with structural extras."""
    out: str
    op: str
    args: tuple            # value slot names (inputs, params, earlier steps)
    extras: tuple = ()     # (key, value) pairs: param names or ints


def _flatten(g: PolicyGraph):
    steps = []

    def emit(expr, slot_hint, counter):
        if isinstance(expr, Ref):
            return expr.name
        if isinstance(expr, IntLit):
            raise ValueError("integer literal outside structural position")
        sig = ops.OPS[expr.op]
        args, extras = [], []
        for pos, sub in enumerate(expr.args):
            kind = sig.arg_kind(pos, len(expr.args))
            if kind == "value":
                args.append(emit(sub, slot_hint, counter))
            else:  # structural: bare param ref or int literal
                if isinstance(sub, IntLit):
                    extras.append((kind, sub.value))
                elif isinstance(sub, Ref):
                    extras.append((kind, sub.name))
                else:
                    raise ValueError(
                        f"{expr.op}: structural argument {pos} must be a "
                        "parameter name or integer")
        counter[0] += 1
        out = slot_hint if counter[0] == counter[1] else f"~{slot_hint}.{counter[0]}"
        steps.append(Step(out=out, op=expr.op, args=tuple(args), extras=tuple(extras)))
        return out

    for node in g.nodes:
        # counter = [emitted so far, total sub-calls]; the last emitted call
        # takes the node's own name as its slot.
        total = _count_calls(node.expr)
        counter = [0, total]
        emit(node.expr, node.name, counter)
    return steps


def _count_calls(expr) -> int:
    if isinstance(expr, Call):
        return 1 + sum(_count_calls(a) for a in expr.args)
    return 0


def expr_refs(expr):
    """All names referenced by an expression (value and structural)."""
    if isinstance(expr, Ref):
        yield expr.name
    elif isinstance(expr, Call):
        for a in expr.args:
            yield from expr_refs(a)


@dataclass(frozen=True)
class Diagnostic:
    category: str   # cycle | unresolved-name | literal-in-expr | shape-mismatch | bad-grid
    node: str
    message: str

    def __str__(self):
        return f"[{self.category}] {self.node}: {self.message}"


class GraphError(Exception):
    """Structural contract violation (cycles, bad references, bad shapes)."""


class NumericFault(Exception):
    """Non-finite value produced during evaluation."""

    def __init__(self, node, message=""):
        self.node = node
        super().__init__(message or f"non-finite value at node '{node}'")


def validate_graph(g: PolicyGraph):
    """All structural diagnostics; empty list iff the graph is well-formed."""
    diags = []
    seen = {}
    for spec in list(g.inputs) + list(g.parameters) + list(g.nodes):
        if spec.name in seen:
            diags.append(Diagnostic("unresolved-name", spec.name,
                                    f"duplicate declaration of '{spec.name}'"))
        seen[spec.name] = spec

    for p in g.parameters:
        if p.grid is not None:
            if p.kind != NON_GRADIENT:
                diags.append(Diagnostic("bad-grid", p.name,
                                        "grid requires a nongradient parameter"))
            if p.shape:
                diags.append(Diagnostic("bad-grid", p.name,
                                        "grid requires a scalar parameter"))
            elif p.init_value() not in p.grid:
                diags.append(Diagnostic("bad-grid", p.name,
                                        f"init {p.init_value()} not in grid {p.grid}"))
        if p.link is not None and p.grid is None:
            diags.append(Diagnostic("bad-grid", p.name,
                                    "link() requires a grid"))
        if p.init is not None and len(p.init) != p.n_scalars():
            diags.append(Diagnostic("shape-mismatch", p.name,
                                    f"init has {len(p.init)} values for shape {p.shape}"))
    by_link = {}
    for p in g.parameters:
        if p.link is not None and p.grid is not None:
            by_link.setdefault(p.link, []).append(p)
    for group, members in by_link.items():
        lens = {len(p.grid) for p in members}
        if len(lens) > 1:
            diags.append(Diagnostic("bad-grid", members[0].name,
                                    f"link group '{group}' mixes grid lengths {sorted(lens)}"))

    defined = set(g.input_names()) | set(g.param_names())
    latent_names = {n.name for n in g.nodes if n.role == "latent"}
    output_names = {n.name for n in g.nodes if n.role == "output"}
    for node in g.nodes:
        for ref in expr_refs(node.expr):
            if ref == node.name:
                diags.append(Diagnostic("cycle", node.name,
                                        f"'{node.name}' references itself"))
            elif ref not in defined:
                if ref in latent_names:
                    diags.append(Diagnostic("cycle", node.name,
                                            f"'{ref}' is not defined before '{node.name}'"))
                elif ref in output_names:
                    diags.append(Diagnostic("unresolved-name", node.name,
                                            f"'{ref}' is an output; outputs are terminal"))
                else:
                    diags.append(Diagnostic("unresolved-name", node.name,
                                            f"unknown name '{ref}'"))
        if node.role == "latent":
            defined.add(node.name)

    diags.extend(_check_shapes(g, diags))
    return diags


def _check_shapes(g, earlier):
    """Rank/type inference over the flattened program."""
    if any(d.category in ("cycle", "unresolved-name") for d in earlier):
        return []  # references are broken; shape inference would cascade
    diags = []
    # rank: 0, 1, 2; bool flag tracked alongside
    info = {}
    for i in g.inputs:
        info[i.name] = (len(i.shape), i.dtype == "bool")
    for p in g.parameters:
        info[p.name] = (len(p.shape), False)
    try:
        program = g.program()
    except ValueError as e:
        return [Diagnostic("literal-in-expr", g.name, str(e))]
    param_names = {p.name for p in g.parameters}
    for step in program:
        sig = ops.OPS[step.op]
        arg_info = [info[a] for a in step.args]
        extras = dict(step.extras)
        for key, val in step.extras:
            want = sig.structural_types.get(key, "int")
            if isinstance(val, str):
                if want == "int":
                    diags.append(Diagnostic("literal-in-expr", step.out,
                                            f"{step.op}: {key} must be an integer literal"))
                elif val not in param_names:
                    diags.append(Diagnostic("shape-mismatch", step.out,
                                            f"{step.op}: '{val}' must name a parameter"))
                elif info[val] != (0, False):
                    diags.append(Diagnostic("shape-mismatch", step.out,
                                            f"{step.op}: parameter '{val}' must be a scalar"))
            elif want == "param":
                diags.append(Diagnostic("shape-mismatch", step.out,
                                        f"{step.op}: {key} must name a parameter"))
        for pos in sig.param_positions(len(step.args)):
            if step.args[pos] not in param_names:
                diags.append(Diagnostic("shape-mismatch", step.out,
                                        f"{step.op}: argument {pos + 1} must be a parameter"))
        try:
            info[step.out] = sig.infer(arg_info, extras)
        except ops.ShapeError as e:
            diags.append(Diagnostic("shape-mismatch", step.out, f"{step.op}: {e}"))
            info[step.out] = (0, False)  # keep going with a plausible rank
    return diags


def topological_order(g: PolicyGraph):
    """Node names in dependency order (inputs/parameters excluded).

    Declarations are straight-line (use-before-def is a validation error),
    so declaration order is already topological; it also breaks ties.
    """
    diags = validate_graph(g)
    cycles = [d for d in diags if d.category == "cycle"]
    if cycles:
        raise GraphError(str(cycles[0]))
    return [n.name for n in g.nodes]


def parameter_census(g: PolicyGraph):
    """(n_gradient, n_nongradient, n_frozen), counting scalar elements."""
    n_grad = sum(p.n_scalars() for p in g.parameters if p.kind == GRADIENT)
    n_non = sum(p.n_scalars() for p in g.parameters if p.kind == NON_GRADIENT)
    n_frozen = sum(p.n_scalars() for p in g.parameters if p.frozen)
    return (n_grad, n_non, n_frozen)


def init_parameters(g: PolicyGraph):
    """name -> initial value (float, or float64 vector)."""
    return {p.name: p.init_value() for p in g.parameters}


def bind_inputs(g: PolicyGraph, inputs):
    """Check and batch the input map; returns {name: float64 array (B,...)}."""
    bound = {}
    batch = None
    for spec in g.inputs:
        if spec.name not in inputs:
            raise GraphError(f"missing input '{spec.name}'")
        v = np.asarray(inputs[spec.name], dtype=np.float64)
        want = len(spec.shape) + 1
        if v.ndim == want - 1:
            v = v[None, ...]
        if v.ndim != want:
            raise GraphError(
                f"input '{spec.name}': expected rank {want - 1} per sample, "
                f"got array of rank {v.ndim}")
        for axis, extent in enumerate(spec.shape):
            if extent != "*" and v.shape[axis + 1] != extent:
                raise GraphError(
                    f"input '{spec.name}': axis {axis} has extent "
                    f"{v.shape[axis + 1]}, declared {extent}")
        if batch is None:
            batch = v.shape[0]
        elif v.shape[0] != batch:
            raise GraphError(f"input '{spec.name}': batch {v.shape[0]} != {batch}")
        bound[spec.name] = v
    return bound


def param_slot(p: Parameter, value):
    """Canonical batched form of a parameter value: (1,) scalar or (1, n)."""
    v = np.asarray(value, dtype=np.float64).reshape((1,) + tuple(int(d) for d in p.shape))
    return v


def run_program(g: PolicyGraph, values, bound, check=True):
    """Execute the flattened program; returns the full slot map.

    `bound` must hold batched input arrays; parameter values are broadcast
    against the batch. Every slot ends up in canonical batched form, so a
    value's per-sample rank is always ndim - 1.
    """
    slots = {}
    for p in g.parameters:
        slots[p.name] = param_slot(p, values[p.name])
    slots.update(bound)
    for step in g.program():
        sig = ops.OPS[step.op]
        extras = {k: (float(slots[v][0]) if isinstance(v, str) else v)
                  for k, v in step.extras}
        # non-finite intermediates raise NumericFault below, so numpy's
        # own warnings on the producing op are just noise
        with np.errstate(all="ignore"):
            out = sig.forward([slots[a] for a in step.args], extras)
        if check and not np.all(np.isfinite(out)):
            raise NumericFault(step.out)
        slots[step.out] = out
    return slots


def evaluate(g: PolicyGraph, values, inputs):
    """Forward evaluation; returns {output name: array (B,...)}.

    Pure and deterministic: identical (g, values, inputs) give bitwise
    identical outputs.
    """
    bound = bind_inputs(g, inputs)
    slots = run_program(g, values, bound)
    return {n.name: slots[n.name] for n in g.outputs()}
