"""Reverse-mode differentiation of graph evaluation.

The tape records every primitive application (op, argument values, result)
during a forward pass that uses the exact same kernels as `graph.evaluate`,
then walks the records in reverse accumulating vector-Jacobian products.
Only gradient-kind, non-frozen parameters receive gradients.
"""

from dataclasses import dataclass

import numpy as np

from . import ops
from .graph import GRADIENT, NumericFault, bind_inputs, param_slot


class NonSmoothPoint(Exception):
    """The evaluation point sits within the guard margin of a kink."""


@dataclass
class TapeRecord:
    step: object
    args: list
    extras: dict
    out: np.ndarray


class Tape:
    """Single-use recording of one forward pass."""

    def __init__(self, graph, values, inputs):
        self.graph = graph
        self.records = []
        self.slots = {}
        bound = bind_inputs(graph, inputs)
        for p in graph.parameters:
            self.slots[p.name] = param_slot(p, values[p.name])
        self.slots.update(bound)
        for step in graph.program():
            sig = ops.OPS[step.op]
            extras = {k: (float(self.slots[v][0]) if isinstance(v, str) else v)
                      for k, v in step.extras}
            args = [self.slots[a] for a in step.args]
            with np.errstate(all="ignore"):
                out = sig.forward(args, extras)
            if not np.all(np.isfinite(out)):
                raise NumericFault(step.out)
            self.slots[step.out] = out
            self.records.append(TapeRecord(step, args, extras, out))

    def outputs(self):
        return {n.name: self.slots[n.name] for n in self.graph.outputs()}

    def backward(self, adjoint_seed):
        """Adjoint accumulation; returns {trainable param name: gradient}."""
        adj = {}
        for node in self.graph.outputs():
            if node.name in adjoint_seed:
                seed = np.broadcast_to(
                    np.asarray(adjoint_seed[node.name], dtype=np.float64),
                    self.slots[node.name].shape)
                adj[node.name] = adj.get(node.name, 0.0) + seed
        for rec in reversed(self.records):
            a = adj.get(rec.step.out)
            if a is None:
                continue
            if not np.all(np.isfinite(a)):
                raise NumericFault(rec.step.out, f"non-finite adjoint at '{rec.step.out}'")
            sig = ops.OPS[rec.step.op]
            for name, g in zip(rec.step.args, sig.vjp(rec.args, rec.out, a, rec.extras)):
                if g is not None:
                    adj[name] = adj.get(name, 0.0) + g
        grads = {}
        for p in self.graph.parameters:
            if p.kind != GRADIENT or p.frozen:
                continue
            g = adj.get(p.name)
            if g is None:
                grads[p.name] = 0.0 if not p.shape else np.zeros(p.shape)
            else:
                g = np.asarray(g).reshape((1,) + tuple(int(d) for d in p.shape))
                grads[p.name] = float(g[0]) if not p.shape else g[0]
        return grads


def forward_backward(graph, values, inputs, adjoint_seed):
    """(outputs, gradients) — outputs bitwise equal to graph.evaluate."""
    tape = Tape(graph, values, inputs)
    return tape.outputs(), tape.backward(adjoint_seed)


def _kink_distance(graph, values, inputs):
    """Smallest distance from any forward value to a kink of its node."""
    tape = Tape(graph, values, inputs)
    worst = np.inf
    for rec in tape.records:
        d = _op_kink_distance(rec.step.op, rec.args, rec.out, rec.extras)
        worst = min(worst, d)
    return worst


def _op_kink_distance(op, args, out, extras):
    def gap(v):
        return float(np.min(v)) if np.size(v) else np.inf

    if op == "abs":
        return gap(np.abs(args[0]))
    if op == "sqrt":
        return gap(args[0])
    if op == "euclid_norm2":
        return gap(out)
    if op == "clip":
        a = args[0]
        return min(gap(np.abs(a - extras["lo"])), gap(np.abs(a - extras["hi"])))
    if op in ("min2", "max2"):
        R = max(ops.rank(args[0]), ops.rank(args[1]))
        return gap(np.abs(ops._aligned(args[0], R) - ops._aligned(args[1], R)))
    if op in ("lt", "gt"):
        return gap(np.abs(args[0] - extras["threshold"]))
    if op in ("reduce_min", "argmin_index"):
        a = args[0]
        if a.shape[-1] < 2:
            return np.inf
        two = np.sort(a, axis=-1)[..., :2]
        return gap(two[..., 1] - two[..., 0])
    if op == "window":
        start = args[1]
        frac = np.abs(start - np.round(start))
        off_grid = frac[frac > 0.0]
        return gap(off_grid) if off_grid.size else np.inf
    return np.inf


def finite_difference_check(graph, values, inputs, adjoint_seed, eps=1e-5,
                            guard=50.0):
    """Max relative error of the tape gradient vs central differences.

    The objective is f(theta) = sum over outputs of seed * output. A point
    within `guard * eps` of any kink raises NonSmoothPoint: central
    differences straddle the non-smoothness there, so the comparison is
    meaningless and the caller must resample.
    """
    margin = guard * eps
    if _kink_distance(graph, values, inputs) <= margin:
        raise NonSmoothPoint("non-smooth point: evaluation within kink margin")

    def objective(vals):
        tape = Tape(graph, vals, inputs)
        total = 0.0
        for name, out in tape.outputs().items():
            if name in adjoint_seed:
                seed = np.broadcast_to(
                    np.asarray(adjoint_seed[name], dtype=np.float64), out.shape)
                total += float(np.sum(seed * out))
        return total

    _, grads = forward_backward(graph, values, inputs, adjoint_seed)
    worst = 0.0
    for p in graph.parameters:
        if p.kind != GRADIENT or p.frozen:
            continue
        base = np.atleast_1d(np.asarray(values[p.name], dtype=np.float64))
        analytic = np.atleast_1d(np.asarray(grads[p.name]))
        for i in range(base.size):
            for sgn in (+1.0, -1.0):
                bumped = base.copy()
                bumped[i] += sgn * eps
                v = dict(values)
                v[p.name] = bumped[0] if not p.shape else bumped
                if sgn > 0:
                    f_plus = objective(v)
                else:
                    f_minus = objective(v)
            numeric = (f_plus - f_minus) / (2.0 * eps)
            err = abs(float(analytic[i]) - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst
