"""Operation vocabulary: forward kernels, shape rules, and VJP rules.

One table drives everything: the interpreter and the reverse-mode tape
call the same `forward`, so their outputs agree bitwise.

Every value entering a kernel is in canonical batched form: a per-sample
scalar is (B,), a vector (B, n), a matrix (B, L, C). Parameters ride with
batch extent 1 and broadcast. Booleans travel as 0.0/1.0 floats.

Subgradient conventions (deterministic by design):
  abs'(0) = 0; sqrt'(0) = 0; clip' = 1 strictly inside the bounds else 0;
  min2/max2 and reduce_min route the whole adjoint to the first winning
  element; where routes to the selected branch only; boolean producers
  (nor, not, any, lt, gt), argmin_index, window start, and col pass zero
  gradient to their inputs. Fan-out accumulates adjoints additively.
"""

import numpy as np


class ShapeError(Exception):
    pass


def rank(v):
    return v.ndim - 1


def _aligned(v, out_rank):
    """Pad trailing singleton axes so a scalar broadcasts over a vector."""
    return v.reshape(v.shape + (1,) * (out_rank - rank(v)))


def _unalign(adj, orig, out_rank):
    """Reverse of _aligned + numpy broadcasting: sum adj down to orig.shape."""
    for _ in range(out_rank - rank(orig)):
        adj = adj.sum(axis=-1)
    for ax in range(adj.ndim):
        if orig.shape[ax] == 1 and adj.shape[ax] != 1:
            adj = adj.sum(axis=ax, keepdims=True)
    return adj


def _broadcast_rank(ranks, op):
    hi, lo = max(ranks), min(ranks)
    if hi != lo and lo != 0:
        raise ShapeError(f"{op} broadcasts scalars with vectors only, got ranks {ranks}")
    return hi


def _require_bool(arg_info, op):
    for i, (_, is_bool) in enumerate(arg_info):
        if not is_bool:
            raise ShapeError(f"{op}: argument {i + 1} must be boolean")


class Op:
    """One operation kind. Subclasses fill in the semantics."""

    name = ""
    fwd_doc = ""
    vjp_doc = ""
    structural = {}        # {arg position: extras key}
    structural_types = {}  # {extras key: "int" | "param" | "int_or_param"}

    def arg_kind(self, pos, n_args):
        return self.structural.get(pos, "value")

    def param_positions(self, n_args):
        """Value-arg positions that must reference parameters."""
        return ()

    def infer(self, arg_info, extras):
        """(rank, is_bool) of the result from value-arg (rank, is_bool) pairs."""
        raise NotImplementedError

    def forward(self, args, extras):
        raise NotImplementedError

    def vjp(self, args, out, adj, extras):
        """Adjoint per value argument; None marks a structurally zero adjoint."""
        raise NotImplementedError


class AddOp(Op):
    name = "add"
    fwd_doc = "a + b; the infix sum primitive (scalars broadcast over vectors)"
    vjp_doc = "da = adj; db = adj; broadcast axes summed out"

    def infer(self, arg_info, extras):
        return (_broadcast_rank([r for r, _ in arg_info], self.name), False)

    def forward(self, args, extras):
        a, b = args
        R = max(rank(a), rank(b))
        return _aligned(a, R) + _aligned(b, R)

    def vjp(self, args, out, adj, extras):
        a, b = args
        R = rank(out)
        return [_unalign(adj, a, R), _unalign(adj, b, R)]


class MulOp(AddOp):
    name = "mul"
    fwd_doc = "a * b elementwise (scalars broadcast over vectors)"
    vjp_doc = "da = adj * b; db = adj * a; broadcast axes summed out"

    def forward(self, args, extras):
        a, b = args
        R = max(rank(a), rank(b))
        return _aligned(a, R) * _aligned(b, R)

    def vjp(self, args, out, adj, extras):
        a, b = args
        R = rank(out)
        return [_unalign(adj * _aligned(b, R), a, R),
                _unalign(adj * _aligned(a, R), b, R)]


class _Unary(Op):
    def infer(self, arg_info, extras):
        return (arg_info[0][0], False)


class NegOp(_Unary):
    name = "neg"
    fwd_doc = "-a"
    vjp_doc = "da = -adj"

    def forward(self, args, extras):
        return -args[0]

    def vjp(self, args, out, adj, extras):
        return [-adj]


class AbsOp(_Unary):
    name = "abs"
    fwd_doc = "|a|"
    vjp_doc = "da = adj * sign(a); sign(0) = 0 (subgradient at the kink)"

    def forward(self, args, extras):
        return np.abs(args[0])

    def vjp(self, args, out, adj, extras):
        return [adj * np.sign(args[0])]


class SqrtOp(_Unary):
    name = "sqrt"
    fwd_doc = "sqrt(a); a must be non-negative"
    vjp_doc = "da = adj / (2 sqrt(a)) for a > 0; 0 at a = 0 by convention"

    def forward(self, args, extras):
        return np.sqrt(args[0])

    def vjp(self, args, out, adj, extras):
        a = args[0]
        return [np.where(a > 0.0, adj * 0.5 / np.where(a > 0.0, out, 1.0), 0.0)]


class SquareOp(_Unary):
    name = "square"
    fwd_doc = "a^2"
    vjp_doc = "da = 2 a adj"

    def forward(self, args, extras):
        return np.square(args[0])

    def vjp(self, args, out, adj, extras):
        return [2.0 * args[0] * adj]


class TanhOp(_Unary):
    name = "tanh"
    fwd_doc = "tanh(a); the MLP baseline's activation"
    vjp_doc = "da = (1 - tanh(a)^2) adj"

    def forward(self, args, extras):
        return np.tanh(args[0])

    def vjp(self, args, out, adj, extras):
        return [(1.0 - out * out) * adj]


class ClipOp(Op):
    name = "clip"
    fwd_doc = "clip(a, lo, hi); lo/hi are scalar parameters"
    vjp_doc = "da = adj where lo < a < hi (strict), else 0; bounds get none"
    structural = {1: "lo", 2: "hi"}
    structural_types = {"lo": "param", "hi": "param"}

    def infer(self, arg_info, extras):
        return (arg_info[0][0], False)

    def forward(self, args, extras):
        return np.clip(args[0], extras["lo"], extras["hi"])

    def vjp(self, args, out, adj, extras):
        a = args[0]
        inside = (a > extras["lo"]) & (a < extras["hi"])
        return [np.where(inside, adj, 0.0)]


class Min2Op(Op):
    name = "min2"
    fwd_doc = "elementwise min(a, b)"
    vjp_doc = "adjoint routed to the winner; a wins ties"

    def infer(self, arg_info, extras):
        return (_broadcast_rank([r for r, _ in arg_info], self.name), False)

    def _wins(self, a, b):
        return a <= b

    def forward(self, args, extras):
        a, b = args
        R = max(rank(a), rank(b))
        A, B = _aligned(a, R), _aligned(b, R)
        return np.where(self._wins(A, B), A, B)

    def vjp(self, args, out, adj, extras):
        a, b = args
        R = rank(out)
        A, B = _aligned(a, R), _aligned(b, R)
        take_a = self._wins(A, B)
        return [_unalign(np.where(take_a, adj, 0.0), a, R),
                _unalign(np.where(take_a, 0.0, adj), b, R)]


class Max2Op(Min2Op):
    name = "max2"
    fwd_doc = "elementwise max(a, b)"
    vjp_doc = "adjoint routed to the winner; a wins ties"

    def _wins(self, a, b):
        return a >= b


class WhereOp(Op):
    name = "where"
    fwd_doc = "where(cond, a, b): a where cond holds, else b"
    vjp_doc = "adjoint routed to the selected branch only; cond gets none"

    def infer(self, arg_info, extras):
        (rc, cb), (ra, ab), (rb, bb) = arg_info
        if not cb:
            raise ShapeError("condition must be boolean")
        out = _broadcast_rank([rc, ra, rb], self.name)
        return (out, ab and bb)

    def forward(self, args, extras):
        c, a, b = args
        R = max(rank(c), rank(a), rank(b))
        return np.where(_aligned(c, R) > 0.5, _aligned(a, R), _aligned(b, R))

    def vjp(self, args, out, adj, extras):
        c, a, b = args
        R = rank(out)
        mask = _aligned(c, R) > 0.5
        return [None,
                _unalign(np.where(mask, adj, 0.0), a, R),
                _unalign(np.where(mask, 0.0, adj), b, R)]


class NorOp(Op):
    name = "nor"
    fwd_doc = "NOT (a OR b) on booleans"
    vjp_doc = "boolean: no gradient flows"

    def infer(self, arg_info, extras):
        _require_bool(arg_info, self.name)
        return (_broadcast_rank([r for r, _ in arg_info], self.name), True)

    def forward(self, args, extras):
        a, b = args
        R = max(rank(a), rank(b))
        hot = (_aligned(a, R) > 0.5) | (_aligned(b, R) > 0.5)
        return np.where(hot, 0.0, 1.0)

    def vjp(self, args, out, adj, extras):
        return [None, None]


class NotOp(Op):
    name = "not"
    fwd_doc = "NOT a on booleans"
    vjp_doc = "boolean: no gradient flows"

    def infer(self, arg_info, extras):
        _require_bool(arg_info, self.name)
        return (arg_info[0][0], True)

    def forward(self, args, extras):
        return np.where(args[0] > 0.5, 0.0, 1.0)

    def vjp(self, args, out, adj, extras):
        return [None]


class AnyOp(Op):
    name = "any"
    fwd_doc = "1 if any element of a boolean vector is set"
    vjp_doc = "boolean: no gradient flows"

    def infer(self, arg_info, extras):
        _require_bool(arg_info, self.name)
        if arg_info[0][0] != 1:
            raise ShapeError("argument must be a vector")
        return (0, True)

    def forward(self, args, extras):
        return np.where((args[0] > 0.5).any(axis=-1), 1.0, 0.0)

    def vjp(self, args, out, adj, extras):
        return [None]


class StackOp(Op):
    name = "stack"
    fwd_doc = "stack(k scalars) -> vector of length k"
    vjp_doc = "adjoint column i goes to argument i"

    def infer(self, arg_info, extras):
        if not arg_info:
            raise ShapeError("needs at least one argument")
        if any(r != 0 for r, _ in arg_info):
            raise ShapeError("arguments must be scalars")
        return (1, False)

    def forward(self, args, extras):
        return np.stack(np.broadcast_arrays(*args), axis=-1)

    def vjp(self, args, out, adj, extras):
        return [_unalign(adj[..., i], a, 0) for i, a in enumerate(args)]


class ColOp(Op):
    name = "col"
    fwd_doc = "col(a, j): element/column j of the last axis"
    vjp_doc = "structural extraction: no gradient flows to the source"
    structural = {1: "index"}
    structural_types = {"index": "int"}

    def infer(self, arg_info, extras):
        r = arg_info[0][0]
        if r < 1:
            raise ShapeError("source must have rank >= 1")
        return (r - 1, arg_info[0][1])

    def forward(self, args, extras):
        return args[0][..., int(extras["index"])]

    def vjp(self, args, out, adj, extras):
        return [None]


class WindowOp(Op):
    name = "window"
    fwd_doc = ("window(a, start, len): len consecutive axis-0 rows beginning at "
               "floor(start), wrapping around (tile arrays are closed loops)")
    vjp_doc = "source rows receive their adjoints (scatter-add); start gets none"
    structural = {2: "length"}
    structural_types = {"length": "int_or_param"}

    def infer(self, arg_info, extras):
        (rs, sb), (rstart, _) = arg_info
        if rs < 1:
            raise ShapeError("source must have rank >= 1")
        if rstart != 0:
            raise ShapeError("start must be a scalar")
        return (rs, sb)

    @staticmethod
    def _length(extras):
        n = int(round(float(extras["length"])))
        if n < 1:
            raise ShapeError(f"window length must be >= 1, got {n}")
        return n

    @staticmethod
    def _indices(L, start, length):
        base = np.floor(start).astype(np.int64) % L
        return (base[:, None] + np.arange(length)) % L

    def forward(self, args, extras):
        src, start = args
        n = self._length(extras)
        b = max(src.shape[0], start.shape[0])
        src = np.broadcast_to(src, (b,) + src.shape[1:])
        idx = self._indices(src.shape[1], np.broadcast_to(start, (b,)), n)
        if src.ndim == 3:
            return np.take_along_axis(src, idx[:, :, None], axis=1)
        return np.take_along_axis(src, idx, axis=1)

    def vjp(self, args, out, adj, extras):
        src, start = args
        n = self._length(extras)
        b = max(src.shape[0], start.shape[0])
        src_b = np.broadcast_to(src, (b,) + src.shape[1:])
        idx = self._indices(src_b.shape[1], np.broadcast_to(start, (b,)), n)
        grad = np.zeros(src_b.shape)
        rows = np.arange(b)[:, None]
        if src.ndim == 3:
            np.add.at(grad, (rows[:, :, None], idx[:, :, None],
                             np.arange(src.shape[2])[None, None, :]), adj)
        else:
            np.add.at(grad, (rows, idx), adj)
        return [_unalign(grad, src, rank(src)), None]


class LtOp(Op):
    name = "lt"
    fwd_doc = "a < threshold (scalar parameter) -> boolean"
    vjp_doc = "boolean: no gradient flows"
    structural = {1: "threshold"}
    structural_types = {"threshold": "param"}

    def infer(self, arg_info, extras):
        return (arg_info[0][0], True)

    def _cmp(self, a, t):
        return a < t

    def forward(self, args, extras):
        return np.where(self._cmp(args[0], extras["threshold"]), 1.0, 0.0)

    def vjp(self, args, out, adj, extras):
        return [None]


class GtOp(LtOp):
    name = "gt"
    fwd_doc = "a > threshold (scalar parameter) -> boolean"

    def _cmp(self, a, t):
        return a > t


class ReduceMinOp(Op):
    name = "reduce_min"
    fwd_doc = "min over a vector"
    vjp_doc = "whole adjoint to the first minimal element"

    def infer(self, arg_info, extras):
        if arg_info[0][0] != 1:
            raise ShapeError("argument must be a vector")
        return (0, False)

    def forward(self, args, extras):
        return args[0].min(axis=-1)

    def vjp(self, args, out, adj, extras):
        a = args[0]
        grad = np.zeros_like(a)
        idx = a.argmin(axis=-1)
        grad[np.arange(a.shape[0]), idx] = adj
        return [grad]


class ReduceMeanOp(Op):
    name = "reduce_mean"
    fwd_doc = "mean over a vector"
    vjp_doc = "adjoint / n to every element"

    def infer(self, arg_info, extras):
        if arg_info[0][0] != 1:
            raise ShapeError("argument must be a vector")
        return (0, False)

    def forward(self, args, extras):
        return args[0].mean(axis=-1)

    def vjp(self, args, out, adj, extras):
        a = args[0]
        return [np.broadcast_to((adj / a.shape[-1])[..., None], a.shape).copy()]


class ArgminIndexOp(Op):
    name = "argmin_index"
    fwd_doc = "index of the first minimal element, as a float"
    vjp_doc = "index output: no gradient flows"

    def infer(self, arg_info, extras):
        if arg_info[0][0] != 1:
            raise ShapeError("argument must be a vector")
        return (0, False)

    def forward(self, args, extras):
        return args[0].argmin(axis=-1).astype(np.float64)

    def vjp(self, args, out, adj, extras):
        return [None]


class EuclidNorm2Op(Op):
    name = "euclid_norm2"
    fwd_doc = "sqrt(a^2 + b^2) elementwise"
    vjp_doc = "da = adj a / r, db = adj b / r for r > 0; 0 at r = 0"

    def infer(self, arg_info, extras):
        return (_broadcast_rank([r for r, _ in arg_info], self.name), False)

    def forward(self, args, extras):
        a, b = args
        R = max(rank(a), rank(b))
        return np.hypot(_aligned(a, R), _aligned(b, R))

    def vjp(self, args, out, adj, extras):
        a, b = args
        R = rank(out)
        safe = np.where(out > 0.0, out, 1.0)
        scale = np.where(out > 0.0, adj / safe, 0.0)
        return [_unalign(scale * _aligned(a, R), a, R),
                _unalign(scale * _aligned(b, R), b, R)]


class LinCombineOp(Op):
    name = "lin_combine"
    fwd_doc = ("lin_combine(w1, t1, ..., wk, tk[, b]) = sum wi*ti + b; weights "
               "and bias are parameters; a vector weight against a vector term "
               "contracts to a scalar (dot product)")
    vjp_doc = ("dwi = adj*ti (contracted per the pairing); dti = adj*wi; "
               "db = adj")

    def param_positions(self, n_args):
        pairs, bias = divmod(n_args, 2)
        pos = [2 * i for i in range(pairs)]
        if bias:
            pos.append(n_args - 1)
        return tuple(pos)

    def infer(self, arg_info, extras):
        pairs, bias = divmod(len(arg_info), 2)
        if pairs == 0:
            raise ShapeError("needs at least one weight/term pair")
        out_rank = None
        for i in range(pairs):
            (rw, _), (rt, _) = arg_info[2 * i], arg_info[2 * i + 1]
            if rw > 1:
                raise ShapeError("weights must be scalars or vectors")
            if rw == 1 and rt != 1:
                raise ShapeError("vector weight needs a vector term")
            r = 0 if rw == 1 else rt
            out_rank = r if out_rank is None else _broadcast_rank((out_rank, r), self.name)
        if bias and arg_info[-1][0] != 0:
            raise ShapeError("bias must be a scalar")
        return (out_rank, False)

    def forward(self, args, extras):
        pairs, bias = divmod(len(args), 2)
        terms = []
        for i in range(pairs):
            w, t = args[2 * i], args[2 * i + 1]
            if rank(w) == 1:
                terms.append((w * t).sum(axis=-1))
            else:
                R = max(rank(w), rank(t))
                terms.append(_aligned(w, R) * _aligned(t, R))
        if bias:
            terms.append(args[-1])
        R = max(rank(t) for t in terms)
        out = _aligned(terms[0], R)
        for t in terms[1:]:
            out = out + _aligned(t, R)
        return out

    def vjp(self, args, out, adj, extras):
        pairs, bias = divmod(len(args), 2)
        R = rank(out)
        grads = []
        for i in range(pairs):
            w, t = args[2 * i], args[2 * i + 1]
            if rank(w) == 1:
                g = adj[..., None]
                grads.append(_unalign(g * t, w, 1))
                grads.append(_unalign(g * w, t, 1))
            else:
                grads.append(_unalign(adj * _aligned(t, R), w, R))
                grads.append(_unalign(adj * _aligned(w, R), t, R))
        if bias:
            grads.append(_unalign(adj, args[-1], R))
        return grads


OPS = {}
for _cls in (AddOp, MulOp, NegOp, AbsOp, SqrtOp, SquareOp, TanhOp, ClipOp,
             Min2Op, Max2Op, WhereOp, NorOp, NotOp, AnyOp, StackOp, ColOp,
             WindowOp, LtOp, GtOp, ReduceMinOp, ReduceMeanOp, ArgminIndexOp,
             EuclidNorm2Op, LinCombineOp):
    _op = _cls()
    OPS[_op.name] = _op


def kernel_vjp_table():
    """Documented map op name -> (forward rule, vjp rule)."""
    return {name: (op.fwd_doc, op.vjp_doc) for name, op in sorted(OPS.items())}
