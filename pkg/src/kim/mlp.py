"""Dense tanh networks expressed as policy graphs.

A fully connected net is just a particular graph shape: one vector input,
per-unit dot products, tanh squashing, and a stacked output vector. Building
it through the same declaration types keeps the trainer and the serializer
agnostic about whether a model was hand-written or generated.
"""

from __future__ import annotations

from . import rng
from .graph import Call, InputSpec, IntLit, NodeSpec, Parameter, PolicyGraph, Ref

__all__ = ["build_mlp"]


def _lin(weights: str, source: str, bias: str) -> Call:
    return Call("lin_combine", (Ref(weights), Ref(source), Ref(bias)))


def build_mlp(
    input_dim: int,
    hidden: list[int] | tuple[int, ...],
    output_dim: int,
    seed: int = 0,
) -> PolicyGraph:
    """Construct a tanh MLP as a policy graph.

    Weights and biases draw from U(-1/sqrt(fan_in), 1/sqrt(fan_in)) on a
    dedicated substream of ``seed``, unit by unit, weight vector before bias.
    The output layer is linear. All parameters are gradient kind.
    """
    if input_dim < 1 or output_dim < 1 or any(h < 1 for h in hidden):
        raise ValueError("layer widths must be positive")
    gen = rng.substream(seed, "mlp-init")

    inputs = [InputSpec("features", "float", (input_dim,))]
    params: list[Parameter] = []
    nodes: list[NodeSpec] = []

    def fresh_param(name: str, fan_in: int, shape: tuple[int, ...]) -> None:
        bound = 1.0 / fan_in**0.5
        vals = tuple(float(v) for v in gen.uniform(-bound, bound, size=shape or (1,)))
        if not shape:
            vals = (vals[0],)
        params.append(Parameter(name, "gradient", shape, init=vals))

    source = "features"
    fan_in = input_dim
    widths = list(hidden)
    for layer, width in enumerate(widths, start=1):
        unit_names = []
        for j in range(width):
            w, b = f"w{layer}_{j}", f"b{layer}_{j}"
            fresh_param(w, fan_in, (fan_in,))
            fresh_param(b, fan_in, ())
            unit = f"h{layer}_{j}"
            nodes.append(NodeSpec(unit, Call("tanh", (_lin(w, source, b),)), "latent"))
            unit_names.append(unit)
        act = f"act{layer}"
        nodes.append(NodeSpec(act, Call("stack", tuple(Ref(u) for u in unit_names)), "latent"))
        source = act
        fan_in = width

    out_units = []
    for j in range(output_dim):
        w, b = f"wout_{j}", f"bout_{j}"
        fresh_param(w, fan_in, (fan_in,))
        fresh_param(b, fan_in, ())
        unit = f"out_{j}"
        nodes.append(NodeSpec(unit, _lin(w, source, b), "latent"))
        out_units.append(unit)
    nodes.append(NodeSpec("action", Call("stack", tuple(Ref(u) for u in out_units)), "output"))

    name = "mlp_" + "_".join(str(n) for n in [input_dim, *widths, output_dim])
    return PolicyGraph(name, tuple(inputs), tuple(params), tuple(nodes))
