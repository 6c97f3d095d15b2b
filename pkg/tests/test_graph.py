"""Structural model: validation, flattening, evaluation."""

import numpy as np
import pytest

from kim import graph
from kim.graph import (Call, GraphError, InputSpec, IntLit, NodeSpec,
                       NumericFault, Parameter, PolicyGraph, Ref)


def lander_inputs(x, y, vx, vy, theta, omega, lc, rc):
    vals = {"x": x, "y": y, "vx": vx, "vy": vy, "theta": theta,
            "omega": omega, "left_contact": lc, "right_contact": rc}
    return {k: np.asarray([v]) for k, v in vals.items()}


def small_graph(**overrides):
    """y = w * x, the minimal trainable model."""
    spec = dict(
        name="tiny",
        inputs=(InputSpec("x"),),
        parameters=(Parameter("w", "gradient", init=(0.5,)),),
        nodes=(NodeSpec("y", Call("mul", (Ref("w"), Ref("x"))), "output"),),
    )
    spec.update(overrides)
    return PolicyGraph(**spec)


def test_census_lander(lander_graph):
    assert graph.parameter_census(lander_graph) == (13, 2, 0)


def test_census_racing(racing_graph):
    assert graph.parameter_census(racing_graph) == (12, 9, 0)


def test_census_counts_vector_elements():
    g = small_graph(parameters=(
        Parameter("w", "gradient", (3,), init=(1.0, 2.0, 3.0)),
        Parameter("c", "nongradient", init=(0.5,), frozen=True),
    ))
    assert graph.parameter_census(g) == (3, 1, 1)


def test_lander_probe_zero_input(lander_graph):
    theta = graph.init_parameters(lander_graph)
    out = graph.evaluate(lander_graph, theta,
                         lander_inputs(0, 0, 0, 0, 0, 0, False, False))
    np.testing.assert_allclose(out["action"][0], [0.1, 0, 0, 0], atol=1e-9)


def test_lander_probe_grounded_descent(lander_graph):
    # both legs down: orientation engines masked, main engine counteracts vy
    theta = graph.init_parameters(lander_graph)
    out = graph.evaluate(lander_graph, theta,
                         lander_inputs(0, 0, 0, -1, 0, 0, True, True))
    np.testing.assert_allclose(out["action"][0], [0.1, 0, 0.1, 0], atol=1e-9)


def test_lander_probe_offset_hover(lander_graph):
    theta = graph.init_parameters(lander_graph)
    out = graph.evaluate(lander_graph, theta,
                         lander_inputs(0.5, 1, 0, 0, 0, 0, False, False))
    np.testing.assert_allclose(out["action"][0],
                               [0.1, 0.005, -0.05, -0.005], atol=1e-9)


def test_evaluate_batches_and_is_deterministic(lander_graph):
    theta = graph.init_parameters(lander_graph)
    rng = np.random.default_rng(7)
    inputs = {n: rng.normal(size=16) for n in
              ("x", "y", "vx", "vy", "theta", "omega")}
    inputs["left_contact"] = rng.random(16) < 0.5
    inputs["right_contact"] = rng.random(16) < 0.5
    a = graph.evaluate(lander_graph, theta, inputs)["action"]
    b = graph.evaluate(lander_graph, theta, inputs)["action"]
    assert a.shape == (16, 4)
    assert np.array_equal(a, b)


def test_topological_order_is_declaration_order(lander_graph):
    order = graph.topological_order(lander_graph)
    assert order == [n.name for n in lander_graph.nodes]
    assert order[-1] == "action"


def test_use_before_def_is_a_cycle_diagnostic():
    g = small_graph(nodes=(
        NodeSpec("a", Call("neg", (Ref("b"),)), "latent"),
        NodeSpec("b", Call("neg", (Ref("x"),)), "latent"),
        NodeSpec("y", Call("mul", (Ref("w"), Ref("a"))), "output"),
    ))
    cats = {d.category for d in graph.validate_graph(g)}
    assert "cycle" in cats
    with pytest.raises(GraphError):
        graph.topological_order(g)


def test_self_reference_is_a_cycle():
    g = small_graph(nodes=(
        NodeSpec("y", Call("mul", (Ref("w"), Ref("y"))), "output"),))
    assert any(d.category == "cycle" for d in graph.validate_graph(g))


def test_unknown_name_diagnostic():
    g = small_graph(nodes=(
        NodeSpec("y", Call("mul", (Ref("w"), Ref("nope"))), "output"),))
    diags = graph.validate_graph(g)
    assert any(d.category == "unresolved-name" and "nope" in d.message
               for d in diags)


def test_duplicate_declaration_diagnostic():
    g = small_graph(parameters=(Parameter("x", "gradient", init=(1.0,)),))
    assert any("duplicate" in d.message for d in graph.validate_graph(g))


def test_outputs_are_terminal():
    g = small_graph(nodes=(
        NodeSpec("y", Call("mul", (Ref("w"), Ref("x"))), "output"),
        NodeSpec("z", Call("neg", (Ref("y"),)), "output"),
    ))
    diags = graph.validate_graph(g)
    assert any("terminal" in d.message for d in diags)


def test_grid_requires_nongradient_scalar():
    g = small_graph(parameters=(
        Parameter("w", "gradient", init=(0.5,), grid=(0.4, 0.5)),))
    assert any(d.category == "bad-grid" for d in graph.validate_graph(g))
    g2 = small_graph(parameters=(
        Parameter("w", "nongradient", (2,), init=(0.5, 0.5), grid=(0.4, 0.5)),))
    assert any(d.category == "bad-grid" for d in graph.validate_graph(g2))


def test_grid_must_contain_init():
    g = small_graph(parameters=(
        Parameter("w", "nongradient", init=(0.7,), grid=(0.4, 0.5)),))
    assert any(d.category == "bad-grid" for d in graph.validate_graph(g))


def test_link_requires_grid_and_equal_lengths():
    g = small_graph(parameters=(
        Parameter("w", "nongradient", init=(0.5,), link="grp"),))
    assert any("link" in d.message for d in graph.validate_graph(g))
    g2 = small_graph(parameters=(
        Parameter("w", "nongradient", init=(0.5,), grid=(0.4, 0.5), link="grp"),
        Parameter("v", "nongradient", init=(1.0,), grid=(1.0, 2.0, 3.0), link="grp"),
    ), nodes=(NodeSpec("y", Call("mul", (Ref("w"), Ref("x"))), "output"),))
    assert any("mixes grid lengths" in d.message for d in graph.validate_graph(g2))


def test_init_length_must_match_shape():
    g = small_graph(parameters=(
        Parameter("w", "gradient", (3,), init=(1.0, 2.0)),))
    assert any(d.category == "shape-mismatch" for d in graph.validate_graph(g))


def test_shape_mismatch_diagnostic():
    # stack takes per-sample scalars, not vectors
    g = small_graph(
        inputs=(InputSpec("x", "float", (3,)),),
        nodes=(NodeSpec("y", Call("stack", (Ref("x"), Ref("w"))), "output"),))
    assert any(d.category == "shape-mismatch" for d in graph.validate_graph(g))


def test_clip_bounds_must_name_scalar_parameters():
    g = small_graph(
        parameters=(Parameter("w", "gradient", init=(0.5,)),
                    Parameter("lo", "nongradient", (2,), init=(0.0, 0.0))),
        nodes=(NodeSpec("y", Call("clip", (Ref("x"), Ref("lo"), Ref("w"))),
                        "output"),))
    diags = graph.validate_graph(g)
    assert any("scalar" in d.message for d in diags)


def test_col_index_must_be_integer_literal():
    g = small_graph(
        inputs=(InputSpec("x", "float", (3,)),),
        nodes=(NodeSpec("y", Call("col", (Ref("x"), Ref("w"))), "output"),))
    diags = graph.validate_graph(g)
    assert any(d.category == "literal-in-expr" for d in diags)


def test_sign_defaults():
    p = Parameter("a", "gradient", correlation="positive")
    n = Parameter("b", "gradient", correlation="negative")
    z = Parameter("c", "gradient")
    assert (p.init_value(), n.init_value(), z.init_value()) == (0.1, -0.1, 0.0)


def test_bind_inputs_checks():
    g = small_graph()
    with pytest.raises(GraphError, match="missing input"):
        graph.bind_inputs(g, {})
    gv = small_graph(inputs=(InputSpec("x", "float", (3,)),),
                     nodes=(NodeSpec("y", Call("reduce_mean", (Ref("x"),)),
                                     "output"),))
    with pytest.raises(GraphError, match="extent"):
        graph.bind_inputs(gv, {"x": np.zeros((2, 4))})
    # a missing batch axis is added
    bound = graph.bind_inputs(gv, {"x": np.zeros(3)})
    assert bound["x"].shape == (1, 3)


def test_bind_inputs_rejects_ragged_batch():
    g = small_graph(inputs=(InputSpec("x"), InputSpec("z")),
                    nodes=(NodeSpec("y", Call("add", (Ref("x"), Ref("z"))),
                                    "output"),))
    with pytest.raises(GraphError, match="batch"):
        graph.bind_inputs(g, {"x": np.zeros(2), "z": np.zeros(3)})


def test_numeric_fault_names_node():
    g = small_graph(nodes=(
        NodeSpec("r", Call("sqrt", (Ref("x"),)), "latent"),
        NodeSpec("y", Call("mul", (Ref("w"), Ref("r"))), "output"),
    ))
    with pytest.raises(NumericFault) as exc:
        graph.evaluate(g, {"w": 0.5}, {"x": np.array([-1.0])})
    assert exc.value.node == "r"


def test_program_flattens_nested_calls(lander_graph):
    steps = lander_graph.program()
    names = [s.out for s in steps]
    # nested sub-expressions get anonymous slots; each node name appears once
    assert names.count("action") == 1
    assert any(n.startswith("~") for n in names)
    assert len(set(names)) == len(names)


def test_window_length_accepts_literal_and_parameter():
    base = dict(
        name="w",
        inputs=(InputSpec("v", "float", (4,)), InputSpec("s")),
        parameters=(Parameter("n", "nongradient", init=(2.0,)),),
    )
    for length in (IntLit(2), Ref("n")):
        g = PolicyGraph(nodes=(
            NodeSpec("y", Call("window", (Ref("v"), Ref("s"), length)),
                     "output"),), **base)
        assert graph.validate_graph(g) == []
        out = graph.evaluate(g, {"n": 2.0},
                             {"v": np.arange(4.0)[None], "s": np.array([1.0])})
        np.testing.assert_array_equal(out["y"], [[1.0, 2.0]])
