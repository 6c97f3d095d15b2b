"""Behavior cloning: full-batch Adam on a policy graph.

Every training step evaluates the whole training set (grouped batches
summed into one exact full-batch gradient), records train and validation
loss at the current parameters, then applies one Adam update. The
returned parameters are the ones with the best validation loss seen, not
the final ones. Non-gradient parameters never move during a run; they
are chosen by exhaustive grid search, one full training run per combo.
"""

from __future__ import annotations

import ast
import itertools
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsl
from . import rng as kimrng
from .adam import AdamState, adam_step
from .autodiff import Tape
from .datasets import bind_batches, split_dataset
from .fixtures import FIXTURE_NAMES, load_fixture
from .graph import (NON_GRADIENT, GraphError, NumericFault, evaluate,
                    init_parameters, parameter_census)
from .losses import balanced_class_weights, compute_loss
from .mlp import build_mlp
from .normalize import fit_normalizer

__all__ = [
    "TrainConfig", "TrainedModel", "train_gradient", "grid_search_train",
    "train_pipeline", "resolve_model", "default_train_config", "build_mlp",
    "save_checkpoint", "load_checkpoint", "checkpoint_text",
]


@dataclass(frozen=True)
class TrainConfig:
    steps: int
    learning_rate: float
    loss: str                      # mse | cross_entropy_balanced
    split_mode: str = "by_step"
    split_fraction: float = 0.2
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.steps <= 0:
            raise ValueError("steps must be positive")
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must be in (0, 1)")


# optimization budgets per model family; the unstructured baselines need
# far more steps at a lower rate to converge
_DEFAULTS = {
    ("lander", "kim"): (4000, 0.03),
    ("lander", "mlp"): (10000, 0.001),
    ("racing", "kim"): (200, 0.03),
    ("racing", "mlp"): (250, 0.003),
}


def default_train_config(env: str, family: str, seed: int = 0) -> TrainConfig:
    steps, lr = _DEFAULTS[(env, family)]
    loss = "cross_entropy_balanced" if env == "lander" else "mse"
    split = "by_step" if env == "lander" else "by_episode"
    return TrainConfig(steps=steps, learning_rate=lr, loss=loss,
                       split_mode=split, seed=seed)


@dataclass
class TrainedModel:
    graph: object
    values: dict                 # checkpoint with the best validation loss
    combo: dict = field(default_factory=dict)
    train_curve: tuple = ()
    val_curve: tuple | None = None
    best_step: int = 0
    best_loss: float = np.inf    # min of the selection curve


def _output_name(graph):
    outs = graph.outputs()
    if len(outs) != 1:
        raise GraphError("training expects exactly one output node")
    return outs[0].name


def _snapshot(values):
    return {k: (v.copy() if isinstance(v, np.ndarray) else v)
            for k, v in values.items()}


def _batch_loss(graph, values, groups, kind, class_weights, out_name,
                with_grads):
    """Exact full-batch (loss, grads): groups reweighted by sample count."""
    total_n = sum(n for _, _, n in groups)
    loss_total = 0.0
    grads_total = {}
    for inputs, targets, n in groups:
        scale = n / total_n
        if with_grads:
            tape = Tape(graph, values, inputs)
            pred = tape.outputs()[out_name]
        else:
            pred = evaluate(graph, values, inputs)[out_name]
        loss, dpred = compute_loss(kind, pred, targets, class_weights)
        loss_total += scale * loss
        if with_grads:
            for name, g in tape.backward({out_name: dpred * scale}).items():
                prev = grads_total.get(name)
                grads_total[name] = g if prev is None else prev + g
    return loss_total, grads_total


def train_gradient(graph, values0, train_groups, val_groups,
                   cfg: TrainConfig, class_weights=None) -> TrainedModel:
    """Full-batch Adam for cfg.steps; keeps the best-validation checkpoint.

    Curves hold the loss at the parameters each step started from, so
    entry 0 is the loss of the initialization. Without validation groups
    selection falls back to the train loss.
    """
    if not train_groups:
        raise ValueError("empty training data")
    out_name = _output_name(graph)
    values = _snapshot(values0)
    opt = AdamState(cfg.beta1, cfg.beta2, cfg.eps)
    train_curve, val_curve = [], []
    best = TrainedModel(graph, _snapshot(values))
    for step in range(cfg.steps):
        try:
            train_loss, grads = _batch_loss(
                graph, values, train_groups, cfg.loss, class_weights,
                out_name, with_grads=True)
            if val_groups:
                val_loss, _ = _batch_loss(
                    graph, values, val_groups, cfg.loss, class_weights,
                    out_name, with_grads=False)
            else:
                val_loss = train_loss
            train_curve.append(train_loss)
            val_curve.append(val_loss)
            if val_loss < best.best_loss:
                best.values = _snapshot(values)
                best.best_step = step
                best.best_loss = val_loss
            opt, values = adam_step(opt, values, grads, cfg.learning_rate)
        except (NumericFault, FloatingPointError) as e:
            raise NumericFault(
                getattr(e, "node", "optimizer"),
                f"training aborted at step {step}: {e}") from e
    best.train_curve = tuple(train_curve)
    best.val_curve = tuple(val_curve) if val_groups else None
    return best


def _grid_axes(graph):
    """Sweep axes: one per unlinked grid, one per link group (zipped)."""
    order, members = [], {}
    for p in graph.parameters:
        if p.kind != NON_GRADIENT:
            continue
        if p.grid is None:
            raise GraphError(
                f"non-gradient parameter '{p.name}' declares no grid")
        key = ("link", p.link) if p.link else ("param", p.name)
        if key not in members:
            members[key] = []
            order.append(key)
        members[key].append(p)
    axes = []
    for key in order:
        ps = members[key]
        if len({len(p.grid) for p in ps}) != 1:
            raise GraphError(
                "linked grids differ in length: "
                + ", ".join(p.name for p in ps))
        names = tuple(p.name for p in ps)
        axes.append([dict(zip(names, vals))
                     for vals in zip(*(p.grid for p in ps))])
    return axes


def grid_search_train(graph, train_groups, val_groups, cfg: TrainConfig,
                      class_weights=None) -> TrainedModel:
    """Exhaustive product over non-gradient grids; first minimum wins.

    Every combo restarts gradient parameters from their declared inits,
    so runs are independent and the search order only breaks ties.
    """
    combos = []
    for parts in itertools.product(*_grid_axes(graph)):
        combo = {}
        for part in parts:
            combo.update(part)
        combos.append(combo)
    if not combos:
        combos = [{}]

    best, log = None, []
    for combo in combos:
        values = init_parameters(graph)
        values.update(combo)
        model = train_gradient(graph, values, train_groups, val_groups,
                               cfg, class_weights)
        log.append((combo, model.best_loss))
        if best is None or model.best_loss < best.best_loss:
            best = model
            best.combo = dict(combo)
    best.search_log = tuple(log)
    return best


def resolve_model(source: str, seed: int = 0):
    """Graph from a fixture name, an `mlp:i-h-...-o` spec, or a .kim file."""
    if source in FIXTURE_NAMES:
        return load_fixture(source)
    if source.startswith("mlp:"):
        try:
            dims = [int(d) for d in source[4:].split("-")]
        except ValueError:
            raise GraphError(f"bad mlp spec {source!r}; want mlp:in-h-out")
        if len(dims) < 2:
            raise GraphError(f"mlp spec {source!r} needs input and output")
        return build_mlp(dims[0], dims[1:-1], dims[-1],
                         seed=kimrng.subseed(seed, "init"))
    path = Path(source)
    if not path.exists():
        raise FileNotFoundError(f"no model source '{source}'")
    return dsl.parse(path.read_text(encoding="utf-8"))


def train_pipeline(source: str, episodes, cfg: TrainConfig | None = None,
                   grid: bool = True):
    """Demos in, TrainedModel + JSON-ready report out.

    Orchestration only: split, normalize, bind, grid search. With
    grid=False the declared non-gradient inits are used as-is (one
    training run instead of the whole product; the racing grid is 36
    combos, which is paper-scale, not desk-scale). The report repeats
    everything needed to reproduce the run except wall time.
    """
    started = time.perf_counter()
    episodes = list(episodes)
    if not episodes:
        raise ValueError("no demonstration episodes")
    env = episodes[0].env
    seed = cfg.seed if cfg is not None else 0
    graph = resolve_model(source, seed=seed)
    family = "kim" if graph.input_names() != ["features"] else "mlp"
    if cfg is None:
        cfg = default_train_config(env, family)

    train_ds, val_ds = split_dataset(episodes, cfg.split_mode,
                                     cfg.split_fraction, cfg.seed)
    normalizer = fit_normalizer(env)
    train_groups = bind_batches(graph, train_ds, normalizer)
    val_groups = bind_batches(graph, val_ds, normalizer)
    class_weights = None
    if cfg.loss == "cross_entropy_balanced":
        n_classes = len(graph.outputs()[0].expr.args)
        class_weights = balanced_class_weights(train_ds.actions(), n_classes)

    if grid:
        model = grid_search_train(graph, train_groups, val_groups, cfg,
                                  class_weights)
    else:
        model = train_gradient(graph, init_parameters(graph), train_groups,
                               val_groups, cfg, class_weights)
    report = {
        "model": source,
        "env": env,
        "family": family,
        "seed": cfg.seed,
        "config": {"steps": cfg.steps, "learning_rate": cfg.learning_rate,
                   "loss": cfg.loss, "split_mode": cfg.split_mode,
                   "split_fraction": cfg.split_fraction},
        "census": list(parameter_census(graph)),
        "n_train": len(train_ds),
        "n_validation": len(val_ds),
        "combo": model.combo,
        "best_step": model.best_step,
        "best_validation_loss": model.best_loss,
        "final_train_loss": model.train_curve[-1],
        "search": [{"combo": c, "loss": l}
                   for c, l in getattr(model, "search_log", ())],
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    return model, report


def checkpoint_text(graph, values, meta: dict) -> str:
    """Canonical DSL plus the parameter values and a metadata trailer.

    The head parses on its own, so a checkpoint is also a valid model
    file; `@values` pins the trained numbers at full precision.
    """
    lines = [dsl.serialize(graph), "@values"]
    for p in graph.parameters:
        v = values[p.name]
        if p.shape:
            body = "(" + ", ".join(repr(float(x)) for x in np.asarray(v)) + ")"
        else:
            body = repr(float(v))
        lines.append(f"{p.name} = {body}")
    lines.append("@meta")
    lines.append(json.dumps(meta, sort_keys=True))
    return "\n".join(lines) + "\n"


def save_checkpoint(graph, values, meta, path):
    Path(path).write_text(checkpoint_text(graph, values, meta),
                          encoding="utf-8")


def load_checkpoint(path):
    """(graph, values, meta) back from checkpoint_text output."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    try:
        v_at = lines.index("@values")
        m_at = lines.index("@meta")
    except ValueError:
        raise GraphError(f"not a checkpoint file: {path}")
    graph = dsl.parse("\n".join(lines[:v_at]))
    values = init_parameters(graph)
    for line in lines[v_at + 1:m_at]:
        if not line.strip():
            continue
        name, _, body = line.partition(" = ")
        if name not in values:
            raise GraphError(f"checkpoint value for unknown parameter "
                             f"'{name}'")
        parsed = ast.literal_eval(body)
        values[name] = (np.asarray(parsed, dtype=np.float64)
                        if isinstance(parsed, tuple) else float(parsed))
    meta = json.loads("\n".join(lines[m_at + 1:]) or "{}")
    return graph, values, meta
