"""Demonstration transitions as trainable batches.

split_dataset carves episodes into train/validation once, up front; the
binders then turn a Dataset into the batched input map a given graph
expects. Racing tracks differ in tile count, so batches that feed the
variable-length tile input are grouped by track length; the gradient
aggregation in the trainer reweights groups so the result is exactly the
full-batch loss.
"""

from dataclasses import dataclass

import numpy as np

from . import rng as kimrng
from .graph import GraphError
from .normalize import apply_normalizer

__all__ = ["Dataset", "split_dataset", "dataset_from_episodes",
           "bind_batches", "MLP_TILE_WINDOW"]

MLP_TILE_WINDOW = 30     # nearest tiles flattened for fixed-arity baselines


@dataclass(frozen=True)
class Dataset:
    env: str
    split: str
    samples: tuple       # (episode_seed, step_index, obs, act) in source order

    def __len__(self):
        return len(self.samples)

    def actions(self):
        return [s[3] for s in self.samples]


def _flatten(episodes):
    out = []
    for ep in episodes:
        for i, (obs, act) in enumerate(ep.transitions):
            out.append((ep.seed, i, obs, act))
    return out


def dataset_from_episodes(episodes, split="all") -> Dataset:
    if not episodes:
        raise ValueError("no episodes")
    env = episodes[0].env
    if any(ep.env != env for ep in episodes):
        raise ValueError("episodes mix environments")
    return Dataset(env=env, split=split, samples=tuple(_flatten(episodes)))


def split_dataset(episodes, mode: str, fraction: float, seed: int):
    """(train, validation) Datasets, disjoint, order-preserving.

    by_step holds out individual transitions; by_episode holds out whole
    episodes. Same seed, same membership.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    episodes = list(episodes)
    env = dataset_from_episodes(episodes).env
    gen = kimrng.substream(seed, "split")

    if mode == "by_step":
        samples = _flatten(episodes)
        n_val = int(round(fraction * len(samples)))
        chosen = set(gen.permutation(len(samples))[:n_val].tolist())
        val = [s for i, s in enumerate(samples) if i in chosen]
        train = [s for i, s in enumerate(samples) if i not in chosen]
    elif mode == "by_episode":
        n_val = int(round(fraction * len(episodes)))
        chosen = set(gen.permutation(len(episodes))[:n_val].tolist())
        val = _flatten(ep for i, ep in enumerate(episodes) if i in chosen)
        train = _flatten(ep for i, ep in enumerate(episodes) if i not in chosen)
    else:
        raise ValueError(f"unknown split mode {mode!r}")

    if not train or not val:
        raise ValueError(
            f"split {mode} fraction {fraction} leaves an empty side "
            f"({len(train)} train / {len(val)} validation)")
    return (Dataset(env, "train", tuple(train)),
            Dataset(env, "validation", tuple(val)))


_LANDER_INPUTS = ("x", "y", "vx", "vy", "theta", "omega",
                  "left_contact", "right_contact")


def _graph_kind(graph):
    names = tuple(graph.input_names())
    if names == _LANDER_INPUTS:
        return "lander_kim"
    if set(names) == {"tiles", "indicators"}:
        return "racing_kim"
    if names == ("features",):
        return "mlp"
    raise GraphError(f"no binder for inputs {names}")


def _mlp_features(env, obs):
    if env == "lander":
        return np.asarray(obs, dtype=np.float64)
    tiles, indicators = obs
    if len(tiles) < MLP_TILE_WINDOW:
        raise GraphError(f"need at least {MLP_TILE_WINDOW} tiles, "
                         f"got {len(tiles)}")
    return np.concatenate([indicators, tiles[:MLP_TILE_WINDOW].ravel()])


def _targets(env, acts):
    if env == "lander":
        return np.asarray(acts, dtype=np.int64)
    return np.asarray(acts, dtype=np.float64)


def bind_batches(graph, dataset: Dataset, normalizer):
    """[(input map, targets, n_samples)] covering the dataset exactly once.

    Most graphs get a single full batch; the variable-length tile input
    yields one batch per distinct track length, ordered by first
    appearance.
    """
    kind = _graph_kind(graph)
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    obs = [apply_normalizer(normalizer, s[2]) for s in dataset.samples]
    acts = [s[3] for s in dataset.samples]

    if kind == "lander_kim":
        if dataset.env != "lander":
            raise GraphError("lander model bound to non-lander data")
        block = np.asarray(obs, dtype=np.float64)
        inputs = {name: block[:, i] for i, name in enumerate(_LANDER_INPUTS)}
        return [(inputs, _targets(dataset.env, acts), len(acts))]

    if kind == "racing_kim":
        if dataset.env != "racing":
            raise GraphError("racing model bound to non-racing data")
        groups = {}
        for o, a in zip(obs, acts):
            groups.setdefault(len(o[0]), []).append((o, a))
        out = []
        for length, rows in groups.items():
            tiles = np.stack([o[0] for o, _ in rows])
            indicators = np.stack([o[1] for o, _ in rows])
            targets = _targets(dataset.env, [a for _, a in rows])
            out.append(({"tiles": tiles, "indicators": indicators},
                        targets, len(rows)))
        return out

    feats = np.stack([_mlp_features(dataset.env, o) for o in obs])
    want = graph.inputs[0].shape[0]
    if feats.shape[1] != want:
        raise GraphError(f"model expects {want} features, data has "
                         f"{feats.shape[1]}")
    return [({"features": feats}, _targets(dataset.env, acts), len(acts))]
