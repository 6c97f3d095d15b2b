"""Closed-loop evaluation: trained graphs driving the simulators.

A Policy packages a graph with its trained values and the environment's
normalizer, exposing the per-step action rule the rollout protocol needs:
argmax over logits for the lander's discrete engines, clipped continuous
triples for the car.
"""

from dataclasses import dataclass

import numpy as np

from .datasets import _graph_kind, _mlp_features
from .episodes import Episode, run_lander_episode, run_racing_episode
from .graph import evaluate
from .normalize import Normalizer, apply_normalizer, fit_normalizer
from .training import load_checkpoint

__all__ = ["Policy", "RolloutFault", "build_policy", "policy_from_checkpoint",
           "rollout"]

_KIND_ENV = {"lander_kim": "lander", "racing_kim": "racing"}


class RolloutFault(RuntimeError):
    """Policy produced a non-finite action; the rollout cannot continue."""


@dataclass(frozen=True)
class Policy:
    graph: object
    values: dict
    env: str
    kind: str            # lander_kim | racing_kim | mlp
    normalizer: Normalizer
    source: str = "model"

    def act(self, obs):
        """Action for one observation; discrete index for the lander."""
        if self.env == "lander":
            return int(np.argmax(self._logits_single(obs)))
        tiles, indicators = apply_normalizer(self.normalizer, obs)
        if self.kind == "mlp":
            feats = _mlp_features("racing", (tiles, indicators))
            raw = evaluate(self.graph, self.values, {"features": feats})
        else:
            raw = evaluate(self.graph, self.values,
                           {"tiles": tiles, "indicators": indicators})
        a = np.asarray(raw["action"], dtype=np.float64).ravel()
        if not np.all(np.isfinite(a)):
            raise RolloutFault(f"non-finite action from {self.source}: {a}")
        return np.array([np.clip(a[0], -1.0, 1.0),
                         np.clip(a[1], 0.0, 1.0),
                         np.clip(a[2], 0.0, 1.0)])

    def act_batch(self, obs_block):
        """Discrete actions for a (n, 8) block of lander observations."""
        if self.env != "lander":
            raise ValueError("batched stepping is a lander-only fast path")
        block = np.asarray(apply_normalizer(self.normalizer, obs_block),
                           dtype=np.float64)
        if self.kind == "mlp":
            logits = evaluate(self.graph, self.values,
                              {"features": block})["action"]
        else:
            inputs = {spec.name: block[:, i]
                      for i, spec in enumerate(self.graph.inputs)}
            logits = evaluate(self.graph, self.values, inputs)["action"]
        logits = np.asarray(logits, dtype=np.float64)
        if not np.all(np.isfinite(logits)):
            raise RolloutFault(f"non-finite logits from {self.source}")
        return np.argmax(logits, axis=1)

    def _logits_single(self, obs):
        obs = apply_normalizer(self.normalizer, obs)
        block = np.asarray(obs, dtype=np.float64)[None, :]
        if self.kind == "mlp":
            out = evaluate(self.graph, self.values, {"features": block})
        else:
            inputs = {spec.name: block[:, i]
                      for i, spec in enumerate(self.graph.inputs)}
            out = evaluate(self.graph, self.values, inputs)
        logits = np.asarray(out["action"], dtype=np.float64).ravel()
        if not np.all(np.isfinite(logits)):
            raise RolloutFault(f"non-finite logits from {self.source}: {logits}")
        return logits


def build_policy(graph, values, env: str, source: str = "model") -> Policy:
    kind = _graph_kind(graph)
    declared = _KIND_ENV.get(kind)
    if declared is not None and declared != env:
        raise ValueError(f"{source} is a {declared} model, not {env}")
    return Policy(graph, dict(values), env, kind, fit_normalizer(env), source)


def policy_from_checkpoint(path) -> Policy:
    graph, values, meta = load_checkpoint(path)
    env = meta.get("env")
    if env is None:
        raise ValueError(f"checkpoint {path} lacks an env tag")
    return build_policy(graph, values, env, source=str(path))


def rollout(env: str, policy, seed: int, noise_level: float = 0.0,
            noise_rng=None) -> Episode:
    """One evaluation episode under the paper's rollout protocol.

    `policy` is a Policy or a bare obs -> action callable. Action noise
    is defined for the continuous car only.
    """
    act = policy.act if isinstance(policy, Policy) else policy
    if env == "lander":
        if noise_level:
            raise ValueError("action noise applies to continuous actions only")
        return run_lander_episode(seed, policy=act)
    if env == "racing":
        return run_racing_episode(seed, policy=act, noise_level=noise_level,
                                  noise_rng=noise_rng)
    raise ValueError(f"unknown env {env!r}")
