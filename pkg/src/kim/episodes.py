"""Recorded rollouts: run a policy, keep (observation, action) pairs.

An Episode is the unit the rest of the toolkit trades in: demos for
cloning, evaluation rollouts for scoring, JSONL files on disk. Racing
episodes also carry the first-visit step of every tile so scores can be
recomputed without re-simulating.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import lander as L
from . import racing as R
from . import rng as kimrng
from .track import Track, racing_make_track

__all__ = [
    "Outcome", "Episode", "racing_score",
    "run_lander_episode", "run_racing_episode", "collect_demos",
    "save_episodes", "load_episodes", "LAYOUT_VERSION",
]

LAYOUT_VERSION = 1
RACING_MAX_STEPS = 3000
SCORE_HORIZON = 1000


@dataclass(frozen=True)
class Outcome:
    """Episode verdict; lander fills `success`, racing fills the scores."""
    steps: int
    success: bool | None = None
    reward: float | None = None
    coverage: float | None = None
    max_coverage: float | None = None


@dataclass(frozen=True)
class Episode:
    env: str
    seed: int
    transitions: tuple       # ((obs, action), ...) in step order
    outcome: Outcome
    visit_steps: np.ndarray | None = None   # racing: first-visit step per tile


def racing_score(episode: Episode) -> Outcome:
    """Coverage-based score of a racing episode.

    N counts tiles first visited while the step counter was at most 1000;
    T is the step at which the last tile fell (when that happened inside
    the horizon), else the full horizon. The reward identity
    reward = 1000*N - 0.1*T holds exactly, with no rounding.
    """
    if episode.visit_steps is None:
        raise ValueError("not a racing episode: no per-tile visit record")
    vs = episode.visit_steps
    in_horizon = (vs >= 0) & (vs <= SCORE_HORIZON)
    n = float(np.mean(in_horizon))
    t = int(vs.max()) if bool(in_horizon.all()) else SCORE_HORIZON
    return Outcome(
        steps=t,
        reward=1000.0 * n - 0.1 * t,
        coverage=n,
        max_coverage=float(np.mean(vs >= 0)),
    )


def run_lander_episode(seed: int, policy=None) -> Episode:
    """Roll one lander episode; policy defaults to the tuned expert."""
    if policy is None:
        policy = L.lander_expert
    s = L.lander_reset(seed)
    transitions = []
    while s.terminal == "none":
        obs = L.lander_observe(s)
        act = int(policy(obs))
        transitions.append((obs, act))
        s = L.lander_step(s, act)
    outcome = Outcome(steps=s.step_count, success=s.terminal == "landed")
    return Episode(env="lander", seed=seed, transitions=tuple(transitions),
                   outcome=outcome)


def run_racing_episode(track_seed: int, policy=None, noise_level: float = 0.0,
                       noise_rng: np.random.Generator | None = None,
                       max_steps: int = RACING_MAX_STEPS,
                       track: Track | None = None, on_step=None) -> Episode:
    """Roll one racing episode, stopping early once every tile is visited.

    With noise_level > 0 the executed (and recorded) action is the
    corrupted one, drawn from noise_rng. `on_step` sees every pre-step
    state (trace capture); it must not mutate it.
    """
    if policy is None:
        policy = R.racing_expert
    if track is None:
        track = racing_make_track(track_seed)
    if noise_level > 0 and noise_rng is None:
        raise ValueError("noise_level > 0 requires a noise_rng")
    s = R.racing_reset(track)
    transitions = []
    while s.step_count < max_steps:
        if on_step is not None:
            on_step(s)
        obs = R.racing_observe(track, s)
        act = np.asarray(policy(obs), dtype=np.float64)
        act = R.corrupt_action(act, noise_level, noise_rng) \
            if noise_level > 0 else act
        transitions.append((obs, act))
        s = R.racing_step(track, s, act)
        if s.visited.all():
            break
    episode = Episode(env="racing", seed=track_seed,
                      transitions=tuple(transitions),
                      outcome=Outcome(steps=0),
                      visit_steps=s.visit_steps.copy())
    return Episode(env=episode.env, seed=episode.seed,
                   transitions=episode.transitions,
                   outcome=racing_score(episode),
                   visit_steps=episode.visit_steps)


def collect_demos(env: str, expert=None, n_episodes: int = 5,
                  filter: str = "keep_successful", seed: int = 0,
                  noise_level: float = 0.0) -> list:
    """Expert episodes for cloning, on seeds derived from `seed`.

    keep_successful retries fresh seeds until n qualifying episodes
    exist (landed for the lander, full coverage for racing), bounded at
    20*n attempts; keep_all records the first n attempts as they come.
    """
    if n_episodes <= 0:
        raise ValueError("n_episodes must be positive")
    if env not in ("lander", "racing"):
        raise ValueError(f"unknown env {env!r}")
    if filter not in ("keep_successful", "keep_all"):
        raise ValueError(f"unknown filter {filter!r}")

    episodes = []
    successes = 0
    max_attempts = 20 * n_episodes if filter == "keep_successful" else n_episodes
    for attempt in range(max_attempts):
        ep_seed = kimrng.subseed(seed, "demo", env, str(attempt))
        if env == "lander":
            ep = run_lander_episode(ep_seed, expert)
            ok = bool(ep.outcome.success)
        else:
            noise_rng = kimrng.substream(seed, "demo-noise", str(attempt)) \
                if noise_level > 0 else None
            ep = run_racing_episode(ep_seed, expert, noise_level=noise_level,
                                    noise_rng=noise_rng)
            ok = ep.outcome.max_coverage == 1.0
        successes += ok
        if filter == "keep_all" or ok:
            episodes.append(ep)
        if len(episodes) == n_episodes:
            return episodes
    raise RuntimeError(
        f"could not collect {n_episodes} qualifying {env} episodes in "
        f"{max_attempts} attempts (expert success rate "
        f"{successes / max_attempts:.2f})")


def _obs_to_json(env: str, obs):
    if env == "lander":
        return [float(v) for v in obs]
    tiles, indicators = obs
    return {"tiles": [[float(v) for v in row] for row in tiles],
            "indicators": [float(v) for v in indicators]}


def _act_to_json(env: str, act):
    if env == "lander":
        return int(act)
    return [float(v) for v in act]


def save_episodes(episodes, path) -> None:
    """JSON Lines: header, one line per transition, outcome trailer."""
    with open(path, "w", encoding="utf-8") as fh:
        for ep in episodes:
            header = {"env": ep.env, "seed": ep.seed,
                      "layout_version": LAYOUT_VERSION}
            fh.write(json.dumps(header) + "\n")
            for obs, act in ep.transitions:
                line = {"obs": _obs_to_json(ep.env, obs),
                        "act": _act_to_json(ep.env, act)}
                fh.write(json.dumps(line) + "\n")
            trailer = {"outcome": {k: v for k, v in vars(ep.outcome).items()
                                   if v is not None}}
            if ep.visit_steps is not None:
                trailer["visit_steps"] = [int(v) for v in ep.visit_steps]
            fh.write(json.dumps(trailer) + "\n")


def _episode_from_block(header, lines, trailer) -> Episode:
    env = header["env"]
    transitions = []
    for row in lines:
        if env == "lander":
            obs = np.array(row["obs"], dtype=np.float64)
            act = int(row["act"])
        else:
            obs = (np.array(row["obs"]["tiles"], dtype=np.float64),
                   np.array(row["obs"]["indicators"], dtype=np.float64))
            act = np.array(row["act"], dtype=np.float64)
        transitions.append((obs, act))
    raw = dict(trailer["outcome"])
    outcome = Outcome(steps=int(raw.pop("steps")), **raw)
    visit_steps = None
    if "visit_steps" in trailer:
        visit_steps = np.array(trailer["visit_steps"], dtype=np.int64)
    return Episode(env=env, seed=int(header["seed"]),
                   transitions=tuple(transitions), outcome=outcome,
                   visit_steps=visit_steps)


def load_episodes(path) -> list:
    episodes = []
    header, lines = None, []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        obj = json.loads(raw)
        if "env" in obj:
            header, lines = obj, []
        elif "outcome" in obj:
            episodes.append(_episode_from_block(header, lines, obj))
            header, lines = None, []
        else:
            lines.append(obj)
    if header is not None:
        raise ValueError(f"truncated episode file: {path}")
    return episodes
