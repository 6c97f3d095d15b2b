"""Aggregated evaluation: seed sweeps, resampled comparisons, noise tables.

Reports are plain data so exports are reproducible: nothing in a report
depends on wall time, and every aggregate can be recomputed from the
per-seed outcomes it carries.
"""

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import lander as L
from .episodes import Outcome
from .rng import substream
from .rollout import Policy, RolloutFault, rollout
from .stats import confidence_interval
from .track import racing_make_track
from .training import checkpoint_text

__all__ = [
    "EvalConfig", "EvalReport", "SweepRow", "checkpoint_hash",
    "evaluate_policy", "resample_experiment", "noise_sweep",
    "export_report", "export_trace_svg",
]

NOISE_LEVELS = (0.0, 0.05, 0.1, 0.15, 0.2)


def checkpoint_hash(graph, values) -> str:
    text = checkpoint_text(graph, values, {})
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class EvalConfig:
    n_seeds: int = 100
    noise_level: float = 0.0
    noise_seed: int = 0
    ci_level: float = 0.95


@dataclass(frozen=True)
class EvalReport:
    policy_id: str
    checkpoint: str            # content hash, "" for bare callables
    env: str
    noise_level: float
    seeds: tuple
    outcomes: tuple            # Outcome per seed, aligned with seeds
    aggregates: dict
    ci_level: float
    ci: tuple | None           # (lo, hi) on the headline metric
    pairing_key: str = ""
    demo_indices: tuple = ()
    flags: tuple = ()


def _headline(env: str, outcomes) -> list:
    if env == "lander":
        return [1.0 if o.success else 0.0 for o in outcomes]
    return [o.reward for o in outcomes]


def _aggregate(env: str, outcomes) -> dict:
    steps = [o.steps for o in outcomes]
    agg = {"n": len(outcomes), "mean_steps": float(np.mean(steps))}
    if env == "lander":
        agg["success_rate"] = float(np.mean([o.success for o in outcomes]))
    else:
        rewards = [o.reward for o in outcomes]
        agg["mean_reward"] = float(np.mean(rewards))
        # sample std; zero when a single seed was evaluated
        agg["std_reward"] = float(np.std(rewards, ddof=1)) if len(rewards) > 1 else 0.0
        agg["mean_coverage"] = float(np.mean([o.coverage for o in outcomes]))
        agg["mean_max_coverage"] = float(
            np.mean([o.max_coverage for o in outcomes]))
    return agg


def _eval_lander_batched(policy: Policy, n_seeds: int):
    arrs = L.reset_batch(range(n_seeds))
    while (arrs["term"] == L.T_NONE).any():
        acts = policy.act_batch(L.observe_batch(arrs))
        arrs = L.step_batch(arrs, acts)
    return [Outcome(steps=int(arrs["steps"][i]),
                    success=bool(arrs["term"][i] == L.T_LANDED))
            for i in range(n_seeds)]


def evaluate_policy(policy, env: str | None = None, n_seeds: int = 100,
                    noise_level: float = 0.0, noise_seed: int = 0,
                    ci_level: float = 0.95, policy_id: str | None = None,
                    pairing_key: str = "", demo_indices=()) -> EvalReport:
    """Rollouts on seeds 0..n_seeds-1, aggregated into one report."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    is_policy = isinstance(policy, Policy)
    if env is None:
        if not is_policy:
            raise ValueError("env is required for a bare policy callable")
        env = policy.env
    pid = policy_id or (policy.source if is_policy else "policy")
    chash = checkpoint_hash(policy.graph, policy.values) if is_policy else ""

    seeds, outcomes, flags = [], [], []
    if env == "lander" and is_policy and noise_level == 0.0:
        try:
            outcomes = _eval_lander_batched(policy, n_seeds)
            seeds = list(range(n_seeds))
        except RolloutFault as fault:
            flags.append(f"aborted: {fault}")
    else:
        for seed in range(n_seeds):
            rng = substream(noise_seed, "eval-noise", f"{noise_level}",
                            str(seed)) if noise_level > 0 else None
            try:
                ep = rollout(env, policy, seed, noise_level, rng)
            except RolloutFault as fault:
                flags.append(f"seed {seed}: aborted ({fault})")
                continue
            seeds.append(seed)
            outcomes.append(ep.outcome)

    agg = _aggregate(env, outcomes) if outcomes else {"n": 0}
    ci = None
    metric = _headline(env, outcomes)
    if len(metric) >= 2:
        ci = confidence_interval(metric, ci_level)
    return EvalReport(policy_id=pid, checkpoint=chash, env=env,
                      noise_level=noise_level, seeds=tuple(seeds),
                      outcomes=tuple(outcomes), aggregates=agg,
                      ci_level=ci_level, ci=ci, pairing_key=pairing_key,
                      demo_indices=tuple(demo_indices), flags=tuple(flags))


def resample_experiment(trainer, pool, k_sets: int, n_demos_per_set: int,
                        cfg: EvalConfig = EvalConfig(), seed: int = 0):
    """k independently resampled demo subsets, one trained policy each.

    `trainer` maps a demo list to a Policy. Reports carry the subset
    index as the pairing key so conditions trained on the same subsets
    can be compared pairwise.
    """
    if n_demos_per_set > len(pool):
        raise ValueError(f"pool holds {len(pool)} episodes, "
                         f"need {n_demos_per_set} per set")
    reports = []
    for k in range(k_sets):
        rng = substream(seed, "resample", str(k))
        idx = sorted(rng.choice(len(pool), size=n_demos_per_set,
                                replace=False).tolist())
        policy = trainer([pool[i] for i in idx])
        reports.append(evaluate_policy(
            policy, n_seeds=cfg.n_seeds, noise_level=cfg.noise_level,
            noise_seed=cfg.noise_seed, ci_level=cfg.ci_level,
            pairing_key=f"set-{k}", demo_indices=idx))
    return reports


@dataclass(frozen=True)
class SweepRow:
    policy_id: str
    noise_level: float
    report: EvalReport
    retention: float    # mean reward at this level / mean reward clean


def noise_sweep(policies: dict, levels=NOISE_LEVELS,
                cfg: EvalConfig = EvalConfig()) -> list:
    """One report per (policy, level) plus reward retention ratios."""
    rows = []
    for pid, policy in policies.items():
        base = None
        for level in levels:
            rep = evaluate_policy(policy, n_seeds=cfg.n_seeds,
                                  noise_level=level, noise_seed=cfg.noise_seed,
                                  ci_level=cfg.ci_level, policy_id=pid)
            mean = rep.aggregates.get("mean_reward", math.nan)
            if base is None:
                base = mean
            retention = mean / base if base and base > 0 else math.nan
            rows.append(SweepRow(pid, level, rep, retention))
    return rows


def _report_dict(rep: EvalReport) -> dict:
    outs = []
    for seed, o in zip(rep.seeds, rep.outcomes):
        row = {"seed": seed, "steps": o.steps}
        for k in ("success", "reward", "coverage", "max_coverage"):
            v = getattr(o, k)
            if v is not None:
                row[k] = v
        outs.append(row)
    return {
        "policy_id": rep.policy_id,
        "checkpoint": rep.checkpoint,
        "env": rep.env,
        "noise_level": rep.noise_level,
        "pairing_key": rep.pairing_key,
        "demo_indices": list(rep.demo_indices),
        "aggregates": rep.aggregates,
        "ci_level": rep.ci_level,
        "ci_lo": None if rep.ci is None else rep.ci[0],
        "ci_hi": None if rep.ci is None else rep.ci[1],
        "flags": list(rep.flags),
        "outcomes": outs,
    }


CSV_COLUMNS = [
    "policy_id", "checkpoint", "env", "noise_level", "pairing_key", "n",
    "success_rate", "mean_reward", "std_reward", "mean_coverage",
    "mean_max_coverage", "mean_steps", "ci_level", "ci_lo", "ci_hi", "flags",
]


def export_report(reports, path, format: str = "json"):
    """Reports to disk; CSV keeps one row per report with fixed columns."""
    reports = list(reports)
    if format == "json":
        payload = json.dumps([_report_dict(r) for r in reports],
                             sort_keys=True, indent=2)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(payload + "\n")
        return
    if format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in reports:
                d = _report_dict(r)
                row = []
                for c in CSV_COLUMNS:
                    if c in d:
                        v = d[c]
                    else:
                        v = r.aggregates.get(c, "")
                    if c == "flags":
                        v = "|".join(r.flags)
                    row.append("" if v is None else v)
                w.writerow(row)
        return
    raise ValueError(f"unknown report format {format!r}")


_TRACE_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b")


def export_trace_svg(track, traces, path, stride: int = 5):
    """Track boundary plus sampled car paths, one color per trace.

    `traces` is an iterable of (label, positions) with positions shaped
    (n, 2) in world coordinates; every `stride`-th position is drawn.
    """
    import kim.racing as R

    nx = -np.sin(track.heading) * R.HALF_WIDTH
    ny = np.cos(track.heading) * R.HALF_WIDTH
    inner = np.stack([track.cx - nx, track.cy - ny], axis=1)
    outer = np.stack([track.cx + nx, track.cy + ny], axis=1)

    pts = [inner, outer]
    items = [(str(label), np.asarray(p, dtype=np.float64))
             for label, p in traces]
    pts += [p for _, p in items if len(p)]
    allp = np.concatenate(pts, axis=0)
    lo = allp.min(axis=0) - 4.0
    hi = allp.max(axis=0) + 4.0
    w, h = hi - lo

    def fmt(poly):
        # svg y grows downward; flip to keep the world upright
        return " ".join(f"{x - lo[0]:.2f},{hi[1] - y:.2f}" for x, y in poly)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="0 0 {w:.2f} {h:.2f}">',
        f'<rect width="{w:.2f}" height="{h:.2f}" fill="white"/>',
    ]
    for poly in (inner, outer):
        closed = np.vstack([poly, poly[:1]])
        lines.append(f'<polyline points="{fmt(closed)}" fill="none" '
                     f'stroke="#888888" stroke-width="0.5"/>')
    for i, (label, pos) in enumerate(items):
        color = _TRACE_COLORS[i % len(_TRACE_COLORS)]
        sampled = pos[::max(1, stride)]
        lines.append(f'<g id="trace-{i}">')
        lines.append(f'<polyline points="{fmt(sampled)}" fill="none" '
                     f'stroke="{color}" stroke-width="0.8" opacity="0.9">'
                     f'<title>{label}</title></polyline>')
        lines.append('</g>')
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
