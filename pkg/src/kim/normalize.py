"""Feature scaling from declared ranges to [-1, 1].

Each environment declares symmetric per-feature ranges; the normalizer is
the affine map onto [-1, 1] plus a clamp for outliers. Lander observations
are already order-one, so its normalizer is the identity and never clamps.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["Normalizer", "fit_normalizer", "apply_normalizer", "TRACK_EXTENT"]

# generous bound on any tile coordinate: control radii reach 1.3 * 30, so
# the whole track fits in a box of half-width 39 plus spline overshoot
TRACK_EXTENT = 80.0


@dataclass(frozen=True)
class Normalizer:
    env: str
    tile_scale: tuple | None = None        # per tile feature, x -> x * scale
    indicator_scale: tuple | None = None

    @property
    def is_identity(self):
        return self.tile_scale is None


def fit_normalizer(env: str) -> Normalizer:
    if env == "lander":
        return Normalizer("lander")
    if env == "racing":
        e = 1.0 / TRACK_EXTENT
        return Normalizer(
            "racing",
            # offsets, steps, heading error, then marker / d_heading / spare,
            # which the observer already emits in [-1, 1]
            tile_scale=(e, e, e, e, 1.0 / np.pi, 1.0, 1.0, 1.0),
            indicator_scale=(1.0,) * 7)
    raise ValueError(f"unknown env {env!r}")


def apply_normalizer(n: Normalizer, obs):
    """Scaled copy of one observation; identity maps pass through as-is."""
    if n.is_identity:
        return obs
    tiles, indicators = obs
    tiles = np.clip(tiles * np.asarray(n.tile_scale), -1.0, 1.0)
    indicators = np.clip(indicators * np.asarray(n.indicator_scale), -1.0, 1.0)
    return tiles, indicators
