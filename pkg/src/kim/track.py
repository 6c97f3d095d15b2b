"""Closed race tracks as rings of fixed-length tiles.

A track starts from 12 control points on evenly spaced spokes with
jittered radii, threads a closed Catmull-Rom spline through them, and
resamples the spline at equal arc length. Tile length divides the loop
exactly (total/round(total), within a fraction of a percent of 1.0), so
the ring closes without a seam.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as kimrng

__all__ = ["Track", "TrackError", "racing_make_track", "closure_error",
           "MARKER_THRESHOLD"]

N_CONTROL = 12
BASE_RADIUS = 30.0
TILE_LENGTH = 1.0
MARKER_THRESHOLD = 0.06     # on the normalized heading delta
MAX_ATTEMPTS = 10
_DENSE_PER_SEGMENT = 256
# Drivability bound: how much total turning an 8-tile stretch may demand
# beyond what a car at full steering lock (turn radius 6.84) covers over the
# same arc. Kinks past this force any line to exit wider than the tile-visit
# radius, so the loop cannot be fully covered and counts as degenerate.
_TURN_WINDOW = 8
_TURN_EXCESS_LIMIT = 0.5    # radians over the window
_FULL_LOCK_RADIUS = 6.84


class TrackError(RuntimeError):
    """Raised when no usable track exists within the attempt budget."""


@dataclass(frozen=True)
class Track:
    """Per-tile parallel arrays; row i describes tile i of the closed loop."""
    seed: int
    cx: np.ndarray          # midpoint, world frame
    cy: np.ndarray
    heading: np.ndarray     # tangent direction at the midpoint, rad
    dpx: np.ndarray         # midpoint minus previous midpoint (cyclic)
    dpy: np.ndarray
    d_heading: np.ndarray   # wrapped heading delta vs previous tile, / pi
    corner_marker: np.ndarray
    arc_length: np.ndarray

    def __len__(self) -> int:
        return len(self.cx)


def _wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def _spline_coeffs(points: np.ndarray) -> np.ndarray:
    """Cyclic Catmull-Rom coefficients, one cubic per control segment."""
    p0 = np.roll(points, 1, axis=0)
    p1 = points
    p2 = np.roll(points, -1, axis=0)
    p3 = np.roll(points, -2, axis=0)
    c = np.empty((len(points), 4, 2))
    c[:, 0] = p1
    c[:, 1] = 0.5 * (p2 - p0)
    c[:, 2] = 0.5 * (2 * p0 - 5 * p1 + 4 * p2 - p3)
    c[:, 3] = 0.5 * (-p0 + 3 * p1 - 3 * p2 + p3)
    return c


def _eval_spline(coeffs: np.ndarray, u: np.ndarray):
    """Position and tangent at global parameter u in [0, n_segments)."""
    seg = np.clip(u.astype(np.int64), 0, len(coeffs) - 1)
    t = (u - seg)[:, None]
    c = coeffs[seg]
    pos = c[:, 0] + t * (c[:, 1] + t * (c[:, 2] + t * c[:, 3]))
    tan = c[:, 1] + t * (2 * c[:, 2] + t * 3 * c[:, 3])
    return pos, tan


def _build(points: np.ndarray, seed: int) -> Track:
    coeffs = _spline_coeffs(points)
    n_seg = len(points)

    # dense arc-length table for inverting s -> spline parameter
    u_dense = np.linspace(0.0, n_seg, n_seg * _DENSE_PER_SEGMENT + 1)
    pos, _ = _eval_spline(coeffs, u_dense)
    chord = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    s_dense = np.concatenate([[0.0], np.cumsum(chord)])
    total = s_dense[-1]

    n_tiles = int(round(total / TILE_LENGTH))
    spacing = total / n_tiles
    s_mid = (np.arange(n_tiles) + 0.5) * spacing
    u_mid = np.interp(s_mid, s_dense, u_dense)
    mid, tan = _eval_spline(coeffs, u_mid)

    heading = np.arctan2(tan[:, 1], tan[:, 0])
    d_heading = _wrap_angle(heading - np.roll(heading, 1)) / np.pi
    dp = mid - np.roll(mid, 1, axis=0)
    return Track(
        seed=seed,
        cx=mid[:, 0], cy=mid[:, 1],
        heading=heading,
        dpx=dp[:, 0], dpy=dp[:, 1],
        d_heading=d_heading,
        corner_marker=np.abs(d_heading) > MARKER_THRESHOLD,
        arc_length=np.full(n_tiles, spacing),
    )


def closure_error(track: Track) -> float:
    """How far the successor chain misses returning to tile 0.

    Each tile stores its midpoint delta vs the previous tile, including
    tile 0 vs the last tile, so around a closed loop the deltas must sum
    to the zero vector.
    """
    return float(np.hypot(track.dpx.sum(), track.dpy.sum()))


def _self_intersects(points: np.ndarray) -> bool:
    """Any two non-adjacent segments of the closed polyline cross."""
    n = len(points)
    a = points
    b = np.roll(points, -1, axis=0)
    d = b - a
    i, j = np.triu_indices(n, k=2)
    # wrap adjacency: segment n-1 touches segment 0
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    # segments cross iff each straddles the other's supporting line
    r, s = d[i], d[j]
    qp = a[j] - a[i]
    denom = r[:, 0] * s[:, 1] - r[:, 1] * s[:, 0]
    t_num = qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]
    u_num = qp[:, 0] * r[:, 1] - qp[:, 1] * r[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = t_num / denom
        u = u_num / denom
    hit = (denom != 0) & (t > 0) & (t < 1) & (u > 0) & (u < 1)
    return bool(hit.any())


def _degenerate(track: Track) -> bool:
    # a stray loop shifts the winding by a full turn; a figure-eight zeroes it
    winding = float(np.sum(track.d_heading))
    if abs(winding - 2.0) > 1e-6:
        return True
    turn = np.abs(track.d_heading) * np.pi
    cyclic = np.concatenate([turn, turn[:_TURN_WINDOW - 1]])
    windowed = np.convolve(cyclic, np.ones(_TURN_WINDOW), mode="valid")
    if windowed.max() - _TURN_WINDOW / _FULL_LOCK_RADIUS > _TURN_EXCESS_LIMIT:
        return True
    mid = np.stack([track.cx, track.cy], axis=1)
    return _self_intersects(mid)


def racing_make_track(seed: int) -> Track:
    """Deterministic closed track for `seed`.

    A draw whose spline wiggles tighter than the car can drive (or loses
    the counter-clockwise winding) is discarded and redrawn from a
    derived sub-stream, up to MAX_ATTEMPTS.
    """
    for attempt in range(MAX_ATTEMPTS):
        if attempt == 0:
            gen = np.random.default_rng(seed)
        else:
            gen = kimrng.substream(seed, "track-retry", str(attempt))
        angles = 2.0 * np.pi * np.arange(N_CONTROL) / N_CONTROL
        radii = gen.uniform(0.7, 1.3, size=N_CONTROL) * BASE_RADIUS
        points = np.stack([radii * np.cos(angles), radii * np.sin(angles)],
                          axis=1)
        track = _build(points, seed)
        if not _degenerate(track):
            return track
    raise TrackError(f"no usable track for seed {seed} "
                     f"after {MAX_ATTEMPTS} attempts")
