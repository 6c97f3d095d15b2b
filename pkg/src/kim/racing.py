"""Kinematic bicycle car on a closed tile track.

The car is a point with a steering servo and a grip budget. Commanding
more lateral acceleration than the tires hold puts it into a slip: the
effective yaw rate saturates, speed bleeds off, and the heading picks up
a deterministic push past the intended arc, so losing control is
reproducible rather than noisy. There is no off-track penalty; progress
is measured purely by which tiles the car has passed near.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .track import Track

__all__ = [
    "CarState", "RacingExpertParams", "EXPERT_PARAMS",
    "racing_reset", "racing_step", "racing_observe", "racing_expert",
    "corrupt_action",
    "DT", "DELTA_MAX", "V_MAX", "GRIP", "HALF_WIDTH", "VISIT_RADIUS",
]

DT = 0.05
DELTA_MAX = 0.35     # rad, full steering lock
SERVO_RATE = 4.0     # 1/s, steering first-order response
GAS_ACCEL = 6.0
BRAKE_DECEL = 10.0
DRAG = 0.12
V_MAX = 12.0
YAW_LENGTH = 2.5     # v/YAW_LENGTH * tan(delta) = commanded yaw rate
GRIP = 8.0           # max lateral acceleration before slipping
SLIP_BLEED = 0.985   # speed multiplier per slipping step
SLIP_PUSH = 0.3      # extra heading drift per unit of grip excess
GYRO_SCALE = 3.0
HALF_WIDTH = 2.0
VISIT_RADIUS = 1.2 * HALF_WIDTH


@dataclass(frozen=True)
class CarState:
    px: float
    py: float
    psi: float
    v: float
    delta: float
    slip: bool
    wheel_abs: tuple
    gyro: float
    visited: np.ndarray      # bool per tile; treat as immutable
    visit_steps: np.ndarray  # first step each tile was visited, -1 if never
    step_count: int


def racing_reset(track: Track) -> CarState:
    """Car at rest on tile 0, pointing along it."""
    n = len(track)
    visited = np.zeros(n, dtype=bool)
    visited[0] = True
    visit_steps = np.full(n, -1, dtype=np.int64)
    visit_steps[0] = 0
    return CarState(px=float(track.cx[0]), py=float(track.cy[0]),
                    psi=float(track.heading[0]), v=0.0, delta=0.0,
                    slip=False, wheel_abs=(False,) * 4, gyro=0.0,
                    visited=visited, visit_steps=visit_steps, step_count=0)


def racing_step(track: Track, s: CarState, action) -> CarState:
    """One dt of dynamics; action = [steer, gas, brake], caller-clipped."""
    steer, gas, brake = (float(a) for a in action)

    delta = s.delta + SERVO_RATE * (steer * DELTA_MAX - s.delta) * DT
    v = s.v + (GAS_ACCEL * gas - BRAKE_DECEL * brake - DRAG * s.v) * DT
    v = min(max(v, 0.0), V_MAX)

    omega_cmd = (v / YAW_LENGTH) * math.tan(delta)
    a_lat = abs(v * omega_cmd)
    psi = s.psi
    if a_lat > GRIP:
        slip = True
        omega_eff = omega_cmd * GRIP / a_lat
        v *= SLIP_BLEED
        psi += SLIP_PUSH * math.copysign(1.0, omega_cmd) \
            * (a_lat / GRIP - 1.0) * DT
    else:
        slip = False
        omega_eff = omega_cmd
    wheel_abs = (slip and brake > 0.0,) * 4

    psi += omega_eff * DT
    px = s.px + v * math.cos(psi) * DT
    py = s.py + v * math.sin(psi) * DT
    step_count = s.step_count + 1

    near = (track.cx - px) ** 2 + (track.cy - py) ** 2 <= VISIT_RADIUS ** 2
    newly = near & ~s.visited
    if newly.any():
        visited = s.visited | near
        visit_steps = np.where(newly, step_count, s.visit_steps)
    else:
        visited, visit_steps = s.visited, s.visit_steps

    return CarState(px=px, py=py, psi=psi, v=v, delta=delta, slip=slip,
                    wheel_abs=wheel_abs, gyro=omega_eff,
                    visited=visited, visit_steps=visit_steps,
                    step_count=step_count)


def _wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def racing_observe(track: Track, s: CarState):
    """(tiles (L, 8), indicators (7,)) in the car frame.

    Tiles are listed in track order starting at the nearest one. Lateral
    offsets are positive to the car's right, so a car left of a tile sees
    positive dim 0 for it.
    """
    dx = track.cx - s.px
    dy = track.cy - s.py
    cos_p, sin_p = math.cos(s.psi), math.sin(s.psi)
    lat = sin_p * dx - cos_p * dy
    lon = cos_p * dx + sin_p * dy
    dlat = sin_p * track.dpx - cos_p * track.dpy
    dlon = cos_p * track.dpx + sin_p * track.dpy
    tiles = np.stack([
        lat, lon, dlat, dlon,
        _wrap_angle(track.heading - s.psi),
        track.corner_marker.astype(np.float64),
        track.d_heading,
        np.zeros(len(track)),
    ], axis=1)
    nearest = int(np.argmin(dx * dx + dy * dy))
    tiles = np.roll(tiles, -nearest, axis=0)
    indicators = np.array([
        s.v / V_MAX, s.delta / DELTA_MAX, s.gyro / GYRO_SCALE,
        *(1.0 if w else 0.0 for w in s.wheel_abs),
    ])
    return tiles, indicators


@dataclass(frozen=True)
class RacingExpertParams:
    """Shaping constants for the scripted driver.

    The steering law and pedal law are fixed; these tune which tiles
    count as corners and how hard to slow for them. The built-in marker
    bit keys off sharper bends than this driver wants to flag, so it
    applies its own curvature threshold. Defaults come from the search
    in scripts/tune_experts.py: full coverage on 600 tracks, roughly a
    lap and a half to touch every tile.
    """
    corner_threshold: float = 0.02   # on |normalized heading delta|
    speed_coeff: float = 0.25        # of coeff/sqrt(curvature) sizing
    bonus_base: float = 0.3          # distance bonus at the corner itself
    bonus_slope: float = 0.3         # extra bonus per 30 tiles of distance
    lookahead_base: float = 3.0
    lookahead_speed: float = 8.0
    cruise_target: float = 0.9


EXPERT_PARAMS = RacingExpertParams()


def racing_expert(obs, params: RacingExpertParams = EXPERT_PARAMS) -> np.ndarray:
    """Steer toward the track ahead; slow down in proportion to curvature."""
    tiles, indicators = obs
    v_norm = float(indicators[0])

    idx = int(round(params.lookahead_base + params.lookahead_speed * v_norm))
    idx = min(idx, len(tiles) - 1)
    heading_err = float(tiles[idx, 4])
    curvature_ahead = float(np.mean(tiles[1:11, 6]))
    lateral_norm = float(tiles[0, 0]) / HALF_WIDTH
    steer = (1.8 * heading_err + 2.5 * curvature_ahead - 0.5 * lateral_norm) \
        * (1.0 - 0.7 * v_norm)
    steer = min(max(steer, -1.0), 1.0)

    ahead = tiles[1:31]
    sharp = np.abs(ahead[:, 6])
    corners = sharp > params.corner_threshold
    if corners.any():
        dist = np.arange(1, len(ahead) + 1, dtype=np.float64)[corners]
        bonus = params.bonus_base + params.bonus_slope * dist / 30.0
        v_corner = params.speed_coeff / np.sqrt(sharp[corners]) * bonus
        v_targ = float(np.min(np.clip(v_corner, 0.3, 1.0)))
    else:
        v_targ = params.cruise_target

    gas = min(max(2.0 * (v_targ - v_norm), 0.0), 1.0)
    brake = min(max(2.0 * (v_norm - v_targ), 0.0), 0.8)
    if gas >= brake:
        brake = 0.0
    else:
        gas = 0.0
    return np.array([steer, gas, brake])


def corrupt_action(action, noise_level: float, gen: np.random.Generator):
    """Gaussian jitter on a continuous action, clipped back to the box."""
    a = np.asarray(action, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError("noise corruption applies to continuous "
                         "[steer, gas, brake] actions only")
    if noise_level < 0:
        raise ValueError("noise_level must be >= 0")
    if noise_level == 0:
        return a.copy()     # bitwise identical, and never an alias
    out = a + noise_level * gen.standard_normal(3)
    lo = np.array([-1.0, 0.0, 0.0])
    hi = np.array([1.0, 1.0, 1.0])
    return np.clip(out, lo, hi)
