"""Deterministic multi-car racing simulator on a closed course.

Cars are grip-limited point masses in centerline (Frenet) coordinates:
steering-rate input integrates to a steering position that demands a
curvature; demanded lateral acceleration beyond the grip limit is clamped
(understeer) and scrubs speed.  Off-course driving adds drag and halves
grip.  Collisions are disc overlaps resolved with a positional separation
and an inelastic speed shunt.

All randomness is consumed at reset (opponent speed profiles and lane
preferences); stepping is pure arithmetic, so identical (course, config,
seed, policy) reproduce bit-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..schema import DIST_CAP, OBS_FIELD_NAMES
from .course import Course
from .trajectory import Action, Trajectory

# physics constants (desk-scale tuning, not configurable per run)
V_MAX = 55.0  # m/s
A_ACC = 9.0  # m/s^2 at standstill, tapering to 0 at V_MAX
A_BRAKE = 14.0  # m/s^2
DRAG = 0.015  # 1/s, linear speed decay
K_STEER = 0.09  # curvature (1/m) demanded at full steering lock
STEER_RATE = 2.0  # full steering units per second
GRIP_ACC = 14.0  # m/s^2 max lateral acceleration on tarmac
OFF_COURSE_GRIP = 0.5  # grip multiplier off course
OFF_COURSE_DECEL = 4.0  # m/s^2 extra drag off course
SCRUB = 0.6  # fraction of grip excess converted to decel
CAR_RADIUS = 1.2  # m, collision disc
SHUNT = 0.8  # velocity pull toward the pair mean on contact
D_MAX = 10.0  # m, hard lateral wall (matches the published field range)
WALL_SCRUB = 3.0  # m/s^2 while pinned against the wall

GRID_LINE_OFFSET = 6.0  # m, first grid slot behind the start line
GRID_SPACING = 8.0  # m between grid slots
GRID_LANE = 1.8  # m, alternating lateral stagger

MAX_CARS = 20  # keeps rank within the published field range


@dataclass(frozen=True)
class EpisodeConfig:
    dt: float = 0.1
    laps: int = 1
    time_limit: float = 180.0
    n_opponents: int = 19
    start_rank: int | None = None  # None places the agent last
    opponent_speed_lo: float = 26.0  # m/s profile speed range
    opponent_speed_hi: float = 38.0

    def __post_init__(self):
        if self.dt <= 0 or self.laps < 1 or self.time_limit <= 0:
            raise ValueError("dt, laps, time_limit must be positive")
        if not 0 <= self.n_opponents <= MAX_CARS - 1:
            raise ValueError(f"n_opponents must be in [0, {MAX_CARS - 1}]")

    def to_json(self) -> dict:
        return {
            "dt": self.dt,
            "laps": self.laps,
            "time_limit": self.time_limit,
            "n_opponents": self.n_opponents,
            "start_rank": self.start_rank,
            "opponent_speed_lo": self.opponent_speed_lo,
            "opponent_speed_hi": self.opponent_speed_hi,
        }

    @staticmethod
    def from_json(doc: dict) -> "EpisodeConfig":
        return EpisodeConfig(**doc)


@dataclass
class EnvState:
    course: Course
    cfg: EpisodeConfig
    seed: int
    # per-car arrays; index 0 is the trained agent
    s: np.ndarray
    d: np.ndarray
    phi: np.ndarray
    v: np.ndarray
    steering: np.ndarray
    throttle: np.ndarray  # last applied throttle, for the observation
    s0: np.ndarray  # grid positions, fixed
    cum: np.ndarray  # signed track distance travelled since reset
    collision: np.ndarray  # bool: in contact this tick
    collision_rel_speed: np.ndarray
    profile_speed: np.ndarray  # opponent target speed (index 0 unused)
    profile_lane: np.ndarray  # opponent preferred lateral offset
    time: float = 0.0
    tick: int = 0

    @property
    def n_cars(self) -> int:
        return len(self.s)

    def race_progress(self) -> np.ndarray:
        """Comparable standing: larger is further along the race."""
        return self.cum + self.s0

    def ranks(self) -> np.ndarray:
        progress = self.race_progress()
        # descending progress, ties to the lower car index
        order = np.lexsort((np.arange(self.n_cars), -progress))
        ranks = np.empty(self.n_cars, dtype=np.int64)
        ranks[order] = np.arange(self.n_cars)
        return ranks

    def line_crossings(self, i: int) -> int:
        """Net signed start-line crossings since reset (grid sits behind it)."""
        return int(math.floor((self.s0[i] + self.cum[i]) / self.course.total_length))

    def laps_of(self, i: int) -> int:
        # the first crossing starts lap 1; a lap is complete on the next one
        return max(0, self.line_crossings(i) - 1)

    def world_xy(self, i: int) -> np.ndarray:
        return self.course.world_pos(float(self.s[i]), float(self.d[i]))

    def observation(self, i: int = 0) -> dict[str, float]:
        progress = self.race_progress()
        ranks = self.ranks()
        mine = progress[i]
        ahead = progress[progress > mine]
        behind = progress[progress < mine]
        dist_ahead = float(min(DIST_CAP, (ahead - mine).min())) if len(ahead) else DIST_CAP
        dist_behind = float(min(DIST_CAP, (mine - behind).min())) if len(behind) else DIST_CAP
        off = abs(self.d[i]) > self.course.half_width
        return {
            "centerline_progress": float(self.s[i]),
            "lap": float(self.laps_of(i)),
            "lateral_offset": float(self.d[i]),
            "speed": float(self.v[i]),
            "heading_error": float(self.phi[i]),
            "steering": float(self.steering[i]),
            "throttle": float(self.throttle[i]),
            "off_course": 1.0 if off else 0.0,
            "collision": 1.0 if self.collision[i] else 0.0,
            "collision_rel_speed": float(self.collision_rel_speed[i]),
            "rank": float(ranks[i]),
            "dist_ahead": dist_ahead,
            "dist_behind": dist_behind,
            "time": round(self.tick * self.cfg.dt, 9),
        }


def reset(course: Course, cfg: EpisodeConfig, seed: int) -> EnvState:
    n = cfg.n_opponents + 1
    start_rank = cfg.n_opponents if cfg.start_rank is None else cfg.start_rank
    if not 0 <= start_rank < n:
        raise ValueError(f"start_rank must be in [0, {n - 1}]")
    rng = np.random.default_rng(seed)
    # grid slot r sits GRID_LINE_OFFSET + r*GRID_SPACING behind the line
    slots = np.arange(n)
    agent_slot = start_rank
    opp_slots = np.delete(slots, agent_slot)
    slot_of_car = np.concatenate(([agent_slot], opp_slots))
    dist_behind_line = GRID_LINE_OFFSET + slot_of_car * GRID_SPACING
    s0 = (course.total_length - dist_behind_line) % course.total_length
    d0 = np.where(slot_of_car % 2 == 0, GRID_LANE, -GRID_LANE)
    profile_speed = rng.uniform(cfg.opponent_speed_lo, cfg.opponent_speed_hi, size=n)
    profile_lane = rng.uniform(-2.0, 2.0, size=n)
    profile_speed[0] = 0.0  # agent slot: unused
    profile_lane[0] = 0.0
    return EnvState(
        course=course,
        cfg=cfg,
        seed=seed,
        s=s0.astype(np.float64).copy(),
        d=d0.astype(np.float64),
        phi=np.zeros(n),
        v=np.zeros(n),
        steering=np.zeros(n),
        throttle=np.zeros(n),
        s0=s0.astype(np.float64),
        cum=np.zeros(n),
        collision=np.zeros(n, dtype=bool),
        collision_rel_speed=np.zeros(n),
        profile_speed=profile_speed,
        profile_lane=profile_lane,
    )


def _lookahead_curvature(course: Course, s: float, v: float) -> float:
    """Largest |curvature| over the braking-relevant window ahead."""
    window = 8.0 + 1.4 * v
    ds = course.total_length / course.n_samples
    i0 = int((s % course.total_length) / ds)
    count = max(1, int(window / ds))
    idx = (i0 + np.arange(count)) % course.n_samples
    return float(np.abs(course.curvature[idx]).max())


def opponent_policy(state: EnvState, car_index: int) -> Action:
    """Scripted profile-speed centerline follower with basic avoidance."""
    i = car_index
    course = state.course
    s, d, v = float(state.s[i]), float(state.d[i]), float(state.v[i])
    kappa_ahead = _lookahead_curvature(course, s, v)
    safe_speed = math.sqrt(GRIP_ACC / max(kappa_ahead, 1e-6)) * 0.92
    v_target = min(float(state.profile_speed[i]), safe_speed)
    target_d = float(state.profile_lane[i])

    # avoidance: nearest car closely ahead in my lane
    progress = state.race_progress()
    gaps = progress - progress[i]
    best_gap = math.inf
    for j in range(state.n_cars):
        if j == i or gaps[j] <= 0 or gaps[j] > 14.0:
            continue
        if abs(float(state.d[j]) - d) < 2.6 and gaps[j] < best_gap:
            best_gap = gaps[j]
            other_d = float(state.d[j])
            side = 1.0 if other_d <= 0 else -1.0
            target_d = other_d + side * 3.2
            if gaps[j] < 6.0:
                # blocked: sit just under the leader's speed to open a gap
                v_target = min(v_target, float(state.v[j]) - 0.5)
    limit = course.half_width - 1.0
    target_d = min(limit, max(-limit, target_d))

    # lookahead steering: aim the heading at a point ahead on the target
    # line, feedforward the curvature the car will reach once steering
    # settles, and demand curvature with a speed-normalized gain so the
    # heading loop stays slower than the steering actuator
    lookahead = max(8.0, 1.2 * v)
    phi_des = max(-0.45, min(0.45, math.atan2(target_d - d, lookahead)))
    kappa_ff = course.curvature_at(s + 0.35 * v)
    kappa_des = kappa_ff + 3.0 * (phi_des - float(state.phi[i])) / max(v, 3.0)
    steer_des = max(-1.0, min(1.0, kappa_des / K_STEER))
    steering_rate = max(-1.0, min(1.0, 6.0 * (steer_des - float(state.steering[i]))))
    throttle = max(-1.0, min(1.0, 0.45 * (v_target - v)))
    return Action(steering_rate, throttle)


def centerline_controller(target_speed: float = 32.0):
    """Reference agent controller driving the centerline (threshold bundle)."""

    def policy(state: EnvState) -> Action:
        saved_profile = state.profile_speed[0], state.profile_lane[0]
        state.profile_speed[0] = target_speed
        state.profile_lane[0] = 0.0
        action = opponent_policy(state, 0)
        state.profile_speed[0], state.profile_lane[0] = saved_profile
        return action

    policy.wants_state = True
    return policy


def _advance_car(state: EnvState, i: int, action: Action) -> None:
    course = state.course
    dt = state.cfg.dt
    act = action.clamped()
    state.throttle[i] = act.throttle

    steering = state.steering[i] + act.steering_rate * STEER_RATE * dt
    state.steering[i] = min(1.0, max(-1.0, steering))

    v = float(state.v[i])
    d = float(state.d[i])
    s = float(state.s[i])
    off = abs(d) > course.half_width

    # grip-limited curvature demand
    grip = GRIP_ACC * (OFF_COURSE_GRIP if off else 1.0)
    kappa_dem = state.steering[i] * K_STEER
    kappa_cap = grip / max(v * v, 1e-9)
    kappa_eff = min(kappa_cap, max(-kappa_cap, kappa_dem))
    excess = abs(kappa_dem) * v * v - grip
    if excess > 0:
        v = max(0.0, v - SCRUB * min(excess, A_BRAKE) * dt)

    # longitudinal
    if act.throttle >= 0:
        accel = act.throttle * A_ACC * max(0.0, 1.0 - v / V_MAX)
    else:
        accel = act.throttle * A_BRAKE
    accel -= DRAG * v
    if off:
        accel -= OFF_COURSE_DECEL
    v = min(V_MAX, max(0.0, v + accel * dt))

    # kinematics in centerline coordinates
    kappa_c = course.curvature_at(s)
    denom = min(1.75, max(0.25, 1.0 - d * kappa_c))
    phi = float(state.phi[i])
    s_dot = v * math.cos(phi) / denom
    d_dot = v * math.sin(phi)
    phi += (kappa_eff * v - kappa_c * s_dot) * dt
    phi = (phi + math.pi) % (2.0 * math.pi) - math.pi
    d += d_dot * dt
    if abs(d) > D_MAX:
        d = math.copysign(D_MAX, d)
        v = max(0.0, v - WALL_SCRUB * dt)
    ds = s_dot * dt
    state.s[i] = (s + ds) % course.total_length
    state.cum[i] += ds
    state.d[i] = d
    state.phi[i] = phi
    state.v[i] = v


def _resolve_collisions(state: EnvState) -> None:
    n = state.n_cars
    state.collision[:] = False
    state.collision_rel_speed[:] = 0.0
    if n < 2:
        return
    xy = np.stack([state.world_xy(i) for i in range(n)])
    heading = np.array(
        [state.course.heading_at(float(state.s[i])) + float(state.phi[i]) for i in range(n)]
    )
    vel = state.v[:, None] * np.stack([np.cos(heading), np.sin(heading)], axis=1)
    for i in range(n):
        for j in range(i + 1, n):
            delta = xy[j] - xy[i]
            dist = float(np.hypot(*delta))
            if dist >= 2.0 * CAR_RADIUS:
                continue
            rel = float(np.hypot(*(vel[i] - vel[j])))
            state.collision[i] = state.collision[j] = True
            state.collision_rel_speed[i] = max(state.collision_rel_speed[i], rel)
            state.collision_rel_speed[j] = max(state.collision_rel_speed[j], rel)
            # separate laterally (cheap, stable) and shunt speeds together
            push = 0.5 * (2.0 * CAR_RADIUS - dist)
            sign = 1.0 if state.d[j] >= state.d[i] else -1.0
            state.d[i] = max(-D_MAX, min(D_MAX, state.d[i] - sign * push))
            state.d[j] = max(-D_MAX, min(D_MAX, state.d[j] + sign * push))
            mean_v = 0.5 * (state.v[i] + state.v[j])
            state.v[i] += SHUNT * (mean_v - state.v[i])
            state.v[j] += SHUNT * (mean_v - state.v[j])


def step(state: EnvState, action: Action) -> tuple[EnvState, dict[str, float], bool]:
    """Advance one tick with the agent's action; opponents act scripted."""
    if not (math.isfinite(action.steering_rate) and math.isfinite(action.throttle)):
        raise ValueError("policy produced a non-finite action")
    opponent_actions = [
        opponent_policy(state, i) for i in range(1, state.n_cars)
    ]
    _advance_car(state, 0, action)
    for i, act in enumerate(opponent_actions, start=1):
        _advance_car(state, i, act)
    _resolve_collisions(state)
    state.tick += 1
    state.time = round(state.tick * state.cfg.dt, 9)
    obs = state.observation(0)
    done = state.laps_of(0) >= state.cfg.laps or state.time >= state.cfg.time_limit
    return state, obs, done


def rollout(
    policy,
    course: Course,
    cfg: EpisodeConfig,
    seed: int,
    metadata: dict | None = None,
    frame_sink=None,
) -> Trajectory:
    """Run one episode; policy maps the agent observation dict to Action.

    Policies may alternatively accept the full EnvState (attribute
    `wants_state` truthy) — used by the scripted reference controllers.
    frame_sink, when given, receives FrameDescriptions at 10 per
    simulated second regardless of cfg.dt.
    """
    from .render import FRAME_HZ, render_frame

    state = reset(course, cfg, seed)
    wants_state = getattr(policy, "wants_state", False)
    frame_every = max(1, int(round(1.0 / (FRAME_HZ * cfg.dt))))
    obs = state.observation(0)
    obs_rows: list[list[float]] = []
    act_rows: list[list[float]] = []
    done = False
    if frame_sink is not None:
        frame_sink(render_frame(state))
    while not done:
        action = policy(state) if wants_state else policy(obs)
        if not isinstance(action, Action):
            action = Action(*action)
        state, next_obs, done = step(state, action)
        obs_rows.append([obs[k] for k in OBS_FIELD_NAMES])
        act_rows.append([action.steering_rate, action.throttle])
        obs = next_obs
        if frame_sink is not None and state.tick % frame_every == 0:
            frame_sink(render_frame(state))
    meta = {
        "course": course.name,
        "course_fields": course.fields(),
        "n_cars": state.n_cars,
        "laps_completed": state.laps_of(0),
        "final_rank": int(state.ranks()[0]),
        "final_dist_to_first": float(
            state.race_progress().max() - state.race_progress()[0]
        ),
        "start_rank": cfg.start_rank if cfg.start_rank is not None else cfg.n_opponents,
    }
    meta.update(metadata or {})
    return Trajectory(
        np.array(obs_rows), np.array(act_rows), dt=cfg.dt, seed=seed, metadata=meta
    )

