"""Closed-loop USV simulator: LOS guidance, PID heading control, redundancy.

The platform carries three thrusters 120 degrees apart; two of them (the
active pair) drive at any time.  Motion is reduced to a unicycle: commanded
turn rate plus constant cruise speed, integrated along exact circular arcs.
When an active thruster fails, the remaining pair takes over after a
reorientation dwell of (pair offset)/omega_max seconds during which the
vehicle holds position.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .envsim import DetectionEvent, EnvField, EnvSample, OccurrenceField, detect, eval_field
from .geo import LocalPoint, dist
from .mission import MissionPath

THRUSTER_PAIRS = ((0, 1), (0, 2), (1, 2))
PAIR_OFFSET_RAD = 2.0 * math.pi / 3.0

STATUS_COMPLETED = "completed"
STATUS_TIMEOUT = "timeout"
STATUS_IMMOBILIZED = "immobilized"

TRAJECTORY_HEADER = ("t_s", "east_m", "north_m", "heading_rad", "wp_index", "status")


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    r = math.remainder(a, math.tau)
    if r <= -math.pi:
        r += math.tau
    return r


@dataclass(frozen=True)
class PidGains:
    kp: float = 1.5
    ki: float = 0.0
    kd: float = 0.5
    integral_clamp: float = 1.0
    output_clamp: float = 1.0

    def __post_init__(self) -> None:
        if min(self.kp, self.ki, self.kd) < 0.0:
            raise ValueError("PID gains must be >= 0")
        if self.integral_clamp <= 0.0 or self.output_clamp <= 0.0:
            raise ValueError("PID clamps must be > 0")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float | None = None


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    cruise_speed: float = 1.0
    acceptance_radius: float = 2.0
    gps_noise_std: float = 0.0
    sample_interval: float = 1.0
    max_mission_time: float | None = None
    omega_max: float = 0.5

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.cruise_speed <= 0.0:
            raise ValueError("cruise_speed must be > 0")
        if self.gps_noise_std < 0.0:
            raise ValueError("gps_noise_std must be >= 0")
        if self.acceptance_radius <= self.gps_noise_std:
            raise ValueError("acceptance_radius must exceed gps_noise_std")
        if self.sample_interval <= 0.0:
            raise ValueError("sample_interval must be > 0")
        if self.omega_max <= 0.0:
            raise ValueError("omega_max must be > 0")


@dataclass(frozen=True)
class VehicleState:
    pos: LocalPoint
    heading: float = 0.0
    speed: float = 1.0
    thruster_ok: tuple[bool, bool, bool] = (True, True, True)
    active_pair: int = 0
    t: float = 0.0
    dwell_s: float = 0.0

    def __post_init__(self) -> None:
        if not -math.pi < self.heading <= math.pi + 1e-12:
            raise ValueError(f"heading {self.heading} not wrapped to (-pi, pi]")
        if self.healthy_count >= 2 and not all(
            self.thruster_ok[i] for i in THRUSTER_PAIRS[self.active_pair]
        ):
            raise ValueError("active_pair references a failed thruster")

    @property
    def healthy_count(self) -> int:
        return sum(self.thruster_ok)

    @property
    def can_move(self) -> bool:
        return self.healthy_count >= 2


def los_heading(current: LocalPoint, target: LocalPoint) -> float:
    """Line-of-sight bearing from current position to target, east = 0 rad."""
    de = target.east - current.east
    dn = target.north - current.north
    if math.hypot(de, dn) < 1e-12:
        raise ValueError("los_heading undefined for coincident points")
    return wrap_angle(math.atan2(dn, de))


def pid_step(
    gains: PidGains, state: PidState, error: float, dt: float
) -> tuple[float, PidState]:
    """One PID update on wrapped heading error; returns (turn-rate command, state)."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    integral = state.integral + error * dt
    integral = min(max(integral, -gains.integral_clamp), gains.integral_clamp)
    if state.prev_error is None:
        derivative = 0.0
    else:
        derivative = wrap_angle(error - state.prev_error) / dt
    command = gains.kp * error + gains.ki * integral + gains.kd * derivative
    command = min(max(command, -gains.output_clamp), gains.output_clamp)
    return command, PidState(integral=integral, prev_error=error)


def step_vehicle(state: VehicleState, turn_rate: float, cfg: SimConfig) -> VehicleState:
    """Advance one dt along an exact constant-turn-rate arc.

    Vehicles holding a reorientation dwell, or with fewer than two healthy
    thrusters, keep their pose while time advances.
    """
    t_next = state.t + cfg.dt
    if not state.can_move:
        return replace(state, t=t_next)
    if state.dwell_s > 0.0:
        return replace(state, t=t_next, dwell_s=max(0.0, state.dwell_s - cfg.dt))

    v = cfg.cruise_speed
    theta = state.heading
    if abs(turn_rate) < 1e-12:
        east = state.pos.east + v * cfg.dt * math.cos(theta)
        north = state.pos.north + v * cfg.dt * math.sin(theta)
        heading = theta
    else:
        radius = v / turn_rate
        theta_next = theta + turn_rate * cfg.dt
        east = state.pos.east + radius * (math.sin(theta_next) - math.sin(theta))
        north = state.pos.north - radius * (math.cos(theta_next) - math.cos(theta))
        heading = wrap_angle(theta_next)
    return replace(
        state, pos=LocalPoint(east, north), heading=heading, speed=v, t=t_next
    )


def reported_position(
    state: VehicleState, cfg: SimConfig, rng: np.random.Generator
) -> LocalPoint:
    """GPS fix: true position plus configured noise (guidance sees only this)."""
    if cfg.gps_noise_std <= 0.0:
        return state.pos
    de, dn = rng.normal(0.0, cfg.gps_noise_std, size=2)
    return LocalPoint(state.pos.east + float(de), state.pos.north + float(dn))


def fail_thruster(state: VehicleState, which: int, omega_max: float = 0.5) -> VehicleState:
    """Mark a thruster failed; switch pairs and schedule the rotation dwell.

    Failing a thruster outside the active pair costs nothing.  Failing an
    active one rotates the platform onto the remaining healthy pair, which
    holds the vehicle for PAIR_OFFSET_RAD / omega_max seconds.  A second
    failure leaves fewer than two healthy thrusters: the vehicle is
    immobilized (status surfaces in the mission log).
    """
    if which not in (0, 1, 2):
        raise ValueError(f"thruster index must be 0..2, got {which}")
    if not state.thruster_ok[which]:
        raise ValueError(f"thruster {which} already failed")
    ok = tuple(h and i != which for i, h in enumerate(state.thruster_ok))
    healthy = tuple(i for i, h in enumerate(ok) if h)
    if len(healthy) < 2:
        return replace(state, thruster_ok=ok)
    if which in THRUSTER_PAIRS[state.active_pair]:
        new_pair = THRUSTER_PAIRS.index(healthy)
        dwell = state.dwell_s + PAIR_OFFSET_RAD / omega_max
        return replace(state, thruster_ok=ok, active_pair=new_pair, dwell_s=dwell)
    return replace(state, thruster_ok=ok)


@dataclass(frozen=True)
class TrajectoryRow:
    t: float
    east: float
    north: float
    heading: float
    wp_index: int
    heading_error: float


@dataclass
class TrajectoryLog:
    rows: list[TrajectoryRow]
    status: str
    dt: float
    reach_times: list[tuple[int, float]] = field(default_factory=list)

    def positions(self) -> list[LocalPoint]:
        return [LocalPoint(r.east, r.north) for r in self.rows]

    def traveled_length(self) -> float:
        pts = self.positions()
        return sum(dist(a, b) for a, b in zip(pts, pts[1:]))


@dataclass
class MissionResult:
    log: TrajectoryLog
    samples: list[EnvSample]
    events: list[DetectionEvent]


def run_mission(
    path: MissionPath,
    cfg: SimConfig,
    gains: PidGains,
    env: EnvField,
    occ: OccurrenceField,
    failures: list[tuple[float, int]] | None = None,
    seed: int | np.random.SeedSequence = 0,
) -> MissionResult:
    """Track the mission waypoints, sampling the environment along the way.

    A waypoint counts as reached when the *reported* position enters the
    acceptance radius.  Water parameters (noisy) and a sonar ping are sampled
    every ``sample_interval``; readings are taken at the true position while
    the recorded coordinate is the GPS fix.  The returned status is one of
    completed / timeout / immobilized.
    """
    if not path.waypoints:
        raise ValueError("mission path is empty")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    gps_seq, sensor_seq, detect_seq = ss.spawn(3)
    gps_rng = np.random.default_rng(gps_seq)
    sensor_rng = np.random.default_rng(sensor_seq)
    detect_rng = np.random.default_rng(detect_seq)

    wps = path.waypoints
    if len(wps) > 1 and dist(wps[0].point, wps[1].point) > 1e-12:
        heading0 = los_heading(wps[0].point, wps[1].point)
    else:
        heading0 = 0.0
    state = VehicleState(pos=wps[0].point, heading=heading0, speed=cfg.cruise_speed)
    pid = PidState()
    wp_i = 0
    step = 0
    sample_every = max(1, round(cfg.sample_interval / cfg.dt))
    max_t = cfg.max_mission_time
    if max_t is None:
        max_t = 4.0 * path.total_length / cfg.cruise_speed + 120.0
    pending = sorted(failures or [], key=lambda f: f[0])
    fail_i = 0

    rows: list[TrajectoryRow] = []
    reach_times: list[tuple[int, float]] = []
    samples: list[EnvSample] = []
    events: list[DetectionEvent] = []
    status = STATUS_TIMEOUT

    while True:
        t = step * cfg.dt
        state = replace(state, t=t)
        while fail_i < len(pending) and pending[fail_i][0] <= t:
            idx = pending[fail_i][1]
            if state.thruster_ok[idx]:
                state = fail_thruster(state, idx, cfg.omega_max)
            else:
                warnings.warn(f"scheduled failure of already-failed thruster {idx}", stacklevel=2)
            fail_i += 1

        reported = reported_position(state, cfg, gps_rng)
        while wp_i < len(wps) and dist(reported, wps[wp_i].point) <= cfg.acceptance_radius:
            reach_times.append((wp_i, t))
            wp_i += 1
        if wp_i >= len(wps):
            status = STATUS_COMPLETED
            break
        if not state.can_move:
            status = STATUS_IMMOBILIZED
            break
        if t >= max_t:
            status = STATUS_TIMEOUT
            break

        error = wrap_angle(los_heading(reported, wps[wp_i].point) - state.heading)
        if state.dwell_s > 0.0:
            omega = 0.0
        else:
            omega, pid = pid_step(gains, pid, error, cfg.dt)
        rows.append(
            TrajectoryRow(t, state.pos.east, state.pos.north, state.heading, wp_i, error)
        )
        if step > 0 and step % sample_every == 0:
            reading = eval_field(env, state.pos, noisy=True, rng=sensor_rng, t=t)
            samples.append(replace(reading, pos=reported))
            ping = detect(occ, env, state.pos, t, detect_rng)
            events.append(replace(ping, pos=reported))
        state = step_vehicle(state, omega, cfg)
        step += 1

    return MissionResult(TrajectoryLog(rows, status, cfg.dt, reach_times), samples, events)


def format_trajectory(log: TrajectoryLog) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_HEADER)
    for r in log.rows:
        writer.writerow(
            [repr(r.t), repr(r.east), repr(r.north), repr(r.heading), r.wp_index, log.status]
        )
    return buf.getvalue()


def parse_trajectory(text: str) -> TrajectoryLog:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("trajectory file is empty: missing header row") from None
    if tuple(header) != TRAJECTORY_HEADER:
        raise ValueError(f"line 1: bad header {header!r}")
    rows: list[TrajectoryRow] = []
    status = STATUS_COMPLETED
    prev_t: float | None = None
    dt = 0.0
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(TRAJECTORY_HEADER):
            raise ValueError(f"line {lineno}: expected {len(TRAJECTORY_HEADER)} fields")
        t, east, north, heading = (float(x) for x in row[:4])
        rows.append(TrajectoryRow(t, east, north, heading, int(row[4]), 0.0))
        status = row[5]
        if prev_t is not None:
            dt = t - prev_t
        prev_t = t
    return TrajectoryLog(rows, status, dt)
