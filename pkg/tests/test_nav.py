"""Guidance, PID, kinematics (analytic arc oracle), redundancy, missions."""

import math

import pytest

from aquaplan.envsim import EnvField, OccurrenceField, ParamField
from aquaplan.geo import LocalPoint, dist
from aquaplan.mission import TAG_TRANSIT, path_from_points
from aquaplan.nav import (
    PAIR_OFFSET_RAD,
    STATUS_COMPLETED,
    STATUS_IMMOBILIZED,
    STATUS_TIMEOUT,
    PidGains,
    PidState,
    SimConfig,
    VehicleState,
    fail_thruster,
    format_trajectory,
    los_heading,
    parse_trajectory,
    pid_step,
    run_mission,
    step_vehicle,
    wrap_angle,
)

FLAT_ENV = EnvField(
    ph=ParamField(7.0),
    temp_c=ParamField(20.0),
    tds_ppm=ParamField(150.0),
    do_mgl=ParamField(8.0),
)
NO_FISH = OccurrenceField((0.0, 0.0, 0.0, 0.0), -50.0)


def straight_path(length=200.0):
    return path_from_points(
        [LocalPoint(0.0, 0.0), LocalPoint(length, 0.0)], TAG_TRANSIT
    )


class TestAngles:
    def test_wrap_into_half_open_interval(self, rng):
        for a in rng.uniform(-50, 50, 500):
            w = wrap_angle(float(a))
            assert -math.pi < w <= math.pi
            assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)
            assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)

    def test_los_east_is_zero(self):
        assert los_heading(LocalPoint(0, 0), LocalPoint(5, 0)) == 0.0

    def test_los_north_is_half_pi(self):
        assert los_heading(LocalPoint(0, 0), LocalPoint(0, 5)) == pytest.approx(math.pi / 2)

    def test_los_reverse_bearing(self, rng):
        for _ in range(1000):
            a = LocalPoint(*rng.uniform(-100, 100, 2))
            b = LocalPoint(*rng.uniform(-100, 100, 2))
            if dist(a, b) < 1e-6:
                continue
            fwd = los_heading(a, b)
            back = los_heading(b, a)
            assert wrap_angle(fwd - (back + math.pi)) == pytest.approx(0.0, abs=1e-12)

    def test_coincident_rejected(self):
        with pytest.raises(ValueError):
            los_heading(LocalPoint(1, 1), LocalPoint(1, 1))


class TestPid:
    def test_zero_error_zero_command(self):
        gains = PidGains(kp=2.0, ki=0.5, kd=0.1)
        cmd, _ = pid_step(gains, PidState(), 0.0, 0.1)
        assert cmd == 0.0

    def test_pure_p(self):
        gains = PidGains(kp=2.0, ki=0.0, kd=0.0)
        cmd, _ = pid_step(gains, PidState(), 0.3, 0.1)
        assert cmd == pytest.approx(0.6, abs=1e-12)

    def test_output_clamp(self):
        gains = PidGains(kp=100.0, ki=0.0, kd=0.0, output_clamp=1.0)
        cmd, _ = pid_step(gains, PidState(), 0.5, 0.1)
        assert cmd == 1.0

    def test_integral_antiwindup(self):
        gains = PidGains(kp=0.0, ki=1.0, kd=0.0, integral_clamp=0.2)
        state = PidState()
        for _ in range(100):
            _, state = pid_step(gains, state, 1.0, 0.1)
        assert state.integral == pytest.approx(0.2)

    def test_derivative_on_wrapped_difference(self):
        gains = PidGains(kp=0.0, ki=0.0, kd=1.0, output_clamp=100.0)
        _, state = pid_step(gains, PidState(), 3.1, 0.1)
        cmd, _ = pid_step(gains, state, -3.1, 0.1)
        # raw difference -6.2 wraps to ~ +0.083, not -62 rad/s
        assert cmd == pytest.approx(wrap_angle(-6.2) / 0.1, abs=1e-9)

    def test_step_response_settles(self):
        # Heading plant theta' = u with the default desk-tuned gains.
        gains = PidGains()
        dt = 0.1
        theta, state = 0.0, PidState()
        target = 1.0
        settle_t = None
        for i in range(600):
            err = wrap_angle(target - theta)
            cmd, state = pid_step(gains, state, err, dt)
            theta += cmd * dt
            if abs(wrap_angle(target - theta)) < 0.02:
                settle_t = i * dt
                break
        assert settle_t is not None and settle_t < 30.0


class TestStepVehicle:
    CFG = SimConfig(dt=0.1, cruise_speed=1.0)

    def test_straight_line(self):
        state = VehicleState(pos=LocalPoint(0, 0), heading=0.0)
        for _ in range(10):
            state = step_vehicle(state, 0.0, self.CFG)
        assert state.pos.east == pytest.approx(1.0, abs=1e-12)
        assert state.pos.north == pytest.approx(0.0, abs=1e-12)
        assert state.t == pytest.approx(1.0)

    def test_exact_circle_closure(self):
        # Constant turn rate traces a circle of radius v/omega; pick a step
        # count that makes exactly one full revolution.
        n_steps = 600
        omega = 2 * math.pi / (n_steps * self.CFG.dt)
        radius = self.CFG.cruise_speed / omega
        state = VehicleState(pos=LocalPoint(0, 0), heading=0.0)
        center = LocalPoint(0.0, radius)
        for _ in range(n_steps):
            state = step_vehicle(state, omega, self.CFG)
            assert dist(state.pos, center) == pytest.approx(radius, abs=1e-6)
        assert dist(state.pos, LocalPoint(0, 0)) < 1e-6
        assert wrap_angle(state.heading) == pytest.approx(0.0, abs=1e-9)

    def test_radius_matches_speed_over_omega(self):
        omega = 0.1
        state = VehicleState(pos=LocalPoint(0, 0), heading=0.0)
        center = LocalPoint(0.0, self.CFG.cruise_speed / omega)
        for _ in range(100):
            state = step_vehicle(state, omega, self.CFG)
            assert dist(state.pos, center) == pytest.approx(10.0, abs=1e-9)

    def test_immobilized_vehicle_holds(self):
        state = VehicleState(
            pos=LocalPoint(5, 5), thruster_ok=(True, False, False), active_pair=0
        )
        moved = step_vehicle(state, 0.3, self.CFG)
        assert moved.pos == state.pos
        assert moved.t == pytest.approx(0.1)

    def test_dwell_consumes_without_motion(self):
        state = VehicleState(pos=LocalPoint(0, 0), dwell_s=0.25)
        state = step_vehicle(state, 0.5, self.CFG)
        assert state.pos == LocalPoint(0, 0)
        assert state.dwell_s == pytest.approx(0.15)


class TestFailThruster:
    def test_non_active_failure_is_free(self):
        state = VehicleState(pos=LocalPoint(0, 0))
        failed = fail_thruster(state, 2)
        assert failed.active_pair == 0
        assert failed.dwell_s == 0.0
        assert failed.thruster_ok == (True, True, False)

    def test_active_failure_switches_pair_with_dwell(self):
        state = VehicleState(pos=LocalPoint(0, 0))
        failed = fail_thruster(state, 0, omega_max=0.5)
        assert failed.thruster_ok == (False, True, True)
        assert failed.active_pair == 2  # pair (1, 2)
        assert failed.dwell_s == pytest.approx(4.1887902047863905, abs=1e-12)
        assert failed.dwell_s == pytest.approx(PAIR_OFFSET_RAD / 0.5)

    def test_double_failure_immobilizes(self):
        state = fail_thruster(VehicleState(pos=LocalPoint(0, 0)), 0)
        state = fail_thruster(state, 1)
        assert not state.can_move

    def test_failing_dead_thruster_rejected(self):
        state = fail_thruster(VehicleState(pos=LocalPoint(0, 0)), 0)
        with pytest.raises(ValueError, match="already failed"):
            fail_thruster(state, 0)


def seven_waypoint_track():
    # Shape inspired by a seven-turning-point lake traverse.
    pts = [
        LocalPoint(0.0, 0.0),
        LocalPoint(90.0, 20.0),
        LocalPoint(160.0, 0.0),
        LocalPoint(200.0, 70.0),
        LocalPoint(120.0, 110.0),
        LocalPoint(50.0, 80.0),
        LocalPoint(-10.0, 120.0),
    ]
    return path_from_points(pts, TAG_TRANSIT)


class TestRunMission:
    def test_seven_waypoints_completed_in_order(self):
        result = run_mission(
            seven_waypoint_track(), SimConfig(), PidGains(), FLAT_ENV, NO_FISH, seed=0
        )
        assert result.log.status == STATUS_COMPLETED
        assert [i for i, _ in result.log.reach_times] == list(range(7))
        times = [t for _, t in result.log.reach_times]
        assert times == sorted(times)

    def test_wp_index_is_monotone(self):
        result = run_mission(
            seven_waypoint_track(), SimConfig(), PidGains(), FLAT_ENV, NO_FISH, seed=0
        )
        indices = [r.wp_index for r in result.log.rows]
        assert all(b >= a for a, b in zip(indices, indices[1:]))

    def test_timestamps_advance_by_dt(self):
        result = run_mission(
            straight_path(40.0), SimConfig(), PidGains(), FLAT_ENV, NO_FISH, seed=0
        )
        ts = [r.t for r in result.log.rows]
        assert all(abs((b - a) - 0.1) < 1e-9 for a, b in zip(ts, ts[1:]))

    def test_timeout_status(self):
        cfg = SimConfig(max_mission_time=1.0)
        result = run_mission(
            straight_path(500.0), cfg, PidGains(), FLAT_ENV, NO_FISH, seed=0
        )
        assert result.log.status == STATUS_TIMEOUT

    def test_cross_track_error_decays_on_straight_leg(self):
        # Start 5 m off the leg; |north| decays after the initial transient
        # and finishes under 0.5 m.
        path = path_from_points(
            [LocalPoint(0.0, 5.0), LocalPoint(0.0, 5.0), LocalPoint(200.0, 0.0)],
            TAG_TRANSIT,
        )
        result = run_mission(path, SimConfig(), PidGains(), FLAT_ENV, NO_FISH, seed=0)
        assert result.log.status == STATUS_COMPLETED
        cross = [abs(r.north) for r in result.log.rows if r.t >= 10.0]
        assert cross, "mission finished before the checked window"
        assert all(b <= a + 1e-9 for a, b in zip(cross, cross[1:]))
        assert cross[-1] < 0.5

    def test_traveled_length_bounded(self):
        path = seven_waypoint_track()
        result = run_mission(path, SimConfig(), PidGains(), FLAT_ENV, NO_FISH, seed=0)
        traveled = result.log.traveled_length()
        assert traveled >= dist(path.points[0], path.points[-1]) - 1e-9
        assert traveled <= 1.3 * path.total_length

    def test_heading_always_wrapped(self):
        result = run_mission(
            seven_waypoint_track(), SimConfig(), PidGains(), FLAT_ENV, NO_FISH, seed=0
        )
        assert all(-math.pi < r.heading <= math.pi for r in result.log.rows)

    def test_single_failure_still_completes_with_dwell(self):
        result = run_mission(
            seven_waypoint_track(),
            SimConfig(),
            PidGains(),
            FLAT_ENV,
            NO_FISH,
            failures=[(30.0, 0)],
            seed=0,
        )
        assert result.log.status == STATUS_COMPLETED
        holds = _stationary_run_length(result.log, t_from=30.0)
        assert holds == pytest.approx(42, abs=1)  # ~4.19 s at dt=0.1

    def test_double_failure_immobilizes(self):
        result = run_mission(
            seven_waypoint_track(),
            SimConfig(),
            PidGains(),
            FLAT_ENV,
            NO_FISH,
            failures=[(10.0, 0), (20.0, 1)],
            seed=0,
        )
        assert result.log.status == STATUS_IMMOBILIZED

    def test_deterministic_given_seed(self):
        cfg = SimConfig(gps_noise_std=0.5, acceptance_radius=3.0)
        a = run_mission(straight_path(60.0), cfg, PidGains(), FLAT_ENV, NO_FISH, seed=5)
        b = run_mission(straight_path(60.0), cfg, PidGains(), FLAT_ENV, NO_FISH, seed=5)
        assert a.log.rows == b.log.rows
        assert a.samples == b.samples

    def test_gps_mode_completes(self):
        cfg = SimConfig(gps_noise_std=3.3, acceptance_radius=10.0)
        result = run_mission(
            seven_waypoint_track(), cfg, PidGains(), FLAT_ENV, NO_FISH, seed=2
        )
        assert result.log.status == STATUS_COMPLETED

    def test_sampling_cadence(self):
        result = run_mission(
            straight_path(60.0), SimConfig(), PidGains(), FLAT_ENV, NO_FISH, seed=0
        )
        assert len(result.samples) == len(result.events)
        assert result.samples, "expected samples on a 60 s leg"
        dts = {round(b.t - a.t, 9) for a, b in zip(result.samples, result.samples[1:])}
        assert dts == {1.0}


def _stationary_run_length(log, t_from):
    best = run = 0
    prev = None
    for row in log.rows:
        if row.t < t_from:
            continue
        cur = (row.east, row.north)
        run = run + 1 if prev == cur else 1
        prev = cur
        best = max(best, run)
    return best


class TestTrajectoryCsv:
    def test_round_trip(self):
        result = run_mission(
            straight_path(30.0), SimConfig(), PidGains(), FLAT_ENV, NO_FISH, seed=0
        )
        text = format_trajectory(result.log)
        parsed = parse_trajectory(text)
        assert parsed.status == result.log.status
        assert len(parsed.rows) == len(result.log.rows)
        assert parsed.rows[5].east == result.log.rows[5].east
