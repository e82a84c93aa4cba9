import math

import numpy as np
import pytest

import thermoflock as tf
from thermoflock.integrator import DT_UNDERFLOW, locate_collision, step
from conftest import capped_scenario, random_state, sixty_degree_state, two_agent_params


def certified_scenario():
    state = tf.build_random(capped_scenario(42, n_agents=6, dim=3))
    params = tf.SystemParams(6, 3, 20.0, 1.0, 1.5)
    cert = tf.check_thm32(state, params)
    assert cert.satisfied
    return state, params, cert


class TestStep:
    def test_equilibrium_accepts_at_dt_max(self):
        state = tf.SystemState(
            0.0, [[0.0, 0.0], [1.0, 0.0], [0.5, 1.0]], [[0.0, 1.0]] * 3, [1.0] * 3
        )
        params = tf.SystemParams(3, 2, 2.0, 1.0, 1.5)
        cfg = tf.IntegratorConfig(t_end=10.0)
        attempt = step(state, params, cfg, cfg.dt_max)
        assert attempt.accepted
        assert attempt.error_norm == 0.0
        assert attempt.dt_used == cfg.dt_max
        assert attempt.state.time == cfg.dt_max

    def test_oversized_step_is_rejected_with_smaller_proposal(self):
        state = tf.build_random(capped_scenario(3, n_agents=5, dim=2))
        params = tf.SystemParams(5, 2, 30.0, 5.0, 1.5)
        cfg = tf.IntegratorConfig(t_end=10.0, rel_tol=1e-12, abs_tol=1e-14)
        attempt = step(state, params, cfg, 2.0)
        assert not attempt.accepted
        assert attempt.state is None
        assert attempt.dt_next < 2.0

    @staticmethod
    def _step_until_accepted(state, params, cfg, dt_try):
        for _ in range(20):
            attempt = step(state, params, cfg, dt_try)
            if attempt.accepted:
                return attempt
            dt_try = attempt.dt_next
        raise AssertionError("no accepted step in 20 proposals")

    def test_accepted_step_has_exactly_unit_speeds(self):
        state, params, _ = certified_scenario()
        attempt = self._step_until_accepted(state, params, tf.IntegratorConfig(t_end=1.0), 1e-2)
        speeds = np.linalg.norm(attempt.state.velocities, axis=1)
        assert np.max(np.abs(speeds - 1.0)) <= 1e-15
        assert attempt.speed_drift <= 1e-9

    def test_dense_segment_matches_endpoints(self):
        state, params, _ = certified_scenario()
        attempt = self._step_until_accepted(state, params, tf.IntegratorConfig(t_end=1.0), 1e-2)
        seg = attempt.dense
        y_start = seg.positions_at(seg.t0)
        assert np.allclose(y_start, state.positions, rtol=0.0, atol=0.0)
        y_end = seg.positions_at(seg.t1)
        assert np.allclose(y_end, attempt.state.positions, rtol=0.0, atol=0.0)
        mid = seg.state_at(seg.t0 + 0.5 * seg.dt)
        assert np.max(np.abs(np.linalg.norm(mid.velocities, axis=1) - 1.0)) <= 1e-15


class TestRun:
    def test_zero_horizon_returns_initial_only(self):
        state = sixty_degree_state()
        traj = tf.run(state, two_agent_params(3.0), tf.IntegratorConfig(t_end=0.0), 0.1)
        assert traj.termination.kind == "reached_t_end"
        assert len(traj.samples) == 1
        assert traj.samples[0] is state

    def test_zero_coupling_is_exact_straight_line_motion(self):
        state = random_state(8, n_agents=4, dim=3)
        params = tf.SystemParams(4, 3, 0.0, 0.0, 1.0)
        traj = tf.run(state, params, tf.IntegratorConfig(t_end=1.0), output_dt=0.25)
        expected = state.positions + 1.0 * state.velocities
        assert np.max(np.abs(traj.samples[-1].positions - expected)) <= 1e-12
        assert np.array_equal(traj.samples[-1].velocities, state.velocities)

    def test_head_on_collision_time_and_frozen_velocities(self):
        state = tf.build_example21(2.0)
        params = tf.SystemParams(2, 2, 1.0, 1.0, 1.7)
        traj = tf.run(state, params, tf.IntegratorConfig(t_end=3.0), output_dt=0.1)
        assert traj.termination.kind == "collision"
        event = traj.termination.event
        assert event.time == pytest.approx(1.0, abs=1e-6)
        assert event.pair == (0, 1)
        assert event.min_distance_at_event <= 1e-8
        for s in traj.samples:
            assert np.array_equal(s.velocities, state.velocities)
            # positions advance linearly at unit speed
            assert np.allclose(
                s.positions, state.positions + s.time * state.velocities, atol=1e-12
            )

    def test_sample_times_are_output_multiples(self):
        state, params, _ = certified_scenario()
        traj = tf.run(state, params, tf.IntegratorConfig(t_end=2.0), output_dt=0.25)
        times = [s.time for s in traj.samples]
        assert times == pytest.approx([0.25 * k for k in range(9)], abs=1e-12)
        assert all(b > a for a, b in zip(times, times[1:]))

    def test_terminal_sample_appended_off_cadence(self):
        state, params, _ = certified_scenario()
        traj = tf.run(state, params, tf.IntegratorConfig(t_end=1.0), output_dt=0.3)
        times = [s.time for s in traj.samples]
        assert times[-1] == 1.0
        assert times[:-1] == pytest.approx([0.0, 0.3, 0.6, 0.9], abs=1e-12)

    def test_certified_run_reaches_horizon_without_events(self):
        state, params, cert = certified_scenario()
        traj = tf.run(state, params, tf.IntegratorConfig(t_end=20.0), output_dt=0.5)
        assert traj.termination.kind == "reached_t_end"
        assert traj.termination.event is None
        for s in traj.samples:
            dist, _ = tf.model.min_pairwise_distance(s.positions)
            assert dist > 0.0

    def test_unit_speed_drift_budget(self):
        state, params, _ = certified_scenario()
        traj = tf.run(state, params, tf.IntegratorConfig(t_end=10.0), output_dt=0.5)
        assert traj.max_speed_drift <= 1e-9
        assert traj.max_projection_residual <= 1e-15

    def test_bitwise_determinism(self):
        state, params, _ = certified_scenario()
        cfg = tf.IntegratorConfig(t_end=5.0)
        a = tf.run(state, params, cfg, output_dt=0.5)
        b = tf.run(state, params, cfg, output_dt=0.5)
        assert a.n_steps == b.n_steps
        for sa, sb in zip(a.samples, b.samples):
            assert np.array_equal(sa.positions, sb.positions)
            assert np.array_equal(sa.velocities, sb.velocities)
            assert np.array_equal(sa.temperatures, sb.temperatures)

    def test_tolerance_refinement_improves_oracle_agreement(self):
        # Violent far-field coupling so the error controller, not the
        # singularity guard, picks the step size.
        state = random_state(19, n_agents=3, dim=2, min_gap=1.5)
        params = tf.SystemParams(3, 2, 150.0, 20.0, 2.5)
        reference = tf.run_oracle(state, params, tf.OracleConfig(dt=2e-5, t_end=1.0))
        ref_vec = np.concatenate(
            [reference.positions.ravel(), reference.velocities.ravel(), reference.temperatures]
        )
        errors = []
        for k in range(5):
            rel_tol = 1e-5 * 4.0**-k  # two halvings per hop
            traj = tf.run(
                state,
                params,
                tf.IntegratorConfig(t_end=1.0, rel_tol=rel_tol, abs_tol=rel_tol * 1e-2),
                output_dt=0.5,
            )
            end = traj.samples[-1]
            end_vec = np.concatenate(
                [end.positions.ravel(), end.velocities.ravel(), end.temperatures]
            )
            errors.append(float(np.max(np.abs(end_vec - ref_vec))))
        assert all(b < a for a, b in zip(errors, errors[1:]))

    def test_adaptive_matches_oracle_endpoint(self):
        state = random_state(23, n_agents=3, dim=3)
        params = tf.SystemParams(3, 3, 3.0, 1.0, 1.5)
        traj = tf.run(state, params, tf.IntegratorConfig(t_end=1.0), output_dt=0.25)
        reference = tf.run_oracle(state, params, tf.OracleConfig(dt=1e-3, t_end=1.0))
        end = traj.samples[-1]
        assert np.max(np.abs(end.positions - reference.positions)) <= 1e-7
        assert np.max(np.abs(end.velocities - reference.velocities)) <= 1e-7
        assert np.max(np.abs(end.temperatures - reference.temperatures)) <= 1e-7

    def test_thm31_certified_decay_bound(self):
        # the only reference data certifying the explicit-diameter condition
        state = sixty_degree_state()
        params = two_agent_params(kappa1=20.0)
        cert = tf.check_thm31(state, params)
        assert cert.satisfied
        cfg = tf.IntegratorConfig(t_end=50.0, rel_tol=1e-11, abs_tol=1e-13)
        traj = tf.run(state, params, cfg, output_dt=0.5)
        assert traj.termination.kind == "reached_t_end"
        frames = tf.compute_frames(traj.samples, params, cert)
        report = tf.check_decay_bounds(frames, cert)
        assert report.passed
        # the endpoint velocity diameter sits under the certified envelope
        final = frames[-1]
        assert final.d_v <= cert.d_v0 * math.exp(-cert.rate_v * 50.0) * 1.01 + 1e-10
        assert all(f.d_x < cert.d_x_inf for f in frames)

    def test_run_rejects_initial_state_below_threshold(self):
        state = tf.SystemState(
            0.0, [[0.0, 0.0], [5e-9, 0.0]], [[1.0, 0.0], [1.0, 0.0]], [1.0, 1.0]
        )
        with pytest.raises(tf.CollisionError):
            tf.run(state, two_agent_params(1.0), tf.IntegratorConfig(t_end=1.0), 0.1)


class TestLocateCollision:
    def test_event_localization_tolerance(self):
        state = tf.build_example21(1.0)
        params = tf.SystemParams(2, 2, 1.0, 1.0, 0.5)
        cfg = tf.IntegratorConfig(t_end=1.0, event_time_tol=1e-10)
        traj = tf.run(state, params, cfg, output_dt=0.1)
        event = traj.termination.event
        # contact happens when the gap 1 - 2t hits the threshold
        exact = (1.0 - cfg.collision_threshold) / 2.0
        assert event.time == pytest.approx(exact, abs=1e-9)

    def test_invalid_bracket_raises(self):
        state, params, _ = certified_scenario()
        attempt = step(state, params, tf.IntegratorConfig(t_end=1.0), 1e-3)
        with pytest.raises(ValueError):
            locate_collision(attempt.dense, collision_threshold=1e-8, event_time_tol=1e-10)

    def test_underflow_constant(self):
        assert DT_UNDERFLOW == 1e-15
