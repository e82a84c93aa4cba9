import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import thermoflock as tf
from conftest import params_for, random_state

SEEDS = st.integers(min_value=0, max_value=2**31 - 1)


class TestKernels:
    def test_phi_values(self):
        assert tf.phi_eval(1.0, 1.7) == 1.0
        assert tf.phi_eval(4.0, 0.5) == 0.5
        assert tf.phi_eval(0.25, 2.0) == 16.0

    def test_phi_domain(self):
        with pytest.raises(tf.DomainError):
            tf.phi_eval(0.0, 1.0)
        with pytest.raises(tf.DomainError):
            tf.phi_eval(-1.0, 1.0)
        with pytest.raises(tf.DomainError):
            tf.phi_eval(1.0, 0.0)

    def test_phi_strictly_decreasing(self):
        r = np.linspace(0.05, 10.0, 200)
        for alpha in (0.5, 1.0, 1.7, 3.0):
            values = tf.phi_eval(r, alpha)
            assert np.all(np.diff(values) < 0.0)

    def test_zeta_constant(self):
        spec = tf.KernelSpec("constant_one")
        assert tf.zeta_eval(0.0, spec) == 1.0
        assert tf.zeta_eval(123.4, spec) == 1.0

    def test_zeta_rational(self):
        assert tf.zeta_eval(1.0, tf.KernelSpec("rational_decay", 2.0)) == 0.5
        expected = (1.0 + 9.0) ** -0.5
        assert tf.zeta_eval(3.0, tf.KernelSpec("rational_decay", 1.0)) == pytest.approx(
            expected, abs=1e-6
        )

    def test_zeta_singular(self):
        spec = tf.KernelSpec("singular_power", 1.5)
        assert tf.zeta_eval(2.0, spec) == 2.0**-1.5
        with pytest.raises(tf.DomainError):
            tf.zeta_eval(0.0, spec)

    def test_zeta_bounded_families_monotone_in_unit_interval(self):
        r = np.linspace(0.0, 20.0, 400)
        for spec in (tf.KernelSpec("constant_one"), tf.KernelSpec("rational_decay", 2.0)):
            values = tf.zeta_eval(r, spec)
            assert values[0] == 1.0
            assert np.all((0.0 <= values) & (values <= 1.0))
            assert np.all(np.diff(values) <= 0.0)

    def test_kernel_spec_validation(self):
        with pytest.raises(tf.DomainError):
            tf.KernelSpec("exponential")
        with pytest.raises(tf.DomainError):
            tf.KernelSpec("rational_decay", -1.0)


class TestStateTypes:
    def test_agent_state_unit_norm_enforced(self):
        tf.AgentState([0.0, 0.0], [1.0, 0.0], 1.0)
        tf.AgentState([0.0, 0.0], [1.0, 1e-7], 1.0)  # norm deviation ~5e-15, tolerated
        with pytest.raises(tf.DomainError):
            tf.AgentState([0.0, 0.0], [1.0, 1e-5], 1.0)

    def test_agent_state_positive_temperature(self):
        with pytest.raises(tf.DomainError):
            tf.AgentState([0.0], [1.0], 0.0)
        with pytest.raises(tf.DomainError):
            tf.AgentState([0.0], [1.0], -2.0)

    def test_system_state_shape_checks(self):
        with pytest.raises(tf.DomainError):
            tf.SystemState(0.0, [[0.0, 0.0]], [[1.0, 0.0]], [1.0])  # n < 2
        with pytest.raises(tf.DomainError):
            tf.SystemState(0.0, [[0.0], [1.0]], [[1.0], [1.0]], [1.0])
        with pytest.raises(tf.DomainError):
            tf.SystemState(-1.0, [[0.0], [1.0]], [[1.0], [1.0]], [1.0, 1.0])

    def test_system_state_agents_round_trip(self):
        state = random_state(5)
        rebuilt = tf.SystemState.from_agents(state.time, state.agents)
        assert np.array_equal(rebuilt.positions, state.positions)
        assert np.array_equal(rebuilt.velocities, state.velocities)
        assert np.array_equal(rebuilt.temperatures, state.temperatures)

    def test_arrays_are_read_only(self):
        state = random_state(6)
        with pytest.raises(ValueError):
            state.positions[0, 0] = 9.9

    def test_system_params_validation(self):
        with pytest.raises(tf.DomainError):
            tf.SystemParams(1, 2, 1.0, 1.0, 1.0)
        with pytest.raises(tf.DomainError):
            tf.SystemParams(2, 0, 1.0, 1.0, 1.0)
        with pytest.raises(tf.DomainError):
            tf.SystemParams(2, 2, -1.0, 1.0, 1.0)
        with pytest.raises(tf.DomainError):
            tf.SystemParams(2, 2, 1.0, 1.0, 0.0)
        # zero couplings are the decoupled sanity regime and stay legal
        tf.SystemParams(2, 2, 0.0, 0.0, 1.0)


class TestVelocityRhs:
    def test_identical_velocities_give_zero(self):
        state = tf.SystemState(
            0.0, [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]],
            [[0.0, 1.0]] * 3, [1.0, 2.0, 0.5],
        )
        params = tf.SystemParams(3, 2, 2.5, 1.0, 1.3)
        assert np.all(tf.velocity_rhs(state, params) == 0.0)

    def test_head_on_pair_is_stationary(self):
        state = tf.build_example21(1.0)
        for alpha in (0.5, 1.0, 2.0):
            params = tf.SystemParams(2, 2, 1.0, 1.0, alpha)
            assert np.all(tf.velocity_rhs(state, params) == 0.0)

    def test_orthogonal_pair_hand_value(self):
        state = tf.SystemState(
            0.0, [[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0]
        )
        params = tf.SystemParams(2, 2, 1.0, 1.0, 1.0)
        dv = tf.velocity_rhs(state, params)
        assert np.allclose(dv, [[0.0, 0.5], [0.5, 0.0]], rtol=0.0, atol=1e-15)

    def test_coincident_positions_raise_with_pair(self):
        state = random_state(3, n_agents=4, dim=2)
        positions = state.positions.copy()
        positions[2] = positions[0]
        with pytest.raises(tf.CollisionError) as excinfo:
            tf.velocity_rhs(
                tf.SystemState(0.0, positions, state.velocities, state.temperatures),
                params_for(state, 3),
            )
        assert excinfo.value.pair == (0, 2)


class TestTemperatureRhs:
    def test_equal_temperatures_give_zero(self):
        state = random_state(11, n_agents=5, dim=2)
        state = tf.SystemState(0.0, state.positions, state.velocities, np.ones(5))
        assert np.all(tf.temperature_rhs(state, params_for(state, 11)) == 0.0)

    def test_two_agent_hand_value(self):
        state = tf.SystemState(
            0.0, [[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [-1.0, 0.0]], [1.0, 2.0]
        )
        params = tf.SystemParams(2, 2, 1.0, 1.0, 1.0, tf.KernelSpec("constant_one"))
        dtemp = tf.temperature_rhs(state, params)
        assert dtemp[0] == pytest.approx(0.25, abs=0.0)
        assert dtemp[1] == pytest.approx(-0.25, abs=0.0)

    def test_heat_flows_from_hot_to_cold(self):
        state = tf.SystemState(
            0.0, [[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]], [0.5, 3.0]
        )
        dtemp = tf.temperature_rhs(state, params_for(state, 1))
        assert dtemp[0] > 0.0 > dtemp[1]


# The orthogonality tolerance is the contract the integrator's unit-speed
# drift accounting leans on, hence the large case count.
@settings(max_examples=1000, deadline=None)
@given(SEEDS)
def test_velocity_rhs_orthogonal_to_velocity(seed):
    state = random_state(seed)
    dv = tf.velocity_rhs(state, params_for(state, seed))
    inner = np.sum(dv * state.velocities, axis=1)
    bound = 1e-12 * np.linalg.norm(dv, axis=1) + 1e-15
    assert np.all(np.abs(inner) <= bound)


@settings(max_examples=300, deadline=None)
@given(SEEDS)
def test_temperature_rhs_sums_to_zero(seed):
    state = random_state(seed)
    dtemp = tf.temperature_rhs(state, params_for(state, seed))
    tol = 1e-13 * max(np.max(np.abs(dtemp)), 1e-300)
    assert abs(float(np.sum(dtemp))) <= tol


@settings(max_examples=200, deadline=None)
@given(SEEDS)
def test_rhs_permutation_equivariance(seed):
    state = random_state(seed)
    params = params_for(state, seed)
    rng = np.random.default_rng(seed + 1)
    perm = rng.permutation(state.n_agents)
    permuted = tf.SystemState(
        0.0, state.positions[perm], state.velocities[perm], state.temperatures[perm]
    )
    dv = tf.velocity_rhs(state, params)
    dtemp = tf.temperature_rhs(state, params)
    assert np.allclose(tf.velocity_rhs(permuted, params), dv[perm], rtol=1e-12, atol=1e-14)
    assert np.allclose(tf.temperature_rhs(permuted, params), dtemp[perm], rtol=1e-12, atol=1e-14)


@settings(max_examples=200, deadline=None)
@given(SEEDS, st.sampled_from([2, 3]))
def test_rhs_rotation_equivariance(seed, dim):
    state = random_state(seed, dim=dim)
    params = params_for(state, seed)
    rng = np.random.default_rng(seed + 2)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    rotated = tf.SystemState(
        0.0,
        state.positions @ q.T,
        state.velocities @ q.T,
        state.temperatures,
    )
    dv = tf.velocity_rhs(state, params)
    assert np.allclose(tf.velocity_rhs(rotated, params), dv @ q.T, rtol=1e-10, atol=1e-12)
    assert np.allclose(
        tf.temperature_rhs(rotated, params),
        tf.temperature_rhs(state, params),
        rtol=1e-12,
        atol=1e-14,
    )
