"""Shared builders for the test suite."""

from __future__ import annotations

import math

import numpy as np
import pytest

import thermoflock as tf


def sixty_degree_state(temps=(1.0, 1.0)) -> tf.SystemState:
    """Two agents one unit apart, headings sixty degrees apart.

    The mirrored +-30 degree form makes the velocity diameter exactly 1.0 in
    floating point (difference vector (0, 1)); the smallest velocity inner
    product evaluates to 1/2 up to one ulp.
    """
    half_root3 = math.sqrt(3.0) / 2.0
    return tf.SystemState(
        0.0,
        [[0.0, 0.0], [1.0, 0.0]],
        [[half_root3, -0.5], [half_root3, 0.5]],
        temps,
    )


def two_agent_params(kappa1, alpha=2.0, kappa2=1.0, zeta=None) -> tf.SystemParams:
    return tf.SystemParams(
        n_agents=2,
        dim=2,
        kappa1=kappa1,
        kappa2=kappa2,
        alpha=alpha,
        zeta=zeta or tf.KernelSpec(),
    )


def random_unit_rows(rng, n, d):
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1)[:, None]


def random_state(seed, n_agents=None, dim=None, min_gap=0.3) -> tf.SystemState:
    """Well-separated random state for property tests; deterministic in seed."""
    rng = np.random.default_rng(seed)
    n = n_agents or int(rng.integers(2, 7))
    d = dim or int(rng.integers(1, 4))
    positions = np.empty((n, d))
    count = 0
    while count < n:
        candidate = rng.uniform(-2.0, 2.0, d)
        if count == 0 or np.min(np.linalg.norm(positions[:count] - candidate, axis=1)) >= min_gap:
            positions[count] = candidate
            count += 1
    velocities = random_unit_rows(rng, n, d)
    temperatures = rng.uniform(0.5, 2.0, n)
    return tf.SystemState(0.0, positions, velocities, temperatures)


def params_for(state, seed=0, alpha=None) -> tf.SystemParams:
    rng = np.random.default_rng(seed + 77)
    return tf.SystemParams(
        n_agents=state.n_agents,
        dim=state.dim,
        kappa1=float(rng.uniform(0.2, 4.0)),
        kappa2=float(rng.uniform(0.2, 4.0)),
        alpha=alpha if alpha is not None else float(rng.uniform(0.3, 2.5)),
    )


def capped_scenario(seed, n_agents=6, dim=3, cap=0.3, temp_range=(0.7, 1.5)) -> tf.ScenarioSpec:
    return tf.ScenarioSpec(
        kind="random_cap",
        seed=seed,
        n_agents=n_agents,
        dim=dim,
        velocity_cap_angle=cap,
        position_box=3.5,
        min_initial_gap=0.5,
        temp_range=temp_range,
    )


@pytest.fixture(scope="session")
def sixty_run():
    """Certified sixty-degree run used by several diagnostics tests."""
    state = sixty_degree_state()
    params = two_agent_params(kappa1=3.0)
    cert = tf.check_thm32(state, params)
    cfg = tf.IntegratorConfig(t_end=50.0, rel_tol=1e-11, abs_tol=1e-13)
    traj = tf.run(state, params, cfg, output_dt=0.1)
    frames = tf.compute_frames(traj.samples, params, cert)
    return state, params, cert, traj, frames
