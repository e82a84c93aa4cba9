"""Fixed-step reference integrator for cross-validating the adaptive stepper.

Classical 4th-order Runge-Kutta at a constant step, with the same
per-step velocity renormalization, written directly on the (positions,
velocities, temperatures) arrays.  Apart from the shared right-hand side it
has no code in common with the adaptive path, so agreement between the two is
meaningful evidence rather than a shared-bug tautology.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DomainError, SystemParams, SystemState, min_pairwise_distance, rhs_arrays


class OracleCollisionError(RuntimeError):
    """The reference run hit the collision threshold (it cannot localize events)."""

    def __init__(self, step_index: int, distance: float):
        self.step_index = step_index
        self.distance = distance
        super().__init__(
            f"collision threshold reached at fixed step {step_index} "
            f"(min distance {distance:.3e})"
        )


@dataclass(frozen=True)
class OracleConfig:
    dt: float = 1e-5
    t_end: float = 1.0
    collision_threshold: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.dt <= 1e-3:
            raise DomainError("oracle dt must satisfy 0 < dt <= 1e-3")
        if self.t_end < 0.0:
            raise DomainError("t_end must be >= 0")
        if not self.collision_threshold > 0.0:
            raise DomainError("collision_threshold must be > 0")


def run_oracle(initial: SystemState, params: SystemParams, cfg: OracleConfig) -> SystemState:
    """March the system to ``t_end`` and return the endpoint state."""
    pos = initial.positions.copy()
    vel = initial.velocities.copy()
    temp = initial.temperatures.copy()

    n_full, remainder = divmod(cfg.t_end, cfg.dt)
    steps = [cfg.dt] * int(n_full)
    if remainder > 1e-12 * max(cfg.dt, cfg.t_end):
        steps.append(remainder)

    t = 0.0
    for index, h in enumerate(steps):
        dist, _ = min_pairwise_distance(pos)
        if dist <= cfg.collision_threshold:
            raise OracleCollisionError(index, dist)

        dx1, dv1, dt1 = rhs_arrays(pos, vel, temp, params)
        dx2, dv2, dt2 = rhs_arrays(
            pos + 0.5 * h * dx1, vel + 0.5 * h * dv1, temp + 0.5 * h * dt1, params
        )
        dx3, dv3, dt3 = rhs_arrays(
            pos + 0.5 * h * dx2, vel + 0.5 * h * dv2, temp + 0.5 * h * dt2, params
        )
        dx4, dv4, dt4 = rhs_arrays(pos + h * dx3, vel + h * dv3, temp + h * dt3, params)

        pos = pos + (h / 6.0) * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4)
        vel = vel + (h / 6.0) * (dv1 + 2.0 * dv2 + 2.0 * dv3 + dv4)
        temp = temp + (h / 6.0) * (dt1 + 2.0 * dt2 + 2.0 * dt3 + dt4)
        vel = vel / np.linalg.norm(vel, axis=1)[:, None]
        t += h

    return SystemState(time=cfg.t_end, positions=pos, velocities=vel, temperatures=temp)
