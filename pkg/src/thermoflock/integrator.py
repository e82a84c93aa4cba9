"""Adaptive integration with unit-sphere projection and collision localization.

The stepper is an explicit Dormand-Prince 5(4) embedded pair with a
proportional-integral step controller and the standard quartic dense-output
interpolant.  Two model-specific guards sit on top of the error control:

* every accepted step renormalizes all velocities to exact unit length and
  records the pre-projection drift (steps whose drift exceeds a cap are
  rejected outright, so the recorded drift is bounded by construction);
* the trial step size is capped so the minimum pairwise distance cannot
  change by more than half within one step, using the unit-speed bound on
  relative velocities -- this keeps steps honest near the kernel singularity
  without regularizing it.

A run terminates at ``t_end``, at the first collision (minimum pairwise
distance crossing the collision threshold, localized by bisection on the
dense interpolant), or on step-size underflow.  Runs are bitwise
deterministic for fixed inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    CollisionError,
    DomainError,
    SystemParams,
    SystemState,
    min_pairwise_distance,
    rhs_arrays,
)

# Dormand-Prince 5(4) tableau.
_STAGE_TIMES = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# Difference between the 5th- and embedded 4th-order weights.
_ERR = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# Dense-output weights for the quartic continuous extension.
_DENSE = np.array(
    [
        -12715105075 / 11282082432,
        0.0,
        87487479700 / 32700410799,
        -10690763975 / 1880347072,
        701980252875 / 199316789632,
        -1453857185 / 822651844,
        69997945 / 29380423,
    ]
)

# Step controller constants (safety factor plus PI smoothing).
_SAFETY = 0.9
_PI_BETA = 0.04
_ERR_EXPONENT = 0.2 - 0.75 * _PI_BETA
_MAX_SHRINK = 5.0  # dt may shrink by at most this factor per decision
_MAX_GROWTH = 10.0

DT_UNDERFLOW = 1e-15


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    dt_init: float = 1e-3
    dt_max: float = 0.5
    collision_threshold: float = 1e-8
    event_time_tol: float = 1e-10
    t_end: float = 1.0
    # Floor of the per-step pre-projection | ||v|| - 1 | budget; the
    # effective cap is max(speed_drift_cap, rel_tol), so renormalization
    # stays inside the error budget without over-resolving loose runs.
    speed_drift_cap: float = 1e-9

    def __post_init__(self):
        for name in (
            "rel_tol",
            "abs_tol",
            "dt_init",
            "dt_max",
            "collision_threshold",
            "event_time_tol",
            "speed_drift_cap",
        ):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be > 0")
        if self.t_end < 0.0:
            raise DomainError("t_end must be >= 0")


@dataclass(frozen=True)
class CollisionEvent:
    """First threshold crossing: localized time and the closest pair there."""

    time: float
    pair: tuple[int, int]
    min_distance_at_event: float


@dataclass(frozen=True)
class Termination:
    kind: str  # "reached_t_end" | "collision" | "step_failure"
    event: CollisionEvent | None = None
    reason: str = ""


@dataclass(frozen=True)
class Trajectory:
    """Output samples at fixed cadence plus how and why the run ended."""

    samples: tuple[SystemState, ...]
    termination: Termination
    max_speed_drift: float
    max_projection_residual: float
    n_steps: int
    n_rejected: int


@dataclass(frozen=True)
class DenseSegment:
    """Quartic interpolant of one accepted step over [t0, t0 + dt]."""

    t0: float
    dt: float
    coeffs: tuple[np.ndarray, ...]  # five interpolation coefficient vectors
    n_agents: int
    dim: int

    @property
    def t1(self) -> float:
        return self.t0 + self.dt

    def eval(self, t: float) -> np.ndarray:
        theta = (t - self.t0) / self.dt
        theta = min(max(theta, 0.0), 1.0)
        t1m = 1.0 - theta
        c0, c1, c2, c3, c4 = self.coeffs
        return c0 + theta * (c1 + t1m * (c2 + theta * (c3 + t1m * c4)))

    def state_at(self, t: float) -> SystemState:
        """Materialize an interpolated state; velocities are renormalized so
        the unit-norm construction invariant holds off the step endpoints."""
        pos, vel, temp = _unpack(self.eval(t), self.n_agents, self.dim)
        vel = vel / np.linalg.norm(vel, axis=1)[:, None]
        return SystemState(time=t, positions=pos, velocities=vel, temperatures=temp)

    def positions_at(self, t: float) -> np.ndarray:
        pos, _, _ = _unpack(self.eval(t), self.n_agents, self.dim)
        return pos


def _pack(positions, velocities, temperatures) -> np.ndarray:
    return np.concatenate([positions.ravel(), velocities.ravel(), temperatures])


def _unpack(y: np.ndarray, n: int, d: int):
    pos = y[: n * d].reshape(n, d)
    vel = y[n * d : 2 * n * d].reshape(n, d)
    temp = y[2 * n * d :]
    return pos, vel, temp


def _deriv(y: np.ndarray, params: SystemParams, n: int, d: int) -> np.ndarray:
    pos, vel, temp = _unpack(y, n, d)
    dx, dv, dtemp = rhs_arrays(pos, vel, temp, params)
    return _pack(dx, dv, dtemp)


@dataclass(frozen=True)
class StepAttempt:
    accepted: bool
    state: SystemState | None
    dense: DenseSegment | None
    dt_used: float
    dt_next: float
    error_norm: float
    speed_drift: float
    projection_residual: float


def step(
    state: SystemState,
    params: SystemParams,
    cfg: IntegratorConfig,
    dt_try: float,
    err_prev: float = 1e-4,
) -> StepAttempt:
    """Attempt one embedded step of size ``dt_try`` from ``state``.

    On acceptance the returned state has exactly renormalized velocities and
    the dense segment interpolates the raw (pre-projection) step.  Rejections
    (error test, drift cap, or a domain failure inside a stage) only propose
    a smaller ``dt_next``.  ``err_prev`` feeds the PI controller memory.
    """
    n, d = state.n_agents, state.dim
    y0 = _pack(state.positions, state.velocities, state.temperatures)
    dt = float(dt_try)

    k = np.empty((7, y0.size))
    try:
        k[0] = _deriv(y0, params, n, d)
        for s in range(1, 7):
            ys = y0 + dt * (np.asarray(_A[s]) @ k[:s])
            k[s] = _deriv(ys, params, n, d)
    except (DomainError, CollisionError, FloatingPointError):
        # A stage left the model domain (overshoot into contact or T <= 0);
        # shrink and retry rather than fail the run.
        return StepAttempt(False, None, None, dt, dt / _MAX_SHRINK, math.inf, math.inf, math.inf)

    y1 = y0 + dt * (_B5 @ k)
    err_vec = dt * (_ERR @ k)
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y0), np.abs(y1))
    err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))

    if not np.isfinite(err):
        return StepAttempt(False, None, None, dt, dt / _MAX_SHRINK, math.inf, math.inf, math.inf)

    if err > 1.0:
        shrink = min(_MAX_SHRINK, err**_ERR_EXPONENT / _SAFETY)
        return StepAttempt(False, None, None, dt, dt / shrink, err, math.inf, math.inf)

    pos, vel, temp = _unpack(y1, n, d)
    if np.any(temp <= 0.0):
        return StepAttempt(False, None, None, dt, dt / 2.0, err, math.inf, math.inf)
    speeds = np.linalg.norm(vel, axis=1)
    drift = float(np.max(np.abs(speeds - 1.0)))
    if drift > max(cfg.speed_drift_cap, cfg.rel_tol):
        return StepAttempt(False, None, None, dt, dt / 2.0, err, drift, math.inf)

    vel_proj = vel / speeds[:, None]
    residual = float(np.max(np.abs(np.linalg.norm(vel_proj, axis=1) - 1.0)))
    new_state = SystemState(
        time=state.time + dt, positions=pos, velocities=vel_proj, temperatures=temp
    )

    delta = y1 - y0
    bspl = dt * k[0] - delta
    coeffs = (
        y0.copy(),
        delta,
        bspl,
        delta - dt * k[6] - bspl,
        dt * (_DENSE @ k),
    )
    dense = DenseSegment(t0=state.time, dt=dt, coeffs=coeffs, n_agents=n, dim=d)

    # PI growth decision (error may be exactly zero for equilibria).
    fac11 = err**_ERR_EXPONENT
    fac = fac11 / max(err_prev, 1e-4) ** _PI_BETA
    fac = max(1.0 / _MAX_GROWTH, min(_MAX_SHRINK, fac / _SAFETY))
    dt_next = dt / fac

    return StepAttempt(True, new_state, dense, dt, dt_next, err, drift, residual)


def locate_collision(
    segment: DenseSegment, collision_threshold: float, event_time_tol: float
) -> CollisionEvent:
    """Bisect the dense interpolant for the first threshold crossing.

    Requires the minimum pairwise distance to be above the threshold at the
    segment start and at or below it at the segment end.  The reported pair is
    the closest pair at the localized time, ties broken by lowest indices.
    """
    lo, hi = segment.t0, segment.t1
    d_lo, _ = min_pairwise_distance(segment.positions_at(lo))
    d_hi, _ = min_pairwise_distance(segment.positions_at(hi))
    if d_lo <= collision_threshold or d_hi > collision_threshold:
        raise ValueError(
            f"invalid collision bracket: distances ({d_lo:.3e}, {d_hi:.3e}) "
            f"around threshold {collision_threshold:.3e}"
        )
    while hi - lo > event_time_tol:
        mid = 0.5 * (lo + hi)
        d_mid, _ = min_pairwise_distance(segment.positions_at(mid))
        if d_mid <= collision_threshold:
            hi = mid
        else:
            lo = mid
    dist, pair = min_pairwise_distance(segment.positions_at(hi))
    return CollisionEvent(time=hi, pair=pair, min_distance_at_event=dist)


def _singularity_guard(state: SystemState) -> float:
    """Largest dt for which the min pairwise distance can change by <= 50%.

    Pairwise distances change no faster than the largest relative speed, which
    unit speeds bound by the velocity diameter.
    """
    min_dist, _ = min_pairwise_distance(state.positions)
    n = state.n_agents
    iu, ju = np.triu_indices(n, k=1)
    rel = np.linalg.norm(state.velocities[iu] - state.velocities[ju], axis=1)
    max_rel_speed = float(np.max(rel))
    return 0.5 * min_dist / max(max_rel_speed, 1e-12)


def run(
    initial: SystemState,
    params: SystemParams,
    cfg: IntegratorConfig,
    output_dt: float,
) -> Trajectory:
    """Integrate to ``t_end`` or the first collision, sampling on a fixed cadence.

    Samples sit at multiples of ``output_dt`` (materialized from the dense
    interpolant) starting at t = 0; a terminal sample at ``t_end`` is appended
    when the horizon is not itself a multiple.  The trajectory also carries
    the worst pre-projection speed drift and post-projection residual seen.
    """
    if initial.time != 0.0:
        raise DomainError("run expects the initial state at t = 0")
    if cfg.t_end > 0.0 and not output_dt > 0.0:
        raise DomainError("output_dt must be > 0")

    init_min_dist, init_pair = min_pairwise_distance(initial.positions)
    if init_min_dist <= cfg.collision_threshold:
        raise CollisionError(init_pair, init_min_dist, time=0.0)

    samples: list[SystemState] = [initial]
    t_end = cfg.t_end
    if t_end == 0.0:
        return Trajectory(tuple(samples), Termination("reached_t_end"), 0.0, 0.0, 0, 0)

    t_snap = 1e-12 * max(1.0, abs(t_end))
    state = initial
    dt_next = cfg.dt_init
    err_prev = 1e-4
    next_k = 1
    n_steps = n_rejected = 0
    max_drift = 0.0
    max_residual = 0.0
    termination: Termination | None = None

    while True:
        t = state.time
        if t_end - t <= t_snap:
            termination = Termination("reached_t_end")
            break

        dt_try = min(dt_next, cfg.dt_max, _singularity_guard(state), t_end - t)
        if dt_try < DT_UNDERFLOW:
            termination = Termination(
                "step_failure", reason=f"step size underflow ({dt_try:.3e}) at t={t!r}"
            )
            break

        attempt = step(state, params, cfg, dt_try, err_prev)
        if not attempt.accepted:
            n_rejected += 1
            dt_next = attempt.dt_next
            if dt_next < DT_UNDERFLOW:
                termination = Termination(
                    "step_failure",
                    reason=f"step size underflow after rejection at t={t!r}",
                )
                break
            continue

        n_steps += 1
        err_prev = max(attempt.error_norm, 1e-4)
        max_drift = max(max_drift, attempt.speed_drift)
        max_residual = max(max_residual, attempt.projection_residual)
        new_state = attempt.state
        segment = attempt.dense
        t_new = new_state.time
        if t_end - t_new <= t_snap and t_new != t_end:
            new_state = SystemState(
                time=t_end,
                positions=new_state.positions,
                velocities=new_state.velocities,
                temperatures=new_state.temperatures,
            )
            t_new = t_end

        new_min_dist, _ = min_pairwise_distance(new_state.positions)
        if new_min_dist <= cfg.collision_threshold:
            event = locate_collision(segment, cfg.collision_threshold, cfg.event_time_tol)
            while next_k * output_dt < event.time:
                samples.append(segment.state_at(next_k * output_dt))
                next_k += 1
            termination = Termination("collision", event=event)
            break

        while next_k * output_dt <= t_new * (1.0 + 1e-14) and next_k * output_dt <= t_end:
            t_sample = next_k * output_dt
            if abs(t_sample - t_new) <= t_snap:
                samples.append(new_state)
            else:
                samples.append(segment.state_at(t_sample))
            next_k += 1

        state = new_state
        dt_next = attempt.dt_next

    if termination.kind == "reached_t_end" and samples[-1].time < t_end - t_snap:
        if state.time >= t_end - t_snap and state.time != t_end:
            state = SystemState(
                time=t_end,
                positions=state.positions,
                velocities=state.velocities,
                temperatures=state.temperatures,
            )
        samples.append(state)

    return Trajectory(
        samples=tuple(samples),
        termination=termination,
        max_speed_drift=max_drift,
        max_projection_residual=max_residual,
        n_steps=n_steps,
        n_rejected=n_rejected,
    )
