"""Initial-condition builders: seeded random clouds and two constructive cases.

``build_random`` realizes the standing hypotheses of the avoidance theory by
construction: velocities are drawn inside a spherical cap of half-angle
``velocity_cap_angle`` about a random axis, so every pairwise inner product is
at least ``cos(2 * cap_angle) > 0``, and positions are rejection-sampled to a
minimum pairwise gap.

``build_example21`` is the head-on two-agent line configuration whose
alignment force vanishes identically, so the agents collide at ``gap / 2`` no
matter how singular the kernel is.

``build_prop41`` is the symmetric two-agent planar configuration tuned, for a
weak singularity ``0 < alpha < 1``, so that the vertical closing speed exactly
balances the kernel primitive of the vertical gap; a comparison argument then
forces a collision no later than ``gap**alpha / (a * alpha)`` with
``a = kappa1 * (1 + cos(2 theta)) / (2 (1 - alpha))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import AgentState, DomainError, SystemState

_MAX_REJECTION_ATTEMPTS = 100_000

SCENARIO_KINDS = ("random_cap", "example21", "prop41", "custom")


class InfeasibleScenarioError(RuntimeError):
    """Position rejection sampling could not meet the minimum gap."""


@dataclass(frozen=True)
class ScenarioSpec:
    """Declarative description of an initial condition.

    Only the fields of the chosen ``kind`` are meaningful: ``random_cap``
    uses the sampling fields, ``example21``/``prop41`` use ``gap`` (with
    ``prop41`` reading ``alpha``/``kappa1`` from the system parameters), and
    ``custom`` carries explicit agents.
    """

    kind: str
    seed: int = 0
    n_agents: int = 8
    dim: int = 2
    velocity_cap_angle: float = 0.3
    position_box: float = 4.0
    min_initial_gap: float = 0.5
    temp_range: tuple[float, float] = (0.8, 1.25)
    gap: float = 1.0
    agents: tuple[AgentState, ...] | None = None

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise DomainError(f"unknown scenario kind {self.kind!r}")
        if self.seed < 0:
            raise DomainError("seed must be >= 0")
        if self.kind == "random_cap":
            if self.n_agents < 2 or self.dim < 1:
                raise DomainError("random_cap needs n_agents >= 2 and dim >= 1")
            if not 0.0 < self.velocity_cap_angle < math.pi / 4.0:
                raise DomainError(
                    "velocity_cap_angle must lie in (0, pi/4) so that "
                    "cos(2 * cap_angle) > 0 guarantees a positive initial "
                    "velocity-pair angle"
                )
            if not self.position_box > 0.0 or not self.min_initial_gap > 0.0:
                raise DomainError("position_box and min_initial_gap must be > 0")
            lo, hi = self.temp_range
            if not (0.0 < lo <= hi):
                raise DomainError("temp_range must satisfy 0 < lo <= hi")
        if self.kind in ("example21", "prop41") and not self.gap > 0.0:
            raise DomainError("gap must be > 0")
        if self.kind == "custom" and not self.agents:
            raise DomainError("custom scenario needs explicit agents")


def _unit_orthogonal(rng: np.random.Generator, axis: np.ndarray) -> np.ndarray:
    """Uniform unit vector orthogonal to ``axis`` (dim >= 2)."""
    while True:
        w = rng.standard_normal(axis.size)
        w -= np.dot(w, axis) * axis
        norm = np.linalg.norm(w)
        if norm > 1e-12:
            return w / norm


def _sample_cap_angle(rng: np.random.Generator, cap: float, dim: int) -> float:
    """Colatitude with the cap's surface measure, density ~ sin(psi)**(dim-2)."""
    if dim == 2:
        return float(rng.uniform(0.0, cap))
    if dim == 3:
        return math.acos(float(rng.uniform(math.cos(cap), 1.0)))
    sin_cap = math.sin(cap)
    while True:
        psi = float(rng.uniform(0.0, cap))
        if rng.uniform(0.0, 1.0) <= (math.sin(psi) / sin_cap) ** (dim - 2):
            return psi


def build_random(spec: ScenarioSpec) -> SystemState:
    """Seeded random state with guaranteed positive velocity-pair angle.

    Positions fill the centered cube of edge ``position_box`` one by one,
    rejecting draws closer than ``min_initial_gap`` to any accepted one.
    """
    if spec.kind != "random_cap":
        raise DomainError("build_random needs a random_cap spec")
    rng = np.random.default_rng(spec.seed)
    half = spec.position_box / 2.0

    positions = np.empty((spec.n_agents, spec.dim))
    attempts = 0
    accepted = 0
    while accepted < spec.n_agents:
        if attempts >= _MAX_REJECTION_ATTEMPTS:
            raise InfeasibleScenarioError(
                f"could not place {spec.n_agents} agents with gap "
                f">= {spec.min_initial_gap} in a box of edge {spec.position_box} "
                f"within {_MAX_REJECTION_ATTEMPTS} draws"
            )
        candidate = rng.uniform(-half, half, spec.dim)
        attempts += 1
        if accepted == 0 or np.all(
            np.linalg.norm(positions[:accepted] - candidate, axis=1) >= spec.min_initial_gap
        ):
            positions[accepted] = candidate
            accepted += 1

    if spec.dim == 1:
        # The unit sphere in one dimension is {-1, +1}; a cap is a single point.
        axis = np.array([1.0 if rng.uniform(0.0, 1.0) < 0.5 else -1.0])
        velocities = np.tile(axis, (spec.n_agents, 1))
    else:
        axis = rng.standard_normal(spec.dim)
        axis /= np.linalg.norm(axis)
        velocities = np.empty((spec.n_agents, spec.dim))
        for i in range(spec.n_agents):
            psi = _sample_cap_angle(rng, spec.velocity_cap_angle, spec.dim)
            w = _unit_orthogonal(rng, axis)
            v = math.cos(psi) * axis + math.sin(psi) * w
            velocities[i] = v / np.linalg.norm(v)

    temperatures = rng.uniform(spec.temp_range[0], spec.temp_range[1], spec.n_agents)
    return SystemState(
        time=0.0, positions=positions, velocities=velocities, temperatures=temperatures
    )


def build_example21(gap: float) -> SystemState:
    """Head-on pair on the x-axis with unit temperatures.

    The alignment bracket vanishes identically for exactly opposite unit
    velocities, so the pair closes at relative speed 2 and collides at
    ``gap / 2`` regardless of the kernel exponent.  Its initial velocity-pair
    angle is -1, deliberately outside the avoidance hypotheses.
    """
    if not gap > 0.0:
        raise DomainError("gap must be > 0")
    return SystemState(
        time=0.0,
        positions=np.array([[0.0, 0.0], [gap, 0.0]]),
        velocities=np.array([[1.0, 0.0], [-1.0, 0.0]]),
        temperatures=np.array([1.0, 1.0]),
    )


def build_prop41(alpha: float, kappa1: float, gap: float) -> tuple[SystemState, float]:
    """Balanced mirrored pair for the weak-singularity collision study.

    Agents sit at (0, 0) and (0, gap) with mirrored headings
    ``v1 = (cos t, sin t)``, ``v2 = (cos t, -sin t)`` and unit temperatures.
    The heading ``t`` solves

        2 sin t / cos^2 t = kappa1 * gap**(1 - alpha) / (1 - alpha),

    which balances the initial vertical closing speed against the kernel
    primitive of the vertical gap; the left side is increasing from 0 to
    infinity on (0, pi/2), so a unique root exists and bisection converges to
    1e-12.  Returns the state together with the nominal comparison-principle
    collision bound ``gap**alpha / (a * alpha)``,
    ``a = kappa1 * (1 + cos 2t) / (2 (1 - alpha))``.

    Caution: the mirrored pair admits an exact first integral (see
    :func:`prop41_collision_heading`), and the balanced heading sits strictly
    on the aligning side of the separatrix -- simulated, this pair turns
    parallel before contact and stalls at the positive gap
    :func:`prop41_closest_approach` instead of colliding by the nominal
    bound.  Headings strictly above :func:`prop41_collision_heading` do
    collide in finite time.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("the collision construction needs 0 < alpha < 1")
    if not kappa1 > 0.0:
        raise DomainError("kappa1 must be > 0")
    if not gap > 0.0:
        raise DomainError("gap must be > 0")

    target = kappa1 * gap ** (1.0 - alpha) / (1.0 - alpha)

    def f(theta: float) -> float:
        return 2.0 * math.sin(theta) / math.cos(theta) ** 2 - target

    lo, hi = 0.0, math.pi / 2.0 - 1e-9
    if not f(lo) < 0.0 < f(hi):
        raise InfeasibleScenarioError("no heading root bracket; numeric failure")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)

    state = SystemState(
        time=0.0,
        positions=np.array([[0.0, 0.0], [0.0, gap]]),
        velocities=np.array(
            [
                [math.cos(theta), math.sin(theta)],
                [math.cos(theta), -math.sin(theta)],
            ]
        ),
        temperatures=np.array([1.0, 1.0]),
    )
    inner0 = math.cos(2.0 * theta)
    a = kappa1 * (1.0 + inner0) / (2.0 * (1.0 - alpha))
    bound = gap**alpha / (a * alpha)
    return state, bound


def prop41_collision_heading(alpha: float, kappa1: float, gap: float) -> float:
    """Exact separatrix heading of the mirrored pair.

    For the two-agent mirror-symmetric flow with vertical gap ``g`` and
    heading ``t`` the ratio of the two equations of motion separates:

        dg/dt_heading = 2 g**alpha / (kappa1 cos t),

    so ``artanh(sin t) - (kappa1 / (2 (1 - alpha))) g**(1-alpha)`` is
    conserved.  Contact (g = 0) is reached from (t0, gap) exactly when

        artanh(sin t0) > kappa1 * gap**(1 - alpha) / (2 (1 - alpha)),

    and this returns the critical heading where equality holds (``pi/2`` when
    no heading below a right angle suffices).  Strictly above it the pair
    collides in finite time; at or below it the headings align first.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("the mirrored-pair analysis needs 0 < alpha < 1")
    level = kappa1 * gap ** (1.0 - alpha) / (2.0 * (1.0 - alpha))
    if level >= 20.0:  # tanh saturates; no sub-right-angle heading collides
        return math.pi / 2.0
    return math.asin(math.tanh(level))


def prop41_closest_approach(theta: float, alpha: float, kappa1: float, gap: float) -> float:
    """Asymptotic minimum gap of the mirrored pair started at heading ``theta``.

    Zero when the heading is at or above :func:`prop41_collision_heading`
    (the pair reaches contact); otherwise the positive gap at which the
    headings have fully aligned, from the conserved quantity of the reduced
    flow.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("the mirrored-pair analysis needs 0 < alpha < 1")
    if not 0.0 < theta < math.pi / 2.0:
        raise DomainError("heading must lie in (0, pi/2)")
    residual = gap ** (1.0 - alpha) - (2.0 * (1.0 - alpha) / kappa1) * math.atanh(
        math.sin(theta)
    )
    if residual <= 0.0:
        return 0.0
    return residual ** (1.0 / (1.0 - alpha))


def build_initial_state(spec: ScenarioSpec, params) -> SystemState:
    """Dispatch a scenario spec to its builder."""
    if spec.kind == "random_cap":
        return build_random(spec)
    if spec.kind == "example21":
        return build_example21(spec.gap)
    if spec.kind == "prop41":
        state, _ = build_prop41(params.alpha, params.kappa1, spec.gap)
        return state
    return SystemState.from_agents(0.0, spec.agents)
