"""Core model: state containers, interaction kernels, and exact right-hand sides.

The system couples N agents carrying a position ``x_i`` in R^d, a unit
velocity ``v_i`` on the sphere, and a positive temperature ``T_i``:

    dx_i/dt = v_i
    dv_i/dt = (kappa1/N) * sum_j phi(|x_i - x_j|) * (v_j - <v_j, v_i> v_i) / T_j
    dT_i/dt = (kappa2/N) * sum_j zeta(|x_i - x_j|) * (1/T_i - 1/T_j)

``phi(r) = r**(-alpha)`` is singular at contact, so every caller must keep
pairwise distances positive (the integrator gates this behind its collision
threshold).  The velocity coupling is orthogonal to ``v_i``, which is what
keeps speeds exactly one; the temperature exchange is pairwise antisymmetric,
which conserves the total temperature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Tolerance on | ||v|| - 1 | accepted when constructing a state.
UNIT_NORM_TOL = 1e-12

ZETA_FAMILIES = ("constant_one", "rational_decay", "singular_power")


class DomainError(ValueError):
    """An argument left the mathematical domain of an operation."""


class CollisionError(RuntimeError):
    """Two agents are coincident (or below the collision threshold).

    Attributes:
        pair: the offending (i, j) agent indices, i < j.
        distance: their separation when the error was raised.
        time: simulation time if known, else None.
    """

    def __init__(self, pair, distance, time=None):
        self.pair = (int(pair[0]), int(pair[1]))
        self.distance = float(distance)
        self.time = time
        at = f" at t={time!r}" if time is not None else ""
        super().__init__(
            f"agents {self.pair[0]} and {self.pair[1]} are in contact "
            f"(distance {distance:.3e}){at}"
        )


@dataclass(frozen=True)
class KernelSpec:
    """Choice of the bounded (or optionally singular) temperature kernel zeta.

    Families:
        constant_one:   zeta(r) = 1
        rational_decay: zeta(r) = (1 + r^2)**(-beta/2)
        singular_power: zeta(r) = r**(-beta), undefined at r = 0
    """

    family: str = "rational_decay"
    beta: float = 2.0

    def __post_init__(self):
        if self.family not in ZETA_FAMILIES:
            raise DomainError(
                f"unknown zeta family {self.family!r}; expected one of {ZETA_FAMILIES}"
            )
        if not (np.isfinite(self.beta) and self.beta >= 0.0):
            raise DomainError("zeta exponent beta must be finite and >= 0")


@dataclass(frozen=True)
class SystemParams:
    """Agent count, dimension, coupling strengths, and kernel choices.

    ``kappa1``/``kappa2`` may be zero, which decouples velocities or
    temperatures (useful as an exact straight-line sanity regime); the
    interacting model has both strictly positive.
    """

    n_agents: int
    dim: int
    kappa1: float
    kappa2: float
    alpha: float
    zeta: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        if self.n_agents < 2:
            raise DomainError("n_agents must be >= 2")
        if self.dim < 1:
            raise DomainError("dim must be >= 1")
        if not (np.isfinite(self.kappa1) and self.kappa1 >= 0.0):
            raise DomainError("kappa1 must be finite and >= 0")
        if not (np.isfinite(self.kappa2) and self.kappa2 >= 0.0):
            raise DomainError("kappa2 must be finite and >= 0")
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise DomainError("alpha must be finite and > 0")


def _as_readonly(a, dtype=float):
    out = np.array(a, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class AgentState:
    """One agent: position (d-vector), unit velocity (d-vector), temperature.

    The velocity norm must be within ``UNIT_NORM_TOL`` of one and the
    temperature strictly positive; both are checked on construction.
    """

    position: np.ndarray
    velocity: np.ndarray
    temperature: float

    def __post_init__(self):
        pos = _as_readonly(self.position)
        vel = _as_readonly(self.velocity)
        if pos.ndim != 1 or vel.shape != pos.shape:
            raise DomainError("position and velocity must be 1-d vectors of equal length")
        speed = float(np.linalg.norm(vel))
        if abs(speed - 1.0) > UNIT_NORM_TOL:
            raise DomainError(f"velocity norm {speed!r} deviates from 1 beyond {UNIT_NORM_TOL}")
        temp = float(self.temperature)
        if not (np.isfinite(temp) and temp > 0.0):
            raise DomainError("temperature must be finite and > 0")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "velocity", vel)
        object.__setattr__(self, "temperature", temp)


@dataclass(frozen=True, eq=False)
class SystemState:
    """Snapshot of the whole system at one time: (N, d) arrays plus (N,) temps."""

    time: float
    positions: np.ndarray
    velocities: np.ndarray
    temperatures: np.ndarray

    def __post_init__(self):
        pos = _as_readonly(self.positions)
        vel = _as_readonly(self.velocities)
        temp = _as_readonly(self.temperatures)
        if pos.ndim != 2 or pos.shape[0] < 2:
            raise DomainError("positions must be an (n, d) array with n >= 2")
        if vel.shape != pos.shape:
            raise DomainError("velocities must match positions in shape")
        if temp.shape != (pos.shape[0],):
            raise DomainError("temperatures must be an (n,) array")
        if float(self.time) < 0.0:
            raise DomainError("time must be >= 0")
        speeds = np.linalg.norm(vel, axis=1)
        if np.any(np.abs(speeds - 1.0) > UNIT_NORM_TOL):
            worst = int(np.argmax(np.abs(speeds - 1.0)))
            raise DomainError(
                f"velocity of agent {worst} has norm {speeds[worst]!r}, "
                f"deviating from 1 beyond {UNIT_NORM_TOL}"
            )
        if np.any(~np.isfinite(temp)) or np.any(temp <= 0.0):
            raise DomainError("all temperatures must be finite and > 0")
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "temperatures", temp)

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def agents(self) -> list[AgentState]:
        """Per-agent view, in index order."""
        return [
            AgentState(self.positions[i], self.velocities[i], float(self.temperatures[i]))
            for i in range(self.n_agents)
        ]

    @classmethod
    def from_agents(cls, time, agents) -> "SystemState":
        agents = list(agents)
        return cls(
            time=time,
            positions=np.array([a.position for a in agents], dtype=float),
            velocities=np.array([a.velocity for a in agents], dtype=float),
            temperatures=np.array([a.temperature for a in agents], dtype=float),
        )


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def phi_eval(r, alpha):
    """Singular position kernel ``phi(r) = r**(-alpha)``.

    Accepts scalars or arrays; every entry must be strictly positive.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr <= 0.0):
        raise DomainError("phi is singular at r = 0 and undefined for r <= 0")
    if not (np.isfinite(alpha) and alpha > 0.0):
        raise DomainError("alpha must be finite and > 0")
    out = arr ** (-alpha)
    return float(out) if np.isscalar(r) or arr.ndim == 0 else out


def zeta_eval(r, spec: KernelSpec):
    """Temperature kernel for the chosen family, on scalars or arrays."""
    arr = np.asarray(r, dtype=float)
    if spec.family == "singular_power":
        if np.any(arr <= 0.0):
            raise DomainError("singular_power zeta is undefined at r = 0")
        out = arr ** (-spec.beta)
    else:
        if np.any(arr < 0.0):
            raise DomainError("zeta requires r >= 0")
        if spec.family == "constant_one":
            out = np.ones_like(arr)
        else:
            out = (1.0 + arr**2) ** (-spec.beta / 2.0)
    return float(out) if np.isscalar(r) or arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# Pairwise geometry helpers
# ---------------------------------------------------------------------------

def pairwise_distances(positions: np.ndarray) -> np.ndarray:
    """Full (n, n) symmetric distance matrix with zeros on the diagonal."""
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def min_pairwise_distance(positions: np.ndarray) -> tuple[float, tuple[int, int]]:
    """Smallest pairwise distance and its pair, ties broken by lowest (i, j)."""
    n = positions.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    dists = pairwise_distances(positions)[iu, ju]
    k = int(np.argmin(dists))
    return float(dists[k]), (int(iu[k]), int(ju[k]))


def _require_distinct(dist_matrix: np.ndarray, time=None) -> None:
    n = dist_matrix.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    cond = dist_matrix[iu, ju]
    k = int(np.argmin(cond))
    if cond[k] <= 0.0:
        raise CollisionError((iu[k], ju[k]), cond[k], time=time)


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------

def rhs_arrays(positions, velocities, temperatures, params: SystemParams):
    """Time derivatives (dx, dv, dT) on raw arrays.

    This is the single evaluation path shared by the adaptive integrator and
    the fixed-step oracle.  The i = j term is skipped explicitly because
    phi(0) is singular; masking it out avoids an indeterminate 0 * inf.
    Temperature increments accumulate pair by pair (ascending i < j) with an
    equal and opposite sign, so the floating-point total stays at rounding
    level and runs are bitwise reproducible.
    """
    positions = np.asarray(positions, dtype=float)
    velocities = np.asarray(velocities, dtype=float)
    temperatures = np.asarray(temperatures, dtype=float)
    n = positions.shape[0]
    if np.any(~np.isfinite(temperatures)) or np.any(temperatures <= 0.0):
        raise DomainError("temperatures must stay finite and > 0")

    dist = pairwise_distances(positions)
    _require_distinct(dist)

    # phi on off-diagonal entries only; diagonal padded to avoid 0**-alpha.
    padded = dist.copy()
    np.fill_diagonal(padded, 1.0)
    phi = padded ** (-params.alpha)
    np.fill_diagonal(phi, 0.0)

    weights = phi / temperatures[None, :]  # weights[i, j] = phi_ij / T_j
    gram = velocities @ velocities.T
    radial = np.sum(weights * gram, axis=1)
    dv = (params.kappa1 / n) * (weights @ velocities - radial[:, None] * velocities)
    # The exact derivative is tangent to the sphere; the accumulated rounding
    # leaves a radial residue of a few ulps, stripped here so unit-norm
    # accounting downstream sees only genuine drift.
    dv -= np.sum(dv * velocities, axis=1)[:, None] * velocities

    iu, ju = np.triu_indices(n, k=1)
    zeta = zeta_eval(dist[iu, ju], params.zeta)
    inv_t = 1.0 / temperatures
    flow = zeta * (inv_t[iu] - inv_t[ju])
    dtemp = np.zeros(n)
    np.add.at(dtemp, iu, flow)
    np.subtract.at(dtemp, ju, flow)
    dtemp *= params.kappa2 / n

    return velocities.copy(), dv, dtemp


def velocity_rhs(state: SystemState, params: SystemParams) -> np.ndarray:
    """dv_i/dt for every agent; each row is orthogonal to v_i up to rounding."""
    _check_shape(state, params)
    _, dv, _ = rhs_arrays(state.positions, state.velocities, state.temperatures, params)
    return dv


def temperature_rhs(state: SystemState, params: SystemParams) -> np.ndarray:
    """dT_i/dt for every agent; the entries sum to zero up to rounding."""
    _check_shape(state, params)
    _, _, dtemp = rhs_arrays(state.positions, state.velocities, state.temperatures, params)
    return dtemp


def _check_shape(state: SystemState, params: SystemParams) -> None:
    if state.n_agents != params.n_agents or state.dim != params.dim:
        raise DomainError(
            f"state shape ({state.n_agents}, {state.dim}) does not match params "
            f"({params.n_agents}, {params.dim})"
        )
