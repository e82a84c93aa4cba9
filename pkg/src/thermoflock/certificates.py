"""Sufficient-condition checkers that certify long-time behavior from initial data.

Each checker inspects only the initial state and the system parameters and, if
its defining inequality holds, produces a :class:`FlockingCertificate` with

* ``d_x_inf``   -- an a-priori uniform bound on the position diameter,
* ``rate_v``    -- guaranteed exponential decay rate of the velocity diameter,
  ``kappa1 * A0 * phi(d_x_inf) / T_max0``,
* ``rate_t``    -- guaranteed decay rate of the temperature diameter,
  ``kappa2 * zeta(d_x_inf) / T_max0**2``,

where ``A0`` is the smallest pairwise velocity inner product at t = 0 and
``T_max0`` the largest initial temperature.  Certificate kinds:

``thm31``
    There is a diameter witness D with
    ``D_X(0) + budget(D) < D`` where ``budget(D) = T_max0 * D_V(0) /
    (kappa1 * A0 * phi(D))`` is the total travel the velocity decay allows.
    The smallest such D is found by a log-grid scan plus bisection.
``thm32``
    The kernel tail is large enough: ``D_V(0) < (kappa1 * A0 / T_max0) *
    integral_{D_X(0)}^{inf} phi``.  The witness is the closed-form smallest D
    at which the running integral balances ``D_V(0)``; for ``alpha <= 1`` the
    tail diverges and the condition always holds.
``thm41_cond1`` / ``thm41_cond2``
    Strict-spacing guarantees.  Branch 1 additionally requires the travel
    budget to fit under the smallest per-axis coordinate gap; branch 2 applies
    for ``alpha > 1`` only.  Both report the witness with the best margin.

All margins are the slack of the defining inequality (positive iff satisfied).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import DomainError, SystemParams, SystemState, phi_eval, zeta_eval, pairwise_distances

THEOREM_IDS = ("thm31", "thm32", "thm41_cond1", "thm41_cond2")


class PreconditionError(ValueError):
    """The initial state violates a hypothesis the checker needs."""


@dataclass(frozen=True)
class InitialFunctionals:
    """Scalar functionals of an initial state used by every checker."""

    d_x: float
    d_v: float
    d_t: float
    a_v: float
    temp_min: float
    temp_max: float
    min_pair_dist: float
    coord_gap: float  # max over axes of the min pairwise |x_i^k - x_j^k|


def initial_functionals(state: SystemState) -> InitialFunctionals:
    n = state.n_agents
    iu, ju = np.triu_indices(n, k=1)
    dists = pairwise_distances(state.positions)[iu, ju]
    vdiff = np.linalg.norm(state.velocities[iu] - state.velocities[ju], axis=1)
    inner = np.sum(state.velocities[iu] * state.velocities[ju], axis=1)
    tdiff = np.abs(state.temperatures[iu] - state.temperatures[ju])
    axis_gaps = np.abs(state.positions[iu] - state.positions[ju])  # (pairs, d)
    return InitialFunctionals(
        d_x=float(np.max(dists)),
        d_v=float(np.max(vdiff)),
        d_t=float(np.max(tdiff)),
        a_v=float(np.min(inner)),
        temp_min=float(np.min(state.temperatures)),
        temp_max=float(np.max(state.temperatures)),
        min_pair_dist=float(np.min(dists)),
        coord_gap=float(np.max(np.min(axis_gaps, axis=0))),
    )


@dataclass(frozen=True)
class FlockingCertificate:
    """Outcome of one sufficient-condition check.

    ``margin`` is the slack of the defining inequality; ``satisfied`` implies
    ``margin > 0`` and a present ``d_x_inf``.  ``spacing_guarantee`` is only
    ever True for the thm41 branches.  The ``*_0`` fields freeze the initial
    constants the certified decay bounds are expressed in.
    """

    theorem: str
    satisfied: bool
    d_x_inf: float | None
    rate_v: float
    rate_t: float
    margin: float
    spacing_guarantee: bool
    d_x0: float
    d_v0: float
    d_t0: float
    a_v0: float
    temp_max0: float


@dataclass(frozen=True)
class CertificateSearch:
    """Grid and refinement controls for the witness searches.

    The scan covers ``[D_X(0), grid_span * D_X(0)]`` on a log grid; failure of
    a condition everywhere cannot be decided numerically, so the span makes
    the checkers total.
    """

    grid_span: float = 1e6
    grid_points: int = 1024
    refine_rel_tol: float = 1e-10

    def grid(self, d_x0: float) -> np.ndarray:
        return np.geomspace(d_x0, self.grid_span * d_x0, self.grid_points)


# ---------------------------------------------------------------------------
# Kernel primitive
# ---------------------------------------------------------------------------

def kernel_primitive(a: float, b: float, alpha: float) -> float:
    """Closed-form ``integral_a^b r**(-alpha) dr`` with ``0 < a <= b <= inf``.

    Returns ``inf`` for an infinite upper limit when ``alpha <= 1`` (the tail
    diverges there; it is finite exactly when ``alpha > 1``).
    """
    if not (np.isfinite(a) and a > 0.0):
        raise DomainError("lower limit must be finite and > 0")
    if b < a:
        raise DomainError("upper limit must satisfy b >= a")
    if not (np.isfinite(alpha) and alpha > 0.0):
        raise DomainError("alpha must be finite and > 0")
    if math.isinf(b):
        if alpha <= 1.0:
            return math.inf
        return a ** (1.0 - alpha) / (alpha - 1.0)
    if alpha == 1.0:
        return math.log(b / a)
    return (b ** (1.0 - alpha) - a ** (1.0 - alpha)) / (1.0 - alpha)


def primitive_inverse(a: float, value: float, alpha: float) -> float:
    """Smallest ``b >= a`` with ``kernel_primitive(a, b, alpha) == value``.

    Returns ``inf`` when ``value`` meets or exceeds the (finite) tail mass.
    """
    if not (np.isfinite(a) and a > 0.0):
        raise DomainError("lower limit must be finite and > 0")
    if value < 0.0:
        raise DomainError("primitive value must be >= 0")
    if value == 0.0:
        return a
    if alpha == 1.0:
        return a * math.exp(value)
    w = a ** (1.0 - alpha) + (1.0 - alpha) * value
    if alpha > 1.0 and w <= 0.0:
        return math.inf
    return w ** (1.0 / (1.0 - alpha))


def _primitive_on_grid(a: float, grid: np.ndarray, alpha: float) -> np.ndarray:
    if alpha == 1.0:
        return np.log(grid / a)
    return (grid ** (1.0 - alpha) - a ** (1.0 - alpha)) / (1.0 - alpha)


# ---------------------------------------------------------------------------
# Checkers
# ---------------------------------------------------------------------------

def _require_hypotheses(f: InitialFunctionals) -> None:
    if f.min_pair_dist <= 0.0:
        raise PreconditionError("initial positions must be pairwise distinct")
    if f.a_v <= 0.0:
        raise PreconditionError(
            f"initial velocity-pair angle functional must be positive, got {f.a_v!r}"
        )


def check_thm32(initial: SystemState, params: SystemParams) -> FlockingCertificate:
    """Kernel-tail certificate with closed-form diameter witness."""
    f = initial_functionals(initial)
    _require_hypotheses(f)
    coeff = params.kappa1 * f.a_v / f.temp_max
    tail = kernel_primitive(f.d_x, math.inf, params.alpha)
    margin = coeff * tail - f.d_v if math.isfinite(tail) else math.inf
    satisfied = f.d_v < coeff * tail
    d_x_inf = None
    rate_v = rate_t = 0.0
    if satisfied:
        d_x_inf = primitive_inverse(f.d_x, f.d_v / coeff, params.alpha)
        rate_v = coeff * phi_eval(d_x_inf, params.alpha)
        rate_t = params.kappa2 * zeta_eval(d_x_inf, params.zeta) / f.temp_max**2
    return FlockingCertificate(
        theorem="thm32",
        satisfied=satisfied,
        d_x_inf=d_x_inf,
        rate_v=rate_v,
        rate_t=rate_t,
        margin=margin,
        spacing_guarantee=False,
        d_x0=f.d_x,
        d_v0=f.d_v,
        d_t0=f.d_t,
        a_v0=f.a_v,
        temp_max0=f.temp_max,
    )


def _thm31_margin_fn(f: InitialFunctionals, params: SystemParams):
    budget_coeff = f.temp_max * f.d_v / (params.kappa1 * f.a_v)

    def g(d):
        return d - f.d_x - budget_coeff * d**params.alpha

    return g


def check_thm31(
    initial: SystemState,
    params: SystemParams,
    search: CertificateSearch = CertificateSearch(),
) -> FlockingCertificate:
    """Travel-budget certificate; finds the smallest diameter witness.

    Scans a log grid for a point with positive margin, then bisects down to
    the lower edge of the positive region so the reported witness gives the
    sharpest decay rate.  The reported margin is the best slack on the grid.
    """
    f = initial_functionals(initial)
    _require_hypotheses(f)
    g = _thm31_margin_fn(f, params)
    grid = search.grid(f.d_x)
    values = g(grid)
    margin = float(np.max(values))
    satisfied = margin > 0.0
    d_x_inf = None
    rate_v = rate_t = 0.0
    if satisfied:
        first = int(np.argmax(values > 0.0))
        if first == 0:
            d_x_inf = float(grid[0])
        else:
            lo, hi = float(grid[first - 1]), float(grid[first])
            while hi - lo > search.refine_rel_tol * hi:
                mid = 0.5 * (lo + hi)
                if g(mid) > 0.0:
                    hi = mid
                else:
                    lo = mid
            d_x_inf = hi
        rate_v = params.kappa1 * f.a_v * phi_eval(d_x_inf, params.alpha) / f.temp_max
        rate_t = params.kappa2 * zeta_eval(d_x_inf, params.zeta) / f.temp_max**2
    return FlockingCertificate(
        theorem="thm31",
        satisfied=satisfied,
        d_x_inf=d_x_inf,
        rate_v=rate_v,
        rate_t=rate_t,
        margin=margin,
        spacing_guarantee=False,
        d_x0=f.d_x,
        d_v0=f.d_v,
        d_t0=f.d_t,
        a_v0=f.a_v,
        temp_max0=f.temp_max,
    )


def check_thm41(
    initial: SystemState,
    params: SystemParams,
    search: CertificateSearch = CertificateSearch(),
) -> tuple[FlockingCertificate, FlockingCertificate]:
    """Strict-spacing certificates, one per branch, so both margins are reported.

    For a witness D define ``budget(D)`` as in thm31 and

        reach(D) = max(D - D_X(0), Phi(D) / phi(D)),

    with ``Phi`` the kernel primitive anchored at ``D_X(0)``.  Branch 1 needs
    ``budget(D) < min(reach(D), coord_gap)`` for the best coordinate axis;
    branch 2 needs ``budget(D) < reach(D)`` and ``alpha > 1``.  Candidate
    witnesses combine the log grid with the thm31/thm32 witnesses (the latter
    nudged upward, since the closed-form witness sits exactly on its own
    equality).
    """
    f = initial_functionals(initial)
    _require_hypotheses(f)

    budget_coeff = f.temp_max * f.d_v / (params.kappa1 * f.a_v)
    tail = kernel_primitive(f.d_x, math.inf, params.alpha)

    candidates = [search.grid(f.d_x)]
    thm31_cert = check_thm31(initial, params, search)
    if thm31_cert.satisfied and thm31_cert.d_x_inf is not None:
        candidates.append(np.array([thm31_cert.d_x_inf * (1.0 + 1e-9)]))
    if budget_coeff < tail:
        # Witnesses strictly inside the primitive-balance region; the level
        # step is capped so alpha <= 1 (infinite tail) stays well defined.
        span = min(tail - budget_coeff, max(budget_coeff, 1.0))
        levels = budget_coeff + span * np.array([1e-6, 1e-3, 0.5])
        candidates.append(
            np.array([primitive_inverse(f.d_x, lv, params.alpha) for lv in levels])
        )
    grid = np.unique(np.concatenate(candidates))
    grid = grid[np.isfinite(grid)]

    prim = _primitive_on_grid(f.d_x, grid, params.alpha)
    phi_inv = grid**params.alpha  # 1 / phi(D)
    reach = np.maximum(grid - f.d_x, prim * phi_inv)
    budget = budget_coeff * phi_inv

    with np.errstate(invalid="ignore"):
        vals1 = np.minimum(reach, f.coord_gap) - budget
        vals2 = reach - budget

    def build(theorem: str, vals: np.ndarray, applicable: bool) -> FlockingCertificate:
        margin = float(np.max(vals))
        satisfied = applicable and margin > 0.0
        d_x_inf = None
        rate_v = rate_t = 0.0
        if satisfied:
            # Smallest qualifying witness: it carries the sharpest decay rate.
            d_x_inf = float(grid[int(np.argmax(vals > 0.0))])
            rate_v = params.kappa1 * f.a_v * phi_eval(d_x_inf, params.alpha) / f.temp_max
            rate_t = params.kappa2 * zeta_eval(d_x_inf, params.zeta) / f.temp_max**2
        return FlockingCertificate(
            theorem=theorem,
            satisfied=satisfied,
            d_x_inf=d_x_inf,
            rate_v=rate_v,
            rate_t=rate_t,
            margin=margin,
            spacing_guarantee=satisfied,
            d_x0=f.d_x,
            d_v0=f.d_v,
            d_t0=f.d_t,
            a_v0=f.a_v,
            temp_max0=f.temp_max,
        )

    cond1 = build("thm41_cond1", vals1, applicable=True)
    cond2 = build("thm41_cond2", vals2, applicable=params.alpha > 1.0)
    return cond1, cond2


# ---------------------------------------------------------------------------
# Batch evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CertificateReport:
    """All certificates for one initial condition, plus precondition failures."""

    certificates: tuple[FlockingCertificate, ...]
    failures: tuple[tuple[str, str], ...]

    @property
    def any_satisfied(self) -> bool:
        return any(c.satisfied for c in self.certificates)

    def get(self, theorem: str) -> FlockingCertificate | None:
        for cert in self.certificates:
            if cert.theorem == theorem:
                return cert
        return None

    def bound_certificate(self) -> FlockingCertificate | None:
        """Certificate to drive decay-bound monitoring (tail kind preferred)."""
        for theorem in ("thm32", "thm31"):
            cert = self.get(theorem)
            if cert is not None and cert.satisfied:
                return cert
        return None


def evaluate_all(
    initial: SystemState,
    params: SystemParams,
    search: CertificateSearch = CertificateSearch(),
) -> CertificateReport:
    """Run every checker, recording precondition failures instead of raising."""
    certificates: list[FlockingCertificate] = []
    failures: list[tuple[str, str]] = []

    try:
        certificates.append(check_thm31(initial, params, search))
    except PreconditionError as err:
        failures.append(("thm31", str(err)))
    try:
        certificates.append(check_thm32(initial, params))
    except PreconditionError as err:
        failures.append(("thm32", str(err)))
    try:
        certificates.extend(check_thm41(initial, params, search))
    except PreconditionError as err:
        failures.append(("thm41_cond1", str(err)))
        failures.append(("thm41_cond2", str(err)))

    return CertificateReport(tuple(certificates), tuple(failures))
