"""Monitored functionals along trajectories and checks of the proved claims.

Every output sample is condensed into a :class:`DiagnosticsFrame` by an
exhaustive pair scan: position/velocity/temperature diameters, the smallest
pairwise velocity inner product, entropy ``sum_i ln T_i`` with its closed-form
production rate, temperature extremes and total, the minimum pairwise
distance, and (when a certificate is attached) the two Lyapunov values

    L_pm = D_V +- (kappa1 * A0 / T_max0) * Phi(D_X),

with ``Phi`` the kernel primitive anchored at the initial position diameter
and ``A0`` frozen at t = 0.  The check_* functions restate the continuum
claims at sample granularity with explicit tolerances so each is directly
assertable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certificates import FlockingCertificate, PreconditionError, kernel_primitive
from .model import SystemParams, SystemState, pairwise_distances, zeta_eval

#: Column order of the diagnostics CSV; pinned for golden-file stability.
FRAME_FIELDS = (
    "time",
    "d_x",
    "d_v",
    "d_t",
    "a_v",
    "entropy",
    "temp_sum",
    "temp_min",
    "temp_max",
    "min_pair_dist",
    "entropy_production",
    "lyap_plus",
    "lyap_minus",
)

#: Absolute slack allowed per consecutive sample in the monotonicity checks.
MONOTONICITY_TOL = 1e-9


@dataclass(frozen=True)
class DiagnosticsFrame:
    time: float
    d_x: float
    d_v: float
    d_t: float
    a_v: float
    entropy: float
    temp_sum: float
    temp_min: float
    temp_max: float
    min_pair_dist: float
    entropy_production: float
    lyap_plus: float | None = None
    lyap_minus: float | None = None


def signed_primitive(anchor: float, value: float, alpha: float) -> float:
    """Kernel primitive from ``anchor`` to ``value``; negative below the anchor."""
    if value >= anchor:
        return kernel_primitive(anchor, value, alpha)
    return -kernel_primitive(value, anchor, alpha)


def compute_frame(
    state: SystemState,
    params: SystemParams,
    certificate: FlockingCertificate | None = None,
) -> DiagnosticsFrame:
    """All monitored functionals of one state.

    Entropy production is the closed-form derivative of the entropy,
    ``(kappa2 / 2N) * sum_{i != j} zeta_ij (1/T_i - 1/T_j)^2``.
    Lyapunov values are populated only when a certificate supplies the frozen
    initial constants.
    """
    n = state.n_agents
    iu, ju = np.triu_indices(n, k=1)
    dists = pairwise_distances(state.positions)[iu, ju]
    vdiff = np.linalg.norm(state.velocities[iu] - state.velocities[ju], axis=1)
    inner = np.sum(state.velocities[iu] * state.velocities[ju], axis=1)
    temps = state.temperatures
    tdiff = np.abs(temps[iu] - temps[ju])

    inv_t = 1.0 / temps
    zeta = zeta_eval(dists, params.zeta)
    # Unordered pairs each stand for two ordered terms of the double sum.
    production = float(params.kappa2 / (2.0 * n) * 2.0 * np.sum(zeta * (inv_t[iu] - inv_t[ju]) ** 2))

    d_x = float(np.max(dists))
    d_v = float(np.max(vdiff))

    lyap_plus = lyap_minus = None
    if certificate is not None:
        coeff = params.kappa1 * certificate.a_v0 / certificate.temp_max0
        prim = signed_primitive(certificate.d_x0, d_x, params.alpha)
        lyap_plus = d_v + coeff * prim
        lyap_minus = d_v - coeff * prim

    return DiagnosticsFrame(
        time=state.time,
        d_x=d_x,
        d_v=d_v,
        d_t=float(np.max(tdiff)),
        a_v=float(np.min(inner)),
        entropy=float(np.sum(np.log(temps))),
        temp_sum=float(np.sum(temps)),
        temp_min=float(np.min(temps)),
        temp_max=float(np.max(temps)),
        min_pair_dist=float(np.min(dists)),
        entropy_production=production,
        lyap_plus=lyap_plus,
        lyap_minus=lyap_minus,
    )


def compute_frames(samples, params, certificate=None) -> list[DiagnosticsFrame]:
    return [compute_frame(s, params, certificate) for s in samples]


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    first_violation: int | None
    worst: float  # most negative slack seen (0 when clean)

    def describe(self) -> str:
        status = "pass" if self.passed else f"FAIL at sample {self.first_violation}"
        return f"{self.name}: {status} (worst slack {self.worst:.3e})"


@dataclass(frozen=True)
class DiagnosticsReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def get(self, name: str) -> CheckResult:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)


def _sequence_check(name: str, slacks: np.ndarray, tol: float, offset: int = 1) -> CheckResult:
    """slacks[k] >= -tol must hold for all k; index k maps to sample k + offset.

    Consecutive-pair checks use offset 1 (slack 0 compares samples 0 and 1);
    per-sample checks use offset 0.
    """
    bad = np.nonzero(slacks < -tol)[0]
    worst = float(min(np.min(slacks, initial=0.0), 0.0))
    if bad.size:
        return CheckResult(name, False, int(bad[0]) + offset, worst)
    return CheckResult(name, True, None, worst)


def check_monotonicity(frames, tol: float = MONOTONICITY_TOL) -> DiagnosticsReport:
    """Sampled monotonicity/conservation checks along one trajectory.

    Verifies, per consecutive sample pair and up to ``tol``: entropy
    nondecreasing, max temperature nonincreasing, min temperature
    nondecreasing, temperature sum constant, and (only when the initial value
    is positive) the velocity-pair angle functional nondecreasing.
    """
    if len(frames) < 1:
        raise ValueError("need at least one frame")
    entropy = np.array([f.entropy for f in frames])
    tmax = np.array([f.temp_max for f in frames])
    tmin = np.array([f.temp_min for f in frames])
    tsum = np.array([f.temp_sum for f in frames])
    a_v = np.array([f.a_v for f in frames])

    checks = [
        _sequence_check("entropy_nondecreasing", np.diff(entropy), tol),
        _sequence_check("temp_max_nonincreasing", -np.diff(tmax), tol),
        _sequence_check("temp_min_nondecreasing", np.diff(tmin), tol),
        _sequence_check("temp_sum_constant", -np.abs(np.diff(tsum)), tol),
    ]
    if a_v[0] > 0.0:
        checks.append(_sequence_check("a_v_nondecreasing", np.diff(a_v), tol))
    return DiagnosticsReport(tuple(checks))


@dataclass(frozen=True)
class EntropyRateReport:
    passed: bool
    max_mismatch: float
    tolerance: float
    n_interior: int

    def describe(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"entropy_rate: {status} (max mismatch {self.max_mismatch:.3e}, "
            f"tolerance {self.tolerance:.3e})"
        )


def check_entropy_rate(frames, tol_floor: float = 1e-6) -> EntropyRateReport:
    """Central finite differences of the sampled entropy against the closed form.

    Requires a uniform output cadence.  The tolerance scales with the square
    of the cadence (second-order differencing), floored at ``tol_floor``.
    """
    if len(frames) < 3:
        raise ValueError("need at least three frames for a central difference")
    times = np.array([f.time for f in frames])
    steps = np.diff(times)
    dt = float(steps[0])
    if np.any(np.abs(steps - dt) > 1e-9 * max(dt, 1.0)):
        raise ValueError("frames must be uniformly spaced in time")
    entropy = np.array([f.entropy for f in frames])
    production = np.array([f.entropy_production for f in frames])

    slope = (entropy[2:] - entropy[:-2]) / (times[2:] - times[:-2])
    mismatch = np.abs(slope - production[1:-1])
    scale = max(
        1.0,
        float(np.max(np.abs(production))),
        float(np.max(np.abs(np.diff(production)))) / dt,
    )
    tolerance = max(tol_floor, 5.0 * dt**2 * scale)
    max_mismatch = float(np.max(mismatch))
    return EntropyRateReport(
        passed=max_mismatch <= tolerance,
        max_mismatch=max_mismatch,
        tolerance=tolerance,
        n_interior=len(frames) - 2,
    )


def check_decay_bounds(
    frames,
    certificate: FlockingCertificate,
    envelope_slack: float = 1e-6,
    envelope_atol: float = 1e-10,
    lyap_tol: float = MONOTONICITY_TOL,
) -> DiagnosticsReport:
    """Certified decay-bound checks at every sample.

    Asserts the position diameter stays under the certificate witness (strict
    for thm31, weak for the others), the velocity and temperature diameters
    stay under their exponential envelopes within a relative ``envelope_slack``
    plus an absolute ``envelope_atol`` (the envelope of an aligned start is
    identically zero, which rounding cannot meet), and both Lyapunov values
    are nonincreasing within ``lyap_tol`` when present.  Refuses to run on an
    unsatisfied certificate.
    """
    if not certificate.satisfied or certificate.d_x_inf is None:
        raise PreconditionError("decay bounds require a satisfied certificate")
    times = np.array([f.time for f in frames])
    d_x = np.array([f.d_x for f in frames])
    d_v = np.array([f.d_v for f in frames])
    d_t = np.array([f.d_t for f in frames])

    if certificate.theorem == "thm31":
        diam_slack = certificate.d_x_inf - d_x
        diam_ok = bool(np.all(d_x < certificate.d_x_inf))
        diam = CheckResult(
            "d_x_below_witness",
            diam_ok,
            None if diam_ok else int(np.argmax(d_x >= certificate.d_x_inf)),
            float(np.min(diam_slack)),
        )
    else:
        slacks = certificate.d_x_inf * (1.0 + 1e-12) - d_x
        bad = np.nonzero(slacks < 0.0)[0]
        diam = CheckResult(
            "d_x_below_witness",
            bad.size == 0,
            int(bad[0]) if bad.size else None,
            float(np.min(slacks)),
        )

    v_env = (
        certificate.d_v0 * np.exp(-certificate.rate_v * times) * (1.0 + envelope_slack)
        + envelope_atol
    )
    t_env = (
        certificate.d_t0 * np.exp(-certificate.rate_t * times) * (1.0 + envelope_slack)
        + envelope_atol
    )
    checks = [
        diam,
        _sequence_check("d_v_within_envelope", v_env - d_v, 0.0, offset=0),
        _sequence_check("d_t_within_envelope", t_env - d_t, 0.0, offset=0),
    ]

    lyap_plus = [f.lyap_plus for f in frames]
    lyap_minus = [f.lyap_minus for f in frames]
    if all(v is not None for v in lyap_plus):
        checks.append(
            _sequence_check("lyap_plus_nonincreasing", -np.diff(np.array(lyap_plus)), lyap_tol)
        )
        checks.append(
            _sequence_check("lyap_minus_nonincreasing", -np.diff(np.array(lyap_minus)), lyap_tol)
        )
    return DiagnosticsReport(tuple(checks))
