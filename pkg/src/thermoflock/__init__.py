"""Simulation and verification lab for unit-speed thermodynamic flocking.

Agents with unit-speed velocities and internal temperatures interact through
a singular distance kernel; this package integrates the dynamics, monitors
the invariants the model provably satisfies, evaluates sufficient conditions
for flocking and collision avoidance, and reproduces the constructive
collision scenarios.
"""

from .certificates import (
    CertificateReport,
    CertificateSearch,
    FlockingCertificate,
    PreconditionError,
    check_thm31,
    check_thm32,
    check_thm41,
    evaluate_all,
    kernel_primitive,
)
from .diagnostics import (
    DiagnosticsFrame,
    check_decay_bounds,
    check_entropy_rate,
    check_monotonicity,
    compute_frame,
    compute_frames,
)
from .integrator import (
    CollisionEvent,
    DenseSegment,
    IntegratorConfig,
    Termination,
    Trajectory,
    locate_collision,
    run,
    step,
)
from .io import ConfigError, RunConfig, emit_config, load_config, parse_config
from .model import (
    AgentState,
    CollisionError,
    DomainError,
    KernelSpec,
    SystemParams,
    SystemState,
    phi_eval,
    temperature_rhs,
    velocity_rhs,
    zeta_eval,
)
from .oracle import OracleConfig, run_oracle
from .scenarios import (
    InfeasibleScenarioError,
    ScenarioSpec,
    build_example21,
    build_initial_state,
    build_prop41,
    build_random,
)

__version__ = "0.1.0"

__all__ = [
    "AgentState",
    "CertificateReport",
    "CertificateSearch",
    "CollisionError",
    "CollisionEvent",
    "ConfigError",
    "DenseSegment",
    "DiagnosticsFrame",
    "DomainError",
    "FlockingCertificate",
    "InfeasibleScenarioError",
    "IntegratorConfig",
    "KernelSpec",
    "OracleConfig",
    "PreconditionError",
    "RunConfig",
    "ScenarioSpec",
    "SystemParams",
    "SystemState",
    "Termination",
    "Trajectory",
    "build_example21",
    "build_initial_state",
    "build_prop41",
    "build_random",
    "check_decay_bounds",
    "check_entropy_rate",
    "check_monotonicity",
    "check_thm31",
    "check_thm32",
    "check_thm41",
    "compute_frame",
    "compute_frames",
    "emit_config",
    "evaluate_all",
    "kernel_primitive",
    "load_config",
    "locate_collision",
    "parse_config",
    "phi_eval",
    "run",
    "run_oracle",
    "step",
    "temperature_rhs",
    "velocity_rhs",
    "zeta_eval",
]
