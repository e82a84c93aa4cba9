"""Configuration parsing and artifact persistence.

Run configurations are JSON documents validated against the schema shipped in
``thermoflock/schemas/run_config.schema.json``; validation failures raise
:class:`ConfigError` carrying the JSON pointer of the offending field.
Parsing materializes every default, so an echoed configuration is fully
self-contained and re-parses to the same object.

Time series go to CSV with 17 significant digits (lossless for doubles);
events and certificates go to JSON with a fixed key order.  Non-finite floats
are encoded as the strings ``"inf"``, ``"-inf"``, ``"nan"`` to keep the
documents valid JSON.  All writers are deterministic: identical inputs yield
byte-identical files.
"""

from __future__ import annotations

import importlib.resources
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .certificates import CertificateReport, FlockingCertificate
from .diagnostics import FRAME_FIELDS, DiagnosticsFrame
from .integrator import IntegratorConfig, Trajectory
from .model import AgentState, DomainError, KernelSpec, SystemParams, SystemState
from .scenarios import ScenarioSpec

RUN_OUTPUTS = (
    "trajectory_csv",
    "diagnostics_csv",
    "events_json",
    "certificate_json",
    "svg_plots",
)

SWEEP_AXES = ("alpha", "kappa1", "kappa2", "velocity_cap_angle", "seed")
MAX_SWEEP_CELLS = 100_000

DIAGNOSTICS_HEADER = ",".join(FRAME_FIELDS)


class ConfigError(ValueError):
    """A configuration document failed validation.

    ``pointer`` locates the offending field as a JSON pointer ('/' is the
    document root).
    """

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer or "/"
        super().__init__(f"config error at {self.pointer}: {message}")


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioSpec
    params: SystemParams
    integrator: IntegratorConfig
    output_dt: float
    outputs: tuple[str, ...]


def _load_schema(name: str) -> dict:
    path = importlib.resources.files("thermoflock") / "schemas" / name
    return json.loads(path.read_text(encoding="utf-8"))


_RUN_VALIDATOR = jsonschema.Draft202012Validator(_load_schema("run_config.schema.json"))
_SWEEP_VALIDATOR = jsonschema.Draft202012Validator(_load_schema("sweep_config.schema.json"))

_BOUND_WORDS = {
    "minimum": ">=",
    "exclusiveMinimum": ">",
    "maximum": "<=",
    "exclusiveMaximum": "<",
}


def _schema_error(err: jsonschema.exceptions.ValidationError) -> ConfigError:
    pointer = "/" + "/".join(str(p) for p in err.absolute_path)
    if err.validator in _BOUND_WORDS:
        field = str(err.absolute_path[-1]) if err.absolute_path else "value"
        return ConfigError(
            pointer,
            f"{err.instance!r} violates the requirement "
            f"{field} {_BOUND_WORDS[err.validator]} {err.validator_value}",
        )
    return ConfigError(pointer, err.message)


def _validate(doc, validator) -> None:
    errors = sorted(validator.iter_errors(doc), key=jsonschema.exceptions.relevance)
    if errors:
        raise _schema_error(jsonschema.exceptions.best_match(errors))


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

def scenario_shape(spec: ScenarioSpec) -> tuple[int, int]:
    """(n_agents, dim) implied by a scenario; the two-agent constructions are planar."""
    if spec.kind == "random_cap":
        return spec.n_agents, spec.dim
    if spec.kind in ("example21", "prop41"):
        return 2, 2
    agents = spec.agents or ()
    return len(agents), agents[0].position.size


def _scenario_from_dict(doc: dict) -> ScenarioSpec:
    kwargs = dict(doc)
    if "temp_range" in kwargs:
        lo, hi = kwargs["temp_range"]
        if not lo <= hi:
            raise ConfigError("/scenario/temp_range", f"range [{lo}, {hi}] is empty")
        kwargs["temp_range"] = (float(lo), float(hi))
    if "agents" in kwargs:
        agents = []
        for i, a in enumerate(kwargs["agents"]):
            try:
                agents.append(
                    AgentState(
                        position=a["position"],
                        velocity=a["velocity"],
                        temperature=a["temperature"],
                    )
                )
            except DomainError as err:
                raise ConfigError(f"/scenario/agents/{i}", str(err)) from err
        dims = {a.position.size for a in agents}
        if len(dims) != 1:
            raise ConfigError("/scenario/agents", "agents must share one dimension")
        kwargs["agents"] = tuple(agents)
    try:
        return ScenarioSpec(**kwargs)
    except DomainError as err:
        raise ConfigError("/scenario", str(err)) from err


def config_from_dict(doc: dict) -> RunConfig:
    """Validate a parsed JSON document and materialize every default."""
    _validate(doc, _RUN_VALIDATOR)

    scenario = _scenario_from_dict(doc["scenario"])
    n_agents, dim = scenario_shape(scenario)

    params_doc = doc["params"]
    zeta_doc = params_doc.get("zeta", {"family": "rational_decay", "beta": 2.0})
    try:
        params = SystemParams(
            n_agents=n_agents,
            dim=dim,
            kappa1=float(params_doc["kappa1"]),
            kappa2=float(params_doc["kappa2"]),
            alpha=float(params_doc["alpha"]),
            zeta=KernelSpec(
                family=zeta_doc["family"], beta=float(zeta_doc.get("beta", 2.0))
            ),
        )
    except DomainError as err:
        raise ConfigError("/params", str(err)) from err

    if scenario.kind == "prop41" and not params.alpha < 1.0:
        raise ConfigError(
            "/params/alpha",
            f"the prop41 scenario needs 0 < alpha < 1, got {params.alpha!r}",
        )

    try:
        integrator = IntegratorConfig(**doc["integrator"])
    except (DomainError, TypeError) as err:
        raise ConfigError("/integrator", str(err)) from err

    output_dt = float(doc.get("output_dt", min(0.1, integrator.t_end)))
    if output_dt > integrator.t_end:
        raise ConfigError(
            "/output_dt",
            f"{output_dt!r} exceeds the horizon t_end = {integrator.t_end!r}",
        )

    outputs = tuple(doc.get("outputs", list(RUN_OUTPUTS)))
    # Canonical order regardless of how the user listed them.
    outputs = tuple(name for name in RUN_OUTPUTS if name in outputs)

    return RunConfig(
        scenario=scenario,
        params=params,
        integrator=integrator,
        output_dt=output_dt,
        outputs=outputs,
    )


def parse_config(text: str) -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("/", f"not valid JSON: {err}") from err
    if not isinstance(doc, dict):
        raise ConfigError("/", "top level must be a JSON object")
    return config_from_dict(doc)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def agent_to_dict(agent: AgentState) -> dict:
    return {
        "position": [float(x) for x in agent.position],
        "velocity": [float(x) for x in agent.velocity],
        "temperature": float(agent.temperature),
    }


def state_to_dict(state: SystemState) -> dict:
    """State as JSON, shaped to paste into a custom-scenario 'agents' field."""
    return {"time": state.time, "agents": [agent_to_dict(a) for a in state.agents]}


def config_to_dict(cfg: RunConfig) -> dict:
    scenario: dict = {"kind": cfg.scenario.kind}
    if cfg.scenario.kind == "random_cap":
        scenario.update(
            seed=cfg.scenario.seed,
            n_agents=cfg.scenario.n_agents,
            dim=cfg.scenario.dim,
            velocity_cap_angle=cfg.scenario.velocity_cap_angle,
            position_box=cfg.scenario.position_box,
            min_initial_gap=cfg.scenario.min_initial_gap,
            temp_range=list(cfg.scenario.temp_range),
        )
    elif cfg.scenario.kind in ("example21", "prop41"):
        scenario["gap"] = cfg.scenario.gap
    else:
        scenario["agents"] = [agent_to_dict(a) for a in cfg.scenario.agents]
    return {
        "scenario": scenario,
        "params": {
            "kappa1": cfg.params.kappa1,
            "kappa2": cfg.params.kappa2,
            "alpha": cfg.params.alpha,
            "zeta": {"family": cfg.params.zeta.family, "beta": cfg.params.zeta.beta},
        },
        "integrator": {
            "rel_tol": cfg.integrator.rel_tol,
            "abs_tol": cfg.integrator.abs_tol,
            "dt_init": cfg.integrator.dt_init,
            "dt_max": cfg.integrator.dt_max,
            "collision_threshold": cfg.integrator.collision_threshold,
            "event_time_tol": cfg.integrator.event_time_tol,
            "t_end": cfg.integrator.t_end,
            "speed_drift_cap": cfg.integrator.speed_drift_cap,
        },
        "output_dt": cfg.output_dt,
        "outputs": list(cfg.outputs),
    }


def emit_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"


# ---------------------------------------------------------------------------
# Sweep specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """Validated sweep: a materialized base document plus override axes."""

    base: dict
    axes: tuple[tuple[str, tuple[float, ...]], ...]
    parallelism: int

    @property
    def n_cells(self) -> int:
        n = 1
        for _, values in self.axes:
            n *= len(values)
        return n


_AXIS_POINTERS = {
    "alpha": ("params", "alpha"),
    "kappa1": ("params", "kappa1"),
    "kappa2": ("params", "kappa2"),
    "velocity_cap_angle": ("scenario", "velocity_cap_angle"),
    "seed": ("scenario", "seed"),
}


def parse_sweep(text: str) -> SweepSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("/", f"not valid JSON: {err}") from err
    _validate(doc, _SWEEP_VALIDATOR)

    base = config_to_dict(config_from_dict(doc["base"]))
    axes = []
    for i, (name, values) in enumerate(doc["axes"]):
        if name == "seed":
            values = tuple(int(v) for v in values)
        else:
            values = tuple(float(v) for v in values)
        axes.append((name, values))
        if name == "velocity_cap_angle" and base["scenario"]["kind"] != "random_cap":
            raise ConfigError(
                f"/axes/{i}", "velocity_cap_angle only applies to random_cap scenarios"
            )
    spec = SweepSpec(base=base, axes=tuple(axes), parallelism=int(doc.get("parallelism", 1)))
    if spec.n_cells > MAX_SWEEP_CELLS:
        raise ConfigError("/axes", f"sweep has {spec.n_cells} cells, above {MAX_SWEEP_CELLS}")
    return spec


def sweep_cells(spec: SweepSpec):
    """Yield (index, overrides, cell document) in deterministic row-major order."""
    names = [name for name, _ in spec.axes]
    for index, combo in enumerate(itertools.product(*(values for _, values in spec.axes))):
        cell = json.loads(json.dumps(spec.base))
        overrides = dict(zip(names, combo))
        for name, value in overrides.items():
            section, key = _AXIS_POINTERS[name]
            cell[section][key] = value
        yield index, overrides, cell


# ---------------------------------------------------------------------------
# Artifact writers
# ---------------------------------------------------------------------------

def fmt_float(value: float) -> str:
    """17 significant digits: lossless round-trip for doubles."""
    return f"{value:.17g}"


def _open_sink(sink):
    if hasattr(sink, "write"):
        return sink, False
    return open(sink, "w", encoding="utf-8", newline=""), True


def _write_text(sink, text: str) -> None:
    handle, owned = _open_sink(sink)
    try:
        handle.write(text)
    finally:
        if owned:
            handle.close()


def _sanitize(obj):
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return obj
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def dump_json(doc, sink) -> None:
    _write_text(sink, json.dumps(_sanitize(doc), indent=2) + "\n")


def write_diagnostics(frames, sink) -> None:
    """Diagnostics frames as CSV; absent Lyapunov values become empty fields."""
    frames = list(frames)
    if not frames:
        raise ValueError("no frames to write")
    lines = [DIAGNOSTICS_HEADER]
    for frame in frames:
        cells = []
        for name in FRAME_FIELDS:
            value = getattr(frame, name)
            cells.append("" if value is None else fmt_float(value))
        lines.append(",".join(cells))
    _write_text(sink, "\n".join(lines) + "\n")


def read_diagnostics(text: str) -> list[DiagnosticsFrame]:
    lines = [ln for ln in text.split("\n") if ln]
    if not lines or lines[0] != DIAGNOSTICS_HEADER:
        raise ValueError("unrecognized diagnostics header")
    frames = []
    for line in lines[1:]:
        cells = line.split(",")
        values = {
            name: (None if cell == "" else float(cell))
            for name, cell in zip(FRAME_FIELDS, cells)
        }
        frames.append(DiagnosticsFrame(**values))
    return frames


def trajectory_header(n_agents: int, dim: int) -> str:
    cols = ["time"]
    for i in range(n_agents):
        cols.extend(f"x{i}_{c}" for c in range(dim))
        cols.extend(f"v{i}_{c}" for c in range(dim))
        cols.append(f"T{i}")
    return ",".join(cols)


def write_trajectory(trajectory: Trajectory, sink) -> None:
    samples = trajectory.samples
    first = samples[0]
    lines = [trajectory_header(first.n_agents, first.dim)]
    for s in samples:
        cells = [fmt_float(s.time)]
        for i in range(s.n_agents):
            cells.extend(fmt_float(x) for x in s.positions[i])
            cells.extend(fmt_float(v) for v in s.velocities[i])
            cells.append(fmt_float(float(s.temperatures[i])))
        lines.append(",".join(cells))
    _write_text(sink, "\n".join(lines) + "\n")


def events_to_dict(trajectory: Trajectory) -> dict:
    events = []
    if trajectory.termination.event is not None:
        ev = trajectory.termination.event
        events.append(
            {
                "time": ev.time,
                "pair": [ev.pair[0], ev.pair[1]],
                "min_distance_at_event": ev.min_distance_at_event,
            }
        )
    return {
        "termination": trajectory.termination.kind,
        "reason": trajectory.termination.reason,
        "events": events,
    }


def write_events(trajectory: Trajectory, sink) -> None:
    dump_json(events_to_dict(trajectory), sink)


def certificate_to_dict(cert: FlockingCertificate) -> dict:
    doc: dict = {"theorem": cert.theorem, "satisfied": cert.satisfied}
    if cert.d_x_inf is not None:
        doc["d_x_inf"] = cert.d_x_inf
    doc.update(
        rate_v=cert.rate_v,
        rate_t=cert.rate_t,
        margin=cert.margin,
        spacing_guarantee=cert.spacing_guarantee,
        initial={
            "d_x0": cert.d_x0,
            "d_v0": cert.d_v0,
            "d_t0": cert.d_t0,
            "a_v0": cert.a_v0,
            "temp_max0": cert.temp_max0,
        },
    )
    return doc


def certificates_to_dict(report: CertificateReport) -> dict:
    return {
        "certificates": [certificate_to_dict(c) for c in report.certificates],
        "precondition_failures": [
            {"theorem": theorem, "reason": reason} for theorem, reason in report.failures
        ],
    }


def write_certificates(report: CertificateReport, sink) -> None:
    dump_json(certificates_to_dict(report), sink)
