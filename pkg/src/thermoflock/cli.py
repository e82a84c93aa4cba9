"""Command-line interface.

Subcommands:

``simulate``
    Build the scenario, evaluate certificates, integrate, compute
    diagnostics, and persist artifacts (CSV/JSON, plus SVG figures when
    requested).  Exit 0 when the horizon is reached, 2 on collision
    termination (the expected outcome for the constructive collision
    scenarios), 1 on errors.
``check``
    Evaluate all certificates without simulating; print a table.  Exit 0 if
    any certificate is satisfied, 3 if none.
``sweep``
    Run a cartesian parameter sweep and write one summary CSV row per cell.
``compare``
    Cross-validate the adaptive integrator against the fixed-step reference.
``scenario``
    Print the built initial state as JSON (pasteable into a custom scenario).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .certificates import CertificateReport, evaluate_all
from .diagnostics import (
    DiagnosticsFrame,
    check_decay_bounds,
    check_entropy_rate,
    check_monotonicity,
    compute_frames,
)
from .integrator import Trajectory, run
from .io import (
    ConfigError,
    RunConfig,
    certificates_to_dict,
    dump_json,
    emit_config,
    load_config,
    parse_sweep,
    state_to_dict,
    sweep_cells,
    write_diagnostics,
    write_events,
    write_trajectory,
    fmt_float,
    config_from_dict,
)
from .model import CollisionError, DomainError, SystemState
from .oracle import OracleCollisionError, OracleConfig, run_oracle
from .scenarios import InfeasibleScenarioError, build_initial_state

_USER_ERRORS = (
    ConfigError,
    DomainError,
    CollisionError,
    InfeasibleScenarioError,
    OracleCollisionError,
    FileNotFoundError,
)


@dataclass
class RunOutcome:
    config: RunConfig
    initial: SystemState
    report: CertificateReport
    trajectory: Trajectory
    frames: list[DiagnosticsFrame]


def execute_run(cfg: RunConfig) -> RunOutcome:
    """Scenario -> certification -> integration -> diagnostics, in memory."""
    initial = build_initial_state(cfg.scenario, cfg.params)
    report = evaluate_all(initial, cfg.params)
    trajectory = run(initial, cfg.params, cfg.integrator, cfg.output_dt)
    frames = compute_frames(trajectory.samples, cfg.params, report.bound_certificate())
    return RunOutcome(cfg, initial, report, trajectory, frames)


def persist_run(outcome: RunOutcome, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(emit_config(outcome.config), encoding="utf-8")
    outputs = outcome.config.outputs
    if "trajectory_csv" in outputs:
        write_trajectory(outcome.trajectory, out_dir / "trajectory.csv")
    if "diagnostics_csv" in outputs:
        write_diagnostics(outcome.frames, out_dir / "diagnostics.csv")
    if "events_json" in outputs:
        write_events(outcome.trajectory, out_dir / "events.json")
    if "certificate_json" in outputs:
        dump_json(certificates_to_dict(outcome.report), out_dir / "certificates.json")
    if "svg_plots" in outputs:
        from .plots import render_figures

        render_figures(outcome.frames, out_dir / "figures", outcome.report.bound_certificate())


def _apply_seed(cfg: RunConfig, seed: int | None) -> RunConfig:
    if seed is None:
        return cfg
    return dataclasses.replace(cfg, scenario=dataclasses.replace(cfg.scenario, seed=seed))


def _print_reports(outcome: RunOutcome, quiet: bool) -> None:
    if quiet:
        return
    for theorem, reason in outcome.report.failures:
        print(f"certificate {theorem}: precondition failed ({reason})")
    for cert in outcome.report.certificates:
        status = "satisfied" if cert.satisfied else "unsatisfied"
        print(f"certificate {cert.theorem}: {status} (margin {cert.margin:.6g})")
    mono = check_monotonicity(outcome.frames)
    for check in mono.checks:
        print(f"check {check.describe()}")
    if len(outcome.frames) >= 3:
        try:
            print(f"check {check_entropy_rate(outcome.frames).describe()}")
        except ValueError:
            pass  # non-uniform cadence (collision-shortened run)
    cert = outcome.report.bound_certificate()
    if cert is not None:
        # Sampled diameters carry dense-output noise of a few times rel_tol,
        # so the envelope floor scales with the configured accuracy.
        atol = max(1e-10, 100.0 * outcome.config.integrator.rel_tol)
        for check in check_decay_bounds(outcome.frames, cert, envelope_atol=atol).checks:
            print(f"check {check.describe()}")


def _summary_line(outcome: RunOutcome) -> str:
    last = outcome.frames[-1]
    term = outcome.trajectory.termination
    extra = ""
    if term.event is not None:
        extra = (
            f" collision_time={term.event.time:.9g}"
            f" pair={term.event.pair[0]}-{term.event.pair[1]}"
        )
    return (
        f"termination={term.kind}{extra} final_d_v={last.d_v:.9g} "
        f"final_d_t={last.d_t:.9g} min_pair_dist={min(f.min_pair_dist for f in outcome.frames):.9g}"
    )


def cmd_simulate(args) -> int:
    cfg = _apply_seed(load_config(args.config), args.seed)
    outcome = execute_run(cfg)
    persist_run(outcome, Path(args.out))
    _print_reports(outcome, args.quiet)
    if not args.quiet:
        print(_summary_line(outcome))
    kind = outcome.trajectory.termination.kind
    if kind == "reached_t_end":
        return 0
    if kind == "collision":
        return 2
    print(f"error: {outcome.trajectory.termination.reason}", file=sys.stderr)
    return 1


def cmd_check(args) -> int:
    cfg = _apply_seed(load_config(args.config), args.seed)
    initial = build_initial_state(cfg.scenario, cfg.params)
    report = evaluate_all(initial, cfg.params)
    if not args.quiet:
        header = f"{'theorem':<14}{'satisfied':<11}{'d_x_inf':<24}{'rate_v':<24}{'rate_t':<24}{'margin':<24}{'spacing':<8}"
        print(header)
        for cert in report.certificates:
            d = "-" if cert.d_x_inf is None else f"{cert.d_x_inf:.12g}"
            print(
                f"{cert.theorem:<14}{str(cert.satisfied).lower():<11}{d:<24}"
                f"{cert.rate_v:<24.12g}{cert.rate_t:<24.12g}{cert.margin:<24.12g}"
                f"{str(cert.spacing_guarantee).lower():<8}"
            )
        for theorem, reason in report.failures:
            print(f"{theorem:<14}precondition failed: {reason}")
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        dump_json(certificates_to_dict(report), out_dir / "certificates.json")
    return 0 if report.any_satisfied else 3


_SWEEP_COLUMNS = (
    "cell",
    "alpha",
    "kappa1",
    "kappa2",
    "velocity_cap_angle",
    "seed",
    "thm31_satisfied",
    "thm32_satisfied",
    "thm41_cond1_satisfied",
    "thm41_cond2_satisfied",
    "termination",
    "collision_time",
    "collision_pair",
    "final_d_v",
    "final_d_t",
    "min_pair_dist",
    "error",
)


def _sweep_row(index: int, cell_doc: dict) -> dict:
    row = {name: "" for name in _SWEEP_COLUMNS}
    row["cell"] = str(index)
    row["alpha"] = fmt_float(cell_doc["params"]["alpha"])
    row["kappa1"] = fmt_float(cell_doc["params"]["kappa1"])
    row["kappa2"] = fmt_float(cell_doc["params"]["kappa2"])
    scenario = cell_doc["scenario"]
    if scenario["kind"] == "random_cap":
        row["velocity_cap_angle"] = fmt_float(scenario["velocity_cap_angle"])
        row["seed"] = str(scenario["seed"])
    try:
        outcome = execute_run(config_from_dict(cell_doc))
    except Exception as err:  # cell failures are data, not crashes
        row["error"] = f"{type(err).__name__}: {err}".replace("\n", " ").replace(",", ";")
        return row
    for cert in outcome.report.certificates:
        row[f"{cert.theorem}_satisfied"] = str(cert.satisfied).lower()
    term = outcome.trajectory.termination
    row["termination"] = term.kind
    if term.event is not None:
        row["collision_time"] = fmt_float(term.event.time)
        row["collision_pair"] = f"{term.event.pair[0]}-{term.event.pair[1]}"
    last = outcome.frames[-1]
    row["final_d_v"] = fmt_float(last.d_v)
    row["final_d_t"] = fmt_float(last.d_t)
    row["min_pair_dist"] = fmt_float(min(f.min_pair_dist for f in outcome.frames))
    return row


def cmd_sweep(args) -> int:
    spec = parse_sweep(Path(args.config).read_text(encoding="utf-8"))
    cells = list(sweep_cells(spec))

    def job(item):
        index, _, cell_doc = item
        return index, _sweep_row(index, cell_doc)

    if spec.parallelism > 1:
        with ThreadPoolExecutor(max_workers=spec.parallelism) as pool:
            results = dict(pool.map(job, cells))
    else:
        results = dict(job(item) for item in cells)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [",".join(_SWEEP_COLUMNS)]
    for index in range(len(cells)):
        row = results[index]
        lines.append(",".join(row[name] for name in _SWEEP_COLUMNS))
    path = out_dir / "sweep_summary.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if not args.quiet:
        n_failed = sum(1 for row in results.values() if row["error"])
        print(f"sweep: {len(cells)} cells ({n_failed} failed) -> {path}")
    return 0


def cmd_compare(args) -> int:
    cfg = _apply_seed(load_config(args.config), args.seed)
    initial = build_initial_state(cfg.scenario, cfg.params)
    trajectory = run(initial, cfg.params, cfg.integrator, cfg.output_dt)
    if trajectory.termination.kind != "reached_t_end":
        print(
            f"error: adaptive run terminated with {trajectory.termination.kind}; "
            "comparison needs a collision-free horizon",
            file=sys.stderr,
        )
        return 1
    oracle_cfg = OracleConfig(
        dt=args.oracle_dt,
        t_end=cfg.integrator.t_end,
        collision_threshold=cfg.integrator.collision_threshold,
    )
    reference = run_oracle(initial, cfg.params, oracle_cfg)
    endpoint = trajectory.samples[-1]
    discrepancy = max(
        float(np.max(np.abs(endpoint.positions - reference.positions))),
        float(np.max(np.abs(endpoint.velocities - reference.velocities))),
        float(np.max(np.abs(endpoint.temperatures - reference.temperatures))),
    )
    bound = max(1e-7, 100.0 * cfg.integrator.rel_tol)
    if not args.quiet:
        print(
            f"max per-coordinate endpoint discrepancy: {discrepancy:.6e} "
            f"(bound {bound:.6e})"
        )
    return 0 if discrepancy <= bound else 1


def cmd_scenario(args) -> int:
    cfg = _apply_seed(load_config(args.config), args.seed)
    initial = build_initial_state(cfg.scenario, cfg.params)
    doc = state_to_dict(initial)
    dump_json(doc, sys.stdout)
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        dump_json(doc, out_dir / "initial_state.json")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermoflock",
        description=(
            "Simulation and verification lab for unit-speed flocking with "
            "internal temperatures and singular interaction kernels."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out_default=None):
        p.add_argument("--config", required=True, help="path to the JSON configuration")
        if needs_out_default is None:
            p.add_argument("--out", default=None, help="output directory (optional)")
        else:
            p.add_argument("--out", default=needs_out_default, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--quiet", action="store_true", help="suppress console reports")

    p = sub.add_parser("simulate", help="run one scenario end to end")
    common(p, needs_out_default="out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="evaluate certificates without simulating")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sweep", help="run a cartesian parameter sweep")
    common(p, needs_out_default="out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="adaptive vs fixed-step cross-validation")
    common(p)
    p.add_argument(
        "--oracle-dt", type=float, default=1e-5, help="fixed step of the reference integrator"
    )
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("scenario", help="print the built initial state")
    common(p)
    p.set_defaults(func=cmd_scenario)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _USER_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
