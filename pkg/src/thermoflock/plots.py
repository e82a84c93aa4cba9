"""Static SVG figures for the report path of a run.

Two charts per run: the velocity/temperature diameters on a log scale with
the certified exponential envelopes overlaid when a satisfied certificate is
attached, and the spacing chart (minimum pairwise distance and position
diameter, with the certified diameter bound).  Figure metadata is pinned so
repeated runs produce stable files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .certificates import FlockingCertificate

_LOG_FLOOR = 1e-18

matplotlib.rcParams["svg.hashsalt"] = "thermoflock"


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_figures(frames, out_dir, certificate: FlockingCertificate | None = None) -> list[Path]:
    """Write decay.svg and spacing.svg under ``out_dir``; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    times = np.array([f.time for f in frames])
    d_v = np.array([f.d_v for f in frames])
    d_t = np.array([f.d_t for f in frames])
    d_x = np.array([f.d_x for f in frames])
    min_dist = np.array([f.min_pair_dist for f in frames])
    written = []

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.semilogy(times, np.maximum(d_v, _LOG_FLOOR), label="velocity diameter", color="tab:blue")
    ax.semilogy(
        times, np.maximum(d_t, _LOG_FLOOR), label="temperature diameter", color="tab:red"
    )
    if certificate is not None and certificate.satisfied:
        v_env = certificate.d_v0 * np.exp(-certificate.rate_v * times)
        t_env = certificate.d_t0 * np.exp(-certificate.rate_t * times)
        ax.semilogy(
            times,
            np.maximum(v_env, _LOG_FLOOR),
            "--",
            color="tab:blue",
            alpha=0.6,
            label="certified velocity envelope",
        )
        ax.semilogy(
            times,
            np.maximum(t_env, _LOG_FLOOR),
            "--",
            color="tab:red",
            alpha=0.6,
            label="certified temperature envelope",
        )
    ax.set_xlabel("time")
    ax.set_ylabel("diameter")
    ax.set_title("Diameter decay")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    decay_path = out_dir / "decay.svg"
    _save(fig, decay_path)
    written.append(decay_path)

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(times, min_dist, label="min pairwise distance", color="tab:green")
    ax.plot(times, d_x, label="position diameter", color="tab:purple")
    if certificate is not None and certificate.satisfied and certificate.d_x_inf is not None:
        ax.axhline(
            certificate.d_x_inf, linestyle="--", color="tab:purple", alpha=0.6,
            label="certified diameter bound",
        )
    ax.set_xlabel("time")
    ax.set_ylabel("length")
    ax.set_title("Spacing")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    spacing_path = out_dir / "spacing.svg"
    _save(fig, spacing_path)
    written.append(spacing_path)

    return written
