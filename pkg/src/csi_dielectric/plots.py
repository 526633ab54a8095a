"""Figure rendering for the report path (PNG files next to the CSV output)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .preprocess import AveragedResponse


def save_response_figure(avg: AveragedResponse, label: str, path) -> Path:
    """Averaged amplitude and adjusted phase versus subcarrier position."""
    positions = np.arange(1, avg.grid.n_subcarriers + 1)
    fig, (ax_amp, ax_ph) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    ax_amp.plot(positions, np.abs(avg.values), "o-", ms=3)
    ax_amp.set_ylabel("amplitude [V]")
    ax_amp.set_title(f"{label}: averaged response ({avg.n_frames_used} frames)")
    ax_ph.plot(positions, np.angle(avg.values), "o-", ms=3, color="tab:orange")
    ax_ph.set_ylabel("adjusted phase [rad]")
    ax_ph.set_xlabel("subcarrier position")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_sweep_figure(rows: list[dict], label: str, path) -> Path:
    """Per-subcarrier estimates for one material (rows from the estimate CSV)."""
    ok = [r for r in rows if r.get("eps_hat") not in (None, "")]
    positions = [int(r["subcarrier_position"]) for r in ok]
    eps = [float(r["eps_hat"]) for r in ok]
    sig = [float(r["sigma_hat"]) for r in ok]
    fig, (ax_e, ax_s) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    ax_e.plot(positions, eps, "s-", ms=3)
    ax_e.set_ylabel("relative permittivity")
    ax_e.set_title(f"{label}: per-subcarrier estimates")
    ax_s.plot(positions, sig, "s-", ms=3, color="tab:green")
    ax_s.set_ylabel("conductivity [S/m]")
    ax_s.set_xlabel("subcarrier position")
    truth_eps = next((r.get("eps_truth") for r in rows if r.get("eps_truth")), None)
    truth_sig = next((r.get("sigma_truth") for r in rows if r.get("sigma_truth")), None)
    if truth_eps:
        ax_e.axhline(float(truth_eps), ls="--", color="gray", label="reference")
        ax_e.legend()
    if truth_sig:
        ax_s.axhline(float(truth_sig), ls="--", color="gray")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_error_summary_figure(summary: list[dict], path) -> Path:
    """Grouped bars of relative errors per material."""
    labels = [row["material_label"] for row in summary]
    eps_err = [
        float(row["delta_eps_pct"]) if row["delta_eps_pct"] not in ("", "undef") else math.nan
        for row in summary
    ]
    sig_err = [
        float(row["delta_sigma_pct"]) if row["delta_sigma_pct"] not in ("", "undef") else math.nan
        for row in summary
    ]
    x = np.arange(len(labels))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(7, 0.5 * len(labels) + 2), 4))
    ax.bar(x - width / 2, eps_err, width, label="permittivity error [%]")
    ax.bar(x + width / 2, sig_err, width, label="conductivity error [%]")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_ylabel("relative error [%]")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
