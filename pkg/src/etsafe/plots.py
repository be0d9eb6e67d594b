"""Static PNG figures: h(t), interevent times, phase portrait."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_runs(runs, out_dir: Path, taus=None) -> list[Path]:
    """Overlay one or more ``(label, EventLog)`` runs; returns the written paths."""
    out_dir = Path(out_dir)
    paths = []

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, log in runs:
        tr = log.trace_columns()
        ax.plot(tr["t"], tr["h"], label=label, lw=1)
    ax.axhline(0.0, color="k", lw=0.6, ls=":")
    ax.set_xlabel("t")
    ax.set_ylabel("h(x(t))")
    ax.legend()
    fig.tight_layout()
    paths.append(out_dir / "h_vs_t.png")
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, log in runs:
        ie = log.interevent_times
        if ie.size:
            ax.semilogy(np.arange(ie.size), ie, ".", ms=2, label=label)
    for tau in taus or []:
        if tau is not None:
            ax.axhline(tau, color="r", lw=0.8, ls="--", label=f"tau = {tau:.4g}")
    ax.set_xlabel("event index")
    ax.set_ylabel("interevent time")
    ax.legend()
    fig.tight_layout()
    paths.append(out_dir / "interevent.png")
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(4, 4))
    for label, log in runs:
        x = log.trace_columns()["x"]
        if x.ndim == 2 and x.shape[1] >= 2:
            ax.plot(x[:, 0], x[:, 1], lw=0.8, label=label)
        elif x.ndim == 2 and x.shape[1] == 1:
            ax.plot(log.trace_columns()["t"], x[:, 0], lw=0.8, label=label)
    th = np.linspace(0, 2 * np.pi, 400)
    ax.plot(np.cos(th), np.sin(th), "k:", lw=0.6)
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend()
    fig.tight_layout()
    paths.append(out_dir / "phase.png")
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)
    return paths
