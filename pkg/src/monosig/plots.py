"""Figure rendering for trajectory, sweep and ensemble outputs.

Figures are written next to the delimited outputs; all rendering goes
through the Agg backend so the CLI never needs a display.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def plot_trajectory(traj, path, title=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for k, label in enumerate(traj.labels):
        ax.plot(traj.times, traj.states[:, k], label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("population fraction")
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_ensemble(stats, labels, path, meanfield=None, title=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for k, label in enumerate(labels):
        line, = ax.plot(stats.times, stats.mean[:, k], label=f"{label} (ABM)")
        ax.fill_between(stats.times,
                        stats.mean[:, k] - 2 * stats.stderr[:, k],
                        stats.mean[:, k] + 2 * stats.stderr[:, k],
                        color=line.get_color(), alpha=0.2, linewidth=0)
        if meanfield is not None:
            ax.plot(meanfield.times, meanfield.states[:, k], "--",
                    color=line.get_color(), label=f"{label} (ODE)")
    ax.set_xlabel("t")
    ax.set_ylabel("population fraction")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_sweep(result, path, title=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    qs = [q for q, _ in result.classifications]
    cs = [1 if c else 0 for _, c in result.classifications]
    ax.scatter(qs, cs, c=["tab:red" if c else "tab:blue" for c in cs])
    ax.axvline(result.qc, color="k", linestyle="--",
               label=f"qc = {result.qc:.5g}")
    ax.set_xlabel("committed fraction q")
    ax.set_yticks([0, 1], ["stays opposed", "takeover"])
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
