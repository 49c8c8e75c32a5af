"""
Static trajectory plots.
"""

import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# Stable element ids and no timestamp so repeated runs give identical files
matplotlib.rcParams["svg.hashsalt"] = "sbdc"


def plot_trajectory(traj, path, title=None):
    """Line plot of every agent state over time, saved as SVG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    flat = traj.states.reshape(len(traj), -1)
    labels = traj.columns()[1:]
    for col, label in enumerate(labels):
        ax.plot(traj.times, flat[:, col], linewidth=1.2, label=label)
    ax.set_xlabel("step" if traj.mode.endswith("dt") else "time")
    ax.set_ylabel("state")
    ax.set_title(title or f"{traj.mode} run: {traj.verdict.value}")
    ax.grid(True, alpha=0.3)
    if len(labels) <= 12:
        ax.legend(loc="best", fontsize="small")
    fig.tight_layout()

    tmp = path.with_suffix(path.suffix + ".tmp")
    fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    os.replace(tmp, path)
    return path
