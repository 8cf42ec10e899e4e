"""PNG renderings of the export tables."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_scatter(rows, r, env_a, env_b, path):
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.scatter([x for _, x, _ in rows], [y for _, _, y in rows], s=10)
    ax.set_xlabel(f"{env_a} score")
    ax.set_ylabel(f"{env_b} score")
    ax.set_title(f"r = {r:.2f} over {len(rows)} programs")
    _save(fig, path)


def plot_distribution(rows, env_id, path):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    x = range(len(rows))
    ax.fill_between(x, [r[2] for r in rows], [r[3] for r in rows], alpha=0.3, linewidth=0)
    ax.plot(x, [r[1] for r in rows], linewidth=1)
    ax.set_xlabel("program (sorted by mean)")
    ax.set_ylabel(f"{env_id} score")
    _save(fig, path)


def plot_efficiency(rows, path):
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.plot([r[0] for r in rows], [r[1] for r in rows], label="kNN + epsilon-greedy")
    ax.plot([r[0] for r in rows], [r[2] for r in rows], label="random order")
    ax.set_xlabel("fraction of programs evaluated")
    ax.set_ylabel("fraction of top programs found")
    ax.legend(loc="lower right")
    _save(fig, path)
