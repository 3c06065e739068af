"""Figures for scenario runs (file output only)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_scenario(path, t, states, v, jump_times=(), settling_bound=None, empirical=None,
                  title=None, state_label="state"):
    """State components and ``V`` against time, with impulses and settling marks.

    ``V`` is drawn on a log axis; zero values are dropped there.
    """
    t = np.asarray(t, dtype=float)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    v = np.asarray(v, dtype=float)
    fig, (ax_s, ax_v) = plt.subplots(2, 1, figsize=(7.0, 6.0), sharex=True)
    for i in range(states.shape[1]):
        ax_s.plot(t, states[:, i], lw=1.2, label=f"{state_label}_{i + 1}")
    ax_s.axhline(0.0, color="0.6", lw=0.6)
    ax_s.set_ylabel(state_label)
    if states.shape[1] <= 8:
        ax_s.legend(loc="best", fontsize=8)

    pos = v > 0
    if pos.any():
        ax_v.semilogy(t[pos], v[pos], color="k", lw=1.2, label="V")
    ax_v.set_ylabel("V")
    ax_v.set_xlabel("t")

    for ax in (ax_s, ax_v):
        for tj in jump_times:
            ax.axvline(tj, color="tab:purple", lw=0.6, ls=":")
        if settling_bound is not None and np.isfinite(settling_bound):
            ax.axvline(settling_bound, color="tab:red", lw=1.0, ls="--")
        if empirical is not None:
            ax.axvline(empirical, color="tab:green", lw=1.0, ls="-.")
    handles = []
    if settling_bound is not None:
        handles.append(plt.Line2D([], [], color="tab:red", ls="--", label=f"bound {settling_bound:.4f}"))
    if empirical is not None:
        handles.append(plt.Line2D([], [], color="tab:green", ls="-.", label=f"settled {empirical:.4f}"))
    if handles:
        ax_v.legend(handles=handles, loc="best", fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sync(path, t, x, y, title=None):
    """Drive and response neurons overlaid."""
    x = np.atleast_2d(x)
    y = np.atleast_2d(y)
    fig, axes = plt.subplots(x.shape[1], 1, figsize=(7.0, 2.4 * x.shape[1]), sharex=True, squeeze=False)
    for i, ax in enumerate(axes[:, 0]):
        ax.plot(t, x[:, i], lw=1.2, label=f"x_{i + 1}")
        ax.plot(t, y[:, i], lw=1.0, ls="--", label=f"y_{i + 1}")
        ax.legend(loc="best", fontsize=8)
    axes[-1, 0].set_xlabel("t")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
