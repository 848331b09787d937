"""Figures written to files with the non-interactive backend."""

from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_iterations(indices: Sequence[int], iterations: Sequence[int], kmax: Sequence[int], path) -> Path:
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.bar(indices, iterations, color="tab:blue", label="training updates")
    ax.plot(indices, kmax, color="tab:red", lw=1, label="iteration bound")
    ax.set_yscale("log")
    ax.set_xlabel("library function index")
    ax.set_ylabel("updates")
    ax.legend(loc="upper left")
    return _save(fig, path)


def plot_pulses_by_arity(arity: Sequence[int], pulses: Sequence[int], path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    groups = sorted(set(arity))
    data = [[p for a, p in zip(arity, pulses) if a == g] for g in groups]
    ax.boxplot(data)
    ax.set_xticks(range(1, len(groups) + 1), [str(g) for g in groups])
    ax.set_xlabel("function arity")
    ax.set_ylabel("programming pulses from erased state")
    return _save(fig, path)


def plot_drift(sweep_mv: Sequence[float], series: Mapping[str, Sequence[float]], path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, values in series.items():
        ax.plot(sweep_mv, [100 * v for v in values], marker="o", label=label)
    ax.set_xlabel("uniform VT drift (mV)")
    ax.set_ylabel("cells keeping their function (%)")
    ax.set_ylim(-5, 105)
    ax.legend()
    return _save(fig, path)


def plot_yield(stages: Mapping[str, float], path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    names = list(stages)
    ax.bar(names, [100 * stages[n] for n in names], color=["tab:gray", "tab:blue", "tab:green"][: len(names)])
    ax.set_ylabel("functional yield (%)")
    ax.set_ylim(0, 105)
    return _save(fig, path)


def plot_margins(c_values: Sequence[float], onset: Sequence[float], offset: Sequence[float], delay: Sequence[float], path) -> Path:
    fig, ax1 = plt.subplots(figsize=(5, 3.5))
    ax1.plot(c_values, onset, marker="o", label="min onset margin")
    ax1.plot(c_values, offset, marker="s", label="min offset margin")
    ax1.set_xlabel("handicap C")
    ax1.set_ylabel("conductance margin (a.u.)")
    ax2 = ax1.twinx()
    ax2.plot(c_values, delay, color="tab:red", ls="--", label="critical delay")
    ax2.set_ylabel("delay (a.u.)")
    ax1.legend(loc="upper left")
    return _save(fig, path)


def plot_class_distribution(class_labels: Sequence[str], path) -> Path:
    counts = Counter(class_labels)
    names = sorted(counts, key=lambda k: -counts[k])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(names, [counts[n] for n in names])
    ax.set_ylabel("cells")
    ax.set_xlabel("threshold cell class")
    ax.tick_params(axis="x", rotation=45)
    return _save(fig, path)


def plot_conductance(g_left: Sequence[float], g_right: Sequence[float], onset: Sequence[bool], path) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    g_left = np.asarray(g_left)
    g_right = np.asarray(g_right)
    on = np.asarray(onset, dtype=bool)
    ax.scatter(g_left[on], g_right[on], marker="o", label="onset")
    ax.scatter(g_left[~on], g_right[~on], marker="x", label="offset")
    lim = [0, max(g_left.max(), g_right.max()) * 1.05]
    ax.plot(lim, lim, color="k", lw=0.8)
    ax.set_xlabel("G_L (a.u.)")
    ax.set_ylabel("G_R (a.u.)")
    ax.legend()
    return _save(fig, path)
