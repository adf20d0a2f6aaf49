"""Figures written next to CSV output."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_rd(rates, distortions, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(distortions, rates, marker="o", ms=3)
    ax.set_xlabel("distortion D")
    ax.set_ylabel("rate R (bits)")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_rde(points, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot([p.r for p in points], [p.f for p in points], marker="o", ms=3)
    ax.set_xlabel("rate R (bits)")
    ax.set_ylabel("exponent F")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_fer(result, path) -> None:
    xs = [g.param for g in result.points]
    ys = [g.fer for g in result.points]
    lo = [g.fer - g.ci_lo for g in result.points]
    hi = [g.ci_hi - g.fer for g in result.points]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(xs, ys, yerr=[lo, hi], marker="o", ms=3, capsize=3)
    if any(y > 0 for y in ys):
        ax.set_yscale("log")
    ax.set_xlabel(result.config.grid_name)
    ax.set_ylabel(result.config.fer_name)
    ax.grid(alpha=0.3, which="both")
    _save(fig, path)
