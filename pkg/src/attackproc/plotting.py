"""Optional PNG figures rendered from the report's plot data."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .gof import qq_exponential  # noqa: E402
from .report import safe_name  # noqa: E402


def _save(fig, path: str, written: list) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    written.append(path)


def render_figures(plot: dict, directory: str) -> list[str]:
    """One PNG per available view of every series; returns the written paths."""
    os.makedirs(directory, exist_ok=True)
    written: list = []
    for sid in sorted(plot):
        entry = plot[sid]
        item, res = entry["item"], entry["result"]
        base = os.path.join(directory, safe_name(sid))

        fig, ax = plt.subplots(figsize=(8, 3))
        ax.plot(item.values, lw=0.8)
        ax.set_xlabel("bucket")
        ax.set_ylabel("attacks")
        ax.set_title(sid)
        _save(fig, f"{base}_rates.png", written)

        methods = res.get("hurst", {}).get("methods")
        if methods:
            fig, axes = plt.subplots(2, 3, figsize=(10, 6))
            for ax, (name, est) in zip(axes.flat, sorted(methods.items())):
                pts = np.asarray(est.get("regression_points", []), dtype=float)
                ax.set_title(name)
                if pts.size == 0:
                    ax.text(0.5, 0.5, "unavailable", ha="center", transform=ax.transAxes)
                    continue
                ax.plot(pts[:, 0], pts[:, 1], "o", ms=3)
                xs = np.array([pts[:, 0].min(), pts[:, 0].max()])
                ax.plot(xs, est["intercept"] + est["slope"] * xs, "-", lw=1)
                ax.text(0.05, 0.9, f"H={est['h_value']:.3f}", transform=ax.transAxes)
            _save(fig, f"{base}_hurst.png", written)

        if item.gaps is not None and item.gaps.size >= 2:
            qq = qq_exponential(item.gaps)
            fig, ax = plt.subplots(figsize=(4, 4))
            ax.plot(qq.theoretical, qq.empirical, ".", ms=2)
            top = max(qq.theoretical.max(), qq.empirical.max())
            ax.plot([0, top], [0, top], "k-", lw=0.8)
            ax.set_xlabel("exponential quantile")
            ax.set_ylabel("gap")
            _save(fig, f"{base}_qq.png", written)

        for fam, steps in sorted(entry["steps"].items()):
            if not steps:
                continue
            t = [s["t"] for s in steps]
            fig, ax = plt.subplots(figsize=(8, 3))
            ax.plot(t, [s["X"] for s in steps], lw=0.8, label="observed")
            ax.plot(t, [s["Y"] for s in steps], lw=0.8, label=f"{fam} forecast")
            ax.legend()
            _save(fig, f"{base}_forecast_{fam}.png", written)
    return written
