"""Figures written next to CLI reports (non-interactive Agg backend)."""

from __future__ import annotations

import math
import os
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from hypersc.cone import mu, mu_coefficient  # noqa: E402

# fixed metadata keeps the PNG bytes stable across runs
_META = {"Software": None}


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def plot_mu(rho: float, path: str, points: int = 400) -> str:
    """mu(t) against the bounds t - a t^3 and t, up to slightly past pi sinh rho."""
    top = math.pi * math.sinh(rho)
    t = np.linspace(0, 1.15 * top, points)
    a = mu_coefficient(rho)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, mu(t, rho), label="mu(t)")
    ax.plot(t, t, "--", lw=0.8, label="t")
    lower = t - a * t**3
    ax.plot(t[lower > -1], lower[lower > -1], ":", lw=0.8, label="t - a t^3")
    ax.axvline(top, color="grey", lw=0.6)
    ax.axhline(2 * rho, color="grey", lw=0.6)
    ax.set_ylim(-0.5, 2 * rho + 1)
    ax.set_xlabel("t")
    ax.set_ylabel("length")
    ax.set_title(f"comparison map, rho = {rho:g}")
    ax.legend(loc="lower right", frameon=False)
    return _save(fig, path)


def plot_local_profile(balls: Sequence[Dict], global_delta: float, sigma: float, path: str) -> str:
    """Four-point delta of each sigma-ball, with the global constant for reference."""
    vals: List[float] = [float(b["delta"]) for b in balls]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(vals)), vals, color="tab:blue", width=0.8)
    ax.axhline(float(global_delta), color="tab:red", lw=1, label="global delta")
    ax.set_xlabel("ball index")
    ax.set_ylabel("delta")
    ax.set_title(f"local delta at scale sigma = {float(sigma):g}")
    ax.legend(frameon=False)
    return _save(fig, path)
