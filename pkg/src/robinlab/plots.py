"""Figure rendering for reports: SVG files next to the delimited output.

Everything draws through the Agg backend and writes to a path; nothing
here opens a window.  The SVG hash salt is pinned so identical runs
render identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .elliptic import CriticalBetaResult
from .grid import ScalarField
from .parabolic import EnergyTrace

__all__ = ["save_field_figure", "save_trace_figures", "save_probe_figure"]

plt.rcParams["svg.hashsalt"] = "robinlab"
plt.rcParams["figure.figsize"] = (6.0, 4.0)


def save_field_figure(fld: ScalarField, path: str, title: str = "") -> str:
    grid = fld.grid
    fig, ax = plt.subplots()
    if grid.ndim == 1:
        ax.plot(grid.coords[:, 0], fld.values, lw=1.5)
        ax.set_xlabel("x")
        ax.set_ylabel("value")
    else:
        n = grid.n_per_axis + 1
        X = grid.coords[:, 0].reshape(n, n)
        Y = grid.coords[:, 1].reshape(n, n)
        V = fld.values.reshape(n, n)
        pcm = ax.pcolormesh(X, Y, V, shading="gouraud")
        fig.colorbar(pcm, ax=ax)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def save_trace_figures(trace: EnergyTrace, out_dir: str, stem: str) -> list[str]:
    import os

    t = np.array([s.t for s in trace.samples])
    mx = np.array([s.max_u for s in trace.samples])
    en = np.array([s.energy for s in trace.samples])
    paths = []

    fig, ax = plt.subplots()
    if mx.max() > 1e3 * max(mx[0], 1e-30):
        ax.semilogy(t, np.maximum(mx, 1e-30), lw=1.2)
    else:
        ax.plot(t, mx, lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("max u")
    ax.set_title(f"sup-norm history ({trace.verdict})")
    fig.tight_layout()
    p = os.path.join(out_dir, f"{stem}_max_u.svg")
    fig.savefig(p, format="svg", metadata={"Date": None})
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots()
    ax.plot(t, en, lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("E(u(t))")
    ax.set_title("energy history")
    fig.tight_layout()
    p = os.path.join(out_dir, f"{stem}_energy.svg")
    fig.savefig(p, format="svg", metadata={"Date": None})
    plt.close(fig)
    paths.append(p)
    return paths


def save_probe_figure(result: CriticalBetaResult, path: str) -> str:
    fig, ax = plt.subplots()
    for status, marker, color in (("Diverged", "v", "tab:red"),
                                  ("Converged", "^", "tab:blue")):
        xs = [b for b, s in result.probes if s == status]
        if xs:
            ax.semilogx(xs, [0.0] * len(xs), marker, color=color, label=status)
    ax.axvspan(result.beta_lo, result.beta_hi, color="tab:gray", alpha=0.4,
               label="bracket")
    ax.set_xlabel("beta")
    ax.set_yticks([])
    ax.legend(loc="upper left")
    ax.set_title("bisection probes for the critical beta")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
