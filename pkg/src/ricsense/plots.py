"""SVG heat maps of value grids."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .ovf import TARGET_BOUNDS, ValueGrid  # noqa: E402


def heatmap_svg(grid: ValueGrid, path: str | Path, title: str = "") -> None:
    plt.rcParams["svg.hashsalt"] = "ricsense"
    fig, ax = plt.subplots(figsize=(5, 4))
    (x1lo, x1hi), (x2lo, x2hi) = grid.bounds
    V = np.where(grid.finite, grid.values, np.nan)
    im = ax.imshow(V.T, origin="lower", extent=[x1lo, x1hi, x2lo, x2hi], aspect="auto", cmap="viridis")
    (t1lo, t1hi), (t2lo, t2hi) = TARGET_BOUNDS
    ax.add_patch(Rectangle((t1lo, t2lo), t1hi - t1lo, t2hi - t2lo, fill=False, edgecolor="white", lw=1.5))
    ax.set_xlabel("x1 [K]")
    ax.set_ylabel("x2 [K]")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, label="V")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
