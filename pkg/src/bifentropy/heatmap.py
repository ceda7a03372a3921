"""PNG heatmaps of parameter-space fields (presentation only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geometry import Rect


def render_heatmap(
    field,
    region: Rect,
    path,
    palette: str = "viridis",
    log_scale: bool = False,
    title: str = "",
):
    """Render a 2-D field over the region to a PNG with annotated axes.

    ``log_scale`` shows log10 of the positive part (zeros become the floor);
    NaN cells stay blank.  Constant fields render fine (single color).
    """
    field = np.asarray(field, dtype=float)
    if field.ndim != 2 or field.size == 0:
        raise ValueError(f"heatmap needs a nonempty 2-D field, got shape {field.shape}")
    shown = field
    if log_scale:
        pos = field[np.isfinite(field) & (field > 0)]
        floor = pos.min() if pos.size else 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            shown = np.log10(np.maximum(field, floor))
    fig, ax = plt.subplots(figsize=(6.4, 4.8), dpi=150)
    im = ax.imshow(
        shown,
        origin="lower",
        extent=(region.re_min, region.re_max, region.im_min, region.im_max),
        cmap=palette,
        interpolation="nearest",
        aspect="auto",
    )
    ax.set_xlabel("Re(lambda)")
    ax.set_ylabel("Im(lambda)")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
