"""Matplotlib figures for disks and evaluation reports.

Figures are built without pyplot and written without the software metadata
chunk, so identical inputs give identical PNG bytes.
"""

import numpy as np
from matplotlib.cm import ScalarMappable
from matplotlib.colors import LinearSegmentedColormap, Normalize
from matplotlib.figure import Figure

from .disk import COOL_RGB, WARM_RGB, WHITE_RGB, rasterize_disk

DISK_CMAP = LinearSegmentedColormap.from_list(
    "disk", [tuple(COOL_RGB / 255), tuple(WHITE_RGB / 255), tuple(WARM_RGB / 255)]
)
_PNG_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_META)


def disk_figure(d, path, title=None, size=256, folds=()):
    """Heat map of a disk with a symmetric colour bar.

    ``folds`` are rim angles marked with ticks outside the disk.
    """
    img = rasterize_disk(d, size)
    vmax = float(np.abs(d.values[d.occupied]).max()) if d.occupied.any() else 0.0
    fig = Figure(figsize=(4.6, 4))
    ax = fig.subplots()
    ax.imshow(img, extent=(-1, 1, -1, 1), interpolation="nearest")
    for f in folds:
        ax.plot([np.cos(f), 1.08 * np.cos(f)], [np.sin(f), 1.08 * np.sin(f)], color="k", lw=1.5)
    ax.set_xlim(-1.1, 1.1)
    ax.set_ylim(-1.1, 1.1)
    ax.set_axis_off()
    sm = ScalarMappable(cmap=DISK_CMAP, norm=Normalize(-vmax or -1, vmax or 1))
    fig.colorbar(sm, ax=ax, fraction=0.046, pad=0.04, label="dGLI")
    if title:
        ax.set_title(title)
    _save(fig, path)


def eval_figure(report, path):
    """Per-sample RMSE and Frechet distance grouped by shape."""
    ok = report.successes
    shapes = sorted({s.shape for s in ok})
    fig = Figure(figsize=(8, 3.2))
    axes = fig.subplots(1, 2)
    for ax, attr, name in zip(axes, ("rmse", "frechet"), ("RMSE", "Frechet")):
        data = [[getattr(s, attr) for s in ok if s.shape == sh] for sh in shapes]
        if data:
            ax.boxplot(data, showfliers=True)
            ax.set_xticks(range(1, len(shapes) + 1), shapes)
        ax.set_ylabel(name)
        ax.tick_params(axis="x", labelrotation=30)
    summary = report.summary()
    fig.suptitle(f"{summary['n_ok']} of {summary['n_samples']} samples extracted")
    fig.tight_layout()
    _save(fig, path)
