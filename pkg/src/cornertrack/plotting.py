"""Report figures written next to the CSV outputs (PNG, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "figure.dpi": 110,
    "savefig.bbox": "tight",
}

AXES = ("tx", "ty", "tz", "rx", "ry", "rz")
AXIS_LABELS = {"tx": "X transl.", "ty": "Y transl.", "tz": "Z transl.",
               "rx": "X rot.", "ry": "Y rot.", "rz": "Z rot."}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def image_figure(image, path, title: str = "", cmap: str = "inferno") -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4, 3.4))
        im = ax.imshow(image, cmap=cmap)
        ax.set_title(title)
        ax.set_xticks([])
        ax.set_yticks([])
        fig.colorbar(im, ax=ax, shrink=0.8)
        return _save(fig, path)


def diff_study_figure(study, path) -> Path:
    """Reference image, six amplified signed differences and the shape change.

    Each difference is multiplied by its amplification factor and shown on the
    reference's intensity range, so equal colors mean equal amplified change.
    """
    peak = float(study.reference.max())
    with plt.rc_context(RC):
        fig, axes = plt.subplots(2, 4, figsize=(10, 5.2))
        for ax, (axis, diff) in zip(axes[0, :3].tolist() + axes[1, 1:].tolist(),
                                    [(a, study.differences[a]) for a in ("tx", "ty", "tz", "rx", "ry", "rz")]):
            amp = study.row(axis)["amplification"] or 1
            ax.imshow(amp * diff, cmap="RdBu_r", vmin=-peak, vmax=peak)
            ax.set_title(f"{AXIS_LABELS[axis]}  x{amp:,}")
        amp = study.row("shape")["amplification"] or 1
        axes[0, 3].imshow(amp * study.shape_difference, cmap="RdBu_r", vmin=-peak, vmax=peak)
        axes[0, 3].set_title(f"shape  x{amp:,}")
        axes[1, 0].imshow(study.reference, cmap="inferno")
        axes[1, 0].set_title("reference")
        for ax in axes.ravel():
            ax.set_xticks([])
            ax.set_yticks([])
        fig.tight_layout()
        return _save(fig, path)


def tracking_figure(result, path) -> Path:
    """Recovered versus true pose per varied axis, mean with std error bars."""
    variants = result.variants()
    moving = sorted(_varied_axes(result)) or [1]
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, len(moving), figsize=(3.2 * len(moving), 3.0), squeeze=False)
        for ax, k in zip(axes[0], moving):
            unit, scale = ("cm", 100.0) if k < 3 else ("deg", 1.0)
            for vi, v in enumerate(variants):
                stats = [s for s in result.for_variant(v) if _on_axis(s, result, k)]
                truth = np.array([s.truth[k] for s in stats]) * scale
                mean = np.array([s.mean[k] for s in stats]) * scale
                std = np.array([s.std[k] for s in stats]) * scale
                ax.errorbar(truth + 0.15 * vi, mean, yerr=std, fmt="o", ms=3, capsize=2, label=v)
            lo, hi = ax.get_xlim()
            ax.plot([lo, hi], [lo, hi], color="0.6", lw=0.8, zorder=0)
            ax.set_xlabel(f"true {AXIS_LABELS[AXES[k]]} ({unit})")
            ax.set_ylabel(f"recovered ({unit})")
        axes[0, 0].legend(loc="best")
        fig.suptitle(f"Experiment {result.experiment}")
        fig.tight_layout()
        return _save(fig, path)


def _varied_axes(result) -> set:
    truths = np.array([s.truth for s in result.stats])
    return {int(k) for k in np.flatnonzero(np.ptp(truths, axis=0) > 0)}


def _on_axis(stat, result, k) -> bool:
    truths = np.array([s.truth for s in result.stats])
    center = np.median(truths, axis=0)
    off = np.abs(stat.truth - center) > 1e-12
    return not off.any() or (off[k] and off.sum() == 1)


def bench_figure(rows, path) -> Path:
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 2, figsize=(7, 3))
        for ax, series, key in ((axes[0], "pixels", "pixels"), (axes[1], "surfels", "surfels")):
            pts = [(r[key], r["seconds"] * 1e3) for r in rows if r["series"] == series]
            if pts:
                x, y = zip(*pts)
                ax.loglog(x, y, "o-", ms=4)
            ax.set_xlabel(key)
            ax.set_ylabel("render time (ms)")
        fig.tight_layout()
        return _save(fig, path)
