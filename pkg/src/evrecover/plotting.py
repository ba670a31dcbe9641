"""Figure rendering for the report paths of the CLI (files only, Agg backend)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
    "svg.hashsalt": "evrecover",
}


def _save(fig, path):
    # fixed metadata keeps repeated renders byte-comparable
    meta = {"Software": None} if str(path).lower().endswith(".png") else None
    fig.savefig(path, bbox_inches="tight", metadata=meta)
    plt.close(fig)


def plot_metrics(rows, path, title: str | None = None):
    """Per-frame PSNR and SSIM. ``rows`` are ``(frame, psnr, ssim)`` tuples."""
    rows = list(rows)
    frames = [r[0] for r in rows]
    with plt.rc_context(RC):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(5.0, 4.0), sharex=True)
        ax1.plot(frames, [r[1] for r in rows], "o-", ms=3, color="C0")
        ax1.set_ylabel("PSNR (dB)")
        ax2.plot(frames, [r[2] for r in rows], "o-", ms=3, color="C1")
        ax2.set_ylabel("SSIM")
        ax2.set_xlabel("frame")
        if rows:
            ax1.axhline(np.mean([r[1] for r in rows]), ls="--", lw=0.8, color="0.5")
            ax2.axhline(np.mean([r[2] for r in rows]), ls="--", lw=0.8, color="0.5")
        if title:
            ax1.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def plot_frames(frames, path, timestamps=None, ncols: int = 6, vmax: float = 1.0):
    """Montage of reconstructed frames in display range ``[0, vmax]``."""
    frames = np.asarray(frames)
    n = frames.shape[0]
    ncols = max(1, min(ncols, n))
    nrows = math.ceil(n / ncols)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(nrows, ncols, figsize=(1.6 * ncols, 1.6 * nrows), squeeze=False)
        for i, ax in enumerate(axes.flat):
            ax.set_axis_off()
            if i >= n:
                continue
            ax.imshow(frames[i], cmap="gray", vmin=0.0, vmax=vmax, interpolation="nearest")
            if timestamps is not None:
                ax.set_title(f"{1e3 * (timestamps[i] - timestamps[0]):.2f} ms", fontsize=7)
        fig.tight_layout()
        _save(fig, path)


def plot_comparison(images: dict, path):
    """Side-by-side panels, e.g. blurry input, reconstruction, reference."""
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, len(images), figsize=(2.2 * len(images), 2.4), squeeze=False)
        for ax, (name, img) in zip(axes.flat, images.items()):
            ax.imshow(np.clip(img, 0, 1), cmap="gray", vmin=0, vmax=1, interpolation="nearest")
            ax.set_title(name)
            ax.set_axis_off()
        fig.tight_layout()
        _save(fig, path)
