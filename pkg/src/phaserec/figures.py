"""Figure rendering for solve reports.

The CLI's curve emission writes plain-column text files for external
tooling and, alongside each one, a rendered PNG of the same data so a
solve can be eyeballed without further plumbing.  Everything goes
through the Agg backend; no display is required.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_field_comparison(
    path: str | Path,
    axis: np.ndarray,
    given_mag: np.ndarray,
    recovered_mag: np.ndarray,
    axis_label: str = "t",
) -> None:
    """Overlay of the given and reconstructed signal magnitudes."""
    fig, (ax_top, ax_bot) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax_top.plot(axis, recovered_mag, color="tab:orange", lw=1.0)
    ax_top.set_ylabel("|reconstruction|")
    ax_top.set_title("reconstructed signal magnitude")
    ax_bot.plot(axis, given_mag, color="tab:blue", lw=1.2, label="given")
    ax_bot.plot(axis, recovered_mag, color="tab:orange", lw=0.9, ls="--", label="recovered")
    ax_bot.set_xlabel(axis_label)
    ax_bot.set_ylabel("|signal|")
    ax_bot.set_title("comparison")
    ax_bot.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_spectrum(path: str | Path, indices: np.ndarray, moduli: np.ndarray) -> None:
    """Stem-style view of the coefficient moduli."""
    fig, ax = plt.subplots(figsize=(8, 3.2))
    ax.plot(indices, moduli, color="tab:blue", lw=1.0)
    ax.set_xlabel("coefficient index")
    ax.set_ylabel("modulus")
    ax.set_title("spectrum magnitude")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_field_comparison_2d(
    path: str | Path,
    given_mag: np.ndarray,
    recovered_mag: np.ndarray,
) -> None:
    """Side-by-side heat maps of given versus reconstructed |f|."""
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    vmax = float(max(given_mag.max(), recovered_mag.max()))
    for ax, data, title in (
        (axes[0], given_mag, "given |f|"),
        (axes[1], recovered_mag, "recovered |f|"),
        (axes[2], np.abs(given_mag - recovered_mag), "absolute difference"),
    ):
        im = ax.imshow(data, origin="lower", vmin=0.0, vmax=vmax if title != "absolute difference" else None)
        ax.set_title(title)
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
