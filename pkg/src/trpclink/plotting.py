"""Figure rendering for sweep outputs. File output only (Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_ber", "plot_semianalytic", "plot_psd"]


def plot_ber(path, results, title: str = "") -> None:
    """Error-rate sweep on a log axis; points with zero errors are dropped."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    x = [r.ebn0_db for r in results if r.errors > 0]
    y = [r.ber for r in results if r.errors > 0]
    ax.semilogy(x, y, "o-", lw=1.2)
    ax.set_xlabel("Eb/N0 (dB)")
    ax.set_ylabel("BER")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.4)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_semianalytic(path, results, title: str = "") -> None:
    """Mean error probability with the ensemble min/max band."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    x = [r.ebn0_db for r in results]
    mean = [r.pe_mean for r in results]
    lo = [max(r.pe_min, 1e-300) for r in results]
    hi = [r.pe_max for r in results]
    ax.semilogy(x, mean, "s-", lw=1.2, label="ensemble mean")
    ax.fill_between(x, lo, hi, alpha=0.25, label="ensemble spread")
    ax.set_xlabel("Eb/N0 (dB)")
    ax.set_ylabel("bit error probability")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_psd(path, offsets, dbc, reference=None, title: str = "") -> None:
    """Single-sideband phase noise against offset frequency.

    reference, if given, is an (offset_hz, dbc_hz) column pair drawn as a
    dashed overlay.
    """
    fig, ax = plt.subplots(figsize=(6, 4.5))
    offsets = np.asarray(offsets)
    keep = offsets > 0
    ax.semilogx(offsets[keep], np.asarray(dbc)[keep], lw=1.0, label="estimate")
    if reference is not None:
        ref = np.asarray(reference)
        ax.semilogx(ref[:, 0], ref[:, 1], "--", lw=1.0, label="reference")
        ax.legend()
    ax.set_xlabel("offset from carrier (Hz)")
    ax.set_ylabel("L(f) (dBc/Hz)")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.4)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
