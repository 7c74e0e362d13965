"""Figure rendering for the report commands.

Figures are saved next to the CSV data with the same atomic
write-then-rename discipline.  The CSVs stay the authoritative output;
the figures are the quick-look view of the same numbers.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiments import STAGE_NAMES

__all__ = ["save_spectra_figure", "save_roc_figure"]

_STAGE_LABELS = {
    "input": "noisy input (ideal front end)",
    "after_lna": "after LNA nonlinearity",
    "phase_noise_only": "phase noise only",
    "iqi_only": "I/Q imbalance only",
    "joint": "full chain (joint impairments)",
}

_DB_FLOOR = 1e-20


def _save_atomic(fig, path):
    tmp = str(path) + ".tmp"
    fig.savefig(tmp, format=os.path.splitext(str(path))[1].lstrip(".") or "png",
                dpi=150)
    plt.close(fig)
    os.replace(tmp, path)


def power_db(power: np.ndarray) -> np.ndarray:
    """Bin power in dB, floored so exact zeros stay plottable."""
    return 10.0 * np.log10(np.maximum(power, _DB_FLOOR))


def save_spectra_figure(stages, path):
    """One stacked panel per chain stage, shared frequency axis."""
    order = np.argsort(stages.frequencies)
    freqs = stages.frequencies[order]
    fig, axes = plt.subplots(len(STAGE_NAMES), 1, sharex=True,
                             figsize=(7.0, 9.5))
    for ax, name in zip(axes, STAGE_NAMES):
        ax.plot(freqs, power_db(stages.power[name][order]), lw=0.9)
        ax.set_ylabel("power (dB)", fontsize=8)
        ax.set_title(_STAGE_LABELS[name], fontsize=9)
        ax.grid(True, alpha=0.3)
    axes[-1].set_xlabel("frequency (Hz)")
    fig.tight_layout()
    _save_atomic(fig, path)


def save_roc_figure(table, parameter: str, path):
    """Pd versus Pfa for every sweep value, with Wilson error bars."""
    fig, ax = plt.subplots(figsize=(6.5, 5.0))
    for value, curve in table:
        pfa, pd = curve.pfa, curve.pd
        yerr = np.vstack([pd - np.array([p.pd_lo for p in curve.points]),
                          np.array([p.pd_hi for p in curve.points]) - pd])
        ax.errorbar(pfa, pd, yerr=yerr, marker="o", ms=3, lw=1.0,
                    capsize=2, label=f"{parameter} = {value:g}")
    ax.plot([0, 1], [0, 1], "k--", lw=0.7, alpha=0.5)
    ax.set_xlabel("probability of false alarm")
    ax.set_ylabel("probability of detection")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save_atomic(fig, path)
