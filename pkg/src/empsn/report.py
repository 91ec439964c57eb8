"""Figures written next to the CSV outputs."""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path) -> dict[str, list[float]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return {}
    return {k: [float(r[k]) for r in rows] for k in rows[0]}


def plot_bench(csv_path, out_path=None) -> Path:
    """Mean construction time per cloud against delta, error bars one std."""
    cols = _read_csv(csv_path)
    out = Path(out_path) if out_path else Path(csv_path).with_suffix(".png")
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    if cols:
        ax.errorbar(cols["delta"], cols["rg_mean_ms"], yerr=cols["rg_std_ms"], marker="o",
                    capsize=3, label="radius graph")
        ax.errorbar(cols["delta"], cols["vr_mean_ms"], yerr=cols["vr_std_ms"], marker="s",
                    capsize=3, label="Vietoris-Rips")
    ax.set_xlabel("delta")
    ax.set_ylabel("time per cloud [ms]")
    ax.set_ylim(bottom=0)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_metrics(csv_path, out_path=None) -> Path:
    """Train and validation loss per epoch, log scale."""
    cols = _read_csv(csv_path)
    out = Path(out_path) if out_path else Path(csv_path).with_suffix(".png")
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    if cols:
        ax.plot(cols["epoch"], cols["train_loss"], label="train")
        ax.plot(cols["epoch"], cols["val_loss"], label="validation")
        if min(cols["train_loss"] + cols["val_loss"]) > 0:
            ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
