"""Figure rendering for training and evaluation reports."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_loss_curves(trace, path):
    """Per-epoch loss components from a training trace."""
    fig, ax = plt.subplots(figsize=(7, 4))
    epochs = [r["epoch"] for r in trace]
    for key in ("l_self", "l_reg", "l_cent", "l_a", "l_align"):
        vals = [r[key] for r in trace]
        if any(v != 0.0 for v in vals):
            ax.plot(epochs, vals, label=key)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metric_bars(report, path):
    """Bar chart of the six accuracy metrics."""
    names = ["Acc_s", "Acc_u", "Acc_h", "SR_s", "SR_u", "SR_h"]
    vals = [report.acc_s, report.acc_u, report.acc_h,
            report.sr_s, report.sr_u, report.sr_h]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(names, vals, color=["C0"] * 3 + ["C1"] * 3)
    ax.set_ylim(0, 1)
    ax.set_ylabel("accuracy")
    for i, v in enumerate(vals):
        ax.text(i, v + 0.02, f"{v:.2f}", ha="center", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_pmax_hist(pmax, tau, path, seen_mask=None):
    """Histogram of best seen-class prototypical probabilities with the
    acceptance threshold marked."""
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.linspace(0, 1, 41)
    if seen_mask is not None:
        ax.hist(pmax[seen_mask], bins=bins, alpha=0.6, label="kept as seen")
        ax.hist(pmax[~seen_mask], bins=bins, alpha=0.6, label="rejected")
        ax.legend()
    else:
        ax.hist(pmax, bins=bins)
    ax.axvline(tau, color="k", linestyle="--", label="threshold")
    ax.set_xlabel("max seen-class prototypical probability")
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
