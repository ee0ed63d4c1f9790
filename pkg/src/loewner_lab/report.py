"""Report emission: JSON payloads, CSV sample dumps, and rendered figures.

Every scenario run produces one JSON report; operations that sample
margins additionally dump a (t, z, margin) CSV next to it and render a
matplotlib figure of the samples to a PNG with the same stem.  Reports are
deterministic for a fixed config and seed except for the wall_time_s
field, which is excluded from the determinism contract.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import InputError


def write_report(report: dict, path) -> Path:
    out = Path(path)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise InputError(f"cannot write report to {out}: {exc}") from exc
    return out


def write_margin_csv(rows, path) -> Path:
    """One (t, z, margin) row per sample, coordinates split re/im."""
    out = Path(path)
    if not rows:
        raise InputError("no sample rows to write")
    n = len(rows[0][1])
    header = ["t"]
    for k in range(n):
        header += [f"re_z{k + 1}", f"im_z{k + 1}"]
    header.append("margin")
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t, z, margin in rows:
                row = [repr(float(t))]
                for c in z:
                    row += [repr(float(np.real(c))), repr(float(np.imag(c)))]
                row.append(repr(float(margin)))
                writer.writerow(row)
    except OSError as exc:
        raise InputError(f"cannot write samples to {out}: {exc}") from exc
    return out


def render_margin_figure(rows, path, title: str) -> Path:
    """Scatter of sampled margins against time, with the worst sample marked."""
    out = Path(path)
    ts = np.array([r[0] for r in rows])
    margins = np.array([r[2] for r in rows])
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.scatter(ts, margins, s=6, alpha=0.35, linewidths=0, color="#1f6fb2")
    k = int(np.argmin(margins))
    ax.scatter([ts[k]], [margins[k]], s=40, color="#c23b22", zorder=3,
               label=f"worst margin {margins[k]:.3e}")
    ax.axhline(0.0, color="0.4", lw=0.8, ls="--")
    ax.set_xlabel("t")
    ax.set_ylabel("margin")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out


def render_bound_figure(magnitude: float, bound: float, path, title: str) -> Path:
    """Bar comparison of a coefficient magnitude against its admissible bound."""
    out = Path(path)
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    color = "#2e8b57" if magnitude <= bound else "#c23b22"
    ax.bar(["coefficient", "bound"], [magnitude, bound], color=[color, "0.6"], width=0.55)
    ax.set_ylabel("magnitude")
    ax.set_title(title)
    for i, v in enumerate([magnitude, bound]):
        ax.text(i, v, f"{v:.5f}", ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out


def render_norm_figure(norm_in, norm_out, path, title: str) -> Path:
    """Contraction plot |phi(z)| against |z| with the unit diagonal."""
    out = Path(path)
    fig, ax = plt.subplots(figsize=(4.8, 4.4))
    ax.scatter(norm_in, norm_out, s=8, alpha=0.4, linewidths=0, color="#1f6fb2")
    lim = max(1.0, float(np.max(norm_in)))
    ax.plot([0, lim], [0, lim], color="0.4", lw=0.8, ls="--", label="no contraction")
    ax.set_xlabel("|z|")
    ax.set_ylabel("|phi(z)|")
    ax.set_title(title)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out
