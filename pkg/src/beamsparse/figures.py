"""Matplotlib report figures rendered next to the delimited output.

CSV/JSON remain the machine-readable contract; these are the human-readable
companions the report commands drop alongside them.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_nmse_figure", "save_rate_figure", "save_sweep_figure", "save_bench_figure"]

_MARKERS = ("o", "s", "^", "d", "v", "p", "*")


def _by_estimator(records):
    groups: dict[str, list] = {}
    for rec in records:
        groups.setdefault(rec.estimator, []).append(rec)
    for recs in groups.values():
        recs.sort(key=lambda r: r.snr_db)
    return groups


def save_nmse_figure(records, path, title="Channel estimation accuracy") -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for i, (name, recs) in enumerate(sorted(_by_estimator(records).items())):
        snr = [r.snr_db for r in recs]
        val = [r.nmse for r in recs]
        ax.semilogy(snr, val, marker=_MARKERS[i % len(_MARKERS)], label=name)
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel("NMSE")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_rate_figure(records, path, title="Achievable downlink rate (MRC)") -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for i, (name, recs) in enumerate(sorted(_by_estimator(records).items())):
        snr = [r.snr_db for r in recs]
        val = [r.rate / 1e9 for r in recs]
        ax.plot(snr, val, marker=_MARKERS[i % len(_MARKERS)], label=name)
    ax.set_xlabel("uplink SNR [dB]")
    ax.set_ylabel("rate [Gbit/s]")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(sweep_axis, sweep_values, records_per_value, path) -> None:
    """One NMSE-vs-SNR curve per sweep value (single-estimator sweeps)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for i, (value, records) in enumerate(zip(sweep_values, records_per_value)):
        recs = sorted(records, key=lambda r: r.snr_db)
        snr = [r.snr_db for r in recs]
        val = [r.nmse for r in recs]
        ax.semilogy(snr, val, marker=_MARKERS[i % len(_MARKERS)], label=f"{sweep_axis}={value}")
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel("NMSE")
    ax.set_title(f"Sweep over {sweep_axis}")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_bench_figure(rows, path) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for name in ("fast", "dense"):
        pts = sorted((r.n_boxes, r.mean_s) for r in rows if r.path == name)
        if not pts:
            continue
        sizes = np.array([p[0] for p in pts], dtype=float)
        times = np.array([p[1] for p in pts])
        ax.loglog(sizes, times, marker="o", label=name)
    ax.set_xlabel("number of boxes |N|")
    ax.set_ylabel("time per apply [s]")
    ax.set_title("Forward operator scaling")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
