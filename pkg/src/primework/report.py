"""Human-readable tables and figure rendering for simulation and analysis output.

Figures are written as PNG files next to the machine-readable records; the
delimited records stay the source of truth and the plots are a reading aid.
"""

from __future__ import annotations

import os
from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from .analysis import AsymmetryReport, DensityReport, SpeedupReport
    from .netsim import SimMetrics


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def format_table(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    cells = [[str(c) for c in row] for row in rows]
    widths = [
        max(len(h), *(len(row[i]) for row in cells)) if cells else len(h)
        for i, h in enumerate(headers)
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in cells:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


def metrics_table(metrics: "SimMetrics") -> str:
    rows = []
    for i, (share, produced, won, revenue) in enumerate(
        zip(
            metrics.compute_shares,
            metrics.produced,
            metrics.in_best_chain,
            metrics.revenue_shares,
        )
    ):
        rows.append([i, f"{share:.3f}", produced, won, f"{revenue:.4f}"])
    table = format_table(["node", "compute", "produced", "in chain", "revenue"], rows)
    summary = (
        f"\nbest chain: {metrics.best_chain_length} blocks, orphans: {metrics.orphans}, "
        f"mean interval: {metrics.mean_interval:.1f} ticks "
        f"(stddev {metrics.stddev_interval:.1f})"
    )
    if metrics.reorg_depths:
        depths = ", ".join(f"{d}:{n}" for d, n in sorted(metrics.reorg_depths.items()))
        summary += f"\nreorg depths: {depths}"
    return table + summary


def save_simulation_figures(metrics: "SimMetrics", outdir: str) -> list[str]:
    plt = _pyplot()
    os.makedirs(outdir, exist_ok=True)
    written = []

    heights = range(1, metrics.best_chain_length + 1)
    intervals = [
        b - a
        for a, b in zip([0] + metrics.chain_timestamps, metrics.chain_timestamps)
    ]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax1.plot(list(heights), intervals, lw=0.5, alpha=0.6, label="block interval")
    window = 50
    if len(intervals) > window:
        rolling = [
            sum(intervals[i - window : i]) / window for i in range(window, len(intervals) + 1)
        ]
        ax1.plot(range(window, len(intervals) + 1), rolling, lw=1.5, label=f"mean({window})")
    ax1.set_ylabel("interval [ticks]")
    ax1.legend(loc="upper right", fontsize=8)
    ax2.plot(list(heights), [t / (1 << 24) for t in metrics.chain_targets], lw=1.0)
    ax2.set_ylabel("target [chain length]")
    ax2.set_xlabel("block height")
    fig.tight_layout()
    path = os.path.join(outdir, "simulation_intervals.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    idx = range(len(metrics.revenue_shares))
    width = 0.4
    ax.bar([i - width / 2 for i in idx], metrics.compute_shares, width, label="compute share")
    ax.bar([i + width / 2 for i in idx], metrics.revenue_shares, width, label="revenue share")
    ax.set_xticks(list(idx))
    ax.set_xlabel("node")
    ax.set_ylabel("share")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(outdir, "simulation_revenue.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


def density_table(reports: Sequence["DensityReport"]) -> str:
    rows = [[r.x, r.pi_x, f"{r.pnt_estimate:.1f}", f"{r.ratio:.6f}"] for r in reports]
    return format_table(["x", "pi(x)", "x/ln x", "ratio"], rows)


def save_density_figure(reports: Sequence["DensityReport"], outdir: str) -> list[str]:
    plt = _pyplot()
    os.makedirs(outdir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [r.x for r in reports]
    ax.semilogx(xs, [r.ratio for r in reports], marker="o")
    ax.axhline(1.0, color="grey", lw=0.8, ls="--")
    ax.set_xlabel("x")
    ax.set_ylabel("pi(x) / (x / ln x)")
    fig.tight_layout()
    path = os.path.join(outdir, "prime_density.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def asymmetry_table(report: "AsymmetryReport") -> str:
    rows = [
        [
            report.target_raw / (1 << 24),
            report.completed,
            report.skipped,
            f"{report.median_mine_time:.4f}",
            f"{report.median_verify_time:.6f}",
            f"{report.verify_ratio:.6f}",
        ]
    ]
    return format_table(
        ["target", "completed", "skipped", "mine [s]", "verify [s]", "ratio"], rows
    )


def save_asymmetry_figure(report: "AsymmetryReport", outdir: str) -> list[str]:
    plt = _pyplot()
    os.makedirs(outdir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    trials = range(1, len(report.mine_times) + 1)
    ax.semilogy(list(trials), report.mine_times, marker="o", label="mine")
    ax.semilogy(list(trials), report.verify_times, marker="s", label="verify")
    ax.set_xlabel("trial")
    ax.set_ylabel("seconds")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(outdir, "verification_asymmetry.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def speedup_table(reports: Sequence["SpeedupReport"]) -> str:
    rows = []
    for rep in reports:
        for workers, throughput, speedup in zip(
            rep.worker_counts, rep.throughputs, rep.speedups
        ):
            rows.append(
                [
                    rep.target_raw / (1 << 24),
                    workers,
                    f"{throughput:.1f}",
                    f"{speedup:.2f}",
                ]
            )
    return format_table(["target", "workers", "candidates/s", "speedup"], rows)


def save_speedup_figure(reports: Sequence["SpeedupReport"], outdir: str) -> list[str]:
    plt = _pyplot()
    os.makedirs(outdir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    for rep in reports:
        ax.plot(
            rep.worker_counts,
            rep.speedups,
            marker="o",
            label=f"target {rep.target_raw / (1 << 24):.2f}",
        )
    top = max(max(r.worker_counts) for r in reports)
    ax.plot([1, top], [1, top], color="grey", lw=0.8, ls="--", label="ideal")
    ax.set_xlabel("workers")
    ax.set_ylabel("speedup")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(outdir, "parallel_speedup.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]
