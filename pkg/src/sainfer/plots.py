"""Figure rendering for the CLI report paths.

Every CLI subcommand that writes delimited output can render a companion
PNG next to it; the CSV remains the machine-readable contract. Uses the
Agg backend so rendering works headless.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .critvals import DensityHistogram  # noqa: E402


def _m_label(m) -> str:
    return "m=inf" if m == math.inf else f"m={int(m)}"


def render_density(hists: dict, path, kind: str = "f") -> None:
    """Step-curve densities per functional order, one panel."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for m, hist in hists.items():
        assert isinstance(hist, DensityHistogram)
        ax.stairs(hist.density, hist.edges, label=_m_label(m))
    symbol = "f_m(W)" if kind == "f" else "h_m(W)"
    ax.set_xlabel(symbol)
    ax.set_ylabel("density")
    ax.set_title(f"Empirical density of {symbol}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_ci_trace(trace, path) -> None:
    """Center line with a shaded confidence band and the target level."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(trace.steps, trace.centers - trace.halfwidths,
                    trace.centers + trace.halfwidths, alpha=0.3,
                    label=f"{100 * (1 - trace.level):g}% CI")
    ax.plot(trace.steps, trace.centers, lw=1.2, label="estimate")
    ax.axhline(trace.target, color="k", ls=":", lw=1, label="target")
    ax.set_xlabel("post-warm-up step")
    ax.set_ylabel("projected estimate")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_coverage(report, path, level: float = 0.05) -> None:
    """Coverage per (method, m) with the nominal level marked."""
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = []
    coverages = []
    for row in report.rows:
        tag = row.method if row.m is None else f"{row.method} {_m_label(row.m)}"
        labels.append(tag)
        coverages.append(row.coverage)
    ax.bar(range(len(labels)), coverages, color="tab:blue")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("empirical coverage")
    ax.set_ylim(0, 1.05)
    ax.axhline(1.0 - level, color="k", ls=":", lw=1)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
