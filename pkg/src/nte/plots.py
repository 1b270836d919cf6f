"""Report figures rendered next to the delimited tournament output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

ROLE_COLORS = {"attacker": "tab:blue", "defender": "tab:orange"}


def score_figure(rows: list[dict]):
    """Mean score vs learning iteration per role; shaded band is the variance."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharey=True)
    for ax, role in zip(axes, ("attacker", "defender")):
        by_kind: dict[str, list] = {}
        for row in rows:
            if row["role"] != role:
                continue
            kind = row["variant"].split("_k")[0]
            by_kind.setdefault(kind, []).append(row)
        for kind, entries in sorted(by_kind.items()):
            entries.sort(key=lambda r: r["k"])
            ks = [r["k"] for r in entries]
            means = [r["mean_score"] for r in entries]
            if len(entries) == 1:
                ax.axhline(means[0], ls="--", lw=1, alpha=0.7,
                           label=entries[0]["variant"])
                continue
            var = [r["var_score"] for r in entries]
            ax.plot(ks, means, marker="o", label=kind)
            lo = [m - v for m, v in zip(means, var)]
            hi = [m + v for m, v in zip(means, var)]
            ax.fill_between(ks, lo, hi, alpha=0.2)
        ax.set_title(f"{role} performance")
        ax.set_xlabel("learning iteration k")
        ax.set_ylim(-0.05, 1.05)
        ax.legend(fontsize=8)
    axes[0].set_ylabel("mean score")
    fig.tight_layout()
    return fig


def latency_figure(rows: list[dict]):
    """Per-variant decision latency (p50 bar, p95 whisker)."""
    fig, ax = plt.subplots(figsize=(7, 3.2))
    labels = [f"{r['variant']}\n({r['role']})" for r in rows]
    p50 = [r["p50_ms"] for r in rows]
    p95 = [r["p95_ms"] for r in rows]
    xs = range(len(rows))
    ax.bar(xs, p50, color=[ROLE_COLORS[r["role"]] for r in rows], alpha=0.8)
    ax.vlines(xs, p50, p95, color="k", lw=1.2)
    ax.scatter(xs, p95, color="k", marker="_", s=80)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, fontsize=7)
    ax.set_ylabel("decision time (ms)")
    ax.set_title("decision latency: p50 bar, p95 tick")
    fig.tight_layout()
    return fig


def render_report(rows: list[dict], out_dir) -> list[Path]:
    """Write the score and latency figures; returns the file paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, builder in (("scores.png", score_figure),
                          ("latency.png", latency_figure)):
        fig = builder(rows)
        path = out_dir / name
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
