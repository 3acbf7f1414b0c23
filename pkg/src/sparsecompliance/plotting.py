"""SVG figures for experiment summaries (matplotlib, Agg backend)."""
from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed salt and no date stamp so repeated runs give identical files
plt.rcParams.update({"svg.hashsalt": "sparsecompliance", "svg.fonttype": "none",
                     "font.size": 9, "axes.grid": True, "grid.alpha": 0.3})
_META = {"Date": None}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def plot_theorem1(summary, path: Path) -> Path:
    by_func = defaultdict(list)
    l1 = {}
    for row in summary.rows:
        if row["regularizer"] == "l1":
            l1[row["functional"]] = row["value"]
        else:
            by_func[row["functional"]].append(row["value"])
    funcs = sorted(set(by_func) | set(l1))
    fig, axes = plt.subplots(1, len(funcs), figsize=(4 * len(funcs), 3), squeeze=False)
    for ax, f in zip(axes[0], funcs):
        vals = sorted(by_func.get(f, []))
        ax.plot(range(len(vals)), vals, ".", ms=3, label="competitors")
        if f in l1:
            ax.axhline(l1[f], color="C3", lw=1, label="l1")
        ax.set_xlabel("competitor (sorted)")
        ax.set_ylabel(f)
        ax.legend(loc="best")
    return _save(fig, path)


def plot_compliance(summary, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for offset, measure in ((-0.15, "uniform"), (0.15, "nonuniform")):
        rows = [r for r in summary.rows if r["measure"] == measure]
        x = [i + offset for i in range(len(rows))]
        ax.errorbar(x, [r["estimate"] for r in rows], yerr=[r["half_width"] for r in rows],
                    fmt="o", ms=3, capsize=2, label=measure)
    labels = [r["regularizer"] for r in summary.rows if r["measure"] == "uniform"]
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels([lbl if len(lbl) <= 18 else lbl[:16] + ".." for lbl in labels],
                       rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("estimate")
    ax.legend(loc="best")
    return _save(fig, path)


def plot_phase(summary, path: Path) -> Path:
    rows = sorted(summary.rows, key=lambda r: r["m"])
    m = [r["m"] for r in rows]
    p = [r["rate"] for r in rows]
    sd = [3 * math.sqrt(max(q * (1 - q), 1e-12) / r["trials"]) for q, r in zip(p, rows)]
    fig, ax = plt.subplots(figsize=(4.5, 3))
    ax.fill_between(m, [max(0, a - b) for a, b in zip(p, sd)],
                    [min(1, a + b) for a, b in zip(p, sd)], alpha=0.25, lw=0)
    ax.plot(m, p, "o-", ms=3)
    ax.set_xlabel("m")
    ax.set_ylabel("success rate")
    ax.set_ylim(-0.02, 1.02)
    return _save(fig, path)


def plot_rip(summary, path: Path) -> Path:
    rows = summary.rows
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.barh(range(len(rows)), [r["value"] for r in rows])
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels([f"{r['functional']}: {r['regularizer'][:18]}" for r in rows], fontsize=7)
    ax.set_xlabel("value")
    return _save(fig, path)


PLOTTERS = {"theorem1": plot_theorem1, "compliance": plot_compliance,
            "phase": plot_phase, "rip": plot_rip}


def render(summary, out_dir, stamp: str) -> list[Path]:
    """Render the figure for ``summary`` next to its CSV."""
    path = Path(out_dir) / f"{summary.experiment}_{stamp}.svg"
    return [PLOTTERS[summary.experiment](summary, path)]
