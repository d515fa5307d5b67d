"""SVG figures for analysis and report tables.

Figures are written with a fixed hash salt and no date metadata so reruns give
identical bytes. The plotted numbers are embedded as an XML comment right after
the SVG prolog, one tab-separated row per line.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "hotspot",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (6.0, 3.6),
}


def _data_comment(header, rows) -> str:
    lines = ["\t".join(map(str, header))]
    for r in rows:
        lines.append("\t".join(f"{v:.6g}" if isinstance(v, (float, np.floating)) else str(v) for v in r))
    body = "\n".join(lines).replace("--", "- -")
    return f"<!-- data\n{body}\n-->\n"


def save_svg(fig, path, header, rows):
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    text = path.read_text(encoding="utf-8")
    cut = text.find("<svg")
    path.write_text(text[:cut] + _data_comment(header, rows) + text[cut:], encoding="utf-8")


def lift_curves(rows, x_key: str, path, title: str = ""):
    """Mean lift with 95% CI bars per model; ``rows`` are summary dicts with
    keys model, ``x_key``, mean, ci_low, ci_high."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        models = sorted({r["model"] for r in rows})
        for m in models:
            sel = sorted((r for r in rows if r["model"] == m), key=lambda r: r[x_key])
            x = [r[x_key] for r in sel]
            y = np.array([r["mean"] for r in sel])
            err = np.array([[r["mean"] - r["ci_low"] for r in sel], [r["ci_high"] - r["mean"] for r in sel]])
            ax.errorbar(x, y, yerr=err, marker="o", ms=3, capsize=2, lw=1, label=m)
        ax.set_xlabel(x_key)
        ax.set_ylabel("lift")
        ax.set_title(title)
        ax.legend(fontsize=7, ncol=2)
        fig.tight_layout()
        save_svg(fig, path, ["model", x_key, "mean", "ci_low", "ci_high"],
                 [[r["model"], r[x_key], r["mean"], r["ci_low"], r["ci_high"]] for r in rows])


def histogram(values, path, xlabel: str, title: str = ""):
    values = np.asarray(values, dtype=np.float64)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.bar(np.arange(values.size), values, width=0.8, color="0.35")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("frequency")
        ax.set_title(title)
        fig.tight_layout()
        save_svg(fig, path, ["bin", "frequency"], [[k, v] for k, v in enumerate(values)])


def census_bars(rows, path, top: int = 20):
    rows = [r for r in rows if r.rank > 0][:top]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.bar(range(len(rows)), [100 * r.share for r in rows], color="0.35")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels([r.pattern for r in rows], rotation=90, family="monospace", fontsize=7)
        ax.set_ylabel("share of hot weeks (%)")
        fig.tight_layout()
        save_svg(fig, path, ["rank", "pattern", "count", "share"],
                 [[r.rank, r.pattern, r.count, r.share] for r in rows])


def bucket_boxes(result: dict, path):
    labels, stats = result["buckets"], result["stats"]
    boxes, used = [], []
    for lab, s in zip(labels, stats):
        if s["count"]:
            boxes.append({"label": lab, "whislo": s["min"], "q1": s["q1"], "med": s["median"],
                          "q3": s["q3"], "whishi": s["max"], "fliers": []})
            used.append([lab, s["count"], s["min"], s["q1"], s["median"], s["q3"], s["max"]])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if boxes:
            ax.bxp(boxes, showfliers=False)
        ax.set_xlabel("distance bucket (km)")
        ax.set_ylabel("correlation")
        ax.set_title(result["mode"])
        ax.tick_params(axis="x", labelrotation=45, labelsize=7)
        fig.tight_layout()
        save_svg(fig, path, ["bucket", "count", "min", "q1", "median", "q3", "max"], used)


def importance_map(matrix, channel_names, path, title: str = ""):
    """Cumulative importance per (hour lag, channel)."""
    m = np.asarray(matrix, dtype=np.float64)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        im = ax.imshow(m.T, aspect="auto", cmap="viridis", interpolation="nearest")
        ax.set_yticks(range(len(channel_names)))
        ax.set_yticklabels(channel_names, fontsize=6)
        ax.set_xlabel("hour in window")
        ax.set_title(title)
        fig.colorbar(im, ax=ax)
        fig.tight_layout()
        per_channel = m.sum(axis=0)
        save_svg(fig, path, ["channel", "importance"], list(zip(channel_names, per_channel)))


def loss_trace(trace, path):
    trace = np.asarray(trace, dtype=np.float64)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(np.arange(trace.size), trace, lw=0.8, color="0.2")
        ax.set_xlabel("batch")
        ax.set_ylabel("masked MSE")
        ax.set_yscale("log")
        fig.tight_layout()
        save_svg(fig, path, ["batch", "loss"], [[k, v] for k, v in enumerate(trace)])
