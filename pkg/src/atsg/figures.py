"""Report bundle: CSV tables plus matplotlib charts written side by side."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

TOOL_COLORS = {"gripper": "#4C72B0", "wrench": "#C44E52"}
_FALLBACK = ["#55A868", "#8172B2", "#CCB974", "#64B5CD"]


def _write_csv(path: Path, rows: list[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def plot_node_counts(nodes: dict, path: Path) -> None:
    rows = nodes["images"]
    labels = [str(r["image"]) for r in rows]
    kinds = [("object", "tab:blue"), ("motion", "tab:red"), ("hand", "tab:green")]
    width = 0.27
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    for k, (kind, color) in enumerate(kinds):
        xs = [i + (k - 1) * width for i in range(len(rows))]
        ax.bar(xs, [r[kind] for r in rows], width, label=kind, color=color)
    ref = nodes.get("reference")
    if ref:
        by_image = {r["image"]: r for r in ref["images"]}
        for k, (kind, _) in enumerate(kinds):
            xs = [i + (k - 1) * width for i, r in enumerate(rows) if r["image"] in by_image]
            ys = [by_image[r["image"]][kind] for r in rows if r["image"] in by_image]
            ax.scatter(xs, ys, marker="_", s=120, color="black", zorder=3,
                       label="reference" if k == 0 else None)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels)
    ax.set_xlabel("instruction image")
    ax.set_ylabel("nodes")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_schedule(plan: dict, path: Path) -> None:
    steps = plan["steps"]
    arms = max(plan["arms"], 1)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.45 * plan["makespan"] + 1.5), 0.6 * arms + 1.2))
    colors = dict(TOOL_COLORS)
    for step in steps:
        tool = step["tool"]
        if tool not in colors:
            colors[tool] = _FALLBACK[len(colors) % len(_FALLBACK)]
        ax.broken_barh([(step["slot"], 0.92)], (step["arm"] - 0.4, 0.8), color=colors[tool])
        ax.text(step["slot"] + 0.46, step["arm"], step["attached"]["part"].split("#")[0][:4],
                ha="center", va="center", fontsize=6, color="white")
    ax.set_yticks(range(arms))
    ax.set_yticklabels([f"arm {a}" for a in range(arms)])
    ax.set_xlabel("slot")
    ax.set_xlim(0, max(plan["makespan"], 1))
    handles = [plt.Rectangle((0, 0), 1, 1, color=c) for t, c in colors.items()]
    ax.legend(handles, list(colors), frameon=False, fontsize=7, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_bundle(report: dict, plan: dict, directory: str | Path) -> list[Path]:
    """Write tables as CSV and the matching charts as PNG into ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    tables = {
        "node_counts.csv": report["nodes"]["images"],
        "complement.csv": report["complement"]["images"],
        "schedule.csv": [
            {
                "slot": s["slot"], "arm": s["arm"], "unit": s["unit"], "image": s["image"],
                "verb": s["verb"], "parent": s["parent"]["part"],
                "attached": s["attached"]["part"], "tool": s["tool"],
            }
            for s in plan["steps"]
        ],
    }
    for name, rows in tables.items():
        _write_csv(out / name, rows)
        written.append(out / name)
    plot_node_counts(report["nodes"], out / "node_counts.png")
    plot_schedule(plan, out / "schedule.png")
    written += [out / "node_counts.png", out / "schedule.png"]
    return written
