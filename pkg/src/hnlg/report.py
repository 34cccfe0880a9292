"""Report artifacts: TSV tables, markdown summaries, and matplotlib figures.

Every report path writes the delimited file first and renders a PNG figure
next to it (training curves for a run, grouped bars for the grid, per-layer
length bars for the statistics table).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

REPORT_COLUMNS = (
    "config_id", "order", "variant", "attention",
    "BLEU", "ROUGE-1", "ROUGE-2", "ROUGE-L", "config_hash",
)


def append_report_row(path, row: dict) -> None:
    """Append one metric row to a TSV report, writing the header when new."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8") as f:
        if new:
            f.write("\t".join(REPORT_COLUMNS) + "\n")
        f.write("\t".join(_cell(row.get(c, "")) for c in REPORT_COLUMNS) + "\n")


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.2f}"
    return str(value)


def read_report_rows(path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").strip().split("\n")
    header = lines[0].split("\t")
    return [dict(zip(header, line.split("\t"))) for line in lines[1:]]


def training_curves(log_path, dev_bleu_trace, out_png) -> None:
    """Per-epoch mean training loss and dev BLEU on twin axes."""
    epochs: dict[int, list[float]] = {}
    with open(log_path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        e_col, t_col = header.index("epoch"), header.index("total")
        for line in f:
            cells = line.rstrip("\n").split("\t")
            epochs.setdefault(int(cells[e_col]), []).append(float(cells[t_col]))
    xs = sorted(epochs)
    mean_loss = [np.mean(epochs[e]) for e in xs]

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(xs, mean_loss, marker="o", color="tab:blue", label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean total loss (nats/token)", color="tab:blue")
    if dev_bleu_trace:
        ax2 = ax.twinx()
        ax2.plot(range(1, len(dev_bleu_trace) + 1), dev_bleu_trace,
                 marker="s", color="tab:orange", label="dev BLEU")
        ax2.set_ylabel("dev BLEU", color="tab:orange")
    ax.set_title("training curve")
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def grid_markdown(rows: list[dict]) -> str:
    """Plain markdown table over the standard report columns."""
    cols = list(REPORT_COLUMNS)
    lines = ["| " + " | ".join(cols) + " |",
             "|" + "|".join(["---"] * len(cols)) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(str(row.get(c, "")) for c in cols) + " |")
    return "\n".join(lines) + "\n"


def grid_chart(rows: list[dict], out_png) -> None:
    """Grouped bars: BLEU per variant, grouped by generating order."""
    scored = [r for r in rows if r.get("BLEU") not in ("", None, "error")]
    if not scored:
        return
    orders = sorted({r["order"] for r in scored})
    variants = sorted({r["variant"] for r in scored})
    width = 0.8 / max(1, len(variants))
    fig, ax = plt.subplots(figsize=(max(7, 2.4 * len(orders)), 4.5))
    for vi, variant in enumerate(variants):
        xs, ys = [], []
        for oi, order in enumerate(orders):
            match = [float(r["BLEU"]) for r in scored
                     if r["order"] == order and r["variant"] == variant]
            if match:
                xs.append(oi + vi * width)
                ys.append(np.mean(match))
        ax.bar(xs, ys, width=width, label=variant)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(orders))])
    ax.set_xticklabels(orders, rotation=20, ha="right", fontsize=7)
    ax.set_ylabel("BLEU")
    ax.set_title("experiment grid")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def stats_table_tsv(table: dict[str, dict[str, tuple]], path) -> None:
    """Length table: one row per order, train/test cells per layer."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("order\tsplit\tlayer1\tlayer2\tlayer3\tlayer4\n")
        for order_label, splits in table.items():
            for split, means in splits.items():
                cells = "\t".join(f"{m:.2f}" for m in means)
                f.write(f"{order_label}\t{split}\t{cells}\n")


def stats_chart(table: dict[str, dict[str, tuple]], out_png) -> None:
    """Per-layer mean target lengths, one bar group per order (train split)."""
    orders = list(table)
    fig, ax = plt.subplots(figsize=(max(7, 2.2 * len(orders)), 4.5))
    width = 0.2
    for layer in range(4):
        xs = [i + layer * width for i in range(len(orders))]
        ys = [table[o]["train"][layer] for o in orders]
        ax.bar(xs, ys, width=width, label=f"layer {layer + 1}")
    ax.set_xticks([i + 1.5 * width for i in range(len(orders))])
    ax.set_xticklabels(orders, rotation=20, ha="right", fontsize=7)
    ax.set_ylabel("mean target length (tokens)")
    ax.set_title("per-layer target lengths (train split)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
