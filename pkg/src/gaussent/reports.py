"""Figure rendering for the CLI report paths.

Each figure lands next to its delimited output. Rendering is headless (Agg)
and reruns must produce byte-identical files, so no timestamps or versions go
into the PNG metadata.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_SAVE_KWARGS = {"dpi": 110, "metadata": {"Software": "gaussent"}}


def save_training_curves(log, path) -> None:
    """Loss and warmup curves, with dev-AUPRC checkpoints where evaluated."""
    steps = [r.step for r in log.records]
    fig, (ax_loss, ax_lr) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax_loss.plot(steps, [r.loss for r in log.records], color="tab:blue", lw=1.2, label="loss")
    ax_loss.set_ylabel("batch loss")
    eval_steps = [r.step for r in log.records if r.dev_auprc is not None]
    if eval_steps:
        ax_aux = ax_loss.twinx()
        ax_aux.plot(
            eval_steps,
            [r.dev_auprc for r in log.records if r.dev_auprc is not None],
            "o-",
            color="tab:red",
            lw=1.0,
            label="dev AUPRC",
        )
        ax_aux.set_ylabel("dev AUPRC")
        ax_aux.set_ylim(0.0, 1.05)
    ax_lr.plot(steps, [r.lr for r in log.records], color="tab:green", lw=1.2)
    ax_lr.set_ylabel("learning rate")
    ax_lr.set_xlabel("step")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_histogram_figure(histogram, bin_width: float, path) -> None:
    centers = [c for c, _ in histogram]
    counts = [n for _, n in histogram]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(centers, counts, width=bin_width * 0.95, color="tab:blue")
    ax.set_xlabel("log length ratio (premise / hypothesis)")
    ax.set_ylabel("sentence pairs")
    ax.axvline(0.0, color="black", lw=0.8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_grid_heatmap(result, path) -> None:
    batch_sizes = sorted({c.batch_size for c in result.cells})
    rates = sorted({c.learning_rate for c in result.cells})
    grid = [[float("nan")] * len(rates) for _ in batch_sizes]
    for cell in result.cells:
        if cell.dev_auprc is not None:
            grid[batch_sizes.index(cell.batch_size)][rates.index(cell.learning_rate)] = cell.dev_auprc
    fig, ax = plt.subplots(figsize=(1.6 + 1.4 * len(rates), 1.2 + 0.8 * len(batch_sizes)))
    im = ax.imshow(grid, cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(rates)), [f"{r:g}" for r in rates])
    ax.set_yticks(range(len(batch_sizes)), [str(b) for b in batch_sizes])
    ax.set_xlabel("learning rate")
    ax.set_ylabel("batch size")
    for i in range(len(batch_sizes)):
        for j in range(len(rates)):
            if grid[i][j] == grid[i][j]:
                ax.text(j, i, f"{grid[i][j]:.3f}", ha="center", va="center", color="white", fontsize=8)
    fig.colorbar(im, ax=ax, label="best dev AUPRC")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
