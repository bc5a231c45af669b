"""Artifact writers for experiment runs: CSV tables, config snapshots,
structured-text summaries, and matplotlib figures rendered alongside them.

CSV bodies are byte-deterministic for a fixed configuration (floats are
serialized with shortest round-trip repr, rows in a fixed order, newline
fixed to "\\n"); wall-clock information never enters them. Timestamps are
confined to the config snapshot.
"""

import json
import time

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = (
    "format_value",
    "write_csv",
    "write_config_snapshot",
    "write_json",
    "save_phase_figure",
    "save_grid_figure",
    "save_trace_figure",
    "save_inpaint_figure",
)


def format_value(v):
    """Deterministic text form: shortest round-trip repr for floats."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    """Write a comma-separated table with a header row."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_config_snapshot(path, config: dict):
    """Flat key = value snapshot of the effective configuration.

    The only artifact allowed to carry a timestamp (in a leading comment).
    """
    lines = [f"# written {time.strftime('%Y-%m-%dT%H:%M:%S%z')}"]
    for key in sorted(config):
        lines.append(f"{key} = {format_value(config[key])}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path, payload):
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_phase_figure(report, path, title="Recovery success rate vs sparsity"):
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    rates = report.success_rates
    ax.plot(report.k_values, [rates[k] for k in report.k_values], "o-")
    ax.set_xlabel("sparsity K")
    ax.set_ylabel("success rate")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_grid_figure(report, path, title="Mean recovery error (dB)"):
    fig, ax = plt.subplots(figsize=(4.6, 3.8))
    im = ax.imshow(report.metric, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(report.q2_values)), [str(q) for q in report.q2_values])
    ax.set_yticks(range(len(report.q1_values)), [str(q) for q in report.q1_values])
    ax.set_xlabel("q2")
    ax.set_ylabel("q1")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="RelErr (dB)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_trace_figure(result, path, title="Convergence traces"):
    fig, axes = plt.subplots(1, 2, figsize=(7.6, 3.0))
    its = np.arange(1, result.iterations + 1)
    axes[0].semilogy(its, np.maximum(np.asarray(result.residual_trace), 1e-300))
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("residual norm")
    axes[0].grid(True, alpha=0.3)
    axes[1].semilogy(its, np.maximum(np.asarray(result.iterate_gap_trace), 1e-300))
    axes[1].set_xlabel("iteration")
    axes[1].set_ylabel("iterate gap")
    axes[1].grid(True, alpha=0.3)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_inpaint_figure(original, corrupted, restored, path):
    fig, axes = plt.subplots(1, 3, figsize=(9.0, 3.2))
    for ax, img, label in zip(axes, (original, corrupted, restored),
                              ("original", "corrupted", "restored")):
        grid = img.as_grid()
        if img.channels == 1:
            ax.imshow(grid[:, :, 0], cmap="gray", vmin=0, vmax=255)
        else:
            ax.imshow(grid.astype(np.uint8))
        ax.set_title(label)
        ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
