"""Figure rendering for the report paths.

Everything goes through the Agg backend and strips the library version
from the PNG metadata, so identical inputs produce byte-identical files.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)


def plot_phase_sweep(rows, path):
    """Stability radius against B, with the attractiveness bound."""
    b = [row["B"] for row in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(b, [row["radius"] for row in rows], marker="o",
            label="restricted radius")
    ax.axhline(1.0 / (rows[0]["delta"] - 1), linestyle="--", color="gray",
               label="1/(Delta-1)")
    ax.set_xlabel("B")
    ax.set_ylabel("radius")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_ssc_convergence(partials, log_c, path):
    """Partial sums of mu_i delta_i^2 converging to ln C."""
    xs = sorted(partials)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, [partials[i] for i in xs], marker=".")
    ax.axhline(log_c, linestyle="--", color="gray", label="ln C")
    ax.set_xlabel("truncation length")
    ax.set_ylabel("partial sum")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
