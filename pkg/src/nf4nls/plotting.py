"""Figures rendered next to the CSV reports when the CLI is given --plot."""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_diagnostics(times, mass, hamiltonian, hs_norm, path):
    """Relative drift of mass and Hamiltonian, and the H^s norm, against time."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for vals, label in ((mass, "mass"), (hamiltonian, "Hamiltonian")):
        vals = np.asarray(vals)
        ref = vals[0] if vals[0] != 0 else 1.0
        axes[0].semilogy(times, np.abs(vals - vals[0]) / abs(ref) + 1e-18, label=label)
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("relative drift")
    axes[0].legend()
    axes[1].plot(times, hs_norm)
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("H^s norm of v")
    return _save(fig, path)


def plot_drift_sweep(summary, path):
    """Ensemble-mean max |dE/dt| for the modified and unmodified energies against N."""
    Ns = sorted(summary)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(Ns, [summary[N]["hs_mean"] for N in Ns], "o-", label="(1/2)||v||^2")
    ax.plot(Ns, [summary[N]["modified_mean"] for N in Ns], "s-", label="modified energy")
    ax.set_xlabel("N")
    ax.set_ylabel("mean of max |d/dt|")
    ax.set_yscale("log")
    ax.legend()
    return _save(fig, path)


def plot_residuals(times, residuals_by_J, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for J, res in sorted(residuals_by_J.items()):
        ax.semilogy(times[J], np.abs(res) + 1e-18, ".-", label=f"J={J}")
    ax.set_xlabel("t")
    ax.set_ylabel("|telescoping residual|")
    ax.legend()
    return _save(fig, path)


def plot_lil(pre, post, theta, path):
    """Pre- and post-flow maximal LIL ratios of the conditioned draws."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    idx = np.arange(len(pre))
    ax.scatter(idx, pre, s=12, label="pre-flow")
    ax.scatter(idx, post, s=12, label="post-flow")
    ax.axhline(theta, color="k", lw=0.8, ls="--", label="threshold")
    ax.set_yscale("log")
    ax.set_xlabel("conditioned draw")
    ax.set_ylabel("max ratio over scales")
    ax.legend()
    return _save(fig, path)


def plot_sample(x, values, path):
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(x, values.real, lw=0.4, label="Re u")
    ax.plot(x, values.imag, lw=0.4, label="Im u")
    ax.set_xlabel("x")
    ax.legend()
    return _save(fig, path)
