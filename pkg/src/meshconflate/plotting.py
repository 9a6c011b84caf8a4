"""Report figures written to image files (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluate import DistanceSamples  # noqa: E402

DPI = 120


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_distance_histogram(samples: DistanceSamples, tau: float, path) -> Path:
    """Histograms of both sample-to-surface distance directions, with tau marked."""
    fig, ax = plt.subplots(figsize=(6, 4))
    both = np.concatenate([samples.result_to_reference, samples.reference_to_result])
    hi = max(float(np.percentile(both, 99.5)), 2.0 * tau)
    bins = np.linspace(0.0, hi, 60)
    ax.hist(samples.result_to_reference, bins=bins, alpha=0.6, label="result to reference (precision)")
    ax.hist(samples.reference_to_result, bins=bins, alpha=0.6, label="reference to result (recall)")
    ax.axvline(tau, color="k", ls="--", lw=1, label=f"tau = {tau:g} m")
    ax.set_xlabel("distance [m]")
    ax.set_ylabel("samples")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_fscore_curve(samples: DistanceSamples, tau: float, path, n_tau: int = 50) -> Path:
    """Precision, recall and F-score as functions of the threshold."""
    both = np.concatenate([samples.result_to_reference, samples.reference_to_result])
    top = max(float(np.percentile(both, 99.0)), 2.0 * tau)
    taus = np.linspace(top / n_tau, top, n_tau)
    prf = np.array([samples.report_at(t) for t in taus])
    fig, ax = plt.subplots(figsize=(6, 4))
    for k, name in enumerate(("precision", "recall", "F-score")):
        ax.plot(taus, prf[:, k], label=name)
    ax.axvline(tau, color="k", ls="--", lw=1)
    ax.set_xlabel("tau [m]")
    ax.set_ylim(0.0, 1.02)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_cameras(centers: np.ndarray, path, surface_points: np.ndarray | None = None) -> Path:
    """Top view of camera centers colored by height, over optional surface samples."""
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
    centers = centers[np.argsort(-centers[:, 2], kind="stable")]  # low cameras drawn last, on top of stacks
    fig, ax = plt.subplots(figsize=(6, 6))
    if surface_points is not None and len(surface_points):
        ax.scatter(surface_points[:, 0], surface_points[:, 1], s=0.2, c="0.75", rasterized=True)
    sc = ax.scatter(centers[:, 0], centers[:, 1], s=6, c=centers[:, 2], cmap="viridis")
    fig.colorbar(sc, ax=ax, label="camera height [m]")
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"{len(centers)} virtual cameras")
    return _save(fig, path)


def evaluation_figures(samples: DistanceSamples, tau: float, out_dir, stem: str = "eval") -> list[Path]:
    out_dir = Path(out_dir)
    return [
        plot_distance_histogram(samples, tau, out_dir / f"{stem}_distances.png"),
        plot_fscore_curve(samples, tau, out_dir / f"{stem}_fscore.png"),
    ]
