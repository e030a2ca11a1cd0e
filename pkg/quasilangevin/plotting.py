"""
SVG figures. Output is byte-stable: fixed SVG hash salt, no date metadata.
Every plotted series is also written as CSV by the experiment that plots it.
"""

import logging
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

from matplotlib import pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

plt.rcParams["svg.hashsalt"] = "quasi-langevin-lab"
plt.rcParams["svg.fonttype"] = "none"


def _save(fig, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug("Wrote %s", path)
    return path


def plot_airy(path: PathLike, x: np.ndarray, ai: np.ndarray) -> Path:
    """Ai over the sampled range with the negative lobes shaded."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(x, ai, color="black", linewidth=1.2, label="Ai(x)")
    ax.fill_between(x, ai, 0.0, where=ai < 0, color="tab:red", alpha=0.25, label="Ai(x) < 0")
    ax.axhline(0.0, color="gray", linewidth=0.6)
    ax.set_xlabel("x")
    ax.set_ylabel("Ai(x)")
    ax.set_xlim(float(x[0]), float(x[-1]))
    ax.legend(loc="upper left", frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def plot_densities(
    path: PathLike,
    x: np.ndarray,
    series: Mapping[str, np.ndarray],
    title: str = "",
    xlabel: str = "x",
    ylabel: str = "P(x)",
    errors: Optional[Mapping[str, np.ndarray]] = None,
) -> Path:
    """Overlay densities sharing one grid."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for label, values in series.items():
        ax.plot(x, values, linewidth=1.2, label=label)
        if errors and label in errors:
            ax.fill_between(x, values - errors[label], values + errors[label], alpha=0.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def plot_series(
    path: PathLike,
    t: Sequence[float],
    series: Mapping[str, Sequence[float]],
    xlabel: str = "t",
    ylabel: str = "",
    markers: bool = False,
) -> Path:
    """Time series (moments, mean sign) against a common abscissa."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for label, values in series.items():
        ax.plot(t, values, marker="o" if markers else None, markersize=3, linewidth=1.2, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)
