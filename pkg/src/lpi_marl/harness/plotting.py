"""SVG learning curves.

Charts are rendered with matplotlib's SVG backend using a fixed hash salt
and no date metadata, so identical inputs give identical bytes.
"""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from lpi_marl.harness.io import AggregateCurve  # noqa: E402
from lpi_marl.logging import get_logger  # noqa: E402

logger = get_logger(__name__)

SVG_HASH_SALT = "lpi-marl"


def curve_label(curve: AggregateCurve) -> str:
    """Legend entry from the curve metadata (the policy radius when known)."""
    if "kappa" in curve.meta:
        return f"kappa={curve.meta['kappa']}"
    return curve.meta.get("label", "run")


def plot_curves(
    curves: Sequence[AggregateCurve],
    path: str | Path,
    title: str = "",
    xlabel: str = "iteration",
    ylabel: str = "regularized return",
    labels: Sequence[str] | None = None,
) -> Path:
    """Median lines with shaded 25/75 percentile bands, one per curve."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels = [curve_label(c) for c in curves] if labels is None else list(labels)
    with plt.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for curve, label in zip(curves, labels):
            # a lone point needs a marker to show up
            marker = "o" if curve.iterations.size == 1 else None
            (line,) = ax.plot(curve.iterations, curve.median, label=label, marker=marker)
            ax.fill_between(
                curve.iterations, curve.q25, curve.q75, color=line.get_color(), alpha=0.25, linewidth=0
            )
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info(f"Wrote {path}")
    return path
