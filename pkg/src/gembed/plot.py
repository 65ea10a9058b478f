"""Static SVG scatter plots of 2-D embeddings."""

from __future__ import annotations

import warnings

import numpy as np

from .errors import UnsupportedDimension

SIZE = 800
MARGIN = 20
RADIUS = 2
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#ad494a", "#637939", "#8c6d31", "#7b4173", "#3182bd",
)
UNLABELED_COLOR = "#b0b0b0"


def _scale(v):
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo
    if span == 0:
        return np.full(v.shape, SIZE / 2)
    return MARGIN + (v - lo) / span * (SIZE - 2 * MARGIN)


def render_svg(embedding, labels=None):
    """Return the SVG document for a 2-D scatter plot as a string.

    Points keep their input order; the y axis points up. Class ``c`` is drawn
    with ``PALETTE[c % 16]``.
    """
    E = np.asarray(embedding, dtype=np.float64)
    if E.ndim != 2 or E.shape[1] != 2:
        raise UnsupportedDimension(f"SVG plots need d = 2, got shape {E.shape}")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.max(initial=-1) >= len(PALETTE):
            warnings.warn(
                f"{labels.max() + 1} classes but {len(PALETTE)} colors; palette wraps",
                RuntimeWarning, stacklevel=2,
            )
    x = _scale(E[:, 0])
    y = SIZE - _scale(E[:, 1])
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
        f'viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect width="{SIZE}" height="{SIZE}" fill="#ffffff"/>',
    ]
    for i in range(E.shape[0]):
        if labels is None:
            color = PALETTE[0]
        elif labels[i] < 0:
            color = UNLABELED_COLOR
        else:
            color = PALETTE[labels[i] % len(PALETTE)]
        out.append(f'<circle cx="{x[i]:.2f}" cy="{y[i]:.2f}" r="{RADIUS}" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_svg(embedding, labels, path):
    """Write :func:`render_svg` output to ``path``."""
    text = render_svg(embedding, labels)
    with open(path, "w") as fh:
        fh.write(text)
