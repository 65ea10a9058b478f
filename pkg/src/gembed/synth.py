"""Labeled 2-D datasets that morph between split and unified class layouts.

Every family lives in the unit square. Each class is made of several pieces
(two bands, two wedges, or four squares) that sit apart at ``morph = 0`` and
have moved next to each other at ``morph = 1``. In between, the pieces pass
through each other, so classes mix. Positions are piecewise linear in
``morph``: the random base coordinates and the noise are fixed by the seed and
only the piece offsets depend on ``morph``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter
from .graph import PointCloud

FAMILIES = ("bands", "circle", "checkerboard")
CLASS_COUNTS = {"bands": (2, 3, 4, 5), "circle": (2, 3, 4, 5), "checkerboard": (4, 16)}

R_INNER, R_OUTER = 0.25, 0.5
WEDGE_FILL = 0.7
# fraction of each axis covered by squares, per grid size; keeps gaps above 5 sigma
SQUARE_FILL = {2: 0.8, 4: 0.6}


@dataclass(frozen=True)
class SyntheticSpec:
    family: str
    n_points: int
    n_classes: int
    morph: float
    noise_std: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameter(f"family must be one of {FAMILIES}")
        if self.n_classes not in CLASS_COUNTS[self.family]:
            raise InvalidParameter(
                f"{self.family} supports {CLASS_COUNTS[self.family]} classes, got {self.n_classes}"
            )
        if not 0.0 <= self.morph <= 1.0:
            raise InvalidParameter("morph must lie in [0, 1]")
        if self.n_points < 10 * self.n_classes:
            raise InvalidParameter("need at least 10 points per class")
        if self.noise_std < 0:
            raise InvalidParameter("noise_std must be >= 0")


def _split(n, parts):
    """Sizes of ``parts`` near-equal groups (the first ones get the remainder)."""
    base, extra = divmod(n, parts)
    return np.array([base + (i < extra) for i in range(parts)])


def _assign(n, n_classes, pieces):
    """Class and piece id per point, stratified, in generation order."""
    labels, piece = [], []
    for c, nc in enumerate(_split(n, n_classes)):
        for h, nh in enumerate(_split(int(nc), pieces)):
            labels.append(np.full(nh, c))
            piece.append(np.full(nh, h))
    return np.concatenate(labels), np.concatenate(piece)


def _lerp(a, b, t):
    return a + (b - a) * t


def _bands(c, h, u, morph, nc):
    slot = 1.0 / (2 * nc)
    width = slot / 2
    start = (c + h * nc) * slot
    end = 2 * c * slot + h * width
    x = _lerp(start, end, morph) + width / 2 + u[:, 0] * width
    return np.column_stack([x, u[:, 1]])


def _circle(c, h, u, morph, nc):
    # wedges of a full disc at 0 gather into contiguous pairs over a half-disc at 1
    slot = math.pi / nc
    width = WEDGE_FILL * slot / 2
    start = (c + h * nc) * slot
    end = c * slot + h * width
    ang = _lerp(start, end, morph) + (slot - 2 * width) / 2 + u[:, 0] * width
    r = np.sqrt(R_INNER**2 + u[:, 1] * (R_OUTER**2 - R_INNER**2))
    return np.column_stack([0.5 + r * np.cos(ang), 0.5 + r * np.sin(ang)])


def _checker_axis(slot, t, q, side):
    a, h = slot % q, slot // q
    n_slots = 2 * q
    gap = (1.0 - n_slots * side) / (n_slots - 1)
    pair_gap = (1.0 - n_slots * side) / (q - 1)
    spread = slot * (side + gap)
    compact = a * (2 * side + pair_gap) + h * side
    return _lerp(spread, compact, t)


def _checker(c, h, u, morph, nc):
    q = int(round(math.sqrt(nc)))
    side = SQUARE_FILL[q] / (2 * q)
    row_class, col_class = divmod(c, q)
    h_row, h_col = divmod(h, 2)
    col = col_class + q * h_col
    row = row_class + q * h_row
    tx = min(1.0, 2.0 * morph)
    ty = max(0.0, 2.0 * morph - 1.0)
    x = _checker_axis(col, tx, q, side) + u[:, 0] * side
    y = _checker_axis(row, ty, q, side) + u[:, 1] * side
    return np.column_stack([x, y])


_LAYOUTS = {"bands": (_bands, 2), "circle": (_circle, 2), "checkerboard": (_checker, 4)}


def generate(spec):
    """Draw one realisation of ``spec`` as a labeled :class:`PointCloud`.

    Points are returned in a seed-dependent random order.
    """
    layout, pieces = _LAYOUTS[spec.family]
    rng = np.random.default_rng(spec.seed)
    n = spec.n_points
    # base draws are made before any morph-dependent step
    u = rng.random((n, 2))
    noise = rng.standard_normal((n, 2)) * spec.noise_std
    order = rng.permutation(n)
    labels, piece = _assign(n, spec.n_classes, pieces)
    X = np.empty((n, 2))
    for c in range(spec.n_classes):
        for h in range(pieces):
            m = (labels == c) & (piece == h)
            X[m] = layout(c, h, u[m], spec.morph, spec.n_classes)
    X += noise
    return PointCloud(X[order], labels[order])


def bands(n_points, n_classes, morph, noise_std=0.01, seed=0):
    return generate(SyntheticSpec("bands", n_points, n_classes, morph, noise_std, seed))


def circle(n_points, n_classes, morph, noise_std=0.01, seed=0):
    return generate(SyntheticSpec("circle", n_points, n_classes, morph, noise_std, seed))


def checkerboard(n_points, n_classes, morph, noise_std=0.01, seed=0):
    return generate(SyntheticSpec("checkerboard", n_points, n_classes, morph, noise_std, seed))
