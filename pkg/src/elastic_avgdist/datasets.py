"""Synthetic point clouds used by the experiments and the command line.

All generators are deterministic given ``seed``.
"""

import numpy as np

from .geometry import WeightedPointCloud

__all__ = ["segment_uniform", "disk_uniform", "circle", "corner", "BUNDLED", "bundled"]


def segment_uniform(n=100, seed=0, weight=1.0):
    """``n`` points drawn uniformly on the segment from (0, 0) to (1, 0)."""
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0.0, 1.0, n))
    return WeightedPointCloud(np.c_[x, np.zeros(n)], np.full(n, weight))


def disk_uniform(n=4000, seed=0):
    """``n`` points uniform on the unit disk, total mass 1 (density 1/pi)."""
    rng = np.random.default_rng(seed)
    radius = np.sqrt(rng.uniform(0.0, 1.0, n))
    angle = rng.uniform(0.0, 2.0 * np.pi, n)
    pts = np.c_[radius * np.cos(angle), radius * np.sin(angle)]
    return WeightedPointCloud(pts, np.full(n, 1.0 / n))


def circle(n=2000, radius=1.0, seed=0):
    """``n`` equally spaced points on a circle, total mass equal to its length.

    The starting angle is drawn from ``seed``.
    """
    rng = np.random.default_rng(seed)
    angle = rng.uniform(0.0, 2.0 * np.pi) + 2.0 * np.pi * np.arange(n) / n
    pts = radius * np.c_[np.cos(angle), np.sin(angle)]
    return WeightedPointCloud(pts, np.full(n, 2.0 * np.pi * radius / n))


def corner(weight=1.0, seed=0):
    """Three atoms at (-1, 0), (0, 1), (1, 0) forming a right-angle corner."""
    return WeightedPointCloud([[-1.0, 0.0], [0.0, 1.0], [1.0, 0.0]], np.full(3, weight))


BUNDLED = {
    "segment-uniform": segment_uniform,
    "disk-uniform": disk_uniform,
    "circle": circle,
    "three-atom": corner,
}


def bundled(name, seed=0):
    try:
        factory = BUNDLED[name]
    except KeyError:
        raise ValueError(f"unknown dataset {name!r}; choose from {', '.join(sorted(BUNDLED))}") from None
    return factory(seed=seed)
