"""Bundled test functions used by the verification suite."""

from __future__ import annotations

import numpy as np

from .grid import GridFunction, make_domain, sample

__all__ = [
    "FIXTURES",
    "ball_bump_3d",
    "cosine_square",
    "disk_bump",
    "disk_abs_x2",
    "linear_square",
    "perturbation_square",
    "quadrant_bump",
    "two_bump",
]

DISK_RADIUS = 0.75
BUMP_RADIUS = 0.6


def _bump(points, center, radius):
    """(1 - |x-c|^2/r^2)_+^2: C^1, radially nonincreasing, support the closed ball."""
    q = np.sum((points - np.asarray(center)) ** 2, axis=1) / radius**2
    return np.maximum(1.0 - q, 0.0) ** 2


def disk_bump(h: float = 1 / 256) -> GridFunction:
    """Radial bump of radius 0.6 on the disk of radius 0.75."""
    d = make_domain(kind="ball", n=2, radius=DISK_RADIUS, h=h)
    return sample(d, lambda x: _bump(x, (0.0, 0.0), BUMP_RADIUS))


def two_bump(h: float = 1 / 128) -> GridFunction:
    """Two disjoint bumps of different height on the unit square."""
    d = make_domain(bounds=[(0, 1), (0, 1)], h=h)
    return sample(d, lambda x: _bump(x, (0.3, 0.3), 0.22) + 0.6 * _bump(x, (0.7, 0.68), 0.25))


def quadrant_bump(h: float = 1 / 128) -> GridFunction:
    """Bump supported in the lower-left quadrant of the unit square."""
    d = make_domain(bounds=[(0, 1), (0, 1)], h=h)
    return sample(d, lambda x: _bump(x, (0.25, 0.25), 0.25))


def cosine_square(h: float = 1 / 256) -> GridFunction:
    """cos(pi x1) on the unit square (changes sign)."""
    d = make_domain(bounds=[(0, 1), (0, 1)], h=h)
    return sample(d, lambda x: np.cos(np.pi * x[:, 0]))


def perturbation_square(h: float = 1 / 256) -> GridFunction:
    """Smooth perturbation used for the continuity bound."""
    d = make_domain(bounds=[(0, 1), (0, 1)], h=h)
    return sample(d, lambda x: np.sin(2 * np.pi * x[:, 1]) * x[:, 0] ** 2)


def linear_square(h: float = 1 / 128) -> GridFunction:
    """u = x1: vanishes on the left edge of the unit square."""
    d = make_domain(bounds=[(0, 1), (0, 1)], h=h)
    return sample(d, lambda x: x[:, 0])


def disk_abs_x2(h: float = 1 / 128) -> GridFunction:
    """|x2| on the unit disk: vanishes along a diameter."""
    d = make_domain(kind="ball", n=2, radius=1.0, h=h)
    return sample(d, lambda x: np.abs(x[:, 1]))


def ball_bump_3d(h: float = 1 / 48) -> GridFunction:
    """3-D bump vanishing on the lower half of the ball of radius 1/2."""
    d = make_domain(kind="ball", n=3, radius=0.5, h=h)
    return sample(d, lambda x: _bump(x, (0.0, 0.0, 0.25), 0.25))


FIXTURES = {
    "disk_bump": disk_bump,
    "two_bump": two_bump,
    "quadrant_bump": quadrant_bump,
    "cosine_square": cosine_square,
    "perturbation_square": perturbation_square,
    "linear_square": linear_square,
    "disk_abs_x2": disk_abs_x2,
    "ball_bump_3d": ball_bump_3d,
}
