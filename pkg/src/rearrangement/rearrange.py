"""Distribution function, decreasing rearrangement and Schwarz symmetrization.

On a grid every cell has the same volume ``w = h**n``, so the decreasing
rearrangement of ``u`` is the step function taking the cell values, sorted
in nonincreasing order, on consecutive intervals of length ``w``.  Sorting
keeps the multiset of values, which makes equimeasurability exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, RangeError
from .grid import BallDomain, GridFunction, atomic_write, make_domain

__all__ = [
    "RadialFunction",
    "StepProfile",
    "decreasing_rearrangement",
    "default_node_count",
    "distribution",
    "identity_deviations",
    "negative_part_witness",
    "median_level",
    "negative_part",
    "negative_part_reflected",
    "positive_part",
    "read_profile",
    "schwarz",
    "write_profile",
]

MAX_NODES = 512


@dataclass(frozen=True, eq=False)
class StepProfile:
    """Monotone-profile container on ``[0, |Omega|]``.

    ``kind="step"``: ``values[i]`` is taken on ``[breakpoints[i], breakpoints[i+1])``.
    ``kind="linear"``: ``values[i]`` is the value at ``breakpoints[i]`` and the
    profile is the linear interpolant between consecutive nodes.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    kind: str = "step"

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float, copy=True)
        vals = np.array(self.values, dtype=float, copy=True)
        if self.kind not in ("step", "linear"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        expected = bp.size - 1 if self.kind == "step" else bp.size
        if bp.size < 2 or vals.size != expected:
            raise ValueError(f"{vals.size} values for {bp.size} breakpoints ({self.kind})")
        if bp[0] != 0.0 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        if not np.all(np.isfinite(vals)):
            raise ValueError("profile values must be finite")
        bp.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @property
    def measure(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def __len__(self):
        return self.values.size

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "linear":
            return np.interp(s, self.breakpoints, self.values)
        k = np.searchsorted(self.breakpoints, s, side="right") - 1
        k = np.clip(k, 0, self.values.size - 1)
        return self.values[k]

    def is_nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.values) <= 0))

    def distribution(self, t: float) -> float:
        """Measure of ``{s : profile(s) > t}`` for a step profile."""
        if self.kind != "step":
            raise ValueError("distribution is defined on the step view")
        return math.fsum(self.lengths[self.values > t])

    def lp_norm(self, p: float) -> float:
        if self.kind != "step":
            raise ValueError("lp_norm is defined on the step view")
        return math.fsum(np.abs(self.values) ** p * self.lengths) ** (1.0 / p)

    def slopes(self) -> np.ndarray:
        """Derivative on each linear piece."""
        if self.kind != "linear":
            raise ValueError("slopes need the piecewise-linear view")
        return np.diff(self.values) / np.diff(self.breakpoints)

    def linear_view(self, nodes: int | None = None) -> "StepProfile":
        """Piecewise-linear view used for derivatives.

        The intervals are split into ``nodes`` contiguous groups of (almost)
        equal count; each group contributes one node at its mean position
        carrying the mean value.  The profile is extended as a constant to
        ``0`` and ``|Omega|``.  Averaging over groups suppresses the
        lattice noise of the individual gaps between sorted cell values.
        """
        if self.kind == "linear":
            return self
        k = self.values.size
        if nodes is None:
            nodes = default_node_count(k)
        nodes = max(1, min(int(nodes), k))
        bounds = np.linspace(0, k, nodes + 1).round().astype(int)
        mids = 0.5 * (self.breakpoints[:-1] + self.breakpoints[1:])
        lengths = self.lengths
        s_nodes = np.empty(nodes)
        v_nodes = np.empty(nodes)
        for j in range(nodes):
            a, b = bounds[j], bounds[j + 1]
            wl = lengths[a:b]
            s_nodes[j] = float(np.dot(mids[a:b], wl) / wl.sum())
            v_nodes[j] = float(np.dot(self.values[a:b], wl) / wl.sum())
        bp = np.concatenate([[0.0], s_nodes, [self.measure]])
        vals = np.concatenate([[v_nodes[0]], v_nodes, [v_nodes[-1]]])
        keep = np.concatenate([[True], np.diff(bp) > 0])
        return StepProfile(bp[keep], vals[keep], "linear")

    def fine_linear_view(self) -> "StepProfile":
        """Linear interpolation through every interval midpoint (no averaging)."""
        if self.kind == "linear":
            return self
        mids = 0.5 * (self.breakpoints[:-1] + self.breakpoints[1:])
        bp = np.concatenate([[0.0], mids, [self.measure]])
        vals = np.concatenate([[self.values[0]], self.values, [self.values[-1]]])
        return StepProfile(bp, vals, "linear")

    @classmethod
    def from_function(cls, f, nodes) -> "StepProfile":
        """Piecewise-linear interpolant of ``f`` on the given nodes (0 ... |Omega|)."""
        nodes = np.asarray(nodes, dtype=float)
        return cls(nodes, np.asarray(f(nodes), dtype=float), "linear")


def default_node_count(intervals: int) -> int:
    """Node count of the linear view: cube root of the cell count, capped at 512.

    Larger counts let the lattice noise of the sorted values leak into the
    slopes (a positive energy bias); smaller ones flatten the curvature of
    the profile (a negative bias, second order in the node spacing).
    """
    return max(1, min(MAX_NODES, round(max(intervals, 1) ** (1 / 3))))


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """Schwarz symmetrization: ``x -> profile(c_n |x|^n)`` on a centred ball."""

    ball: BallDomain
    profile: StepProfile

    def __call__(self, points):
        return self.profile(self.ball.volume_coordinate(points))

    def distribution(self, t: float) -> float:
        """Measure of {x : profile(c_n|x|^n) > t}; x -> c_n|x|^n preserves measure."""
        return self.profile.distribution(t)

    def to_grid(self, h: float) -> GridFunction:
        """Resample on the ball grid of spacing ``h`` (cell-center membership).

        The volume coordinate of every cell is rescaled by
        ``|ball| / |ball grid|`` so the grid image spans the whole profile;
        values come from the linear interpolant through interval midpoints.
        """
        domain = make_domain(kind="ball", n=self.ball.n, radius=self.ball.radius, h=h)
        s = self.ball.volume_coordinate(domain.cell_centers())
        s = np.clip(s * (self.ball.measure / domain.measure), 0.0, self.ball.measure)
        return GridFunction(domain, self.profile.fine_linear_view()(s))


def distribution(u: GridFunction, t: float) -> float:
    """mu(t) = h^n * #{cells : u > t}."""
    return int(np.count_nonzero(u.values > t)) * u.domain.cell_volume


def decreasing_rearrangement(u: GridFunction) -> StepProfile:
    """u*: cell values sorted nonincreasingly, ties broken by cell index."""
    order = np.argsort(-u.values, kind="stable")
    w = u.domain.cell_volume
    bp = np.arange(u.values.size + 1) * w
    return StepProfile(bp, u.values[order], "step")


def schwarz(u: GridFunction) -> RadialFunction:
    """Schwarz symmetrization of ``u`` on the ball with the same measure."""
    ball = BallDomain.with_measure(u.domain.measure, u.domain.n)
    return RadialFunction(ball, decreasing_rearrangement(u))


def positive_part(p: StepProfile) -> StepProfile:
    """s -> max(p(s), 0)."""
    return StepProfile(p.breakpoints, np.maximum(p.values, 0.0), p.kind)


def negative_part(p: StepProfile) -> StepProfile:
    """s -> max(-p(s), 0), without reflection (nondecreasing for a u* profile)."""
    return StepProfile(p.breakpoints, np.maximum(-p.values, 0.0), p.kind)


def negative_part_reflected(p: StepProfile) -> StepProfile:
    """s -> max(-p(|Omega| - s), 0): the rearrangement of the negative part."""
    measure = p.measure
    bp = measure - p.breakpoints[::-1]
    bp[0] = 0.0
    bp[-1] = measure
    if bp.size == p.breakpoints.size and np.allclose(bp, p.breakpoints, rtol=0, atol=1e-12 * measure):
        bp = p.breakpoints
    return StepProfile(bp, np.maximum(-p.values[::-1], 0.0), p.kind)


def median_level(p: StepProfile) -> float:
    """p(|Omega|/2); at a breakpoint the interval to the right is used."""
    return float(p(0.5 * p.measure))


def identity_deviations(rng, trials: int = 100, size: int = 16, n: int = 2) -> dict:
    """Largest deviations in the exact discrete identities over random grids.

    Keys: ``equimeasurable`` (distribution functions of u, u* and the
    symmetrization), ``lp`` (relative, p = 1, 2, 4), ``positive_part``
    ((v+)* = (v*)+), ``negative_part`` ((v-)*(s) = (v*)-(|Omega| - s)) and
    ``symmetrized_positive_part`` (symmetrization of (u-h)+ against the
    positive part of the symmetrization of u-h, at random points).
    """
    dev = dict.fromkeys(("equimeasurable", "lp", "positive_part", "negative_part",
                         "symmetrized_positive_part"), 0.0)
    for _ in range(trials):
        domain = make_domain(bounds=[(0.0, 1.0)] * n, h=1.0 / size)
        vals = rng.standard_normal(domain.cell_count)
        vals[rng.random(vals.size) < 0.2] = 0.5  # ties
        u = GridFunction(domain, vals)
        star = decreasing_rearrangement(u)
        sym = schwarz(u)
        ts = np.concatenate([np.unique(vals), rng.standard_normal(8)])
        for t in ts:
            mu = distribution(u, t)
            dev["equimeasurable"] = max(dev["equimeasurable"], abs(star.distribution(t) - mu),
                                        abs(sym.distribution(t) - mu))
        for p in (1, 2, 4):
            ref = u.lp_norm(p)
            dev["lp"] = max(dev["lp"], abs(star.lp_norm(p) - ref) / ref)
        level = float(rng.choice(vals))
        v = u - level
        vstar = decreasing_rearrangement(v)
        dev["positive_part"] = max(dev["positive_part"], float(np.max(np.abs(
            decreasing_rearrangement(v.positive_part()).values - positive_part(vstar).values))))
        dev["negative_part"] = max(dev["negative_part"], float(np.max(np.abs(
            decreasing_rearrangement(v.negative_part()).values - negative_part_reflected(vstar).values))))
        ball = BallDomain.with_measure(domain.measure, n)
        pts = (rng.random((256, n)) * 2 - 1) * ball.radius
        pts = pts[np.linalg.norm(pts, axis=1) <= ball.radius]
        a = schwarz(v.positive_part())(pts)
        b = np.maximum(schwarz(v)(pts), 0.0)
        dev["symmetrized_positive_part"] = max(dev["symmetrized_positive_part"], float(np.max(np.abs(a - b))))
    return dev


def negative_part_witness() -> tuple:
    """Two-cell example where the symmetrization of v- differs from (symmetrization of v)-.

    Returns ``(sym_of_negative, negative_of_sym)`` as value arrays of u*-profiles.
    """
    domain = make_domain(bounds=[(0.0, 2.0)], h=1.0)
    v = GridFunction(domain, np.array([2.0, -1.0]))
    return (decreasing_rearrangement(v.negative_part()).values,
            negative_part(decreasing_rearrangement(v)).values)


# --- RPROF v1 ----------------------------------------------------------------


def format_profile(p: StepProfile) -> str:
    lines = ["RPROF v1", f"|Omega|={p.measure!r}"]
    if p.kind == "linear":
        lines.append("kind=linear")
    for s, v in zip(p.breakpoints, p.values):
        lines.append(f"{float(s)!r} {float(v)!r}")
    return "\n".join(lines) + "\n"


def write_profile(p: StepProfile, path) -> None:
    atomic_write(path, format_profile(p))


def parse_profile(text: str) -> StepProfile:
    lines = [ln for ln in text.splitlines()]
    if not lines or lines[0].strip() != "RPROF v1":
        raise FormatError("missing 'RPROF v1' header", 1)
    if len(lines) < 2 or not lines[1].startswith("|Omega|="):
        raise FormatError("expected '|Omega|=<real>'", 2)
    try:
        measure = float(lines[1].split("=", 1)[1])
    except ValueError:
        raise FormatError("bad |Omega| value", 2) from None
    pos = 2
    kind = "step"
    if len(lines) > 2 and lines[2].startswith("kind="):
        kind = lines[2].split("=", 1)[1].strip()
        pos = 3
    s_vals, v_vals = [], []
    for k, ln in enumerate(lines[pos:], start=pos + 1):
        if not ln.strip():
            continue
        parts = ln.split()
        if len(parts) != 2:
            raise FormatError("expected 's value'", k)
        try:
            s, v = float(parts[0]), float(parts[1])
        except ValueError:
            raise FormatError("cannot parse numbers", k) from None
        if not (math.isfinite(s) and math.isfinite(v)):
            raise FormatError("non-finite entry", k)
        s_vals.append(s)
        v_vals.append(v)
    if not s_vals:
        raise FormatError("profile has no intervals", len(lines))
    bp = s_vals if kind == "linear" else s_vals + [measure]
    try:
        return StepProfile(np.array(bp), np.array(v_vals), kind)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def read_profile(path) -> StepProfile:
    with open(path, encoding="utf-8") as fh:
        return parse_profile(fh.read())


def check_range(p: StepProfile, s_lo: float, s_hi: float):
    if not (0.0 <= s_lo < s_hi <= p.measure * (1 + 1e-12)):
        raise RangeError(f"s-range [{s_lo}, {s_hi}] outside [0, {p.measure}]")
