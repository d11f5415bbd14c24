"""Domains on uniform grids, sampled functions and the RGRID text format.

A domain is a set of closed cubic cells of side ``h``; a function value lives
at the cell center and every integral is a midpoint sum over cells.
"""

from __future__ import annotations

import math
import os
import tempfile
from functools import cached_property
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import expr
from .errors import DomainError, FormatError, SingularSampleError

__all__ = [
    "BallDomain",
    "Domain",
    "GridFunction",
    "make_domain",
    "read_grid",
    "sample",
    "unit_ball_volume",
    "write_grid",
]

_KINDS = ("ball", "box", "mask")


def unit_ball_volume(n: int) -> float:
    """Volume c_n of the unit ball in R^n."""
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True, eq=False)
class Domain:
    """A union of grid cells inside a bounding box.

    Attributes
    ----------
    n : int
        Space dimension.
    h : float
        Cell side (identical on every axis).
    origin : tuple of float
        Lower corner of the bounding box.
    mask : ndarray of bool
        Membership per cell, shape = cells per axis (C order).
    kind : str
        ``"ball"``, ``"box"`` or ``"mask"``.
    """

    n: int
    h: float
    origin: tuple
    mask: np.ndarray
    kind: str = "mask"
    center: tuple | None = None
    radius: float | None = None
    _index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool, copy=True)
        if mask.ndim != self.n:
            raise DomainError(f"mask has {mask.ndim} axes, expected {self.n}")
        if self.h <= 0 or not math.isfinite(self.h):
            raise DomainError(f"spacing must be positive, got {self.h}")
        if not mask.any():
            raise DomainError("empty domain")
        if self.kind not in _KINDS:
            raise DomainError(f"unknown domain kind {self.kind!r}")
        mask.flags.writeable = False
        index = np.flatnonzero(mask.ravel())
        index.flags.writeable = False
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "_index", index)

    @property
    def shape(self) -> tuple:
        return self.mask.shape

    @property
    def cell_count(self) -> int:
        return int(self._index.size)

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def measure(self) -> float:
        """|Omega| = (number of cells) * h**n."""
        return self.cell_count * self.cell_volume

    @property
    def bounds(self) -> list:
        return [(o, o + m * self.h) for o, m in zip(self.origin, self.shape)]

    @property
    def flat_index(self) -> np.ndarray:
        """Row-major positions of the interior cells in the bounding array."""
        return self._index

    def cell_centers(self) -> np.ndarray:
        """Centers of the interior cells, shape (N, n), row-major order."""
        idx = np.unravel_index(self._index, self.shape)
        return np.stack(
            [o + (i + 0.5) * self.h for o, i in zip(self.origin, idx)], axis=1
        )

    @cached_property
    def adjacency(self) -> "Adjacency":
        """Cell faces of the domain, split into interior pairs and boundary faces."""
        pos = np.full(self.shape, -1, dtype=np.int64)
        pos.ravel()[self._index] = np.arange(self.cell_count)
        pairs, axes, boundary, boundary_axes, sides = [], [], [], [], []
        for k in range(self.n):
            width = [(0, 0)] * self.n
            width[k] = (1, 1)
            padded = np.pad(pos, width, constant_values=-1)
            a = np.take(padded, np.arange(padded.shape[k] - 1), axis=k).ravel()
            b = np.take(padded, np.arange(1, padded.shape[k]), axis=k).ravel()
            both = (a >= 0) & (b >= 0)
            pairs.append(np.stack([a[both], b[both]], axis=1))
            axes.append(np.full(int(both.sum()), k, dtype=np.int8))
            upper = a[(a >= 0) & (b < 0)]
            lower = b[(b >= 0) & (a < 0)]
            boundary.append(np.concatenate([upper, lower]))
            boundary_axes.append(np.full(upper.size + lower.size, k, dtype=np.int8))
            sides.append(np.concatenate([np.ones(upper.size, np.int8), -np.ones(lower.size, np.int8)]))
        return Adjacency(
            np.concatenate(pairs),
            np.concatenate(axes),
            np.concatenate(boundary),
            np.concatenate(boundary_axes),
            np.concatenate(sides),
        )

    def same_grid(self, other: "Domain") -> bool:
        return (
            self.n == other.n
            and self.h == other.h
            and self.origin == other.origin
            and self.shape == other.shape
            and bool(np.array_equal(self.mask, other.mask))
        )

    def submask(self, keep: np.ndarray) -> "Domain":
        """Domain made of the interior cells selected by the boolean ``keep``."""
        keep = np.asarray(keep, dtype=bool)
        full = np.zeros(self.mask.size, dtype=bool)
        full[self._index[keep]] = True
        return Domain(self.n, self.h, self.origin, full.reshape(self.shape), "mask")


@dataclass(frozen=True)
class Adjacency:
    """Face lists of a domain, in terms of interior cell indices.

    ``pairs[j]`` are the two cells sharing interior face ``j`` (normal along
    ``pair_axes[j]``); ``boundary_cells[j]`` is the cell owning boundary face
    ``j``, a face of the domain that does not touch another domain cell,
    located on the ``boundary_sides[j]`` (+1 or -1) side of that cell.
    """

    pairs: np.ndarray
    pair_axes: np.ndarray
    boundary_cells: np.ndarray
    boundary_axes: np.ndarray
    boundary_sides: np.ndarray

    def boundary_face_centers(self, domain: "Domain") -> np.ndarray:
        centers = domain.cell_centers()[self.boundary_cells]
        rows = np.arange(centers.shape[0])
        centers[rows, self.boundary_axes] += 0.5 * domain.h * self.boundary_sides
        return centers


@dataclass(frozen=True)
class BallDomain:
    """Ball centred at the origin, described by its radius."""

    n: int
    radius: float

    @classmethod
    def with_measure(cls, measure: float, n: int) -> "BallDomain":
        """Ball of R^n with the given volume."""
        if measure <= 0:
            raise DomainError("ball measure must be positive")
        return cls(n, (measure / unit_ball_volume(n)) ** (1.0 / n))

    @property
    def c_n(self) -> float:
        return unit_ball_volume(self.n)

    @property
    def measure(self) -> float:
        return self.c_n * self.radius**self.n

    def shrunk(self, eps: float) -> "BallDomain":
        """Concentric ball of measure |ball| - eps."""
        return BallDomain.with_measure(self.measure - eps, self.n)

    def volume_coordinate(self, points: np.ndarray) -> np.ndarray:
        """s = c_n |x|^n for points of shape (N, n)."""
        r = np.linalg.norm(np.atleast_2d(points), axis=1)
        return self.c_n * r**self.n

    def to_domain(self, h: float) -> Domain:
        return make_domain(kind="ball", n=self.n, radius=self.radius, h=h)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of a function at the interior cell centers of a domain."""

    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True).ravel()
        if values.size != self.domain.cell_count:
            raise ValueError(
                f"{values.size} values for {self.domain.cell_count} interior cells"
            )
        if not np.all(np.isfinite(values)):
            raise SingularSampleError("singular sample: non-finite value")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def h(self) -> float:
        return self.domain.h

    @property
    def n(self) -> int:
        return self.domain.n

    def full(self, fill: float = np.nan) -> np.ndarray:
        """Values laid out on the bounding array, ``fill`` outside the mask."""
        out = np.full(self.domain.mask.size, fill, dtype=float)
        out[self.domain.flat_index] = self.values
        return out.reshape(self.domain.shape)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.domain, values)

    def __add__(self, other):
        if isinstance(other, GridFunction):
            _check_same(self, other)
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            _check_same(self, other)
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def positive_part(self) -> "GridFunction":
        return self.with_values(np.maximum(self.values, 0.0))

    def negative_part(self) -> "GridFunction":
        return self.with_values(np.maximum(-self.values, 0.0))

    def lp_norm(self, p: float) -> float:
        w = self.domain.cell_volume
        if math.isinf(p):
            return float(np.max(np.abs(self.values)))
        return math.fsum(np.abs(self.values) ** p * w) ** (1.0 / p)


def _check_same(u: GridFunction, v: GridFunction):
    if not u.domain.same_grid(v.domain):
        raise DomainError("grid functions live on different domains")


def make_domain(spec: Mapping | None = None, **kwargs) -> Domain:
    """Build a domain from a descriptor.

    The descriptor is a mapping (or keyword arguments) with ``kind`` and:

    * ``box``: ``bounds`` (per-axis ``(lo, hi)``), ``h``;
    * ``ball``: ``n``, ``radius`` (default 1), optional ``center``, ``h``;
    * ``mask``: ``mask`` (boolean array), ``h``, optional ``origin``.

    A per-axis ``spacing`` sequence is accepted only if all entries agree.
    """
    desc = dict(spec or {})
    desc.update(kwargs)
    kind = desc.get("kind", "box")
    h = _resolve_spacing(desc)

    if kind == "box":
        bounds = [tuple(map(float, b)) for b in desc["bounds"]]
        if not bounds:
            raise DomainError("box needs at least one axis")
        counts = []
        for lo, hi in bounds:
            if not hi > lo:
                raise DomainError(f"degenerate box interval ({lo}, {hi})")
            m = round((hi - lo) / h)
            if m < 1 or abs(m * h - (hi - lo)) > 1e-9 * max(1.0, hi - lo):
                raise DomainError(f"box extent {hi - lo} is not a multiple of h={h}")
            counts.append(m)
        mask = np.ones(counts, dtype=bool)
        return Domain(len(bounds), h, [lo for lo, _ in bounds], mask, "box")

    if kind == "ball":
        n = int(desc.get("n", 2))
        radius = float(desc.get("radius", 1.0))
        if radius <= 0:
            raise DomainError("ball radius must be positive")
        center = np.zeros(n) if desc.get("center") is None else np.asarray(desc["center"], float)
        m = max(1, math.ceil(2 * radius / h - 1e-9))
        origin = center - m * h / 2
        axes = [origin[k] + (np.arange(m) + 0.5) * h for k in range(n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        dist2 = sum((g - c) ** 2 for g, c in zip(mesh, center))
        mask = dist2 <= radius**2
        return Domain(n, h, origin, mask, "ball", tuple(center), radius)

    if kind == "mask":
        mask = np.asarray(desc["mask"], dtype=bool)
        origin = desc.get("origin")
        if origin is None:
            origin = [0.0] * mask.ndim
        return Domain(mask.ndim, h, origin, mask, "mask")

    raise DomainError(f"unknown domain kind {kind!r}")


def _resolve_spacing(desc) -> float:
    key = "spacing" if "spacing" in desc else "h"
    if key not in desc:
        raise DomainError("domain descriptor needs a spacing h")
    spacing = desc[key]
    if isinstance(spacing, Sequence) and not isinstance(spacing, str):
        values = {float(s) for s in spacing}
        if len(values) != 1:
            raise DomainError("anisotropic grid unsupported")
        return values.pop()
    return float(spacing)


def sample(domain: Domain, f: Callable | str | float) -> GridFunction:
    """Evaluate ``f`` at every interior cell center.

    ``f`` is a callable receiving the centers as an array of shape (N, n),
    a constant, or an expression string in the variables ``x1 .. xn``,
    ``r`` (Euclidean norm), ``n`` and ``measure`` (|Omega|).
    """
    points = domain.cell_centers()
    if isinstance(f, str):
        names = {f"x{k + 1}": points[:, k] for k in range(domain.n)}
        names.update(r=np.linalg.norm(points, axis=1), n=domain.n, measure=domain.measure)
        values = expr.evaluate(f, names)
    elif callable(f):
        with np.errstate(all="ignore"):
            values = f(points)
    else:
        values = f
    values = np.broadcast_to(np.asarray(values, dtype=float), (domain.cell_count,))
    if not np.all(np.isfinite(values)):
        raise SingularSampleError("singular sample: f is not finite at some cell center")
    return GridFunction(domain, values)


# --- RGRID v1 ----------------------------------------------------------------


def format_grid(g: GridFunction) -> str:
    d = g.domain
    lines = [
        "RGRID v1",
        f"n={d.n} h={d.h!r} origin=" + ",".join(repr(o) for o in d.origin),
        " ".join(str(m) for m in d.shape),
    ]
    if d.mask.all():
        lines.append("mask=full")
    else:
        lines.append("mask=inline")
        lines.extend("1" if b else "0" for b in d.mask.ravel())
    lines.extend(repr(float(v)) for v in g.values)
    return "\n".join(lines) + "\n"


def write_grid(g: GridFunction, path) -> None:
    """Write ``g`` in RGRID v1 format (atomically)."""
    atomic_write(path, format_grid(g))


def parse_grid(text: str) -> GridFunction:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "RGRID v1":
        raise FormatError("missing 'RGRID v1' header", 1)
    if len(lines) < 4:
        raise FormatError("truncated header", len(lines))
    fields = _parse_keyvals(lines[1], 2)
    try:
        n = int(fields["n"])
        h = float(fields["h"])
    except (KeyError, ValueError):
        raise FormatError("expected 'n=<dim> h=<spacing>'", 2) from None
    try:
        counts = [int(tok) for tok in lines[2].split()]
    except ValueError:
        raise FormatError("axis cell counts must be integers", 3) from None
    if len(counts) != n:
        raise FormatError(f"header n={n} but {len(counts)} axis extents", 3)
    if any(m < 1 for m in counts):
        raise FormatError("axis cell counts must be positive", 3)
    if "origin" in fields:
        try:
            origin = [float(o) for o in fields["origin"].split(",")]
        except ValueError:
            raise FormatError("bad origin", 2) from None
        if len(origin) != n:
            raise FormatError(f"origin has {len(origin)} entries, expected {n}", 2)
    else:
        origin = [0.0] * n

    mode = lines[3].strip()
    pos = 4
    total = math.prod(counts)
    if mode == "mask=full":
        mask = np.ones(counts, dtype=bool)
        kind = "box"
    elif mode == "mask=inline":
        if len(lines) < pos + total:
            raise FormatError("inline mask shorter than cell count", len(lines))
        bits = []
        for k in range(total):
            tok = lines[pos + k].strip()
            if tok not in ("0", "1"):
                raise FormatError(f"mask entry must be 0 or 1, got {tok!r}", pos + k + 1)
            bits.append(tok == "1")
        mask = np.array(bits, dtype=bool).reshape(counts)
        pos += total
        kind = "mask"
    else:
        raise FormatError("expected 'mask=full' or 'mask=inline'", 4)

    payload = [ln for ln in lines[pos:]]
    while payload and not payload[-1].strip():
        payload.pop()
    expected = int(mask.sum())
    if len(payload) != expected:
        raise FormatError(
            f"value count {len(payload)} does not match {expected} interior cells",
            pos + min(len(payload), expected) + 1,
        )
    values = np.empty(expected)
    for k, tok in enumerate(payload):
        try:
            v = float(tok)
        except ValueError:
            raise FormatError(f"cannot parse value {tok.strip()!r}", pos + k + 1) from None
        if not math.isfinite(v):
            raise SingularSampleError(f"line {pos + k + 1}: singular sample {tok.strip()!r}")
        values[k] = v
    try:
        domain = Domain(n, h, origin, mask, kind)
    except DomainError as exc:
        raise FormatError(str(exc)) from None
    return GridFunction(domain, values)


def read_grid(path) -> GridFunction:
    """Read an RGRID v1 file."""
    with open(path, encoding="utf-8") as fh:
        return parse_grid(fh.read())


def _parse_keyvals(line: str, lineno: int) -> dict:
    out = {}
    for tok in line.split():
        if "=" not in tok:
            raise FormatError(f"expected key=value, got {tok!r}", lineno)
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename (parents are created)."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
