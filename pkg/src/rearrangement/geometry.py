"""Gradients, energies, level-set perimeters and isoperimetric constants.

Perimeters are measured by counting cell faces.  A face between a member and
a non-member cell of the domain is part of the relative perimeter P_Omega;
a face of a member cell lying on the domain boundary is part of the
boundary trace.  Face counting measures the l1 (anisotropic) perimeter;
``calibration_factor`` converts it to an orientation-averaged isotropic
estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, FormatError, RangeError
from .grid import BallDomain, Domain, GridFunction, atomic_write, unit_ball_volume
from .rearrange import StepProfile, check_range

__all__ = [
    "GammaCertificate",
    "IsoperimetricConstants",
    "LevelSet",
    "boundary_trace_measure",
    "calibration_factor",
    "coarea_check",
    "condition_scan",
    "dirichlet_energy",
    "estimate_C",
    "estimate_Q",
    "gamma_for_case",
    "gradient",
    "gradient_magnitude",
    "isoperimetric_constant",
    "isoperimetric_floor_scan",
    "level_set",
    "level_set_scan",
    "mirrored_radial_energy",
    "perimeter",
    "radial_energy",
    "search_constants",
    "threshold_grid",
]

MAX_THRESHOLDS = 512


def isoperimetric_constant(n: int) -> float:
    """n * c_n^(1/n): perimeter of the ball of unit volume."""
    return n * unit_ball_volume(n) ** (1.0 / n)


# --- gradients and energies ----------------------------------------------------


def gradient(u: GridFunction) -> np.ndarray:
    """Finite-difference gradient, shape (N, n).

    Central differences where both neighbours along an axis belong to the
    domain, one-sided differences where only one does, zero where none does.
    """
    d = u.domain
    if any(m < 2 for m in d.shape):
        raise DomainError("axis too short: need at least 2 cells per axis")
    full = u.full(np.nan)
    h = d.h
    comps = []
    for k in range(d.n):
        width = [(0, 0)] * d.n
        width[k] = (1, 1)
        padded = np.pad(full, width, constant_values=np.nan)
        lo = np.take(padded, np.arange(0, padded.shape[k] - 2), axis=k)
        hi = np.take(padded, np.arange(2, padded.shape[k]), axis=k)
        has_lo = ~np.isnan(lo)
        has_hi = ~np.isnan(hi)
        with np.errstate(invalid="ignore"):
            g = np.where(
                has_lo & has_hi,
                (hi - lo) / (2 * h),
                np.where(has_hi, (hi - full) / h, np.where(has_lo, (full - lo) / h, 0.0)),
            )
        comps.append(g.ravel()[d.flat_index])
    return np.stack(comps, axis=1)


def gradient_magnitude(u: GridFunction) -> GridFunction:
    """|Du| per cell."""
    return u.with_values(np.linalg.norm(gradient(u), axis=1))


def dirichlet_energy(u: GridFunction) -> float:
    """Midpoint sum of |Du|^2 h^n (compensated summation)."""
    g = gradient(u)
    return math.fsum(np.einsum("ij,ij->i", g, g) * u.domain.cell_volume)


def _power_difference(b, a, q):
    """b**q - a**q for 0 <= a <= b, accurate when a and b are close."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = b**q - a**q
    pos = a > 0
    ratio = np.where(pos, (b - a) / np.where(pos, a, 1.0), 0.0)
    close = pos & (ratio < 0.5)
    out = np.where(close, a**q * np.expm1(q * np.log1p(ratio)), out)
    return out


def _piece_weights(p: StepProfile, s_lo, s_hi, n, mirrored):
    """Integral of the weight over each linear piece clipped to [s_lo, s_hi]."""
    q = 3.0 - 2.0 / n
    lo = np.clip(p.breakpoints[:-1], s_lo, s_hi)
    hi = np.clip(p.breakpoints[1:], s_lo, s_hi)
    if mirrored:
        m = p.measure
        return _power_difference(np.maximum(m - lo, 0.0), np.maximum(m - hi, 0.0), q) / q
    return _power_difference(hi, lo, q) / q


def _radial_energy(p, ball, s_lo, s_hi, mirrored):
    if s_lo is None:
        s_lo = 0.0
    if s_hi is None:
        s_hi = p.measure
    check_range(p, s_lo, s_hi)
    lin = p.linear_view()
    n = ball.n
    w = _piece_weights(lin, s_lo, s_hi, n, mirrored)
    terms = lin.slopes() ** 2 * w
    return isoperimetric_constant(n) ** 2 * math.fsum(terms)


def radial_energy(p: StepProfile, ball: BallDomain, s_lo=None, s_hi=None) -> float:
    """(n c_n^(1/n))^2 * integral of |Du*(s)|^2 s^(2-2/n) over [s_lo, s_hi].

    This is the Dirichlet energy of the Schwarz symmetrization restricted to
    the ball shell of volume coordinates [s_lo, s_hi].  The derivative is
    constant on each piece of the linear view and the weight is integrated
    in closed form.
    """
    return _radial_energy(p, ball, s_lo, s_hi, mirrored=False)


def mirrored_radial_energy(p: StepProfile, ball: BallDomain, s_lo=None, s_hi=None) -> float:
    """As :func:`radial_energy` with weight (|Omega| - s)^(2-2/n).

    Energy of the radially increasing arrangement u(x) = u*(|Omega| - c_n |x|^n).
    """
    return _radial_energy(p, ball, s_lo, s_hi, mirrored=True)


# --- level sets and perimeters ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class LevelSet:
    """Super-level set {u > t} as a boolean per interior cell."""

    domain: Domain
    t: float
    member: np.ndarray

    @property
    def measure(self) -> float:
        return int(np.count_nonzero(self.member)) * self.domain.cell_volume


def level_set(u: GridFunction, t: float) -> LevelSet:
    return LevelSet(u.domain, float(t), u.values > t)


@lru_cache(maxsize=None)
def calibration_factor(n: int, samples: int = 200_000, seed: int = 0) -> float:
    """Isotropic/l1 perimeter ratio, averaged over random orientations.

    A hyperplane with unit normal nu cuts a voxel grid in faces of total area
    |nu|_1 per unit of hyperplane area; the factor is 1 / E|nu|_1 with nu
    uniform on the sphere (Monte Carlo, fixed seed).
    """
    if n == 1:
        return 1.0
    rng = np.random.default_rng(seed)
    nu = rng.standard_normal((samples, n))
    nu /= np.linalg.norm(nu, axis=1, keepdims=True)
    return 1.0 / float(np.mean(np.abs(nu).sum(axis=1)))


def perimeter(ls: LevelSet, calibrated: bool = False) -> float:
    """Relative perimeter P_Omega of a level set by face counting.

    Only faces between two domain cells count.  With ``calibrated=True`` the
    l1 face area is multiplied by :func:`calibration_factor`.
    """
    adj = ls.domain.adjacency
    m = ls.member
    faces = int(np.count_nonzero(m[adj.pairs[:, 0]] != m[adj.pairs[:, 1]]))
    raw = faces * ls.domain.h ** (ls.domain.n - 1)
    return raw * calibration_factor(ls.domain.n) if calibrated else raw


def boundary_trace_measure(ls: LevelSet) -> float:
    """h^(n-1) times the number of member-cell faces lying on the domain boundary."""
    adj = ls.domain.adjacency
    faces = int(np.count_nonzero(ls.member[adj.boundary_cells]))
    return faces * ls.domain.h ** (ls.domain.n - 1)


def threshold_grid(values, cap: int = MAX_THRESHOLDS) -> np.ndarray:
    """Distinct values, thinned to at most ``cap`` by quantile selection."""
    distinct = np.unique(values)
    if distinct.size > cap:
        pick = np.unique(np.linspace(0, distinct.size - 1, cap).round().astype(int))
        distinct = distinct[pick]
    return distinct


@dataclass(frozen=True)
class LevelScan:
    """Measures of the super-level sets {g > t} for a vector of thresholds."""

    t: np.ndarray
    volume: np.ndarray
    perimeter_raw: np.ndarray
    trace: np.ndarray
    n: int

    @property
    def perimeter_calibrated(self) -> np.ndarray:
        return self.perimeter_raw * calibration_factor(self.n)


def level_set_scan(domain: Domain, g, thresholds) -> LevelScan:
    """Volume, raw relative perimeter and boundary trace of {g > t} for every t.

    All thresholds are handled at once: an interior face is an interface for
    ``t`` in ``[min, max)`` of its two cell values, a boundary face belongs
    to the set for ``t < value``.
    """
    g = np.asarray(getattr(g, "values", g), dtype=float)
    t = np.asarray(thresholds, dtype=float)
    adj = domain.adjacency
    area = domain.h ** (domain.n - 1)
    a = g[adj.pairs[:, 0]]
    b = g[adj.pairs[:, 1]]
    lo = np.sort(np.minimum(a, b))
    hi = np.sort(np.maximum(a, b))
    crossing = np.searchsorted(lo, t, side="right") - np.searchsorted(hi, t, side="right")
    vals = np.sort(g)
    above = vals.size - np.searchsorted(vals, t, side="right")
    bvals = np.sort(g[adj.boundary_cells])
    trace = bvals.size - np.searchsorted(bvals, t, side="right")
    return LevelScan(
        t,
        above * domain.cell_volume,
        crossing * area,
        trace * area,
        domain.n,
    )


def coarea_check(u: GridFunction, f: GridFunction) -> tuple:
    """Both sides of the coarea identity for the weight ``f >= 0``.

    Left: midpoint sum of f |Du|.  Right: integral over t >= 0 of the
    f-weighted measure of the level interfaces {u = t}.  Each interior face
    lies on the interface for t between its two cell values, so the
    t-integral is evaluated exactly face by face; a face contributes its area
    times f (mean of the two cells) times |nu|_2/|nu|_1, nu the local
    gradient direction, which removes the anisotropy of face counting.
    """
    if not u.domain.same_grid(f.domain):
        raise DomainError("u and f live on different domains")
    grad = gradient(u)
    lhs = math.fsum(f.values * np.linalg.norm(grad, axis=1) * u.domain.cell_volume)
    adj = u.domain.adjacency
    i, j = adj.pairs[:, 0], adj.pairs[:, 1]
    lo = np.maximum(np.minimum(u.values[i], u.values[j]), 0.0)
    hi = np.maximum(np.maximum(u.values[i], u.values[j]), 0.0)
    g = 0.5 * (grad[i] + grad[j])
    l1 = np.abs(g).sum(axis=1)
    l2 = np.linalg.norm(g, axis=1)
    iso = np.where(l1 > 0, l2 / np.where(l1 > 0, l1, 1.0), 1.0)
    weight = 0.5 * (f.values[i] + f.values[j])
    area = u.domain.h ** (u.domain.n - 1)
    rhs = math.fsum((hi - lo) * weight * iso * area)
    return lhs, rhs


@dataclass(frozen=True)
class FloorScan:
    """Perimeter of symmetrized level sets against n c_n^(1/n) mu(t)^(1-1/n)."""

    t: np.ndarray
    ratio_raw: np.ndarray
    ratio_calibrated: np.ndarray
    skipped: int

    @property
    def worst_deviation(self) -> float:
        if self.ratio_calibrated.size == 0:
            return math.nan
        return float(np.max(np.abs(self.ratio_calibrated - 1.0)))


def isoperimetric_floor_scan(g: GridFunction, min_fraction: float = 0.05) -> FloorScan:
    """Level-set perimeters of a radial grid function (e.g. a resampled symmetrization).

    Levels whose set touches the boundary (positive trace) or whose measure
    is below ``min_fraction * |Omega|`` are skipped: the first have a
    relative perimeter that excludes the boundary part, the second are
    only a few cells across and dominated by digitization.
    """
    t = threshold_grid(g.values)
    scan = level_set_scan(g.domain, g, t)
    keep = (scan.trace == 0) & (scan.volume >= min_fraction * g.domain.measure) & (scan.volume > 0)
    floor = isoperimetric_constant(g.n) * scan.volume[keep] ** (1 - 1 / g.n)
    raw = scan.perimeter_raw[keep] / floor
    return FloorScan(scan.t[keep], raw, raw * calibration_factor(g.n), int(np.count_nonzero(~keep)))


# --- isoperimetric constants ---------------------------------------------------


@dataclass(frozen=True)
class IsoperimetricConstants:
    """Searched relative isoperimetric constant Q and boundary-trace constant C."""

    Q: float
    C: float
    method: str = "searched"
    family: str = ""


def _directions(n: int, count: int | None = None) -> np.ndarray:
    if n == 1:
        return np.ones((1, 1))
    if n == 2:
        m = count or 16
        ang = np.arange(m) * np.pi / m
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    base = [np.eye(n)]
    if n == 3:
        diag = [
            [1, 1, 0], [1, -1, 0], [1, 0, 1], [1, 0, -1], [0, 1, 1], [0, 1, -1],
            [1, 1, 1], [1, 1, -1], [1, -1, 1], [-1, 1, 1],
        ]
        base.append(np.array(diag, dtype=float))
    rng = np.random.default_rng(12345)
    extra = rng.standard_normal((count or 12, n))
    base.append(extra)
    dirs = np.concatenate(base)
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _cut_thresholds(g: np.ndarray, offsets: int) -> np.ndarray:
    t = threshold_grid(g, offsets)
    return np.unique(np.concatenate([t[:-1], [np.median(g)]]))


def _search(domain: Domain, directions, offsets, probes):
    n = domain.n
    centers = domain.cell_centers()
    total = domain.measure
    best_q = (0.0, None)
    best_c = (0.0, None)
    families = []
    if directions is None:
        directions = _directions(n)
    for k, nu in enumerate(np.atleast_2d(directions)):
        families.append(("cut", k, centers @ nu))
    for k, probe in enumerate(probes):
        families.append(("probe", k, np.asarray(getattr(probe, "values", probe), dtype=float)))
    for tag, k, g in families:
        t = _cut_thresholds(g, offsets)
        scan = level_set_scan(domain, g, t)
        vol = scan.volume
        per = scan.perimeter_raw
        ok = (per > 0) & (vol > 0) & (vol < total)
        if not ok.any():
            continue
        small = np.minimum(vol, total - vol)
        q_ratio = np.where(ok, small ** (1 - 1 / n) / np.where(ok, per, 1.0), 0.0)
        j = int(np.argmax(q_ratio))
        if q_ratio[j] > best_q[0]:
            best_q = (float(q_ratio[j]), (tag, k, float(t[j])))
        # boundary trace of the complement: boundary faces minus those of the set
        all_trace = domain.adjacency.boundary_cells.size * domain.h ** (n - 1)
        trace_in = scan.trace
        trace_out = all_trace - trace_in
        c_in = np.where(ok & (vol <= total / 2), trace_in / np.where(ok, per, 1.0), 0.0)
        c_out = np.where(ok & (total - vol <= total / 2), trace_out / np.where(ok, per, 1.0), 0.0)
        c_ratio = np.maximum(c_in, c_out)
        j = int(np.argmax(c_ratio))
        if c_ratio[j] > best_c[0]:
            best_c = (float(c_ratio[j]), (tag, k, float(t[j])))
    if best_q[1] is None:
        raise RangeError("search family empty: no admissible cut")
    return best_q, best_c, len(families)


def search_constants(domain: Domain, directions=None, offsets: int = 64, probes=()) -> IsoperimetricConstants:
    """Searched lower bounds for the best Q and C of ``domain``.

    The family consists of half-space cuts {x . nu > q} for a fixed set of
    directions nu and up to ``offsets`` thresholds q each (always including
    the median cut), plus the super-level sets of the probe functions.
    Perimeters are raw face counts.
    """
    (q, q_arg), (c, c_arg), count = _search(domain, directions, offsets, probes)
    family = f"{count} families x <= {offsets + 1} thresholds; Q at {q_arg}; C at {c_arg}"
    return IsoperimetricConstants(q, c, "searched", family)


def estimate_Q(domain: Domain, directions=None, offsets: int = 64, probes=()) -> float:
    """Largest min(|E|, |Omega \\ E|)^(1-1/n) / P_Omega(E) over the search family."""
    return search_constants(domain, directions, offsets, probes).Q


def estimate_C(domain: Domain, directions=None, offsets: int = 64, probes=()) -> float:
    """Largest H_{n-1}(dE cap dOmega) / P_Omega(E) over sets with |E| <= |Omega|/2."""
    return search_constants(domain, directions, offsets, probes).C


# --- gamma certificates ------------------------------------------------------------

_CASES = ("i", "ii", "iii", "iv", "v")


@dataclass(frozen=True)
class GammaCertificate:
    """Constant gamma in P_Omega{u > t} >= gamma mu(t)^(1-1/n), with its inputs."""

    gamma: float
    case: str
    inputs: dict = field(default_factory=dict)

    def recompute(self) -> float:
        return gamma_for_case(self.case, **self.inputs).gamma


def gamma_for_case(case: str, n: int = 2, Q=None, C=None, eps=None, measure=None) -> GammaCertificate:
    """Closed-form gamma for the sufficient conditions (i)-(v).

    (i) u = 0 on the boundary: n c_n^(1/n).
    (ii) |supp u| <= |Omega|/2: 1/Q.
    (iii) zero set of measure eps < |Omega|/2: (1/Q) (eps/(|Omega|-eps))^(1-1/n).
    (iv) zero trace of boundary measure eps: min(1/Q, eps/(C |Omega|^(1-1/n))).
    (v) zero set with projection of measure eps: min(1/Q, eps/((C+1) |Omega|^(1-1/n))).
    """
    case = str(case).lower()
    if case not in _CASES:
        raise ValueError(f"unknown case {case!r}; expected one of {_CASES}")

    def need(name, value):
        if value is None:
            raise ValueError(f"case ({case}) needs {name}")
        if not value > 0:
            raise RangeError(f"case ({case}) needs positive {name}, got {value}")
        return float(value)

    e = 1.0 - 1.0 / n
    if case == "i":
        return GammaCertificate(isoperimetric_constant(n), case, {"n": n})
    q = need("Q", Q)
    if case == "ii":
        return GammaCertificate(1.0 / q, case, {"n": n, "Q": q})
    eps_ = need("eps", eps)
    m = need("measure", measure)
    if case == "iii":
        if not eps_ < m / 2:
            raise RangeError(f"case (iii) needs 0 < eps < |Omega|/2, got eps={eps_}")
        alpha = eps_ / (m - eps_)
        return GammaCertificate(alpha**e / q, case, {"n": n, "Q": q, "eps": eps_, "measure": m})
    c = need("C", C)
    denom = c if case == "iv" else c + 1.0
    gamma = min(1.0 / q, eps_ / (denom * m**e))
    return GammaCertificate(gamma, case, {"n": n, "Q": q, "C": c, "eps": eps_, "measure": m})


@dataclass(frozen=True)
class ConditionScan:
    passes: bool
    worst_ratio: float
    worst_t: float
    thresholds: int


def condition_scan(u: GridFunction, gamma: float, slack: float = 0.05, calibrated: bool = False,
                   with_trace: bool = False) -> ConditionScan:
    """Check P_Omega{u > t} >= (1 - slack) gamma mu(t)^(1-1/n) over t >= 0.

    Thresholds are 0 and the distinct values of u (capped at 512); only
    levels with mu(t) > 0 are tested.  ``with_trace`` adds the boundary
    trace, i.e. uses the perimeter in R^n of the zero extension (for u
    vanishing on the boundary).
    """
    t = threshold_grid(u.values[u.values >= 0])
    t = np.unique(np.concatenate([[0.0], t]))
    scan = level_set_scan(u.domain, u, t)
    per = scan.perimeter_raw + scan.trace if with_trace else scan.perimeter_raw
    if calibrated:
        per = per * calibration_factor(u.n)
    live = scan.volume > 0
    if not live.any():
        return ConditionScan(True, math.inf, math.nan, 0)
    need = gamma * scan.volume[live] ** (1 - 1 / u.n)
    ratio = per[live] / need
    j = int(np.argmin(ratio))
    return ConditionScan(bool(ratio[j] >= 1 - slack), float(ratio[j]), float(scan.t[live][j]), int(live.sum()))


# --- RCONST v1 -------------------------------------------------------------------------


def format_constants(consts: IsoperimetricConstants | None, cert: GammaCertificate | None) -> str:
    lines = ["RCONST v1"]
    if consts is not None:
        lines.append(f"Q={consts.Q!r} method={consts.method}")
        lines.append(f"C={consts.C!r} method={consts.method}")
    if cert is not None:
        extra = " ".join(f"{k}={v!r}" for k, v in sorted(cert.inputs.items()))
        lines.append(f"gamma={cert.gamma!r} case={cert.case} {extra}".rstrip())
    return "\n".join(lines) + "\n"


def write_constants(path, consts=None, cert=None) -> None:
    atomic_write(path, format_constants(consts, cert))


def parse_constants(text: str):
    """Return ``(IsoperimetricConstants or None, GammaCertificate or None)``."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != "RCONST v1":
        raise FormatError("missing 'RCONST v1' header", 1)
    vals = {}
    cert = None
    for k, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        fields = {}
        for tok in ln.split():
            if "=" not in tok:
                raise FormatError(f"expected key=value, got {tok!r}", k)
            key, v = tok.split("=", 1)
            fields[key] = v
        try:
            if "Q" in fields and "gamma" not in fields:
                vals["Q"] = (float(fields["Q"]), fields.get("method", "searched"))
            elif "C" in fields and "gamma" not in fields:
                vals["C"] = (float(fields["C"]), fields.get("method", "searched"))
            elif "gamma" in fields:
                inputs = {}
                for key, v in fields.items():
                    if key in ("gamma", "case"):
                        continue
                    inputs[key] = int(v) if key == "n" else float(v)
                cert = GammaCertificate(float(fields["gamma"]), fields["case"], inputs)
            else:
                raise FormatError("unknown record", k)
        except (ValueError, KeyError):
            raise FormatError("cannot parse record", k) from None
    consts = None
    if vals:
        q = vals.get("Q", (math.nan, "missing"))
        c = vals.get("C", (math.nan, "missing"))
        consts = IsoperimetricConstants(q[0], c[0], q[1] if "Q" in vals else c[1])
    return consts, cert


def read_constants(path):
    with open(path, encoding="utf-8") as fh:
        return parse_constants(fh.read())
