"""Verifiers for the gradient estimates of the Schwarz symmetrization.

Every verifier returns an :class:`InequalityReport`.  A hypothesis that
cannot be confirmed on the grid never raises: the report is marked
``vacuous`` and carries the reason.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FormatError, RangeError
from .geometry import (
    GammaCertificate,
    condition_scan,
    dirichlet_energy,
    gradient_magnitude,
    isoperimetric_constant,
    mirrored_radial_energy,
    radial_energy,
)
from .grid import BallDomain, GridFunction, atomic_write, unit_ball_volume
from .rearrange import StepProfile, decreasing_rearrangement, median_level

__all__ = [
    "CounterexampleTrace",
    "InequalityReport",
    "local_constant",
    "make_report",
    "run_counterexample",
    "sobolev_constant",
    "thm_1_2_constant",
    "verify_cor_1_6",
    "verify_cor_2_2",
    "verify_lipschitz_bound",
    "verify_thm_1_1",
    "verify_thm_1_2",
    "verify_thm_1_3",
    "verify_thm_1_4",
    "vanishes_on_boundary",
    "verify_thm_2_1",
]

HOLDS, VIOLATED, VACUOUS = "holds", "violated", "vacuous"


@dataclass(frozen=True)
class InequalityReport:
    """One checked estimate ``lhs <= rhs``."""

    name: str
    lhs: float
    rhs: float
    constant: float
    margin: float
    verdict: str
    metadata: dict = field(default_factory=dict)
    reason: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def to_text(self) -> str:
        lines = [
            "RREPORT v1",
            f"name={self.name}",
            f"lhs={self.lhs!r}",
            f"rhs={self.rhs!r}",
            f"constant={self.constant!r}",
            f"margin={self.margin!r}",
            f"verdict={self.verdict}",
        ]
        if self.reason:
            lines.append(f"reason={self.reason}")
        for k in sorted(self.metadata):
            lines.append(f"meta.{k}={_format_meta(self.metadata[k])}")
        return "\n".join(lines) + "\n"


def _format_meta(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (tuple, list)):
        return "x".join(str(x) for x in v)
    return str(v).replace("\n", " ")


def _parse_meta(v: str):
    if v in ("true", "false"):
        return v == "true"
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def make_report(name, lhs, rhs, constant, metadata=None, vacuous=None) -> InequalityReport:
    """Assemble a report; ``vacuous`` is a reason string when hypotheses fail."""
    lhs, rhs, constant = float(lhs), float(rhs), float(constant)
    margin = rhs - lhs
    if vacuous or math.isinf(rhs) or math.isnan(rhs) or math.isnan(lhs):
        verdict = VACUOUS
    else:
        verdict = HOLDS if lhs <= rhs else VIOLATED
    return InequalityReport(name, lhs, rhs, constant, margin, verdict, dict(metadata or {}), vacuous or "")


def parse_reports(text: str) -> list:
    """Parse one or more concatenated RREPORT v1 records."""
    reports = []
    current = None
    for k, ln in enumerate(text.splitlines(), start=1):
        if not ln.strip():
            continue
        if ln.strip() == "RREPORT v1":
            if current is not None:
                reports.append(current)
            current = {"metadata": {}}
            continue
        if current is None:
            raise FormatError("missing 'RREPORT v1' header", k)
        if "=" not in ln:
            raise FormatError(f"expected key=value, got {ln!r}", k)
        key, v = ln.split("=", 1)
        if key.startswith("meta."):
            current["metadata"][key[5:]] = _parse_meta(v)
        elif key in ("lhs", "rhs", "constant", "margin"):
            try:
                current[key] = float(v)
            except ValueError:
                raise FormatError(f"bad number for {key}", k) from None
        elif key in ("name", "verdict", "reason"):
            current[key] = v
        else:
            raise FormatError(f"unknown field {key!r}", k)
    if current is not None:
        reports.append(current)
    out = []
    for r in reports:
        try:
            out.append(
                InequalityReport(
                    r["name"], r["lhs"], r["rhs"], r["constant"], r["margin"],
                    r["verdict"], r["metadata"], r.get("reason", ""),
                )
            )
        except KeyError as exc:
            raise FormatError(f"report lacks field {exc.args[0]!r}") from None
    return out


def write_reports(reports, path) -> None:
    atomic_write(path, "".join(r.to_text() for r in reports))


def read_reports(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_reports(fh.read())


def _grid_meta(u: GridFunction) -> dict:
    return {"h": u.h, "grid_shape": tuple(u.domain.shape), "n": u.n, "measure": u.domain.measure}


def _ball(u: GridFunction) -> BallDomain:
    return BallDomain.with_measure(u.domain.measure, u.n)


def _zero_measure(u: GridFunction, tol: float) -> float:
    return int(np.count_nonzero(u.values <= tol)) * u.domain.cell_volume


def _default_tol(u: GridFunction) -> float:
    """Grid tolerance for 'u vanishes here': one cell width times the Lipschitz bound."""
    return u.h * float(np.max(gradient_magnitude(u).values)) + 1e-12


def vanishes_on_boundary(u: GridFunction, tol: float | None = None) -> bool:
    """True when every cell with a boundary face carries |u| <= tol (default: h max|Du|)."""
    tol = _default_tol(u) if tol is None else tol
    cells = u.domain.adjacency.boundary_cells
    return bool(np.all(np.abs(u.values[cells]) <= tol))


# --- Theorem-level verifiers -------------------------------------------------------------


def verify_thm_1_1(u: GridFunction, cert: GammaCertificate, slack: float = 0.05) -> InequalityReport:
    """Energy of the symmetrization vs (n c_n^(1/n)/gamma)^2 times the energy of u.

    Requires u >= 0 and the perimeter condition P_Omega{u > t} >= gamma
    mu(t)^(1-1/n) on the scanned thresholds (up to ``slack``).
    """
    n = u.n
    constant = (isoperimetric_constant(n) / cert.gamma) ** 2
    meta = _grid_meta(u) | {"gamma": cert.gamma, "case": cert.case}
    if np.any(u.values < 0):
        return make_report("thm_1_1", math.nan, math.nan, constant, meta, "u takes negative values")
    if cert.case == "i" and not vanishes_on_boundary(u):
        return make_report("thm_1_1", math.nan, math.nan, constant, meta, "case (i): u does not vanish on the boundary")
    scan = condition_scan(u, cert.gamma, slack, with_trace=cert.case == "i")
    meta |= {"scan_worst_ratio": scan.worst_ratio, "scan_thresholds": scan.thresholds}
    if not scan.passes:
        return make_report(
            "thm_1_1", math.nan, math.nan, constant, meta,
            f"perimeter condition fails at t={scan.worst_t!r} (ratio {scan.worst_ratio:.4g})",
        )
    lhs = radial_energy(decreasing_rearrangement(u), _ball(u))
    energy = dirichlet_energy(u)
    meta["energy_u"] = energy
    return make_report("thm_1_1", lhs, constant * energy, constant, meta)


def thm_1_2_constant(Q: float, n: int, eps: float, measure: float) -> float:
    """L^2 with L = Q n c_n^(1/n) / alpha^(1-1/n), alpha = eps/(|Omega|-eps) or 1."""
    alpha = eps / (measure - eps) if eps <= measure / 2 else 1.0
    return (Q * isoperimetric_constant(n) / alpha ** (1 - 1 / n)) ** 2


def verify_thm_1_2(u: GridFunction, Q: float, zero_tol: float = 0.0) -> InequalityReport:
    """Estimate for u >= 0 whose zero set {u <= zero_tol} has measure eps > 0."""
    measure = u.domain.measure
    eps = _zero_measure(u, zero_tol)
    meta = _grid_meta(u) | {"Q": Q, "eps": eps}
    if np.any(u.values < 0):
        return make_report("thm_1_2", math.nan, math.nan, math.nan, meta, "u takes negative values")
    if eps <= 0:
        return make_report("thm_1_2", math.nan, math.nan, math.nan, meta, "zero set has measure 0")
    constant = thm_1_2_constant(Q, u.n, eps, measure)
    meta["alpha"] = eps / (measure - eps) if eps <= measure / 2 else 1.0
    lhs = radial_energy(decreasing_rearrangement(u), _ball(u))
    energy = dirichlet_energy(u)
    meta["energy_u"] = energy
    return make_report("thm_1_2", lhs, constant * energy, constant, meta)


def _select(points, selector):
    if selector is None:
        return None
    if callable(selector):
        return np.asarray(selector(points), dtype=bool)
    return np.asarray(selector, dtype=bool)


def verify_thm_1_3(u: GridFunction, Q: float, C: float, trace_measure: float | None = None,
                   boundary=None, tol: float | None = None) -> InequalityReport:
    """Estimate for u >= 0 vanishing on a boundary portion F of measure eps.

    ``boundary`` selects F: a predicate on boundary face centers (array
    (M, n) -> bool) or a boolean array over the boundary faces.  By default F
    is made of the boundary faces of cells where u <= tol.  The constant is
    L = max(Q n c_n^(1/n), C n c_n^(1/n) |Omega|^(1-1/n) / eps).
    """
    d = u.domain
    n = u.n
    tol = _default_tol(u) if tol is None else tol
    adj = d.adjacency
    on_f = _select(adj.boundary_face_centers(d), boundary)
    if on_f is None:
        on_f = u.values[adj.boundary_cells] <= tol
    measured = int(np.count_nonzero(on_f)) * d.h ** (n - 1)
    eps = measured if trace_measure is None else float(trace_measure)
    meta = _grid_meta(u) | {
        "Q": Q, "C": C, "eps": eps, "trace_measured": measured, "tol": tol,
        "constant_form": "case-iv: C*n*c_n^(1/n)*|Omega|^(1-1/n)/eps (printed form has c_n*c_n^(1/n))",
    }
    if eps <= 0:
        raise RangeError("declared boundary measure must be positive")
    nc = isoperimetric_constant(n)
    constant = max(Q * nc, C * nc * d.measure ** (1 - 1 / n) / eps) ** 2
    if np.any(u.values < 0):
        return make_report("thm_1_3", math.nan, math.nan, constant, meta, "u takes negative values")
    owners = adj.boundary_cells[on_f]
    if owners.size == 0:
        return make_report("thm_1_3", math.nan, math.nan, constant, meta, "F is empty on this grid")
    if np.any(np.abs(u.values[owners]) > tol):
        return make_report("thm_1_3", math.nan, math.nan, constant, meta, "trace check: u does not vanish on F")
    lhs = radial_energy(decreasing_rearrangement(u), _ball(u))
    energy = dirichlet_energy(u)
    meta["energy_u"] = energy
    return make_report("thm_1_3", lhs, constant * energy, constant, meta)


def projection_measure(domain, selected: np.ndarray) -> float:
    """Largest (n-1)-measure of the projection of the selected cells on a coordinate hyperplane."""
    if not np.any(selected):
        return 0.0
    idx = np.stack(np.unravel_index(domain.flat_index[selected], domain.shape), axis=1)
    best = 0
    for k in range(domain.n):
        rest = np.delete(idx, k, axis=1)
        best = max(best, np.unique(rest, axis=0).shape[0])
    return best * domain.h ** (domain.n - 1)


def verify_thm_1_4(u: GridFunction, Q: float, C: float, proj_measure: float | None = None,
                   zero_set=None, tol: float | None = None) -> InequalityReport:
    """Estimate for u >= 0 vanishing on an internal set whose projection has measure eps.

    ``zero_set`` is a predicate on cell centers or a boolean array over the
    cells; by default the cells where u <= tol.  The constant is
    L = max(Q n c_n^(1/n), (C+1) n c_n^(1/n) |Omega|^(1-1/n) / eps).
    """
    d = u.domain
    n = u.n
    tol = _default_tol(u) if tol is None else tol
    sel = _select(d.cell_centers(), zero_set)
    if sel is None:
        sel = u.values <= tol
    measured = projection_measure(d, sel)
    eps = measured if proj_measure is None else float(proj_measure)
    meta = _grid_meta(u) | {"Q": Q, "C": C, "eps": eps, "projection_measured": measured, "tol": tol}
    if eps <= 0:
        raise RangeError("declared projection measure must be positive")
    nc = isoperimetric_constant(n)
    constant = max(Q * nc, (C + 1) * nc * d.measure ** (1 - 1 / n) / eps) ** 2
    if np.any(u.values < 0):
        return make_report("thm_1_4", math.nan, math.nan, constant, meta, "u takes negative values")
    if not np.any(sel):
        return make_report("thm_1_4", math.nan, math.nan, constant, meta, "zero set is empty on this grid")
    if np.any(np.abs(u.values[sel]) > tol):
        return make_report("thm_1_4", math.nan, math.nan, constant, meta, "u does not vanish on the declared set")
    lhs = radial_energy(decreasing_rearrangement(u), _ball(u))
    energy = dirichlet_energy(u)
    meta["energy_u"] = energy
    return make_report("thm_1_4", lhs, constant * energy, constant, meta)


def local_constant(eps: float, measure: float, n: int) -> float:
    """c(eps) = ((|Omega|-eps)/eps)^(2-2/n) for eps <= |Omega|/2, else 1."""
    if eps <= measure / 2:
        return ((measure - eps) / eps) ** (2 - 2 / n)
    return 1.0


def verify_thm_2_1(u: GridFunction, Q: float, eps: float) -> InequalityReport:
    """Energy of the symmetrization on the ball of measure |Omega| - eps; u may change sign.

    Besides the final comparison the report replays the splitting at the
    median level h = u*(|Omega|/2): the negative part of the symmetrized
    u - h is compared with the symmetrization of the negative part, which
    must lose at most the factor ((|Omega|-eps)/eps)^(2-2/n).
    """
    measure = u.domain.measure
    if not 0 < eps < measure:
        raise RangeError(f"eps must lie in (0, |Omega|) = (0, {measure}), got {eps}")
    n = u.n
    ball = _ball(u)
    star = decreasing_rearrangement(u)
    lin = star.linear_view()
    c_eps = local_constant(eps, measure, n)
    constant = c_eps * (Q * isoperimetric_constant(n)) ** 2
    lhs = radial_energy(lin, ball, 0.0, measure - eps)
    energy = dirichlet_energy(u)
    level = median_level(star)
    meta = _grid_meta(u) | {"Q": Q, "eps": eps, "c_eps": c_eps, "median_level": level, "energy_u": energy}
    half = measure / 2
    if eps < half:
        sym_neg = radial_energy(lin, ball, half, measure - eps)
        neg_sym = mirrored_radial_energy(lin, ball, half, measure - eps)
        ratio = ((measure - eps) / eps) ** (2 - 2 / n)
        meta |= {
            "replay_sym_of_neg_part": sym_neg,
            "replay_neg_part_of_sym": neg_sym,
            "replay_neg_comparison_holds": bool(sym_neg <= ratio * neg_sym * (1 + 1e-12) + 1e-300),
        }
    meta["replay_pos_energy"] = radial_energy(lin, ball, 0.0, min(half, measure - eps))
    parts_energy = dirichlet_energy((u - level).positive_part()) + dirichlet_energy((u - level).negative_part())
    meta["replay_parts_energy"] = parts_energy
    return make_report("thm_2_1", lhs, constant * energy, constant, meta)


def verify_cor_2_2(u: GridFunction, v: GridFunction, eps: float, Q: float) -> InequalityReport:
    """Uniform distance of u* and v* on (eps, |Omega| - eps) against sqrt(A + 2 B C).

    A = |u-v|_2^2 / (|Omega| - 2 eps), B = eps^(-1+1/n) |u-v|_2 and
    C = sqrt(c(eps)) Q (|Du|_2 + |Dv|_2), the weighted derivative integral
    bounded through the local estimate on the ball of measure |Omega| - eps.
    """
    if not u.domain.same_grid(v.domain):
        raise DomainError("u and v live on different domains")
    measure = u.domain.measure
    if not 0 < eps < measure / 2:
        raise RangeError(f"eps must lie in (0, |Omega|/2), got {eps}")
    n = u.n
    pu = decreasing_rearrangement(u)
    pv = decreasing_rearrangement(v)
    mids = 0.5 * (pu.breakpoints[:-1] + pu.breakpoints[1:])
    inside = (mids > eps) & (mids < measure - eps)
    lhs = float(np.max(np.abs(pu.values[inside] - pv.values[inside]))) if inside.any() else 0.0
    dist = (u - v).lp_norm(2)
    a_term = dist**2 / (measure - 2 * eps)
    b_term = eps ** (-1 + 1 / n) * dist
    c_eps = local_constant(eps, measure, n)
    grads = math.sqrt(dirichlet_energy(u)) + math.sqrt(dirichlet_energy(v))
    c_term = math.sqrt(c_eps) * Q * grads
    rhs = math.sqrt(a_term + 2 * b_term * c_term)
    meta = _grid_meta(u) | {
        "eps": eps, "Q": Q, "A": a_term, "B": b_term, "C": c_term, "l2_distance": dist,
        "c1": 1 / math.sqrt(measure - 2 * eps),
    }
    return make_report("cor_2_2", lhs, rhs, math.sqrt(c_eps) * Q, meta)


def sobolev_constant(n: int) -> float:
    """Sharp constant S_n of |u|_{2*} <= S_n |Du|_2 on R^n (Aubin, Talenti), n >= 3."""
    if n < 3:
        raise ValueError("2* = 2n/(n-2) needs n >= 3")
    return (math.gamma(n) / math.gamma(n / 2)) ** (1 / n) / math.sqrt(math.pi * n * (n - 2))


def verify_cor_1_6(u: GridFunction, L: float) -> InequalityReport:
    """|u|_{2*} <= S_n L |Du|_2 for u >= 0 meeting the hypotheses of Thm 1.3 or 1.4.

    S_n is the sharp Sobolev constant of R^n, an external literature value
    recorded in the metadata.
    """
    n = u.n
    meta = _grid_meta(u) | {"L": L}
    if n <= 2:
        return make_report("cor_1_6", math.nan, math.nan, math.nan, meta, "2* undefined for n <= 2")
    if np.any(u.values < 0):
        return make_report("cor_1_6", math.nan, math.nan, math.nan, meta, "u takes negative values")
    s_n = sobolev_constant(n)
    p = 2 * n / (n - 2)
    meta |= {"sobolev_constant": s_n, "sobolev_source": "sharp R^n constant (Aubin-Talenti)", "exponent": p}
    lhs = u.lp_norm(p)
    rhs = s_n * L * math.sqrt(dirichlet_energy(u))
    return make_report("cor_1_6", lhs, rhs, s_n * L, meta)


def verify_lipschitz_bound(u: GridFunction, gamma: float, L: float | None = None,
                           s_min_fraction: float = 0.05, factor: float = 1.1) -> InequalityReport:
    """Difference quotients of u* against (L/gamma) s^(-1+1/n).

    lhs is the largest ratio -Delta u*/Delta s / ((L/gamma) s^(-1+1/n)) over
    the nodes of the linear view with s >= s_min_fraction |Omega|, the bound
    evaluated at the left node of each difference; rhs is ``factor``.
    """
    n = u.n
    if L is None:
        L = float(np.max(gradient_magnitude(u).values))
    lin = decreasing_rearrangement(u).linear_view()
    s = lin.breakpoints[:-1]
    quot = -lin.slopes()
    use = s >= s_min_fraction * u.domain.measure
    bound = (L / gamma) * s[use] ** (-1 + 1 / n)
    ratio = quot[use] / bound
    lhs = float(np.max(ratio)) if ratio.size else 0.0
    meta = _grid_meta(u) | {"L": L, "gamma": gamma, "s_min": s_min_fraction * u.domain.measure}
    return make_report("lipschitz_1_7", lhs, factor, L / gamma, meta)


# --- Counterexample ---------------------------------------------------------------------


@dataclass(frozen=True)
class CounterexampleTrace:
    """Truncated energies of the symmetrized counterexample along an eps-ladder."""

    n: int
    which: str
    measure: float
    eps: np.ndarray
    energies: np.ndarray
    slope: float
    source_energy: float

    @property
    def ln_inv_eps(self) -> np.ndarray:
        return np.log(1.0 / self.eps)

    def to_csv(self) -> str:
        lines = ["eps,E,ln_inv_eps"]
        for e, en, x in zip(self.eps, self.energies, self.ln_inv_eps):
            lines.append(f"{float(e)!r},{float(en)!r},{float(x)!r}")
        lines.append(f"slope={self.slope!r}")
        return "\n".join(lines) + "\n"


def parse_trace_csv(text: str) -> tuple:
    """Return ``(eps, E, ln_inv_eps, slope)`` arrays from a trace CSV."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "eps,E,ln_inv_eps":
        raise FormatError("missing CSV header 'eps,E,ln_inv_eps'", 1)
    if not lines[-1].startswith("slope="):
        raise FormatError("missing 'slope=' trailer", len(lines))
    rows = []
    for k, ln in enumerate(lines[1:-1], start=2):
        parts = ln.split(",")
        if len(parts) != 3:
            raise FormatError("expected three columns", k)
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise FormatError("cannot parse numbers", k) from None
    data = np.array(rows).reshape(-1, 3)
    return data[:, 0], data[:, 1], data[:, 2], float(lines[-1].split("=", 1)[1])


def default_ladder(measure: float, count: int = 16) -> np.ndarray:
    return measure * 2.0 ** -np.arange(1, count + 1)


def counterexample_profile(measure: float, which: str = "interior", nodes_per_octave: int = 64,
                           octaves: int = 30) -> StepProfile:
    """Linear interpolant of sqrt(|Omega| - s) (shifted by -sqrt(|Omega|) for ``H10``).

    Nodes are uniform on [0, |Omega|] and geometrically graded towards
    s = |Omega|, where the derivative blows up.
    """
    if which not in ("interior", "H10"):
        raise ValueError(f"unknown counterexample {which!r}")
    shift = math.sqrt(measure) if which == "H10" else 0.0
    graded = measure * (1 - 2.0 ** (-np.arange(1, octaves * nodes_per_octave + 1) / nodes_per_octave))
    nodes = np.unique(np.concatenate([np.linspace(0, measure, 257), graded]))

    def f(s):
        return np.sqrt(np.maximum(measure - s, 0.0)) - shift

    return StepProfile.from_function(f, nodes)


def run_counterexample(n: int, which: str = "interior", ladder=None, measure: float | None = None,
                       fit_from: int = 8) -> CounterexampleTrace:
    """Truncated symmetrized energies of u*(s) = sqrt(|Omega| - s) on the unit ball.

    E(eps) is the energy of the symmetrization on the ball of measure
    |Omega| - eps.  The slope of E against ln(1/eps) is fitted by least
    squares on the ladder entries from index ``fit_from`` on, where the O(eps)
    correction is negligible.  ``source_energy`` is the (finite for n >= 2)
    energy of the radially increasing arrangement.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    measure = unit_ball_volume(n) if measure is None else float(measure)
    ladder = default_ladder(measure) if ladder is None else np.asarray(ladder, dtype=float)
    ball = BallDomain.with_measure(measure, n)
    prof = counterexample_profile(measure, which)
    energies = np.array([radial_energy(prof, ball, 0.0, measure - e) for e in ladder])
    x = np.log(1.0 / ladder)
    tail = slice(min(fit_from, len(ladder) - 2), None)
    slope = float(np.polyfit(x[tail], energies[tail], 1)[0])
    source = mirrored_radial_energy(prof, ball)
    return CounterexampleTrace(n, which, measure, ladder, energies, slope, source)
