"""N-functions, Luxemburg norms and the Orlicz form of the gradient estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr
from .errors import FormatError, RangeError
from .geometry import GammaCertificate, condition_scan, gradient_magnitude, isoperimetric_constant
from .grid import BallDomain, GridFunction
from .inequalities import InequalityReport, make_report, vanishes_on_boundary
from .rearrange import StepProfile, decreasing_rearrangement

__all__ = [
    "Delta2",
    "LuxemburgNorm",
    "NFunction",
    "delta2_classify",
    "jensen_check",
    "luxemburg_norm",
    "modular",
    "parse_nfunction",
    "radial_gradient_norm",
    "verify_orlicz_local",
    "verify_orlicz_polya_szego",
]

REL_TOL = 1e-10
MAX_BISECTIONS = 200
_GAUSS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class NFunction:
    """Convex A: [0, inf) -> [0, inf) with A(t)/t -> 0 at 0 and -> inf at inf."""

    evaluator: object
    tag: str = "custom"
    p: float | None = None
    expression: str | None = None

    def __call__(self, t):
        with np.errstate(over="ignore", invalid="ignore"):
            return self.evaluator(np.asarray(t, dtype=float))

    @classmethod
    def power(cls, p: float) -> "NFunction":
        if not p > 1:
            raise ValueError("r^p is an N-function only for p > 1")
        return cls(lambda t: t**p, "power-p", float(p))

    @classmethod
    def p_log(cls, p: float) -> "NFunction":
        """A(r) = r^p log(1 + r), p >= 1."""
        if not p >= 1:
            raise ValueError("r^p log(1+r) needs p >= 1")
        return cls(lambda t: t**p * np.log1p(t), "p-log", float(p))

    @classmethod
    def custom(cls, expression: str) -> "NFunction":
        """A given by an expression in the variable ``t`` (``r`` is an alias)."""
        expr.evaluate(expression, {"t": 1.0, "r": 1.0})
        return cls(lambda t: expr.evaluate(expression, {"t": t, "r": t}), "custom", None, expression)

    def descriptor(self) -> str:
        if self.tag == "custom":
            return f"tag=custom expr={self.expression}"
        return f"tag={self.tag} p={self.p!r}"

    def validate(self, probes=None) -> list:
        """Problems found on a log-spaced probe grid (empty list when none)."""
        t = np.logspace(-6, 6, 241) if probes is None else np.asarray(probes, dtype=float)
        problems = []
        if float(self(np.array([0.0]))[0]) != 0.0:
            problems.append("A(0) != 0")
        a = self(t)
        finite = np.isfinite(a)
        t, a = t[finite], a[finite]
        mid = self(np.sqrt(t[:-1] * t[1:]))
        # midpoint convexity on each geometric pair, against the chord at the geometric midpoint
        lam = (np.sqrt(t[:-1] * t[1:]) - t[:-1]) / (t[1:] - t[:-1])
        chord = (1 - lam) * a[:-1] + lam * a[1:]
        if np.any(mid > chord * (1 + 1e-9) + 1e-300):
            problems.append("not convex on probes")
        ratio = a / t
        if np.any(np.diff(ratio) < -1e-9 * np.abs(ratio[1:])):
            problems.append("A(t)/t not nondecreasing")
        if not ratio[0] < 1e-3 * ratio[-1]:
            problems.append("A(t)/t does not go from ~0 to large over the probes")
        return problems


def parse_nfunction(text: str) -> NFunction:
    """Parse an NFUNC v1 descriptor (the header line is optional)."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if lines and lines[0] == "NFUNC v1":
        lines = lines[1:]
    if len(lines) != 1:
        raise FormatError("expected one descriptor line after 'NFUNC v1'")
    line = lines[0]
    if not line.startswith("tag="):
        raise FormatError("descriptor must start with tag=")
    tag, _, rest = line[4:].partition(" ")
    rest = rest.strip()
    if tag in ("power-p", "p-log"):
        if not rest.startswith("p="):
            raise FormatError(f"tag={tag} needs p=<real>")
        try:
            p = float(rest[2:])
        except ValueError:
            raise FormatError("bad exponent p") from None
        return NFunction.power(p) if tag == "power-p" else NFunction.p_log(p)
    if tag == "custom":
        if not rest.startswith("expr="):
            raise FormatError("tag=custom needs expr=<expression>")
        try:
            return NFunction.custom(rest[5:])
        except ValueError as exc:
            raise FormatError(str(exc)) from None
    raise FormatError(f"unknown N-function tag {tag!r}")


def format_nfunction(a: NFunction) -> str:
    return "NFUNC v1\n" + a.descriptor() + "\n"


# --- modular and Luxemburg norm ------------------------------------------------------


def _samples(u):
    """(|values|, weights) for a grid function or a step profile."""
    if isinstance(u, GridFunction):
        return np.abs(u.values), np.full(u.values.size, u.domain.cell_volume)
    if isinstance(u, StepProfile):
        if u.kind != "step":
            raise ValueError("modular of a profile uses its step view")
        return np.abs(u.values), u.lengths
    vals, weights = u
    return np.abs(np.asarray(vals, dtype=float)), np.asarray(weights, dtype=float)


def modular(u, A: NFunction, lam: float) -> float:
    """Integral of A(|u|/lam): midpoint sum on a grid, exact per interval on a profile.

    Returns ``inf`` when A overflows.
    """
    if not lam > 0:
        raise RangeError("lambda must be positive")
    vals, weights = _samples(u)
    terms = A(vals / lam) * weights
    if not np.all(np.isfinite(terms)):
        return math.inf
    return math.fsum(terms)


@dataclass(frozen=True)
class LuxemburgNorm:
    value: float
    bracket: tuple
    modular_at_value: float
    iterations: int = 0

    def __float__(self):
        return self.value


def _bisect(mod, seed: float) -> LuxemburgNorm:
    """Smallest lam with mod(lam) <= 1 for a decreasing modular ``mod``."""
    lo = hi = seed
    while mod(hi) > 1:
        lo, hi = hi, hi * 2
    while lo == hi or mod(lo) <= 1:
        lo = lo / 2
        if lo < 1e-300:
            return LuxemburgNorm(0.0, (0.0, hi), mod(hi))
    it = 0
    while (hi - lo) > REL_TOL * hi and it < MAX_BISECTIONS:
        mid = 0.5 * (lo + hi)
        if mod(mid) > 1:
            lo = mid
        else:
            hi = mid
        it += 1
    return LuxemburgNorm(hi, (lo, hi), mod(hi), it)


def luxemburg_norm(u, A: NFunction) -> LuxemburgNorm:
    """inf{lam > 0 : modular(u, A, lam) <= 1} by bisection.

    The bracket grows geometrically from an L1-based seed; bisection stops
    at relative bracket width 1e-10 or after 200 steps.
    """
    vals, weights = _samples(u)
    if not np.any(vals > 0):
        return LuxemburgNorm(0.0, (0.0, 0.0), 0.0)
    seed = math.fsum(vals * weights) / max(math.fsum(weights), 1e-300)
    seed = seed if seed > 0 else float(np.max(vals))
    return _bisect(lambda lam: modular((vals, weights), A, lam), seed)


def radial_gradient_modular(p: StepProfile, ball: BallDomain, A: NFunction, lam: float,
                            s_lo: float = 0.0, s_hi: float | None = None) -> float:
    """Integral of A(n c_n^(1/n) |Du*(s)| s^(1-1/n) / lam) ds over [s_lo, s_hi].

    This is the modular of |D u~| over the ball shell with volume coordinates
    in [s_lo, s_hi]; each linear piece is integrated by 16-point Gauss-Legendre.
    """
    lin = p.linear_view()
    s_hi = lin.measure if s_hi is None else s_hi
    n = ball.n
    a = np.clip(lin.breakpoints[:-1], s_lo, s_hi)
    b = np.clip(lin.breakpoints[1:], s_lo, s_hi)
    slope = np.abs(lin.slopes())
    keep = (b > a) & (slope > 0)
    a, b, slope = a[keep], b[keep], slope[keep]
    x, w = _GAUSS
    s = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * x[None, :]
    grad = isoperimetric_constant(n) * slope[:, None] * s ** (1 - 1 / n)
    vals = A(grad / lam) * (0.5 * (b - a))[:, None] * w[None, :]
    if not np.all(np.isfinite(vals)):
        return math.inf
    return math.fsum(vals.ravel())


def radial_gradient_norm(p: StepProfile, ball: BallDomain, A: NFunction,
                         s_lo: float = 0.0, s_hi: float | None = None) -> LuxemburgNorm:
    """Luxemburg norm of |D u~| over the shell {s_lo <= c_n|x|^n <= s_hi}."""
    lin = p.linear_view()
    s_hi = lin.measure if s_hi is None else s_hi
    slope = np.abs(lin.slopes())
    if not np.any(slope > 0):
        return LuxemburgNorm(0.0, (0.0, 0.0), 0.0)
    seed = isoperimetric_constant(ball.n) * float(np.max(slope)) * s_hi ** (1 - 1 / ball.n)
    return _bisect(lambda lam: radial_gradient_modular(lin, ball, A, lam, s_lo, s_hi), seed)


# --- Delta_2 ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Delta2:
    global_: bool
    near_infinity: bool
    delta: float
    t0: float
    method: str


def delta2_classify(A: NFunction, probes=None) -> Delta2:
    """Classify A(2t) <= delta A(t), globally or for t >= t0.

    Exact for the tagged families: r^p has delta = 2^p globally; r^p log(1+r)
    has delta = 2^(p+1) globally (log(1+2t) <= 2 log(1+t)), and in particular
    near infinity.  Custom functions are classified heuristically over probes
    spanning at least 12 decades.
    """
    if A.tag == "power-p":
        return Delta2(True, True, 2.0**A.p, 0.0, "formula")
    if A.tag == "p-log":
        return Delta2(True, True, 2.0 ** (A.p + 1), 0.0, "formula")
    t = np.logspace(-6, 6, 1201) if probes is None else np.sort(np.asarray(probes, dtype=float))
    if math.log10(t[-1] / t[0]) < 12 - 1e-9:
        raise ValueError("probe range must span at least 12 decades")
    a1 = A(t)
    a2 = A(2 * t)
    if np.any(np.isnan(a1)) or np.any(np.isnan(a2)) or np.any(a1 < 0):
        raise ValueError("classification failure: A is not finite and nonnegative on the probes")
    ok = np.isfinite(a1) & (a1 > 0)
    t, a1, a2 = t[ok], a1[ok], a2[ok]
    if t.size < 8:
        raise ValueError("classification failure: too few usable probes")
    ratio = a2 / a1  # +inf where A(2t) overflowed: evidence of growth
    decade = t >= t[-1] / 1e3
    previous = (t >= t[-1] / 1e6) & ~decade
    top = float(np.max(ratio[decade]))
    before = float(np.max(ratio[previous])) if previous.any() else top
    near_inf = math.isfinite(top) and top <= before * (1 + 1e-6)
    if not near_inf:
        return Delta2(False, False, math.inf, math.nan, "probes")
    bottom = t <= t[0] * 1e3
    lower = (t <= t[0] * 1e6) & ~bottom
    low_top = float(np.max(ratio[bottom]))
    low_before = float(np.max(ratio[lower])) if lower.any() else low_top
    glob = math.isfinite(low_top) and low_top <= low_before * (1 + 1e-6) and bool(np.all(np.isfinite(ratio)))
    if glob:
        return Delta2(True, True, float(np.max(ratio)), 0.0, "probes")
    upper = t >= t[-1] / 1e6
    return Delta2(False, True, float(np.max(ratio[upper])), float(t[upper][0]), "probes")


# --- Jensen and verifiers ---------------------------------------------------------------


def jensen_check(u: GridFunction, A: NFunction, groups: int = 64) -> float:
    """Smallest mean(A(|Du|)) - A(mean |Du|) over groups of cells between level gaps.

    Cells are grouped by rank of u (equal-count level bands); the result is
    nonnegative up to rounding for convex A.
    """
    grad = gradient_magnitude(u).values
    order = np.argsort(-u.values, kind="stable")
    worst = math.inf
    for chunk in np.array_split(order, min(groups, order.size)):
        g = grad[chunk]
        gap = float(np.mean(A(g)) - A(np.array([np.mean(g)]))[0])
        worst = min(worst, gap)
    return worst


def verify_orlicz_polya_szego(u: GridFunction, cert: GammaCertificate, A: NFunction,
                              slack: float = 0.05) -> InequalityReport:
    """|D u~|_A over the ball <= (n c_n^(1/n)/gamma) |Du|_A over Omega."""
    n = u.n
    lam0 = isoperimetric_constant(n) / cert.gamma
    meta = {"h": u.h, "grid_shape": tuple(u.domain.shape), "n": n, "gamma": cert.gamma,
            "case": cert.case, "nfunction": A.descriptor()}
    if np.any(u.values < 0):
        return make_report("orlicz_3_4", math.nan, math.nan, lam0, meta, "u takes negative values")
    if cert.case == "i" and not vanishes_on_boundary(u):
        return make_report("orlicz_3_4", math.nan, math.nan, lam0, meta, "case (i): u does not vanish on the boundary")
    scan = condition_scan(u, cert.gamma, slack, with_trace=cert.case == "i")
    meta["scan_worst_ratio"] = scan.worst_ratio
    if not scan.passes:
        return make_report("orlicz_3_4", math.nan, math.nan, lam0, meta,
                           f"perimeter condition fails at t={scan.worst_t!r}")
    ball = BallDomain.with_measure(u.domain.measure, n)
    lhs = radial_gradient_norm(decreasing_rearrangement(u), ball, A)
    rhs = luxemburg_norm(gradient_magnitude(u), A)
    meta |= {"lhs_modular": lhs.modular_at_value, "rhs_modular": rhs.modular_at_value}
    return make_report("orlicz_3_4", lhs.value, lam0 * rhs.value, lam0, meta)


def verify_orlicz_local(u: GridFunction, Q: float, eps: float, A: NFunction) -> InequalityReport:
    """|D u~|_A over the ball of measure |Omega| - eps
    <= Q n c_n^(1/n) ((|Omega|-eps)/eps)^(1-1/n) |Du|_A, for 0 < eps < |Omega|/2."""
    measure = u.domain.measure
    if not 0 < eps < measure / 2:
        raise RangeError(f"eps must lie in (0, |Omega|/2), got {eps}")
    n = u.n
    lam = ((measure - eps) / eps) ** (1 - 1 / n)
    constant = Q * isoperimetric_constant(n) * lam
    ball = BallDomain.with_measure(measure, n)
    lhs = radial_gradient_norm(decreasing_rearrangement(u), ball, A, 0.0, measure - eps)
    rhs = luxemburg_norm(gradient_magnitude(u), A)
    meta = {"h": u.h, "grid_shape": tuple(u.domain.shape), "n": n, "Q": Q, "eps": eps,
            "lambda": lam, "nfunction": A.descriptor()}
    return make_report("orlicz_3_9", lhs.value, constant * rhs.value, constant, meta)
