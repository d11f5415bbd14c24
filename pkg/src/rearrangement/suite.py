"""The verification battery run by ``rearrange suite``."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import fixtures as fx
from .geometry import (
    GammaCertificate,
    gamma_for_case,
    isoperimetric_floor_scan,
    mirrored_radial_energy,
    radial_energy,
    search_constants,
)
from .grid import BallDomain, make_domain, sample
from .inequalities import (
    InequalityReport,
    counterexample_profile,
    make_report,
    run_counterexample,
    verify_cor_1_6,
    verify_cor_2_2,
    verify_lipschitz_bound,
    verify_thm_1_1,
    verify_thm_1_2,
    verify_thm_1_3,
    verify_thm_1_4,
    verify_thm_2_1,
)
from .orlicz import NFunction, luxemburg_norm, verify_orlicz_local, verify_orlicz_polya_szego
from .rearrange import decreasing_rearrangement, identity_deviations, schwarz

__all__ = ["SuiteItem", "run_suite", "thread_count"]


def thread_count() -> int:
    """Worker count from REARRANGE_THREADS (default 1)."""
    raw = os.environ.get("REARRANGE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


class SuiteItem:
    """A named job producing reports (and optional plot series)."""

    def __init__(self, label, job):
        self.label = label
        self.job = job

    def run(self):
        out = self.job()
        if isinstance(out, InequalityReport):
            return [out], {}
        if isinstance(out, tuple):
            return list(out[0]), dict(out[1])
        return list(out), {}


def _check(name, deviation, tolerance, meta) -> InequalityReport:
    """A numerical check ``deviation <= tolerance`` as a report."""
    return make_report(name, deviation, tolerance, 1.0, meta)


def _counterexample():
    reports, series = [], {}
    for n in (2, 1):
        tr = run_counterexample(n)
        series[f"counterexample_n{n}.csv"] = tr.to_csv()
        if n == 2:
            pi2 = math.pi**2
            meta = {"n": 2, "measure": tr.measure, "slope": tr.slope, "source_energy": tr.source_energy}
            reports.append(_check("counterexample_slope", abs(tr.slope / pi2 - 1), 0.02, meta))
            reports.append(_check("counterexample_source", abs(tr.source_energy / pi2 - 1), 0.02, meta))
        else:
            # in one dimension symmetrization does not increase the energy:
            # compare on the range where both truncated energies are finite
            ball = BallDomain.with_measure(tr.measure, 1)
            prof = counterexample_profile(tr.measure)
            e = float(tr.eps[-1])
            lhs = radial_energy(prof, ball, 0.0, tr.measure - e)
            rhs = mirrored_radial_energy(prof, ball, 0.0, tr.measure - e)
            meta = {"n": 1, "eps": e, "slope": tr.slope}
            reports.append(make_report("one_dimensional_energy", lhs, rhs * (1 + 1e-12), 1.0, meta))
    return reports, series


def _square_constants(h):
    return search_constants(make_domain(bounds=[(0, 1), (0, 1)], h=h))


def _battery():
    ci = gamma_for_case("i", 2)
    plog = NFunction.p_log(2)
    square = _square_constants(1 / 128)

    def crit2():
        u = fx.disk_bump(1 / 256)
        r = verify_thm_1_1(u, ci)
        ratio = r.lhs / r.rhs
        band = _check("equality_band", max(0.97 - ratio, ratio - 1.0, 0.0), 0.0, {"ratio": ratio, "h": u.h})
        prof = decreasing_rearrangement(u).linear_view()
        return [r, band], {"disk_bump_profile.csv": _series_csv(("s", "u_star"), prof.breakpoints, prof.values)}

    def crit3():
        out = []
        for h in (1 / 128, 1 / 256):
            r = verify_thm_1_1(fx.two_bump(h), ci)
            out.append(r)
            out.append(_check("strict_margin", 0.05 * r.rhs - r.margin, 0.0, {"h": h, "margin": r.margin}))
        return out

    def crit4():
        u = fx.quadrant_bump(1 / 128)
        return verify_thm_1_2(u, square.Q)

    def crit5():
        return verify_thm_2_1(fx.cosine_square(1 / 256), square.Q, 0.1)

    def crit6():
        u = fx.cosine_square(1 / 256)
        w = fx.perturbation_square(1 / 256)
        out = [verify_cor_2_2(u + w * (1.0 / m), u, 0.1, square.Q) for m in (1, 2, 4, 8, 16)]
        lhs = [r.lhs for r in out]
        worst = max(b - a for a, b in zip(lhs, lhs[1:]))
        out.append(_check("uniform_decay", worst, 0.0, {"sup_distances": ",".join(repr(v) for v in lhs)}))
        return out

    def crit7():
        rng = np.random.default_rng(7)
        dev = identity_deviations(rng, trials=100, size=16)
        tol = {"lp": 1e-12}
        return [_check(f"identity_{k}", v, tol.get(k, 0.0), {"trials": 100}) for k, v in dev.items()]

    def crit8():
        out, series = [], {}
        for name, f in fx.FIXTURES.items():
            u = f(1 / 48 if name == "ball_bump_3d" else 1 / 128)
            g = schwarz(u).to_grid(u.h)
            scan = isoperimetric_floor_scan(g)
            out.append(_check("isoperimetric_floor", scan.worst_deviation, 0.05,
                              {"fixture": name, "levels": int(scan.t.size), "skipped": scan.skipped}))
            series[f"floor_{name}.csv"] = _series_csv(("t", "ratio_calibrated"), scan.t, scan.ratio_calibrated)
        return out, series

    def crit9():
        sq = NFunction.power(2)
        out = []
        for name, f in fx.FIXTURES.items():
            u = f(1 / 32 if name == "ball_bump_3d" else 1 / 64)
            rel = abs(luxemburg_norm(u, sq).value / u.lp_norm(2) - 1)
            out.append(_check("orlicz_l2_norm", rel, 1e-9, {"fixture": name}))
        u = fx.disk_bump(1 / 128)
        a, b = verify_orlicz_polya_szego(u, ci, sq), verify_thm_1_1(u, ci)
        dev = max(abs(a.lhs / math.sqrt(b.lhs) - 1), abs(a.rhs / math.sqrt(b.rhs) - 1))
        out.append(_check("orlicz_reduction_3_4", dev, 1e-6, {"fixture": "disk_bump"}))
        u = fx.cosine_square(1 / 128)
        a, b = verify_orlicz_local(u, square.Q, 0.1, sq), verify_thm_2_1(u, square.Q, 0.1)
        dev = max(abs(a.lhs / math.sqrt(b.lhs) - 1), abs(a.rhs / math.sqrt(b.rhs) - 1))
        out.append(_check("orlicz_reduction_3_9", dev, 1e-6, {"fixture": "cosine_square"}))
        return out

    def crit10():
        out = []
        for h in (1 / 128, 1 / 256):
            out.append(verify_orlicz_polya_szego(fx.two_bump(h), ci, plog))
            out.append(verify_orlicz_local(fx.cosine_square(h), square.Q, 0.1, plog))
        return out

    def crit11():
        u = fx.disk_bump(1 / 128)
        return verify_lipschitz_bound(u, ci.gamma)

    def extra():
        out = [verify_thm_1_3(fx.linear_square(1 / 128), square.Q, square.C)]
        u = fx.disk_abs_x2(1 / 128)
        disk = search_constants(u.domain)
        out.append(verify_thm_1_4(u, disk.Q, disk.C, proj_measure=2.0))
        u = fx.ball_bump_3d(1 / 48)
        ball = search_constants(u.domain)
        r = verify_thm_1_3(u, ball.Q, ball.C)
        out.append(r)
        out.append(verify_cor_1_6(u, math.sqrt(r.constant)))
        return out

    return [
        SuiteItem("01_counterexample", _counterexample),
        SuiteItem("02_equality_case", crit2),
        SuiteItem("03_strict_case", crit3),
        SuiteItem("04_zero_set", crit4),
        SuiteItem("05_sign_changing", crit5),
        SuiteItem("06_uniform_convergence", crit6),
        SuiteItem("07_identities", crit7),
        SuiteItem("08_isoperimetric_floor", crit8),
        SuiteItem("09_orlicz_reduction", crit9),
        SuiteItem("10_orlicz_genuine", crit10),
        SuiteItem("11_lipschitz_bound", crit11),
        SuiteItem("12_boundary_estimates", extra),
    ]


def _series_csv(header, *cols) -> str:
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def run_suite(threads: int | None = None) -> list:
    """Run the battery; returns ``[(label, reports, series), ...]`` in fixed order."""
    items = _battery()
    threads = thread_count() if threads is None else max(1, int(threads))
    if threads == 1:
        results = [item.run() for item in items]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda it: it.run(), items))
    return [(item.label, reps, series) for item, (reps, series) in zip(items, results)]
