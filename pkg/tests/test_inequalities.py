import math

import numpy as np
import pytest

from rearrangement import fixtures as fx
from rearrangement import make_domain, sample
from rearrangement.errors import FormatError, RangeError
from rearrangement.geometry import gamma_for_case, search_constants
from rearrangement.inequalities import (
    InequalityReport,
    local_constant,
    make_report,
    parse_reports,
    parse_trace_csv,
    read_reports,
    run_counterexample,
    sobolev_constant,
    thm_1_2_constant,
    verify_cor_1_6,
    verify_cor_2_2,
    verify_lipschitz_bound,
    verify_thm_1_1,
    verify_thm_1_2,
    verify_thm_1_3,
    verify_thm_1_4,
    verify_thm_2_1,
    write_reports,
)

CASE_I = gamma_for_case("i", 2)


@pytest.fixture(scope="module")
def square_q():
    return search_constants(make_domain(bounds=[(0, 1), (0, 1)], h=1 / 64))


def test_equality_case_near_one():
    r = verify_thm_1_1(fx.disk_bump(1 / 128), CASE_I)
    assert r.verdict == "holds"
    assert r.constant == pytest.approx(1.0)
    assert r.lhs / r.rhs == pytest.approx(1.0, abs=2 / 128)


def test_non_radial_bump_strict():
    r = verify_thm_1_1(fx.two_bump(1 / 128), CASE_I)
    assert r.verdict == "holds" and r.margin > 0


def test_constant_function_vacuous():
    u = sample(make_domain(bounds=[(0, 1), (0, 1)], h=1 / 32), 1.0)
    r = verify_thm_1_1(u, CASE_I)
    assert r.verdict == "vacuous"
    assert "vanish" in r.reason


def test_negative_input_vacuous():
    r = verify_thm_1_1(fx.cosine_square(1 / 32), CASE_I)
    assert r.verdict == "vacuous"


def test_thm_1_2_half_support_alpha_one(square_q):
    m, Q = 1.0, square_q.Q
    assert thm_1_2_constant(Q, 2, m / 2, m) == pytest.approx((Q * 2 * math.sqrt(math.pi)) ** 2, rel=1e-15)


def test_thm_1_2_zero_function(square_q):
    u = sample(make_domain(bounds=[(0, 1), (0, 1)], h=1 / 16), 0.0)
    r = verify_thm_1_2(u, square_q.Q)
    assert (r.lhs, r.rhs, r.verdict) == (0.0, 0.0, "holds")


def test_thm_1_2_quadrant_bump(square_q):
    r = verify_thm_1_2(fx.quadrant_bump(1 / 128), square_q.Q)
    assert r.verdict == "holds"


def test_thm_1_2_alpha_scaling(square_q):
    m, Q = 1.0, square_q.Q
    eps = 0.75
    ratio = thm_1_2_constant(Q, 2, eps / 2, m) / thm_1_2_constant(Q, 2, eps, m)
    alpha = (eps / 2) / (m - eps / 2)
    assert ratio == pytest.approx(1 / alpha, rel=1e-12)


def test_thm_1_3_linear(square_q):
    r = verify_thm_1_3(fx.linear_square(1 / 128), square_q.Q, square_q.C)
    assert r.verdict == "holds"
    assert r.metadata["eps"] == pytest.approx(1.0, abs=2 / 128)


def test_thm_1_3_vanishing_on_whole_boundary(square_q):
    u = fx.two_bump(1 / 64)
    r = verify_thm_1_3(u, square_q.Q, square_q.C)
    assert r.verdict == "holds"
    assert r.metadata["eps"] == pytest.approx(4.0)


def test_thm_1_3_trace_check_fails(square_q):
    u = fx.linear_square(1 / 64) + 1.0
    r = verify_thm_1_3(u, square_q.Q, square_q.C, boundary=lambda p: p[:, 0] < 1e-9)
    assert r.verdict == "vacuous"


def test_thm_1_4_diameter():
    u = fx.disk_abs_x2(1 / 64)
    c = search_constants(u.domain)
    r = verify_thm_1_4(u, c.Q, c.C, proj_measure=2.0)
    assert r.verdict == "holds"
    assert r.metadata["projection_measured"] == pytest.approx(2.0, abs=0.05)


def test_thm_2_1_cosine(square_q):
    r = verify_thm_2_1(fx.cosine_square(1 / 128), square_q.Q, 0.1)
    assert r.verdict == "holds"
    assert r.metadata["replay_neg_comparison_holds"] is True


def test_local_constant_half():
    assert local_constant(0.5, 1.0, 2) == 1.0
    assert local_constant(0.7, 1.0, 3) == 1.0
    assert local_constant(0.25, 1.0, 2) == pytest.approx(3.0)


def test_thm_2_1_eps_range(square_q):
    with pytest.raises(RangeError):
        verify_thm_2_1(fx.cosine_square(1 / 16), square_q.Q, 1.5)


def test_thm_2_1_below_thm_1_2(square_q):
    u = fx.quadrant_bump(1 / 64)
    full = verify_thm_1_2(u, square_q.Q)
    part = verify_thm_2_1(u, square_q.Q, 0.2)
    assert part.lhs <= full.lhs


def test_cor_2_2_identical(square_q):
    u = fx.cosine_square(1 / 64)
    r = verify_cor_2_2(u, u, 0.1, square_q.Q)
    assert r.lhs == 0.0 and r.rhs == 0.0 and r.verdict == "holds"


def test_cor_2_2_constant_shift(square_q):
    u = fx.cosine_square(1 / 64)
    r = verify_cor_2_2(u + 0.25, u, 0.1, square_q.Q)
    assert r.lhs == pytest.approx(0.25, rel=1e-12)
    assert r.metadata["l2_distance"] == pytest.approx(0.25, rel=1e-12)
    assert r.verdict == "holds"


def test_cor_2_2_bound_rate(square_q):
    u = fx.cosine_square(1 / 64)
    w = fx.perturbation_square(1 / 64)
    reps = [verify_cor_2_2(u + w * (1 / m), u, 0.1, square_q.Q) for m in (1, 4, 16)]
    assert all(r.verdict == "holds" for r in reps)
    # the bound decays like m^(-1/2) for large m, the distance at least as fast
    assert reps[-1].rhs * 4 == pytest.approx(reps[0].rhs, rel=0.5)
    assert reps[-1].lhs * 4 <= reps[0].lhs * 1.2


def test_cor_2_2_eps_range(square_q):
    u = fx.cosine_square(1 / 16)
    with pytest.raises(RangeError):
        verify_cor_2_2(u, u, 0.5, square_q.Q)


def test_sobolev_constant_n3():
    # |Du|_2^2 >= 3 (pi/2)^(4/3) |u|_6^2 in R^3
    assert sobolev_constant(3) == pytest.approx((3 * (math.pi / 2) ** (4 / 3)) ** -0.5, rel=1e-12)


def test_cor_1_6_zero_and_scaling():
    d = make_domain(kind="ball", n=3, radius=0.5, h=1 / 16)
    r0 = verify_cor_1_6(sample(d, 0.0), 2.0)
    assert (r0.lhs, r0.rhs) == (0.0, 0.0)
    u = fx.ball_bump_3d(1 / 16)
    a, b = verify_cor_1_6(u, 2.0), verify_cor_1_6(u * 2.0, 2.0)
    assert b.lhs == pytest.approx(2 * a.lhs, rel=1e-14)
    assert b.rhs == pytest.approx(2 * a.rhs, rel=1e-14)


def test_cor_1_6_two_dimensions_vacuous():
    r = verify_cor_1_6(fx.two_bump(1 / 16), 1.0)
    assert r.verdict == "vacuous"


def test_cor_1_6_ball():
    u = fx.ball_bump_3d(1 / 48)
    c = search_constants(u.domain)
    base = verify_thm_1_3(u, c.Q, c.C)
    r = verify_cor_1_6(u, math.sqrt(base.constant))
    assert base.verdict == "holds" and r.verdict == "holds"


def test_lipschitz_bound_disk_bump():
    r = verify_lipschitz_bound(fx.disk_bump(1 / 128), CASE_I.gamma)
    assert r.verdict == "holds"


# --- counterexample ----------------------------------------------------------------------


def test_counterexample_n2_closed_form():
    tr = run_counterexample(2, measure=math.pi)
    exact = math.pi**2 * np.log(math.pi / tr.eps) - math.pi**2 + math.pi * tr.eps
    np.testing.assert_allclose(tr.energies, exact, rtol=1e-4)
    assert tr.slope == pytest.approx(math.pi**2, rel=0.01)
    assert tr.source_energy == pytest.approx(math.pi**2, rel=1e-4)


def test_counterexample_h10_same_slope():
    a = run_counterexample(2, "interior")
    b = run_counterexample(2, "H10")
    assert a.slope == pytest.approx(b.slope, rel=1e-12)


def test_counterexample_bad_dimension():
    with pytest.raises(ValueError):
        run_counterexample(0)


def test_trace_csv_round_trip():
    tr = run_counterexample(2)
    eps, e, x, slope = parse_trace_csv(tr.to_csv())
    assert eps.tobytes() == tr.eps.tobytes()
    assert e.tobytes() == tr.energies.tobytes()
    assert slope == tr.slope
    assert len(eps) == 16


def test_trace_csv_missing_trailer():
    with pytest.raises(FormatError):
        parse_trace_csv("eps,E,ln_inv_eps\n0.5,1.0,0.69\n")


# --- reports -----------------------------------------------------------------------------


def test_make_report_verdicts():
    assert make_report("x", 1.0, 2.0, 1.0).verdict == "holds"
    assert make_report("x", 2.0, 1.0, 1.0).verdict == "violated"
    assert make_report("x", 1.0, math.inf, 1.0).verdict == "vacuous"
    assert make_report("x", 1.0, 2.0, 1.0, vacuous="no").verdict == "vacuous"


def test_report_round_trip(tmp_path):
    r1 = verify_thm_1_1(fx.two_bump(1 / 32), CASE_I)
    r2 = make_report("y", math.nan, math.nan, 1.0, {"note": "a b"}, "why not")
    write_reports([r1, r2], tmp_path / "r.rrep")
    back = read_reports(tmp_path / "r.rrep")
    assert [b.to_text() for b in back] == [r1.to_text(), r2.to_text()]
    assert back[0].lhs == r1.lhs and back[0].metadata["gamma"] == r1.metadata["gamma"]


def test_report_parse_errors():
    with pytest.raises(FormatError, match="line 1"):
        parse_reports("name=x\n")
    with pytest.raises(FormatError):
        parse_reports("RREPORT v1\nname=x\nlhs=1.0\n")
