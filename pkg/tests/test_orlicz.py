import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rearrangement import GridFunction, StepProfile, make_domain, sample
from rearrangement import fixtures as fx
from rearrangement.errors import FormatError, RangeError
from rearrangement.geometry import gamma_for_case, search_constants
from rearrangement.inequalities import verify_thm_1_1, verify_thm_2_1
from rearrangement.orlicz import (
    NFunction,
    delta2_classify,
    format_nfunction,
    jensen_check,
    luxemburg_norm,
    modular,
    parse_nfunction,
    radial_gradient_norm,
    verify_orlicz_local,
    verify_orlicz_polya_szego,
)
from rearrangement.rearrange import decreasing_rearrangement

SQUARE = NFunction.power(2)
PLOG = NFunction.p_log(2)
CASE_I = gamma_for_case("i", 2)


def unit(h=1 / 16):
    return make_domain(bounds=[(0, 1), (0, 1)], h=h)


def test_modular_zero_function():
    assert modular(sample(unit(), 0.0), PLOG, 0.3) == 0.0


def test_modular_at_l2_norm():
    u = sample(unit(), "x1 + x2")
    assert modular(u, SQUARE, u.lp_norm(2)) == pytest.approx(1.0, rel=1e-12)


def test_modular_plog_unit_constant():
    assert modular(sample(unit(), 1.0), PLOG, 1.0) == pytest.approx(math.log(2), rel=1e-14)


def test_modular_profile_matches_grid():
    u = sample(unit(), "x1*x2")
    p = decreasing_rearrangement(u)
    assert modular(p, PLOG, 0.7) == pytest.approx(modular(u, PLOG, 0.7), rel=1e-13)


def test_modular_overflow_is_infinite():
    a = NFunction.custom("exp(t) - t - 1")
    assert modular(sample(unit(), 1.0), a, 1e-6) == math.inf


def test_modular_needs_positive_lambda():
    with pytest.raises(RangeError):
        modular(sample(unit(), 1.0), PLOG, 0.0)


@pytest.mark.parametrize("p", [1.5, 2, 3, 4])
def test_luxemburg_power_is_lp(p):
    u = sample(unit(1 / 32), "sin(3*x1) + x2**2")
    assert luxemburg_norm(u, NFunction.power(p)).value == pytest.approx(u.lp_norm(p), rel=1e-9)


def test_luxemburg_zero():
    assert luxemburg_norm(sample(unit(), 0.0), PLOG).value == 0.0


def test_luxemburg_modular_near_one():
    u = sample(unit(1 / 32), "x1 - 0.3")
    nrm = luxemburg_norm(u, PLOG)
    assert nrm.modular_at_value == pytest.approx(1.0, abs=1e-8)
    assert nrm.bracket[0] <= nrm.value <= nrm.bracket[1]


def test_homogeneity_surrogate():
    u = sample(unit(1 / 32), "x1*x2 + 0.1")
    for scale in (2.0, 0.25):
        assert luxemburg_norm(u * scale, SQUARE).value == pytest.approx(scale * luxemburg_norm(u, SQUARE).value, rel=1e-9)
    # A(2r) != 4 A(r) for r^2 log(1+r), yet the norm is still homogeneous
    assert luxemburg_norm(u * 2.0, PLOG).value == pytest.approx(2 * luxemburg_norm(u, PLOG).value, rel=1e-9)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_norm_axioms(seed):
    rng = np.random.default_rng(seed)
    d = make_domain(bounds=[(0, 1), (0, 1)], h=1 / 6)
    u = GridFunction(d, rng.standard_normal(d.cell_count))
    v = GridFunction(d, rng.standard_normal(d.cell_count))
    c = float(rng.uniform(-5, 5))
    nu, nv = luxemburg_norm(u, PLOG).value, luxemburg_norm(v, PLOG).value
    assert luxemburg_norm(u + v, PLOG).value <= nu + nv + 1e-9 * (nu + nv)
    assert luxemburg_norm(u * c, PLOG).value == pytest.approx(abs(c) * nu, rel=1e-9)


# --- N-functions -------------------------------------------------------------------------


def test_validation_of_families():
    assert NFunction.power(2).validate() == []
    assert PLOG.validate() == []
    assert NFunction.custom("exp(t) - t - 1").validate() == []
    assert NFunction.custom("t").validate() != []


def test_power_needs_p_above_one():
    with pytest.raises(ValueError):
        NFunction.power(1.0)


def test_delta2_power():
    d = delta2_classify(SQUARE)
    assert d.global_ and d.delta == 4.0 and d.method == "formula"


def test_delta2_plog_near_infinity():
    d = delta2_classify(NFunction.p_log(1.5))
    assert d.near_infinity
    t = np.logspace(-6, 6, 500)
    a = NFunction.p_log(1.5)
    assert np.all(a(2 * t) <= d.delta * a(t) * (1 + 1e-12))


def test_delta2_custom_heuristic():
    d = delta2_classify(NFunction.custom("t**3"))
    assert d.global_ and d.delta == pytest.approx(8.0) and d.method == "probes"
    d = delta2_classify(NFunction.custom("t**2*log1p(t)"))
    assert d.near_infinity


def test_delta2_exponential_fails():
    d = delta2_classify(NFunction.custom("exp(t) - t - 1"))
    assert not d.near_infinity and not d.global_


def test_delta2_probe_span():
    with pytest.raises(ValueError):
        delta2_classify(NFunction.custom("t**2"), probes=np.logspace(0, 3, 10))


def test_delta2_nan_fails():
    with pytest.raises(ValueError):
        delta2_classify(NFunction.custom("log(t - 1)"))


def test_nfunc_descriptor_round_trip():
    for a in (NFunction.power(2.5), NFunction.p_log(1.0), NFunction.custom("t**2*log1p(t)")):
        b = parse_nfunction(format_nfunction(a))
        assert b.descriptor() == a.descriptor()
        np.testing.assert_array_equal(a(np.array([0.5, 3.0])), b(np.array([0.5, 3.0])))


def test_nfunc_descriptor_errors():
    for bad in ("NFUNC v1\ntag=weird p=2\n", "tag=power-p\n", "tag=custom expr=nope(t)\n", "NFUNC v1\n"):
        with pytest.raises(FormatError):
            parse_nfunction(bad)


def test_jensen_gap_nonnegative():
    u = fx.two_bump(1 / 64)
    assert jensen_check(u, PLOG) >= -1e-12


# --- verifiers -----------------------------------------------------------------------------


def test_orlicz_3_4_reduces_to_l2():
    u = fx.disk_bump(1 / 64)
    a = verify_orlicz_polya_szego(u, CASE_I, SQUARE)
    b = verify_thm_1_1(u, CASE_I)
    assert a.verdict == b.verdict
    assert a.lhs == pytest.approx(math.sqrt(b.lhs), rel=1e-8)
    assert a.rhs == pytest.approx(math.sqrt(b.rhs), rel=1e-8)


def test_orlicz_3_4_radial_near_equality():
    for h in (1 / 64, 1 / 128):
        r = verify_orlicz_polya_szego(fx.disk_bump(h), CASE_I, PLOG)
        assert r.lhs / r.rhs == pytest.approx(1.0, abs=h)


def test_orlicz_3_4_non_radial_holds():
    r = verify_orlicz_polya_szego(fx.two_bump(1 / 64), CASE_I, PLOG)
    assert r.verdict == "holds"


def test_orlicz_3_4_negative_vacuous():
    r = verify_orlicz_polya_szego(fx.cosine_square(1 / 16), CASE_I, PLOG)
    assert r.verdict == "vacuous"


def test_orlicz_local_reduces_to_thm_2_1():
    u = fx.cosine_square(1 / 64)
    q = search_constants(u.domain).Q
    a = verify_orlicz_local(u, q, 0.1, SQUARE)
    b = verify_thm_2_1(u, q, 0.1)
    assert a.lhs == pytest.approx(math.sqrt(b.lhs), rel=1e-8)
    assert a.rhs == pytest.approx(math.sqrt(b.rhs), rel=1e-8)


def test_orlicz_local_lambda_limit():
    u = fx.cosine_square(1 / 32)
    r = verify_orlicz_local(u, 0.7, 0.5 - 1e-12, PLOG)
    assert r.metadata["lambda"] == pytest.approx(1.0, abs=1e-9)


def test_orlicz_local_cosine_r_log():
    u = fx.cosine_square(1 / 128)
    q = search_constants(u.domain).Q
    r = verify_orlicz_local(u, q, 0.1, NFunction.custom("t*log1p(t)"))
    assert r.verdict == "holds"


def test_orlicz_local_eps_range():
    with pytest.raises(RangeError):
        verify_orlicz_local(fx.cosine_square(1 / 16), 0.7, 0.5, PLOG)


def test_radial_gradient_norm_of_flat_profile():
    p = StepProfile([0.0, 1.0, 2.0], [3.0, 3.0])
    from rearrangement.grid import BallDomain

    assert radial_gradient_norm(p, BallDomain.with_measure(2.0, 2), PLOG).value == 0.0
