from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netconsensus.functions import (
    BumpReciprocal,
    Constant,
    ExpSgn,
    Linear,
    PiecewiseLinear,
    ReciprocalAbsShift,
    erf,
    from_dict,
    validate_gain,
    validate_interaction,
)
from netconsensus.numerics import quad_adaptive

FAMILIES = [
    Constant(2.5),
    Linear(1.7),
    ExpSgn(20.0),
    ExpSgn(0.3),
    ReciprocalAbsShift(0.1),
    ReciprocalAbsShift(1.3),
    BumpReciprocal(5e4, 5e5, 23.0, 0.4),
    BumpReciprocal(0.8, 1.2, -0.5, 0.7),
    PiecewiseLinear([-2.0, 0.0, 1.0, 3.0], [0.5, 1.5, 0.7, 2.0]),
    PiecewiseLinear([0.0, 0.5, 2.0], [0.0, 1.0, 1.5], odd=True),
]
ODD = [f for f in FAMILIES if f.is_odd]
POSITIVE = [f for f in FAMILIES if f.bounds()[0] > 0]


def _ids(fs):
    return [f"{f.family}-{k}" for k, f in enumerate(fs)]


@pytest.mark.parametrize("f, y, want", [
    (ExpSgn(20), 0.0, 0.0),
    (ExpSgn(20), 1.0, 20 * (math.e - 1)),
    (ExpSgn(20), -1.0, -20 * (math.e - 1)),
    (ReciprocalAbsShift(0.1), -3.0, 1 / 3.1),
    (Constant(2), 7.0, 2.0),
    (Linear(3), -2.0, -6.0),
    (BumpReciprocal(1.0, 3.0, 0.0, 1.0), 0.0, 0.25),
])
def test_eval_examples(f, y, want):
    assert f(y) == pytest.approx(want, rel=1e-15)


def test_expsgn_reference_value():
    assert ExpSgn(20)(1.0) == pytest.approx(34.366, abs=1e-3)


@pytest.mark.parametrize("f, lo, hi, want", [
    (Constant(2), 0.0, 3.0, 6.0),
    (Linear(1), 0.0, 1.7, 1.7 ** 2 / 2),
    (Linear(1), 0.0, -2.2, 2.2 ** 2 / 2),
    (ExpSgn(20), 0.0, 2.0, 20 * (math.e ** 2 - 3)),
])
def test_integral_examples(f, lo, hi, want):
    assert f.integral(lo, hi) == pytest.approx(want, rel=1e-13)


def test_expsgn_integral_cross_check_quadrature():
    assert ExpSgn(20).integral(0.0, 2.0) == pytest.approx(quad_adaptive(ExpSgn(20), 0.0, 2.0), abs=1e-8)


def test_integral_vectorized():
    f = ExpSgn(1.0)
    lo = np.array([0.0, -1.0, 2.0])
    hi = np.array([1.0, 1.0, -3.0])
    got = f.integral(lo, hi)
    want = [f.integral(a, b) for a, b in zip(lo, hi)]
    np.testing.assert_allclose(got, want, rtol=1e-14)


@pytest.mark.parametrize("f", FAMILIES, ids=_ids(FAMILIES))
def test_closed_form_integrals_match_quadrature(f):
    rng = np.random.default_rng(sum(map(ord, f.family)))
    center = 23.0 if isinstance(f, BumpReciprocal) and f.center == 23.0 else 0.0
    for _ in range(50):
        lo, hi = center + rng.uniform(-4, 4, 2)
        scale = 1.0 + abs(quad_adaptive(lambda y: abs(f(y)), lo, hi, 1e-12))
        assert f.integral(lo, hi) == pytest.approx(quad_adaptive(f, lo, hi, 1e-12), abs=1e-8 * scale)


@pytest.mark.parametrize("f", POSITIVE, ids=_ids(POSITIVE))
def test_reciprocal_integrals_match_quadrature(f):
    rng = np.random.default_rng(7)
    center = 23.0 if isinstance(f, BumpReciprocal) and f.center == 23.0 else 0.0
    for _ in range(50):
        lo, hi = center + rng.uniform(-4, 4, 2)
        c = center + rng.uniform(-2, 2)
        r = quad_adaptive(lambda y: 1.0 / f(y), lo, hi, 1e-12)
        m = quad_adaptive(lambda y: (y - c) / f(y), lo, hi, 1e-12)
        assert f.reciprocal_integral(lo, hi) == pytest.approx(r, abs=1e-8 * (1 + abs(r)))
        assert f.reciprocal_moment(lo, hi, c) == pytest.approx(m, abs=1e-8 * (1 + abs(m)))


@pytest.mark.parametrize("f", ODD, ids=_ids(ODD))
@given(x=st.floats(0, 6))
def test_odd_primitive_is_even(f, x):
    assert f.integral(0.0, x) == pytest.approx(f.integral(0.0, -x), rel=1e-12, abs=1e-14)


@settings(max_examples=50)
@given(st.floats(1e-3, 1e3), st.floats(0, 1e3), st.floats(-50, 50), st.floats(1e-2, 10))
def test_bump_positive(base, amp, center, width):
    f = BumpReciprocal(base, amp, center, width)
    y = np.linspace(center - 10 * width, center + 10 * width, 4001)
    assert np.all(f(y) > 0)


@given(st.floats(-8, 8))
def test_erf_matches_math(y):
    assert erf(y) == pytest.approx(math.erf(y), abs=1e-14)


@pytest.mark.parametrize("f, ok, lower", [
    (Constant(0.5), True, 0.5),
    (ReciprocalAbsShift(0.1), True, 1 / 10.1),
    (Constant(-1.0), False, -1.0),
])
def test_validate_gain(f, ok, lower):
    rep = validate_gain(f, (-10.0, 10.0))
    assert rep.ok is ok
    assert rep.gamma_lower == pytest.approx(lower, rel=1e-12)


def test_validate_gain_bounds_constant():
    rep = validate_gain(Constant(0.5))
    assert (rep.gamma_lower, rep.gamma_upper) == (0.5, 0.5)


@pytest.mark.parametrize("f, odd, sign, est", [
    (Linear(5), True, True, 5.0),
    (ExpSgn(20), True, True, None),
    (Constant(1), False, False, None),
    (PiecewiseLinear([0.0, 1.0], [0.0, 2.0], odd=True), True, True, 2.0),
])
def test_validate_interaction(f, odd, sign, est):
    rep = validate_interaction(f, (-3.0, 3.0))
    assert rep.odd_ok is odd
    assert rep.sign_ok is sign
    if est is not None:
        assert rep.lipschitz_estimate == pytest.approx(est, rel=1e-9)


def test_pwl_odd_construction_mirrors():
    f = PiecewiseLinear([1.0, 2.0], [1.0, 3.0], odd=True)
    assert f.xs == (-2.0, -1.0, 0.0, 1.0, 2.0)
    assert f(-1.5) == -f(1.5)
    with pytest.raises(ValueError):
        PiecewiseLinear([-1.0, 1.0], [0.0, 1.0], odd=True)
    with pytest.raises(ValueError):
        PiecewiseLinear([0.0, 1.0], [0.5, 1.0], odd=True)
    with pytest.raises(ValueError):
        PiecewiseLinear([0.0, 0.0], [1.0, 1.0])


@pytest.mark.parametrize("f", FAMILIES, ids=_ids(FAMILIES))
def test_dict_round_trip(f):
    g = from_dict(f.to_dict())
    assert g == f
    assert type(g) is type(f)


def test_from_dict_unknown_family():
    with pytest.raises(ValueError):
        from_dict({"family": "Cubic", "params": {}})


@pytest.mark.parametrize("f, lo, hi", [
    (Constant(2.0), 2.0, 2.0),
    (ReciprocalAbsShift(0.1), 0.0, 10.0),
    (BumpReciprocal(1.0, 3.0, 0.0, 1.0), 0.25, 1.0),
])
def test_bounds(f, lo, hi):
    assert f.bounds() == pytest.approx((lo, hi))


def test_divergent_primitive_for_interactions():
    # the primitive of every odd family grows without bound
    for f in (Linear(0.1), ExpSgn(0.1)):
        assert f.integral(0.0, 1e2) > 1e2
