"""Monodromy, multiplier and multi-period propagation checks."""
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from cyclicwave import coeffs, floquet
from cyclicwave.errors import ParameterError

from conftest import LAM_WITNESS

# Frozen instability intervals for sqrt-sin eps=0.5, n=3 over (5, 17),
# 200 scan points (bisection-refined, so grid independent past ~100 pts).
IVAL_LO = 5.917536903266331
IVAL_HI = 16.14912452889447


@pytest.fixture(scope="module")
def mono_witness(pot3):
    return floquet.monodromy(pot3, LAM_WITNESS, tol=1e-12)


def test_constant_coefficient_closed_form():
    b = coeffs.make_builtin("constant", c=1.0)
    pot = coeffs.hill_potential(b, n=3)
    for lam in np.linspace(0.7, 80.0, 25):
        m = floquet.monodromy(pot, lam)
        root = math.sqrt(lam)
        assert m.trace == pytest.approx(2.0 * math.cos(root), abs=1e-9)
        assert m.b21 == pytest.approx(math.sin(root) / root, abs=1e-9)
        assert m.det == pytest.approx(1.0, abs=1e-9)


def test_determinant_is_one(pot3):
    for lam in np.linspace(0.3, 55.0, 40):
        assert floquet.monodromy(pot3, lam).det == pytest.approx(1.0, abs=1e-9)


def test_monodromy_against_direct_ode(pot3):
    """Independent oracle: build the fundamental matrix columns with a
    generic stiff integrator at tight tolerance."""
    lam = LAM_WITNESS

    def rhs(t, y):
        bt = float(pot3.b.eval(t))
        return [y[1], -(lam * bt * bt - float(pot3.q(t))) * y[0]]

    cols = []
    for y0 in ([1.0, 0.0], [0.0, 1.0]):
        s = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853",
                      rtol=1e-12, atol=1e-14)
        cols.append(s.y[:, -1])
    m = floquet.monodromy(pot3, lam, tol=1e-12)
    # the package state is (w_t, w): the (1,0) data is w=0, w_t=1
    w_a, wt_a = cols[0]  # from w=1, w_t=0
    w_b, wt_b = cols[1]  # from w=0, w_t=1
    assert m.b22 == pytest.approx(w_a, rel=1e-9)
    assert m.b12 == pytest.approx(wt_a, rel=1e-9)
    assert m.b21 == pytest.approx(w_b, rel=1e-9)
    assert m.b11 == pytest.approx(wt_b, rel=1e-9)


def test_scan_finds_frozen_interval(pot3):
    ivals = floquet.scan_instability(pot3, (5.0, 17.0), 200)
    assert len(ivals) == 1
    iv = ivals[0]
    assert iv.lambda_lo == pytest.approx(IVAL_LO, rel=1e-8)
    assert iv.lambda_hi == pytest.approx(IVAL_HI, rel=1e-8)
    assert iv.max_abs_trace > 2.0 + 1e-3
    assert IVAL_LO < iv.witness_lambda < IVAL_HI


def test_find_good_lambda(pot3):
    ivals = floquet.scan_instability(pot3, (5.0, 17.0), 400)
    lam, m = floquet.find_good_lambda(ivals, pot3)
    assert lam == pytest.approx(LAM_WITNESS, rel=1e-10)
    pair = floquet.classify(m)
    assert pair.kind == "unstable"
    assert abs(m.b21) > 1e-6


def test_classify_kinds(pot3):
    stable = floquet.classify(floquet.monodromy(pot3, 3.0))
    unstable = floquet.classify(floquet.monodromy(pot3, LAM_WITNESS))
    assert stable.kind == "stable"
    assert unstable.kind == "unstable"
    assert unstable.mu0 > 1.0
    assert unstable.sign == -1  # trace is below -2 on this interval


def test_multi_period_closed_form(pot3, mono_witness):
    """W(10), V(10) from the multiplier closed forms against direct
    10-period integration of the fundamental pair."""
    pair = floquet.FundamentalPair(pot3, LAM_WITNESS, tol=1e-12)
    vals = floquet.multi_period_values(mono_witness, 10)
    assert vals.log10_scale == 0.0
    assert vals.W == pytest.approx(pair.W(10.0), rel=1e-8)
    assert vals.V == pytest.approx(pair.V(10.0), rel=1e-8)


def test_multi_period_m1_reduction(mono_witness):
    vals = floquet.multi_period_values(mono_witness, 1)
    assert vals.W == pytest.approx(mono_witness.b21, rel=1e-12)
    assert vals.V == pytest.approx(mono_witness.b22, rel=1e-12)


def test_printed_variant_is_wrong(mono_witness):
    """The sign-flipped V variant fails the M=1 reduction V(1) = b22."""
    v1 = floquet.printed_v_variant(mono_witness, 1)
    assert abs(v1 - mono_witness.b22) > 1e-3
    assert floquet.multi_period_values(mono_witness, 1).V == pytest.approx(
        mono_witness.b22, rel=1e-12)


def test_multi_period_overflow_guard(mono_witness):
    vals = floquet.multi_period_values(mono_witness, 3000)
    assert vals.log10_scale > 0.0
    assert math.isfinite(vals.W) and math.isfinite(vals.V)
    # reconstructed magnitude: log10|W(3000)| = log10|W| + scale
    mu0 = floquet.classify(mono_witness).mu0
    expect = 3000.0 * math.log10(mu0) + math.log10(
        abs(mono_witness.b21) / (mu0 - 1.0 / mu0))
    got = math.log10(abs(vals.W)) + vals.log10_scale
    assert got == pytest.approx(expect, abs=1e-6)


def test_propagate_matches_direct(pot3, mono_witness):
    pair = floquet.FundamentalPair(pot3, LAM_WITNESS, tol=1e-12)
    for t in (0.25, 2.5, 7.75, 12.0):
        w, wt = floquet.propagate(mono_witness, pot3, LAM_WITNESS, t,
                                  (0.0, 1.0), tol=1e-12)
        assert w == pytest.approx(pair.W(t), rel=1e-9, abs=1e-12)
        assert wt == pytest.approx(pair.W_t(t), rel=1e-9, abs=1e-12)


def test_propagate_linearity(pot3, mono_witness):
    rng = np.random.default_rng(3)
    a, b, c, d = rng.normal(size=4)
    t = 5.5
    w1 = floquet.propagate(mono_witness, pot3, LAM_WITNESS, t, (a, b))
    w2 = floquet.propagate(mono_witness, pot3, LAM_WITNESS, t, (c, d))
    w3 = floquet.propagate(mono_witness, pot3, LAM_WITNESS, t,
                           (a + 2 * c, b + 2 * d))
    assert w3[0] == pytest.approx(w1[0] + 2 * w2[0], rel=1e-9, abs=1e-12)
    assert w3[1] == pytest.approx(w1[1] + 2 * w2[1], rel=1e-9, abs=1e-12)


def test_stability_dichotomy_trace(pot3):
    """Inside the frozen interval |trace| > 2, outside (gap) |trace| < 2."""
    inside = floquet.trace_curve(pot3, np.linspace(7.0, 15.0, 9))
    outside = floquet.trace_curve(pot3, np.array([1.0, 3.0, 5.0, 17.0, 20.0]))
    assert np.all(np.abs(inside) > 2.0)
    assert np.all(np.abs(outside) < 2.0)


def test_scan_validation(pot3):
    with pytest.raises(ParameterError):
        floquet.scan_instability(pot3, (5.0, 17.0), 10)
    with pytest.raises(ParameterError):
        floquet.scan_instability(pot3, (17.0, 5.0), 200)
