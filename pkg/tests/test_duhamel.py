import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boltzgrad.bloch import ALPHA_PRESETS, bloch_pairing
from boltzgrad.duhamel import (DuhamelSetup, assemble_Q, eval_I00, eval_I1, eval_I2,
                               gl_panels)
from boltzgrad.phasespace import ScalingParams, bg_rescale
from boltzgrad.symbolcalc import ComplexGaussian, SymbolPair

ALPHA2 = np.array(ALPHA_PRESETS[2])


def setup(r, pair=None, alpha=ALPHA2):
    return DuhamelSetup(pair or SymbolPair.isotropic(2), ScalingParams(2, r), alpha)


@pytest.mark.parametrize("r", [0.1, 0.2])
def test_I00_leading_order(r):
    assert abs(eval_I00(setup(r)).value - 0.25) <= 1e-8


def test_I00_matches_bloch_pairing():
    a = ComplexGaussian(4, 1.0, np.diag([1.0, 1.0, 1.5, 1.0]), [0.0, 0.0, 0.6, -0.3])
    b = ComplexGaussian.isotropic(4)
    p = ScalingParams(2, 0.3)
    v = eval_I00(DuhamelSetup(SymbolPair(a, b, 2), p, ALPHA2)).value
    ref = bloch_pairing(bg_rescale(a, p), bg_rescale(b, p), ALPHA2)
    assert abs(v - ref) <= 1e-12


def test_I00_momentum_shift():
    # b moved by 4 in momentum: only the Gaussian overlap exp(-8 pi) / 4 survives
    a = ComplexGaussian.isotropic(4)
    b = a.pullback(np.eye(4), [0.0, 0.0, -4.0, 0.0])
    v = eval_I00(setup(0.1, SymbolPair(a, b, 2))).value
    assert v == pytest.approx(np.exp(-8 * np.pi) / 4, rel=1e-8)


@pytest.mark.parametrize("r", [0.1, 0.2])
def test_I1_is_time_independent(r):
    S = setup(r)
    s = [0.0, 0.01, 0.05]
    v11 = np.asarray(eval_I1(S, 1, s).value)
    v01 = np.asarray(eval_I1(S, 0, s).value)
    np.testing.assert_allclose(v11, r * r / 4, atol=1e-8)
    assert np.abs(v01 - v11).max() <= 1e-9


@pytest.mark.parametrize("r", [0.1, 0.2])
def test_first_order_cancels(r):
    S = setup(r)
    q0 = assemble_Q(S, 0, 0.5).value
    q1 = assemble_Q(S, 1, 0.5).value
    assert abs(q1) <= 1e-6 * abs(q0)
    assert abs(q0.imag) <= 1e-12


def test_I2_diagonal_and_branch():
    S = setup(0.2)
    s = [0.01, 0.03]
    np.testing.assert_allclose(eval_I2(S, 2, s, s).value, eval_I2(S, 0, s, s).value, atol=1e-12)
    plus = eval_I2(S, "+", [0.01, 0.03], [0.02, 0.01]).value
    assert plus[0] == pytest.approx(eval_I2(S, 2, 0.01, 0.02).value, abs=1e-15)
    assert plus[1] == pytest.approx(eval_I2(S, 0, 0.03, 0.01).value, abs=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.floats(0.01, 3.0))
def test_gl_panels_exact_on_polynomials(panels, k, b):
    x, w = gl_panels(0.0, b, panels, order=8, grade_at=0.0, grade_to=b / 40)
    assert np.all(np.diff(x) > 0)
    assert w @ x ** k == pytest.approx(b ** (k + 1) / (k + 1), rel=1e-12)


@pytest.mark.slow
def test_second_order_direct_and_theta_routes_agree():
    S = setup(0.3)
    d = assemble_Q(S, 2, 0.5)
    th = assemble_Q(S, 2, 0.5, method="theta")
    assert abs(d.value - th.value) <= 1e-8 * abs(d.value)
    assert th.meta["I12"] == pytest.approx(d.meta["I12"], rel=1e-10)
    assert th.meta["Iplus"] == pytest.approx(d.meta["I22"] + d.meta["I02"], rel=1e-3)
    # the l = 1 term is a squared modulus
    assert abs(d.meta["I12"].imag) <= 1e-15
