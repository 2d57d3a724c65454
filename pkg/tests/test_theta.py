import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from boltzgrad.bloch import ALPHA_PRESETS
from boltzgrad.duhamel import DuhamelSetup
from boltzgrad.modular import (GammaElement, GroupElement, gamma_S, gamma_T, group_mul,
                               psi_beta)
from boltzgrad.phasespace import ScalingParams
from boltzgrad.symbolcalc import ComplexGaussian, SymbolPair
from boltzgrad.theta import (HorocycleExperiment, build_order2_testfunction, horocycle_mean,
                             separable_family, theta_diagonal, theta_eval, theta_eval_higher,
                             theta_F, theta_limit)

from test_symbolcalc import random_gaussian

seeds = st.integers(0, 2 ** 32 - 1)


def test_theta_examples():
    f = ComplexGaussian.isotropic(4)
    g = GroupElement.from_coords(100j, 0.0, np.zeros(4))
    # only m = 0 survives: v^(d/2) = 100
    val, tail = theta_eval(f, g)
    assert val == pytest.approx(100.0, rel=1e-10)
    assert tail <= 1e-100
    z = ComplexGaussian(4, 0.0, np.eye(4), np.zeros(4), check=False)
    assert theta_eval(z, g)[0] == 0


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_theta_is_gamma_invariant(seed):
    # unreduced evaluation, so the invariance is not built in
    rng = np.random.default_rng(seed)
    d = 2
    f = random_gaussian(rng, 2 * d)
    g = GroupElement.from_coords(complex(rng.uniform(-0.5, 0.5), rng.uniform(0.7, 2.0)),
                                 rng.uniform(0, 2 * math.pi), rng.uniform(-1, 1, 2 * d))
    ref, _ = theta_eval(f, g, reduce=False)
    for gam in (gamma_T(d), gamma_S(d), GammaElement(((2, 1), (1, 1)), (1, 0, 0, -1))):
        val, _ = theta_eval(f, group_mul(gam.element(), g), reduce=False)
        assert abs(val - ref) <= 1e-11 * max(1.0, abs(ref))
    red, _ = theta_eval(f, g)
    assert abs(red - ref) <= 1e-11 * max(1.0, abs(ref))


def test_theta_diagonal_dominates_high_in_cusp():
    f = ComplexGaussian.isotropic(4)
    rng = np.random.default_rng(0)
    devs = []
    for v in (4.0, 8.0, 16.0):
        g = GroupElement.from_coords(complex(0.2, v), 0.3, rng.uniform(-1, 1, 4))
        full, _ = theta_eval(f, g, reduce=False)
        diag, _ = theta_diagonal(f, g)
        devs.append(abs(full - diag))
    # nearest off-diagonal pair m1 != m2 costs at least exp(-pi v / 2)
    for v, dev in zip((4.0, 8.0, 16.0), devs):
        assert dev <= 4 * v * math.exp(-math.pi * v / 2)
    assert devs[2] <= 1e-9


def test_theta_dominated_by_psi():
    # |Theta_f| <= L (1 + Psi^1): fit L on one sample, check it on a fresh one
    f = ComplexGaussian.isotropic(4)
    rng = np.random.default_rng(4)

    def ratios(n):
        out = []
        for _ in range(n):
            tau = complex(rng.uniform(-0.5, 0.5), math.exp(rng.uniform(math.log(1e-3), math.log(5))))
            xi = rng.uniform(-1, 1, 4)
            g = GroupElement.from_coords(tau, rng.uniform(0, 2 * math.pi), xi)
            out.append(abs(theta_eval(f, g)[0]) / (1 + psi_beta(tau, xi, 1.0, 1.0)))
        return np.array(out)

    L = 2 * ratios(100).max()
    assert ratios(100).max() <= L


def test_theta_F_converges_in_r():
    fam = separable_family(ComplexGaussian.isotropic(4))
    comps = fam.components(0.3)
    g = GroupElement.from_coords(0.2 + 0.7j, 0.0, np.random.default_rng(4).uniform(-1, 1, 4))
    F0, _ = theta_F(comps, g, 0.0)
    devs = [abs(theta_F(comps, g, r)[0] - F0) for r in (0.4, 0.2, 0.1, 0.05)]
    assert all(b < a for a, b in zip(devs, devs[1:]))
    assert devs[-1] <= 1e-6


@pytest.mark.parametrize("k", [2, 3])
def test_higher_theta_factorizes(k):
    rng = np.random.default_rng(2)
    fs = [random_gaussian(rng, 2) for _ in range(k)]
    gs = [GroupElement.from_coords(complex(rng.uniform(-0.5, 0.5), rng.uniform(0.8, 1.4)),
                                   rng.uniform(0, 6), rng.uniform(-1, 1, 2)) for _ in range(k)]
    # variables (y_1..y_k, y'_1..y'_k); f_j depends on (y_j, y'_j)
    F = fs[0].embed(2 * k, [0, k])
    for j in range(1, k):
        F = F * fs[j].embed(2 * k, [j, k + j])
    val, _ = theta_eval_higher(F, gs)
    ref = np.prod([theta_eval(f, g, reduce=False)[0] for f, g in zip(fs, gs)])
    assert abs(val - ref) <= 1e-9 * max(1.0, abs(ref))
    assert theta_eval_higher(fs[0], gs[:1])[0] == pytest.approx(
        theta_eval(fs[0], gs[0], reduce=False)[0], rel=1e-13)


def test_theta_limits():
    assert theta_limit(ComplexGaussian.isotropic(4), 2) == pytest.approx(math.pi + 1, rel=1e-12)
    assert theta_limit(ComplexGaussian.isotropic(6), 3) == pytest.approx(2 + 2 ** -0.5, rel=1e-12)
    # w(0) = 0 leaves the diagonal term only
    assert theta_limit(ComplexGaussian.isotropic(6), 3, w0=0.0) == pytest.approx(2 ** -0.5, rel=1e-12)
    fam = separable_family(ComplexGaussian.isotropic(6))
    want = 2 + 2 ** -1.5 * erf(math.sqrt(math.pi))
    assert theta_limit(fam, 3) == pytest.approx(want, rel=1e-10)


def test_horocycle_mean_empty_support():
    exp = HorocycleExperiment(2, 0.5, ALPHA_PRESETS[2], w_support=(0.0, 0.0))
    val, tail = horocycle_mean(ComplexGaussian.isotropic(4), exp)
    assert val == 0 and tail == 0


@pytest.fixture(scope="module")
def order2_setup():
    return DuhamelSetup(SymbolPair.isotropic(2), ScalingParams(2, 0.3), ALPHA_PRESETS[2])


def test_light_testfunction_envelope(order2_setup):
    t = 0.5
    f = build_order2_testfunction(order2_setup, t, "light")
    assert f.support == (-t, t)
    assert f.components(0.6) == []
    y1, y2, eta = np.array([0.1, -0.2]), np.array([0.3, 0.05]), np.array([0.2, 0.1])
    base = f(y1, y2, 0.0, eta) / t
    # for u <= 0 the phase vanishes and only the (t - |u|) weight changes
    assert f(y1, y2, -0.2, eta) == pytest.approx((t - 0.2) * base, rel=1e-13)


def test_light2_testfunction_diagonal(order2_setup):
    # at y1 = y2 the phase drops out and the u' integral gives 2 (t - |u|) / 2
    t = 0.5
    f = build_order2_testfunction(order2_setup, t, "light2", inner_order=12)
    y, eta = np.array([0.1, -0.2]), np.array([0.2, 0.1])
    base = f(y, y, 0.0, eta) / t
    for u in (-0.3, 0.1, 0.45):
        assert f(y, y, u, eta) == pytest.approx((t - abs(u)) * base, rel=1e-12)
    with pytest.raises(ValueError):
        build_order2_testfunction(order2_setup, t, "heavy")
