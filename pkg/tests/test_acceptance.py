"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

import test_symbolcalc as sc
from boltzgrad.bloch import ALPHA_PRESETS, LatticeWindow
from boltzgrad.boltzmann import ShellQuadrature, shell_integral
from boltzgrad.duhamel import DuhamelSetup, assemble_Q, eval_I00
from boltzgrad.harness import ExperimentConfig, emit_results, run_experiment
from boltzgrad.modular import GroupElement, gamma_S, gamma_T, group_mul
from boltzgrad.phasespace import ScalingParams
from boltzgrad.symbolcalc import SymbolPair
from boltzgrad.theta import theta_eval

from test_boltzmann import QMC_CASES


@pytest.fixture
def report(capsys):
    def emit(n, ok, text, seconds):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'}  criterion {n:>2}: {text} [{seconds:.1f} s]")
    return emit


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def test_zeroth_order(report):
    with Clock() as c:
        devs = {}
        for r in (0.2, 0.1):
            S = DuhamelSetup(SymbolPair.isotropic(2), ScalingParams(2, r), ALPHA_PRESETS[2])
            devs[r] = abs(eval_I00(S).value - 0.25)
    ok = devs[0.2] <= 1e-6 and devs[0.1] <= 1e-8 and c.seconds <= 10
    report(1, ok, f"zeroth order |I00 - 1/4| = {devs[0.2]:.2e} (r=0.2, <= 1e-6), "
                  f"{devs[0.1]:.2e} (r=0.1, <= 1e-8)", c.seconds)
    assert ok


def test_first_order_cancels(report):
    with Clock() as c:
        S = DuhamelSetup(SymbolPair.isotropic(2), ScalingParams(2, 0.1, t=0.5), ALPHA_PRESETS[2])
        ratio = abs(assemble_Q(S, 1, 0.5).value) / abs(assemble_Q(S, 0, 0.5).value)
    ok = ratio <= 1e-6 and c.seconds <= 60
    report(2, ok, f"first-order null |Q1|/|Q0| = {ratio:.2e} (<= 1e-6)", c.seconds)
    assert ok


@pytest.mark.slow
def test_oracle_equivalence(report):
    cfg = ExperimentConfig.bundled("duhamel-vs-oracle")
    p = ScalingParams(2, cfg.radii[0])
    npts = len(LatticeWindow.default(p).points(np.array(ALPHA_PRESETS[2])))
    with Clock() as c:
        rec = run_experiment(cfg)
    slope = rec.fits["lam_slope"]
    ok = abs(slope - 3.0) <= 0.15 and npts <= 41 ** 2 and c.seconds <= 300
    report(3, ok, f"oracle residual slope in lam = {slope:.4f} (3 +- 0.15), "
                  f"{npts} lattice points (<= {41 ** 2})", c.seconds)
    assert ok


def test_theta_gamma_invariance(report):
    rng = np.random.default_rng(2024)
    d = 2
    worst = 0.0
    with Clock() as c:
        for _ in range(100):
            f = sc.random_gaussian(rng, 2 * d)
            tau = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.6, 2.5))
            g = GroupElement.from_coords(tau, rng.uniform(0, 2 * math.pi), rng.uniform(-1, 1, 2 * d))
            ref, _ = theta_eval(f, g, reduce=False)
            for gam in (gamma_T(d), gamma_S(d)):
                val, _ = theta_eval(f, group_mul(gam.element(), g), reduce=False)
                worst = max(worst, abs(val - ref) / abs(ref))
    ok = worst <= 1e-8 and c.seconds <= 10
    report(4, ok, f"theta Gamma-invariance worst rel err = {worst:.2e} (<= 1e-8)", c.seconds)
    assert ok


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="deviation is not monotone in r: it rises from r = 0.2 "
                                       "to r = 0.15 before falling")
def test_theta_mean_value(report):
    with Clock() as c:
        rec = run_experiment(ExperimentConfig.bundled("theta-mean"))
    devs = [w.rel_dev for w in rec.rows]
    mono = all(b < a for a, b in zip(devs, devs[1:]))
    ok = mono and devs[-1] <= 0.15 and c.seconds <= 600
    report(5, ok, "theta mean deviations " + ", ".join(f"{w.r:g}: {w.rel_dev:.3f}" for w in rec.rows)
           + f" (monotone: {mono}; final <= 0.15)", c.seconds)
    assert ok


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="relative deviation at r = 0.05 exceeds 20%")
def test_second_order(report):
    with Clock() as c:
        rec = run_experiment(ExperimentConfig.bundled("second-order"))
    main = [w for w in rec.rows if ":" not in w.alpha_id]
    devs = [w.rel_dev for w in main]
    mono = all(b < a for a, b in zip(devs, devs[1:]))
    route = rec.fits.get("route_rel_dev", float("inf"))
    ok = mono and devs[-1] <= 0.20 and route <= 0.01 and c.seconds <= 900
    report(6, ok, "second order deviations " + ", ".join(f"{w.r:g}: {w.rel_dev:.3f}" for w in main)
           + f" (monotone: {mono}; final <= 0.20), route {route:.1e} (<= 0.01)", c.seconds)
    assert ok


def test_shell_quadrature(report):
    with Clock() as c:
        worst = 0.0
        for rho, h, d, want in QMC_CASES:
            got = shell_integral(h, np.r_[rho, np.zeros(d - 1)])
            worst = max(worst, abs(got - want) / abs(want))
        anchors = [abs(ShellQuadrature.default(2).area - 2 * math.pi),
                   abs(ShellQuadrature.default(3).area - 4 * math.pi)]
    ok = worst <= 1e-3 and max(anchors) <= 1e-12 and c.seconds <= 30
    report(7, ok, f"shell quadrature worst rel err vs sampling = {worst:.1e} (<= 1e-3), "
                  f"area anchors {max(anchors):.1e} (<= 1e-12)", c.seconds)
    assert ok


def test_symbol_calculus_suite(report):
    checks = [
        ("Fourier involution", sc.test_fourier_involution, ()),
        ("Poisson summation", sc.test_poisson_summation, (1,)),
        ("Poisson summation", sc.test_poisson_summation, (2,)),
        ("Poisson summation", sc.test_poisson_summation, (3,)),
        ("metaplectic parity and quarter turn", sc.test_metaplectic_parity_and_quarter_turn, (2,)),
        ("metaplectic parity and quarter turn", sc.test_metaplectic_parity_and_quarter_turn, (3,)),
        ("metaplectic eighth turn", sc.test_metaplectic_eighth_turn_against_quadrature, ()),
        ("integral vs quadrature", sc.test_integral_against_quadrature_2d, ()),
        ("integral examples", sc.test_integral_examples, ()),
    ]
    failed = []
    with Clock() as c:
        for name, fn, args in checks:
            try:
                fn(*args)
            except AssertionError:
                failed.append(name)
    ok = not failed and c.seconds <= 30
    report(8, ok, f"symbol calculus suite: {len(checks) - len(failed)}/{len(checks)} checks"
           + (f", failed: {', '.join(failed)}" if failed else ""), c.seconds)
    assert ok


@pytest.mark.slow
def test_alpha_average(report):
    with Clock() as c:
        rec = run_experiment(ExperimentConfig.bundled("alpha-average"))
    f = rec.fits
    z = abs(f["mean_rel_dev"] - f["preset_rel_dev"]) / f["std_err"]
    ok = z <= 2.0 and len(rec.rows) == 33 and c.seconds <= 1200
    report(9, ok, f"alpha average mean {f['mean_rel_dev']:.4f} vs preset {f['preset_rel_dev']:.4f}, "
                  f"{z:.2f} SE (<= 2)", c.seconds)
    assert ok


def test_determinism(report, tmp_path):
    cfg = ExperimentConfig.bundled("first-cancel")
    cfg = replace(cfg, alpha_mode="random", alpha_count=2, seed=99, radii=(0.2, 0.1))
    with Clock() as c:
        out = []
        for k in range(2):
            rec = run_experiment(cfg)
            out.append([p.read_bytes() for p in emit_results(rec, out_dir=tmp_path / str(k))])
        same = out[0] == out[1]
        rec2 = run_experiment(replace(cfg, threads=2))
        drift = max(abs(a.value - b.value) for a, b in zip(rec.rows, rec2.rows))
    ok = same and drift <= 1e-13
    report(10, ok, f"determinism: byte-identical reruns {same}, thread drift {drift:.1e} (<= 1e-13)",
           c.seconds)
    assert ok
