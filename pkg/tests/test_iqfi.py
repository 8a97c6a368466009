"""Frequency integration: adaptive quadrature, tail handling, averages."""

import math

import numpy as np
import pytest

from iqfi_lab.bounds import pi_train_closed_form, ramsey_closed_form
from iqfi_lab.cli import _haar_trace_mean
from iqfi_lab.iqfi import (
    QuadratureConfig,
    QuadratureNonConvergence,
    cross_spectral_integral,
    fit_loglog_slope,
    haar_average_iqfi,
    integrate_iqfi,
    integrate_qfi_band,
    sweep_iqfi_vs_T,
)
from iqfi_lab.protocol import (
    make_pi2_train,
    make_pi_train,
    make_ramsey,
    random_pulse_sequence,
)
from iqfi_lab.signal_core import SignalParams

FLAT = SignalParams(B=0.0, omega=0.0, phi=0.0, zeta=1.0)


def test_ramsey_integral_matches_closed_form():
    for T in (1.0, 4.0, 9.0):
        for phi in (0.0, 0.7, 2.5):
            sig = SignalParams(B=0.0, omega=0.0, phi=phi)
            spec = integrate_iqfi(make_ramsey(T), sig)
            assert spec.integral == pytest.approx(
                ramsey_closed_form(T, phi=phi), rel=1e-3)
            assert spec.error_estimate >= 0.0


def test_pi_train_integral_and_zeta_scaling():
    T = 4.0
    sig = SignalParams(B=0.0, omega=0.0, zeta=1.7)
    spec = integrate_iqfi(make_pi_train([1.0, 2.0, 3.0], T), sig)
    assert spec.integral == pytest.approx(2.0 * math.pi * 1.7 ** 2 * T,
                                          rel=4e-3)


def test_spectrum_fields_are_consistent():
    spec = integrate_iqfi(make_ramsey(3.0), FLAT)
    assert len(spec.omegas) == len(spec.values)
    assert np.all(np.diff(spec.omegas) > 0.0)
    assert spec.tail_start > spec.omegas[0]
    assert np.all(spec.values >= -QuadratureConfig().abs_tol)


def test_sampled_spectrum_nonnegative_random_protocols():
    rng = np.random.default_rng(31)
    for _ in range(10):
        seq = random_pulse_sequence(rng, float(rng.uniform(1.0, 5.0)),
                                    max_pulses=8)
        sig = SignalParams(B=float(rng.uniform(-1.0, 1.0)),
                           omega=0.0, phi=float(rng.uniform(0.0, 6.2)))
        spec = integrate_iqfi(seq, sig)
        assert np.min(spec.values) >= -1e-12
        assert spec.integral >= 0.0


def test_ramsey_tail_coefficient():
    # J falls off as C / omega^2 with C -> 2 zeta^2 (the mid-point and
    # half-width phases coincide, so cos^2 sin^2 averages to 1/8)
    for zeta in (1.0, 1.5):
        sig = SignalParams(B=0.0, omega=0.0, zeta=zeta)
        spec = integrate_iqfi(make_ramsey(4.0), sig)
        assert spec.tail_coefficient == pytest.approx(2.0 * zeta ** 2,
                                                      rel=0.05)


def test_error_decreases_with_tail_start():
    T, exact = 4.0, ramsey_closed_form(4.0)
    errs = []
    for tf in (40.0, 80.0, 160.0):
        cfg = QuadratureConfig(tail_start_factor=tf, max_panels=40000)
        spec = integrate_iqfi(make_ramsey(T), FLAT, cfg=cfg)
        errs.append(abs(spec.integral - exact))
    assert errs[0] > errs[1] > errs[2]


def test_refining_rel_tol_never_degrades_accuracy():
    T, exact = 4.0, ramsey_closed_form(4.0)
    prev = None
    for rel in (1e-3, 5e-4, 2.5e-4, 1.25e-4):
        spec = integrate_iqfi(make_ramsey(T), FLAT,
                              cfg=QuadratureConfig(rel_tol=rel))
        err = abs(spec.integral - exact)
        if prev is not None:
            assert err <= prev * (1.0 + 1e-12)
        prev = err


def test_band_integrals_are_additive():
    seq = make_ramsey(4.0)
    b1 = integrate_qfi_band(seq, FLAT, 0.0, 3.0).integral
    b2 = integrate_qfi_band(seq, FLAT, 3.0, 11.0).integral
    b3 = integrate_qfi_band(seq, FLAT, 0.0, 11.0).integral
    assert b1 + b2 == pytest.approx(b3, rel=1e-10)
    assert b3 < integrate_iqfi(seq, FLAT).integral


def test_cross_spectral_closed_form_and_numeric():
    assert cross_spectral_integral(3.0, 5.0) == pytest.approx(
        0.5 * math.pi * 3.0, rel=1e-14)
    assert cross_spectral_integral(0.0, 5.0) == 0.0
    rng = np.random.default_rng(32)
    for _ in range(8):
        t1 = float(rng.uniform(0.2, 6.0))
        t0 = float(rng.uniform(0.2, 6.0))
        num = cross_spectral_integral(t1, t0, mode="numeric")
        assert num == pytest.approx(0.5 * math.pi * min(t1, t0), rel=1e-4)
    # equal durations: the overlap saturates at (pi/2) t
    assert cross_spectral_integral(4.0, 4.0, mode="numeric") == pytest.approx(
        2.0 * math.pi, rel=1e-5)


def test_nonconvergence_raises_with_partial():
    with pytest.raises(QuadratureNonConvergence):
        integrate_iqfi(make_ramsey(4.0), FLAT,
                       cfg=QuadratureConfig(max_panels=10))
    # a budget above the base panel count but below convergence should
    # surface the best-so-far estimate
    try:
        integrate_iqfi(make_pi2_train(0.25, 4.0), FLAT,
                       cfg=QuadratureConfig(rel_tol=1e-13, max_panels=60))
    except QuadratureNonConvergence as exc:
        if exc.partial is not None:
            assert math.isfinite(exc.partial.integral)
    else:
        pytest.fail("expected panel budget exhaustion")


def test_haar_closed_form_path():
    seq = make_pi_train([1.0, 2.0, 3.0], 4.0)
    res = haar_average_iqfi(seq, FLAT)
    assert res.method == "closed_form"
    assert res.stderr == 0.0
    assert res.value == pytest.approx(4.0 * math.pi * 4.0 / 3.0, rel=1e-14)


def test_haar_monte_carlo_vs_trace_formula():
    seq = make_pi_train([1.0, 2.0, 3.0], 4.0)
    sig = SignalParams(B=0.0, omega=0.0, phi=0.5)
    res = haar_average_iqfi(seq, sig, samples=2048)
    assert res.method == "monte_carlo"
    exact = _haar_trace_mean(seq, sig, QuadratureConfig())
    assert abs(res.value - exact) <= 4.0 * res.stderr


def test_haar_monte_carlo_deterministic():
    seq = make_pi_train([1.3, 2.9], 4.0)
    sig = SignalParams(B=0.0, omega=0.0, phi=1.1)
    a = haar_average_iqfi(seq, sig, samples=256)
    b = haar_average_iqfi(seq, sig, samples=256)
    assert a.value == b.value and a.stderr == b.stderr
    c = haar_average_iqfi(seq, sig, samples=256, seed=7)
    assert c.value != a.value
    assert abs(c.value - a.value) <= 6.0 * math.hypot(a.stderr, c.stderr)


def test_sweep_linear_scaling_and_failures():
    family = lambda T: make_pi_train([T / 2.0], T)
    Ts = [2.0, 4.0, 8.0, 16.0]
    sweep = sweep_iqfi_vs_T(family, Ts, FLAT)
    assert [p.T for p in sweep.points] == Ts
    assert not any(p.failed for p in sweep.points)
    assert sweep.slope == pytest.approx(1.0, abs=1e-3)

    broken = sweep_iqfi_vs_T(family, Ts, FLAT,
                             cfg=QuadratureConfig(max_panels=5))
    assert all(p.failed for p in broken.points)
    assert math.isnan(broken.slope)


def test_fit_loglog_slope_exact_power_law():
    Ts = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    Ks = 7.0 * Ts ** 3
    assert fit_loglog_slope(Ts, Ks) == pytest.approx(3.0, abs=1e-12)
    # window restricts the fit to an inner subset
    Ks_bent = Ks.copy()
    Ks_bent[0] = 1e6
    assert fit_loglog_slope(Ts, Ks_bent, window=(2.0, 16.0)) == pytest.approx(
        3.0, abs=1e-12)


def test_equator_average_of_train():
    # fixed equatorial launch: K = 2 pi zeta^2 T independent of placement
    T = 4.0
    val = pi_train_closed_form(0.0, T, alpha=0.5 * math.pi)
    assert val == pytest.approx(2.0 * math.pi * T, rel=1e-14)
    spec = integrate_iqfi(make_pi_train([0.7, 1.1, 3.2], T), FLAT)
    assert spec.integral == pytest.approx(val, rel=4e-3)
