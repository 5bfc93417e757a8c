import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmpursuit import ExampleSpec, FilterSpec, PhaseFunction, Signal, generate, separation_report
from nmpursuit.core import eval_overcomplete_basis, phase_from_frequency
from nmpursuit.errors import BandTooNarrow, DegenerateEnvelope, InvalidInput, InvalidPhase, PhaseTooShort
from nmpursuit.fft_engine import (
    DEMOD_SIGN,
    UPDATE_SIGN,
    EnvelopePair,
    FftEngineConfig,
    envelope_on_grid,
    envelope_step,
    extract_imf_fft,
    frequency_correction,
    max_step,
    phase_update,
    resample_to_theta,
)


def _periodic_grid(n):
    return np.arange(n) / n


def _linear_phase(t, k):
    return PhaseFunction(t, 2 * np.pi * k * t, np.full(t.size, 2 * np.pi * k))


# ---------------------------------------------------------------- config


def test_config_defaults_and_validation():
    c = FftEngineConfig()
    assert c.alpha == 0.1 and c.eta_max == 1.0 and c.eps0 == 1e-3 and c.max_iters == 200
    assert c.continuation_widths == pytest.approx((1 / 16, 1 / 8, 1 / 4, 1 / 2))
    with pytest.raises(InvalidInput):
        FftEngineConfig(continuation_widths=(0.2, 0.1, 0.5))
    with pytest.raises(InvalidInput):
        FftEngineConfig(continuation_widths=(0.1, 0.3))
    with pytest.raises(InvalidInput):
        FftEngineConfig(alpha=0.0)


def test_sign_constants_are_pinned():
    # fixed by the calibration tests below; changing either breaks them
    assert DEMOD_SIGN == -1 and UPDATE_SIGN == -1


# ---------------------------------------------------------------- resampling


def test_resample_linear_phase_is_identity():
    n = 256
    t = _periodic_grid(n)
    r = Signal(np.cos(2 * np.pi * 5 * t) + 0.3 * np.sin(2 * np.pi * 11 * t), periodic=True)
    out = resample_to_theta(r, _linear_phase(t, 7), n)
    assert np.max(np.abs(out - r.values)) < 1e-8


def test_resample_refined_grid_contains_samples():
    n = 128
    t = _periodic_grid(n)
    r = Signal(np.sin(2 * np.pi * 3 * t) ** 3, periodic=True)
    out = resample_to_theta(r, _linear_phase(t, 4), 2 * n)
    assert np.max(np.abs(out[::2] - r.values)) < 1e-12


def test_resample_carrier_becomes_uniform_cosine():
    n = 2048
    t = _periodic_grid(n)
    theta = 60 * np.pi * t + 15 * np.sin(2 * np.pi * t)
    ph = PhaseFunction(t, theta, 60 * np.pi + 30 * np.pi * np.cos(2 * np.pi * t))
    out = resample_to_theta(Signal(np.cos(theta), periodic=True), ph, 4096)
    grid = 60 * np.pi * np.arange(4096) / 4096
    assert np.max(np.abs(out - np.cos(grid))) < 1e-4


def test_resample_rejects_decreasing_phase():
    t = _periodic_grid(16)
    th = np.sin(2 * np.pi * t)
    with pytest.raises(InvalidPhase):
        resample_to_theta(Signal(np.zeros(16), periodic=True), PhaseFunction(t, th, th), 16)


# ---------------------------------------------------------------- demodulation


def _theta_grid(L, n=512):
    return 2 * np.pi * L * np.arange(n) / n


def test_envelope_of_cosine_carrier():
    th = _theta_grid(20)
    env = envelope_step(np.cos(th), 20, FilterSpec())
    assert np.max(np.abs(env.a - 1)) < 1e-10 and np.max(np.abs(env.b)) < 1e-10


def test_envelope_of_sine_carrier_fixes_sign():
    th = _theta_grid(20)
    env = envelope_step(np.sin(th), 20, FilterSpec())
    assert np.max(np.abs(env.a)) < 1e-10 and np.max(np.abs(env.b - 1)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(2, 60), st.sampled_from(["cosine", "stair"]))
def test_calibration_constant_envelopes(a, b, L, kind):
    th = _theta_grid(L, 256)
    env = envelope_step(a * np.cos(th) + b * np.sin(th), L, FilterSpec(kind, 0.5))
    assert np.max(np.abs(env.a - a)) < 1e-10 and np.max(np.abs(env.b - b)) < 1e-10


def test_modulated_carrier_matches_projection_oracle():
    # oracle: least-squares projection of the same record onto a cos, b sin
    # with a, b in the overcomplete low-wavenumber basis
    L, n = 128, 2048
    th = _theta_grid(L, n)
    r = (2 + np.cos(th / L)) * np.cos(th)
    env = envelope_step(r, L, FilterSpec("cosine", 0.5))
    B = eval_overcomplete_basis(th, L, 0.5)
    A = np.hstack([B * np.cos(th)[:, None], B * np.sin(th)[:, None]])
    coef = np.linalg.lstsq(A, r, rcond=None)[0]
    a_ls = B @ coef[: B.shape[1]]
    assert np.max(np.abs(a_ls - (2 + np.cos(th / L)))) < 1e-6
    # the raised-cosine weight at bin one is 1 - (pi / L)^2 + ..., so the fit is close
    assert np.max(np.abs(env.a - a_ls)) < 1e-3
    assert np.max(np.abs(env.b)) < 1e-10


def test_stair_filter_fit_is_orthogonal_projection():
    rng = np.random.default_rng(1)
    L, n = 16, 256
    th = _theta_grid(L, n)
    r = rng.standard_normal(n)
    env = envelope_step(r, L, FilterSpec("stair", 0.5))
    fit = env.a * np.cos(th) + env.b * np.sin(th)
    lhs = np.sum(r**2)
    rhs = np.sum(fit**2) + np.sum((r - fit) ** 2)
    assert abs(lhs - rhs) <= 1e-8 * lhs


def test_demodulation_errors():
    th = _theta_grid(1, 64)
    with pytest.raises(PhaseTooShort):
        envelope_step(np.cos(th), 1, FilterSpec())
    with pytest.raises(BandTooNarrow):
        envelope_step(np.cos(_theta_grid(4, 64)), 4, FilterSpec("cosine", 0.2))


# ---------------------------------------------------------------- phase update


def test_zero_quadrature_leaves_phase_unchanged():
    t = _periodic_grid(256)
    ph = _linear_phase(t, 10)
    env = EnvelopePair(np.ones(256), np.zeros(256))
    new, eta = phase_update(ph, env, FftEngineConfig(), periodic=True)
    assert eta == 1.0
    assert np.allclose(new.omega, ph.omega) and np.allclose(new.theta, ph.theta)


def test_one_update_halves_frequency_error():
    n = 1024
    t = _periodic_grid(n)
    true = 2 * np.pi * 40 * t
    sig = Signal(np.cos(true), periodic=True)
    # one step from a frequency 5% too high
    ph = _linear_phase(t, 42)
    cfg = FftEngineConfig()
    env = envelope_on_grid(sig, ph, cfg.filter)
    new, _ = phase_update(ph, env, cfg, periodic=True)
    before = np.max(np.abs(ph.omega - 80 * np.pi)) / (80 * np.pi)
    after = np.max(np.abs(new.omega - 80 * np.pi)) / (80 * np.pi)
    assert after <= before / 2


def test_update_moves_toward_shifted_phase():
    # cos(theta + delta) with a slowly varying delta: the update must move omega by delta'
    n = 1024
    t = _periodic_grid(n)
    delta = 0.3 * np.sin(2 * np.pi * t)
    ph = _linear_phase(t, 30)
    sig = Signal(np.cos(ph.theta + delta), periodic=True)
    cfg = FftEngineConfig()
    new, _ = phase_update(ph, envelope_on_grid(sig, ph, cfg.filter), cfg, periodic=True)
    target = ph.omega + 0.6 * np.pi * np.cos(2 * np.pi * t)
    assert np.max(np.abs(new.omega - target)) < 0.05 * np.max(np.abs(target - ph.omega))


def test_line_search_stops_at_zero_crossing():
    omega = np.array([4.0, 3.0, 1.0, 2.0, 5.0])
    direction = np.array([-1.0, -1.0, -4.0, 0.5, -2.0])
    eta = max_step(omega, direction, 1.0)
    # oracle: bisection for the largest feasible step
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if np.all(omega + mid * direction >= 0) else (lo, mid)
    assert eta == pytest.approx(lo, abs=1e-12)
    new = omega + eta * direction
    assert eta < 1 and np.all(new >= -1e-15) and np.sum(np.isclose(new, 0, atol=1e-12)) == 1


def test_small_envelope_points_are_refilled():
    t = _periodic_grid(64)
    ph = _linear_phase(t, 5)
    a = np.ones(64)
    a[20:25] = 0.0
    b = 0.01 * np.sin(2 * np.pi * t)
    d = frequency_correction(ph, EnvelopePair(a, b), 0.1, t[1], periodic=True)
    assert np.all(np.isfinite(d))
    assert np.allclose(d[20:25], np.linspace(d[19], d[25], 7)[1:-1])
    with pytest.raises(DegenerateEnvelope):
        frequency_correction(ph, EnvelopePair(np.zeros(64), np.zeros(64)), 0.1, t[1])


# ---------------------------------------------------------------- extraction


def test_example_one_frequency_recovery():
    b = generate(ExampleSpec("ex1-single", N=1024))
    t = b.grid
    res = extract_imf_fft(b.signal, _linear_phase(t, 30))
    err = np.abs(res.component.omega - b.components[0].omega) / b.components[0].omega
    assert res.converged
    assert err.max() <= 1e-2


def test_exact_carrier_is_a_fixed_point():
    t = _periodic_grid(512)
    ph = _linear_phase(t, 25)
    res = extract_imf_fft(Signal(np.cos(ph.theta), periodic=True), ph)
    assert [lv["iterations"] for lv in res.levels] == [1, 1, 1, 1]
    # spline resampling at 20 samples per period costs about 1e-5 in amplitude
    assert np.allclose(res.component.envelope, 1.0, atol=1e-4)
    assert np.allclose(res.component.theta, ph.theta, atol=1e-8)


def test_phase_stays_monotone_every_iteration():
    b = generate(ExampleSpec("chirp-iteration", N=1024))
    seen = []

    def cb(level, it, phase):
        seen.append(phase.is_monotone() and bool(np.all(phase.omega >= 0)))

    extract_imf_fft(b.signal, _linear_phase(b.grid, 40), callback=cb)
    assert seen and all(seen)


def test_nonperiodic_input_uses_mirror_and_returns_original_grid():
    b = generate(ExampleSpec("chirp-iteration", N=512))
    res = extract_imf_fft(b.signal, _linear_phase(b.grid, 40))
    assert res.component.theta.size == 512
    assert np.allclose(res.component.phase.t, b.grid)


def test_one_step_error_scales_with_separation():
    n, L, m = 4096, 80, 16
    t = _periodic_grid(n)
    th1 = 2 * np.pi * L * t
    cfg = FftEngineConfig(filter=FilterSpec("cosine", 0.3))
    errs, eps = [], []
    for c in (0.5, 0.25, 0.125):
        a1 = 1 + c * np.sin(2 * np.pi * m * t)
        a2 = 1 + c * np.cos(2 * np.pi * m * t)
        ph1 = PhaseFunction(t, th1, np.full(n, 2 * np.pi * L))
        ph2 = PhaseFunction(t, 2 * th1, np.full(n, 4 * np.pi * L))
        rep = separation_report([(a1, ph1), (a2, ph2)])
        # filter hypothesis: support below (d - 1) / (d + 1/2)
        assert cfg.filter.width < (rep.d - 1) / (rep.d + 0.5)
        eps.append(rep.epsilon_max)
        sig = Signal(a1 * np.cos(th1) + a2 * np.cos(2 * th1), periodic=True)
        start = _linear_phase(t, L + 4)
        new, _ = phase_update(start, envelope_on_grid(sig, start, cfg.filter), cfg, periodic=True)
        env = envelope_on_grid(sig, new, cfg.filter)
        err = new.theta - np.unwrap(np.arctan2(env.b, env.a)) - th1
        err -= 2 * np.pi * np.round(np.mean(err) / (2 * np.pi))
        errs.append(np.max(np.abs(err)))
    assert eps == pytest.approx([0.1, 0.05, 0.025], rel=1e-3)
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(1.4 <= r <= 2.6 for r in ratios)
