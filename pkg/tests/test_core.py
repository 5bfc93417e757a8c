import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmpursuit import (
    FilterSpec,
    IMFComponent,
    PhaseFunction,
    SampledSignal,
    Signal,
    basis_at_times,
    basis_size,
    eval_overcomplete_basis,
    filter_weight,
    interpolate,
    mirror_extend,
    phase_from_frequency,
    snr_db,
)
from nmpursuit.core import centered_diff
from nmpursuit.errors import InvalidInput, InvalidPhase, MonotonicityError, PhaseTooShort


# ---------------------------------------------------------------- types


def test_signal_spacing_conventions():
    s = Signal(np.zeros(11), 0.0, 1.0, periodic=False)
    assert s.h == pytest.approx(0.1)
    assert s.times[-1] == pytest.approx(1.0)
    p = Signal(np.zeros(10), 0.0, 1.0, periodic=True)
    assert p.h == pytest.approx(0.1)
    assert p.times[-1] == pytest.approx(0.9)


@pytest.mark.parametrize("values", [np.zeros(7), np.full(10, np.nan), np.zeros((3, 4))])
def test_signal_rejects_bad_values(values):
    with pytest.raises(InvalidInput):
        Signal(values)


def test_sampled_signal_rejects_sample_in_gap():
    with pytest.raises(InvalidInput):
        SampledSignal(np.array([0.1, 0.5, 0.9]), np.zeros(3), gaps=[(0.4, 0.6)])
    with pytest.raises(InvalidInput):
        SampledSignal(np.array([0.1, 0.1, 0.9]), np.zeros(3))


def test_sampled_signal_from_signal_drops_gap():
    s = Signal(np.arange(11.0))
    g = SampledSignal.from_signal(s, [(0.35, 0.65)])
    assert g.n == 8
    assert g.gap_fraction() == pytest.approx(0.3)


def test_phase_function_rejects_mismatched_arrays():
    with pytest.raises(InvalidPhase):
        PhaseFunction(np.arange(3.0), np.arange(4.0), np.arange(3.0))


def test_imf_reconstruction_is_exact_product():
    t = np.linspace(0, 1, 50)
    ph = PhaseFunction(t, 7 * t**2, 14 * t)
    env = 1 + t
    comp = IMFComponent(env, ph)
    assert np.array_equal(comp.reconstruction, env * np.cos(7 * t**2))


# ---------------------------------------------------------------- interpolate


def test_interpolate_linear_line():
    assert interpolate([0, 1], [0, 2], [0.5], method="linear")[0] == pytest.approx(1.0)


def test_interpolate_cubic_matches_sine():
    x = np.linspace(0, 1, 33)
    mid = 0.5 * (x[1:] + x[:-1])
    got = interpolate(x, np.sin(2 * np.pi * x), mid)
    # natural end conditions cost accuracy only in the end cells
    assert np.max(np.abs(got - np.sin(2 * np.pi * mid))[2:-2]) < 1e-5


def test_interpolate_reproduces_nodes_and_clamps():
    x = np.array([0.0, 0.3, 0.5, 1.0])
    y = np.array([1.0, -2.0, 4.0, 0.5])
    assert np.allclose(interpolate(x, y, x), y)
    assert interpolate(x, y, [-1.0, 2.0]) == pytest.approx([1.0, 0.5])


@pytest.mark.parametrize("nodes", [[0.0], [0.0, 0.0, 1.0, 2.0], [1.0, 0.0, 2.0, 3.0]])
def test_interpolate_rejects_bad_nodes(nodes):
    with pytest.raises(InvalidInput):
        interpolate(nodes, np.zeros(len(nodes)), [0.5], method="linear")


# ---------------------------------------------------------------- phase_from_frequency


def test_phase_from_constant_frequency():
    n = 101
    ph = phase_from_frequency(np.full(n, 2 * np.pi), 1 / (n - 1))
    assert np.allclose(ph.theta, 2 * np.pi * ph.t)
    assert ph.L_theta == 1


def test_phase_from_zero_frequency():
    ph = phase_from_frequency(np.zeros(20), 0.1)
    assert np.all(ph.theta == 0)


def test_phase_from_example_one_frequency():
    t = np.linspace(0, 1, 4097)
    ph = phase_from_frequency(60 * np.pi + 30 * np.pi * np.cos(2 * np.pi * t), t[1])
    # closed form: 60 pi t + 15 sin(2 pi t)
    assert ph.theta[-1] == pytest.approx(60 * np.pi, rel=1e-9)
    assert ph.L_theta == 30


def test_phase_from_negative_frequency_raises():
    with pytest.raises(MonotonicityError):
        phase_from_frequency(np.array([1.0, -0.1, 1.0]), 0.1)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 5.0), st.floats(0.0, 0.9), st.integers(1, 4))
def test_phase_derivative_recovers_frequency(base, depth, m):
    errs = []
    for n in (257, 513):
        t = np.linspace(0, 1, n)
        om = base * (1 + depth * np.sin(2 * np.pi * m * t))
        ph = phase_from_frequency(om, t[1])
        errs.append(np.max(np.abs(centered_diff(ph.theta, t[1]) - om)[1:-1]))
    # second order: halving h cuts the error about four times
    assert errs[1] <= errs[0] / 3 + 1e-12


# ---------------------------------------------------------------- filters


def test_cosine_filter_values():
    f = FilterSpec("cosine", 0.4)
    assert filter_weight(f, 0.0) == 1.0
    assert filter_weight(f, 0.2) == pytest.approx(0.5)


def test_stair_filter_values():
    f = FilterSpec("stair", 0.4)
    assert filter_weight(f, 0.9 * 0.4) == 1.0
    assert filter_weight(f, 1.1 * 0.4) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["stair", "cosine"]), st.floats(0.01, 0.5),
       st.lists(st.floats(-2, 2), min_size=1, max_size=20))
def test_filter_symmetry_range_support(kind, width, kappas):
    f = FilterSpec(kind, width)
    k = np.array(kappas)
    w = filter_weight(f, k)
    assert np.all((0 <= w) & (w <= 1))
    assert np.array_equal(w, filter_weight(f, -k))
    assert np.all(w[np.abs(k) >= width] == 0)
    assert filter_weight(f, 0.0) == 1.0


def test_filter_spec_validation():
    with pytest.raises(InvalidInput):
        FilterSpec("cosine", 0.7)
    with pytest.raises(InvalidInput):
        FilterSpec("gauss", 0.3)


# ---------------------------------------------------------------- basis


def test_basis_column_count_example():
    t = np.linspace(0, 1, 64)
    ph = PhaseFunction(t, 8 * np.pi * t, np.full(64, 8 * np.pi))
    B = basis_at_times(ph, 0.5, t)
    assert ph.L_theta == 4
    assert B.shape == (64, 9)
    assert np.all(B[:, 0] == 1.0)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 256), st.sampled_from([1 / 8, 1 / 4, 1 / 2]))
def test_basis_column_count_formula(L, lam):
    B = eval_overcomplete_basis(np.linspace(0, 2 * np.pi * L, 5), L, lam)
    assert B.shape[1] == basis_size(L, lam) == 1 + 2 * int(np.floor(2 * lam * L))


def test_basis_gram_matches_analytic_inner_products():
    # oracle: on a linear phase the columns are plain Fourier modes on [0, 1] with
    # half-integer frequencies, whose inner products have closed forms
    L, lam = 6, 0.5
    n = 20001
    t = np.linspace(0, 1, n)
    B = eval_overcomplete_basis(2 * np.pi * L * t, L, lam)
    w = np.full(n, 1.0 / (n - 1))
    w[0] = w[-1] = 0.5 / (n - 1)
    G = B.T @ (B * w[:, None])

    def ip(f, g):
        from scipy.integrate import quad

        return quad(lambda x: f(x) * g(x), 0, 1, limit=200)[0]

    K = (B.shape[1] - 1) // 2
    fns = [lambda x: 1.0]
    for k in range(1, K + 1):
        fns.append(lambda x, k=k: np.cos(np.pi * k * x))
        fns.append(lambda x, k=k: np.sin(np.pi * k * x))
    exact = np.array([[ip(f, g) for g in fns] for f in fns])
    assert np.max(np.abs(G - exact)) < 1e-6


def test_basis_rejects_short_phase():
    with pytest.raises(PhaseTooShort):
        eval_overcomplete_basis(np.zeros(3), 0, 0.5)


# ---------------------------------------------------------------- mirror, snr


def test_mirror_extend_half_sample():
    s = Signal(np.array([1.0, 2, 3, 4, 5, 6, 7, 8]))
    m = mirror_extend(s)
    assert m.periodic and m.n == 16
    assert np.array_equal(m.values[:8], s.values)
    assert np.array_equal(m.values[8:], s.values[::-1])


def test_mirror_extend_small_example_and_whole_mode():
    v = np.array([1.0, 2, 3])
    assert np.array_equal(np.concatenate([v, v[::-1]]), [1, 2, 3, 3, 2, 1])
    s = Signal(np.array([1.0, 2, 3, 4, 5, 6, 7, 8]))
    w = mirror_extend(s, mode="whole")
    assert np.array_equal(w.values, [1, 2, 3, 4, 5, 6, 7, 8, 7, 6, 5, 4, 3, 2])


def test_mirror_extend_symmetric_input_is_own_period():
    v = np.array([1.0, 2, 3, 4, 4, 3, 2, 1])
    m = mirror_extend(Signal(v))
    assert np.array_equal(m.values[:8], m.values[8:])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=8, max_size=40))
def test_mirror_extend_seams(vals):
    v = np.array(vals)
    m = mirror_extend(Signal(v)).values
    n = v.size
    assert m.size == 2 * n
    assert m[n - 1] - m[n] == 0
    assert m[-1] - m[0] == 0


def test_mirror_extend_rejects_periodic():
    with pytest.raises(InvalidInput):
        mirror_extend(Signal(np.zeros(8), periodic=True))


def test_snr_unit_ratio_and_invalid_sigma():
    v = np.array([1.0, -1.0] * 8)
    assert snr_db(v, 1.0) == pytest.approx(0.0)
    with pytest.raises(InvalidInput):
        snr_db(v, 0.0)
