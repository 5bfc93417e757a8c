"""FFT-based extraction of a single IMF from periodic uniform data.

The current phase estimate is used as a new coordinate. In that coordinate the
carrier ``cos(theta)`` is a single DFT bin, so the least-squares fit of
``a cos(theta) + b sin(theta)`` with band-limited ``a, b`` reduces to a shift
and a low-pass filter. The frequency is then corrected from the phase drift
of ``(a, b)`` and the loop repeats, widening the filter on the correction
level by level.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .core import (
    FilterSpec,
    IMFComponent,
    PhaseFunction,
    Signal,
    centered_diff,
    filter_weight,
    interpolate,
    mirror_extend,
    phase_from_frequency,
)
from .errors import BandTooNarrow, DegenerateEnvelope, InvalidInput, InvalidPhase, PhaseTooShort

log = logging.getLogger(__name__)

__all__ = [
    "FftEngineConfig",
    "EnvelopePair",
    "ExtractionResult",
    "DEMOD_SIGN",
    "UPDATE_SIGN",
    "resample_to_theta",
    "envelope_step",
    "envelope_on_grid",
    "phase_update",
    "smooth_in_theta",
    "extract_imf_fft",
]

# b = DEMOD_SIGN * 2 Im(...) makes b the coefficient of sin(theta).
DEMOD_SIGN = -1.0
# With b the sin coefficient, a cos + b sin = A cos(theta - atan2(b, a)), so the
# frequency moves against the drift (a b' - b a') / (a^2 + b^2).
UPDATE_SIGN = -1.0


@dataclass(frozen=True)
class FftEngineConfig:
    filter: FilterSpec = field(default_factory=FilterSpec)
    alpha: float = 0.1
    eta_max: float = 1.0
    eps0: float = 1e-3
    max_iters: int = 200
    continuation_widths: Optional[tuple] = None
    integer_cycles: bool = True
    fold_passes: int = 1

    def __post_init__(self):
        if self.fold_passes < 1:
            raise InvalidInput("fold_passes must be at least 1")
        if not self.alpha > 0:
            raise InvalidInput("alpha must be positive")
        if not self.eps0 > 0:
            raise InvalidInput("eps0 must be positive")
        if not 0 < self.eta_max <= 1:
            raise InvalidInput("eta_max must lie in (0, 1]")
        if self.max_iters < 1:
            raise InvalidInput("max_iters must be at least 1")
        widths = self.continuation_widths
        if widths is None:
            lam = self.filter.width
            widths = (lam / 8, lam / 4, lam / 2, lam)
        widths = tuple(float(w) for w in widths)
        if any(b <= a for a, b in zip(widths, widths[1:])):
            raise InvalidInput("continuation widths must be strictly increasing")
        if not np.isclose(widths[-1], self.filter.width):
            raise InvalidInput("last continuation width must equal the filter width")
        object.__setattr__(self, "continuation_widths", widths)

    @property
    def lambda_V(self) -> float:
        return self.filter.width


@dataclass(frozen=True)
class EnvelopePair:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != b.shape:
            raise InvalidInput("a and b must have equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidInput("envelopes must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def amplitude(self) -> np.ndarray:
        return np.hypot(self.a, self.b)


@dataclass
class ExtractionResult:
    component: IMFComponent
    iterations: int
    converged: bool
    levels: list = field(default_factory=list)

    def __iter__(self):
        # allows ``imf, iterations, converged = extract_imf_fft(...)``
        return iter((self.component, self.iterations, self.converged))


def _next_pow2(n: int) -> int:
    return 1 << int(np.ceil(np.log2(max(n, 1))))


def _strictly_increasing(theta: np.ndarray) -> np.ndarray:
    d = np.diff(theta)
    if np.any(d < 0):
        raise InvalidPhase("phase is decreasing somewhere")
    if np.any(d == 0):
        scale = max(abs(theta[-1]), abs(theta[0]), 1.0)
        theta = theta + np.arange(theta.size) * (4 * np.finfo(float).eps * scale)
    return theta


def _periodic_span(phase: PhaseFunction, h: float) -> float:
    """Phase advance over one full period of a periodic record."""
    om = phase.omega
    return phase.span + 0.5 * h * (om[-1] + om[0])


def resample_to_theta(r: Signal, theta: PhaseFunction, n_theta: int) -> np.ndarray:
    """Resample ``r`` onto ``n_theta`` points uniform in the phase coordinate.

    For a periodic record the grid covers one full period
    ``[theta_0, theta_0 + span)`` and a periodic cubic spline is used;
    otherwise it covers ``[theta_0, theta_{N-1}]`` with both ends included.
    """
    if theta.theta.size != r.n:
        raise InvalidInput("phase and signal grids differ in length")
    if n_theta < r.n:
        raise InvalidInput("n_theta must be at least the number of samples")
    th = _strictly_increasing(np.asarray(theta.theta, dtype=float))
    if r.periodic:
        span = _periodic_span(theta, r.h)
        nodes = np.append(th, th[0] + span)
        vals = np.append(r.values, r.values[0])
        grid = th[0] + span * np.arange(n_theta) / n_theta
        return CubicSpline(nodes, vals, bc_type="periodic")(grid)
    grid = np.linspace(th[0], th[-1], n_theta)
    return interpolate(th, r.values, grid)


def _demodulated_coefficients(r_theta, L_theta: int, filt: FilterSpec, passes: int = 1):
    n = r_theta.size
    if L_theta < 2:
        raise PhaseTooShort(f"carrier bin L_theta={L_theta}, need at least 2")
    kmax = int(np.ceil(filt.width * L_theta)) - 1
    if filt.width * L_theta < 1:
        raise BandTooNarrow(
            f"band lambda_V * L_theta = {filt.width * L_theta:.3g} holds no bin"
        )
    if L_theta + kmax >= n // 2:
        raise InvalidInput("theta grid too coarse for the carrier band")
    R = np.fft.fft(r_theta)
    j = np.arange(-kmax, kmax + 1)
    w = filter_weight(filt, j / L_theta)
    if passes > 1:
        # demodulating the leftover again and again leaves (1 - w)^passes behind
        w = 1.0 - (1.0 - w) ** passes
    c = R[L_theta + j] * w
    return j, c / n


def envelope_step(r_theta, L_theta: int, filt: FilterSpec) -> EnvelopePair:
    """Envelopes ``(a, b)`` on the uniform theta grid.

    ``r_theta`` must span exactly ``L_theta`` carrier periods. Returns ``a``
    and ``b`` such that the carrier part of ``r_theta`` is
    ``a cos(theta) + b sin(theta)``.
    """
    r_theta = np.asarray(r_theta, dtype=float)
    n = r_theta.size
    j, c = _demodulated_coefficients(r_theta, L_theta, filt)
    spec = np.zeros(n, dtype=complex)
    spec[j % n] = c
    env = np.fft.ifft(spec) * n
    return EnvelopePair(2.0 * env.real, DEMOD_SIGN * 2.0 * env.imag)


def envelope_on_grid(r: Signal, phase: PhaseFunction, filt: FilterSpec,
                     n_theta: Optional[int] = None, passes: int = 1) -> EnvelopePair:
    """Envelopes ``(a, b)`` evaluated on the time grid of periodic ``r``.

    The band-limited envelopes are trigonometric polynomials in the phase
    coordinate, so they are summed exactly at ``phase.theta`` instead of
    being spline-interpolated back. ``passes > 1`` repeats the fit on the
    leftover and sums the envelopes, flattening the filter's passband.
    """
    if not r.periodic:
        raise InvalidInput("envelope_on_grid expects a periodic record")
    n_theta = n_theta or _next_pow2(2 * r.n)
    span = _periodic_span(phase, r.h)
    L = int(round(span / (2 * np.pi)))
    r_theta = resample_to_theta(r, phase, n_theta)
    j, c = _demodulated_coefficients(r_theta, L, filt, passes)
    x = (phase.theta - phase.theta[0]) / span
    env = np.exp(2j * np.pi * np.outer(x, j)) @ c
    return EnvelopePair(2.0 * env.real, DEMOD_SIGN * 2.0 * env.imag)


def smooth_in_theta(values, phase: PhaseFunction, width: float, periodic: bool,
                    kind: str = "cosine", n_theta: Optional[int] = None,
                    h: Optional[float] = None) -> np.ndarray:
    """Low-pass ``values`` in the phase coordinate.

    Wavenumbers are measured in carrier units, so ``width`` has the same
    meaning as the envelope filter width. Non-periodic inputs are mirror
    extended before filtering.
    """
    v = np.asarray(values, dtype=float)
    th = _strictly_increasing(np.asarray(phase.theta, dtype=float))
    n = v.size
    if periodic:
        span = _periodic_span(phase, h if h is not None else phase.t[1] - phase.t[0])
        nodes = np.append(th, th[0] + span)
        vals = np.append(v, v[0])
        m = n_theta or _next_pow2(2 * n)
        grid = th[0] + span * np.arange(m) / m
        vt = CubicSpline(nodes, vals, bc_type="periodic")(grid)
        record = span
    else:
        m = n_theta or _next_pow2(2 * n)
        grid = np.linspace(th[0], th[-1], m)
        vt = CubicSpline(th, v, bc_type="natural")(grid)
        vt = np.concatenate([vt, vt[-2:0:-1]])
        record = 2 * (th[-1] - th[0])
        m = vt.size
    cycles = record / (2 * np.pi)
    if cycles <= 0:
        return v.copy()
    freqs = np.fft.fftfreq(m, d=1.0 / m)
    spec =FilterSpec("stair" if kind == "stair" else "cosine", min(width, 0.5))
    w = filter_weight(spec, freqs / cycles)
    keep = np.nonzero(w)[0]
    coef = np.fft.fft(vt)[keep] * w[keep] / m
    x = (th - th[0]) / record
    return (np.exp(2j * np.pi * np.outer(x, freqs[keep])) @ coef).real


def _fill_invalid(delta: np.ndarray, valid: np.ndarray) -> np.ndarray:
    if valid.all():
        return delta
    idx = np.arange(delta.size)
    return np.interp(idx, idx[valid], delta[valid])


def frequency_correction(phase: PhaseFunction, env: EnvelopePair, alpha: float,
                         dt: float, periodic: bool = False) -> np.ndarray:
    """Drift ``(a b' - b a') / (a^2 + b^2)`` with small-envelope points refilled."""
    a, b = env.a, env.b
    if a.shape != phase.theta.shape:
        raise InvalidInput("envelopes and phase must share the grid")
    da = centered_diff(a, dt, periodic)
    db = centered_diff(b, dt, periodic)
    den = a * a + b * b
    ok = np.sqrt(den) >= alpha
    if not ok.any():
        raise DegenerateEnvelope(f"envelope below alpha={alpha} at every grid point")
    delta = np.zeros_like(a)
    delta[ok] = (a[ok] * db[ok] - b[ok] * da[ok]) / den[ok]
    return _fill_invalid(delta, ok)


def max_step(omega: np.ndarray, direction: np.ndarray, eta_max: float = 1.0) -> float:
    """Largest ``eta <= eta_max`` keeping ``omega + eta * direction >= 0``."""
    neg = direction < 0
    if not neg.any():
        return float(eta_max)
    return float(min(eta_max, np.min(omega[neg] / -direction[neg])))


def phase_update(theta: PhaseFunction, env: EnvelopePair, config: FftEngineConfig,
                 dt: Optional[float] = None, periodic: bool = False,
                 smoothing_width: Optional[float] = None):
    """One monotone frequency update; returns ``(new_phase, eta)``.

    ``smoothing_width`` low-passes the correction in the phase coordinate
    before the step (``None`` leaves it unfiltered).
    """
    dt = dt if dt is not None else float(theta.t[1] - theta.t[0])
    delta = frequency_correction(theta, env, config.alpha, dt, periodic)
    if smoothing_width is not None:
        delta = smooth_in_theta(delta, theta, smoothing_width, periodic,
                                kind=config.filter.kind, h=dt)
    direction = UPDATE_SIGN * delta
    omega = np.asarray(theta.omega, dtype=float)
    eta = max_step(omega, direction, config.eta_max)
    new_omega = np.maximum(omega + eta * direction, 0.0)
    new = phase_from_frequency(new_omega, dt, t0=float(theta.t[0]))
    return new, eta


def _rescale_integer_cycles(phase: PhaseFunction, h: float) -> PhaseFunction:
    span = _periodic_span(phase, h)
    L = max(int(round(span / (2 * np.pi))), 1)
    return phase_from_frequency(phase.omega * (2 * np.pi * L / span), h, float(phase.t[0]))


def _extend_phase(theta0: PhaseFunction, h: float) -> PhaseFunction:
    om = np.asarray(theta0.omega, dtype=float)
    return phase_from_frequency(np.concatenate([om, om[-2:0:-1]]), h, float(theta0.t[0]))


def extract_imf_fft(signal: Signal, theta0: PhaseFunction,
                    config: Optional[FftEngineConfig] = None,
                    callback: Optional[Callable] = None) -> ExtractionResult:
    """Extract the IMF of ``signal`` closest to the initial phase ``theta0``.

    Non-periodic signals are mirror extended first; the returned component
    lives on the original grid. ``callback(level, iteration, phase)`` is
    called after every update with the phase on the original grid.
    """
    config = config or FftEngineConfig()
    if theta0.theta.size != signal.n:
        raise InvalidInput("initial phase must live on the signal grid")
    if np.any(np.asarray(theta0.omega) < 0):
        raise InvalidPhase("initial phase must be nondecreasing")
    n = signal.n
    h = signal.h
    if signal.periodic:
        work = signal
        phase = phase_from_frequency(theta0.omega, h, signal.t0)
    else:
        work = mirror_extend(signal, mode="whole")
        phase = _extend_phase(theta0, h)
    if config.integer_cycles:
        phase = _rescale_integer_cycles(phase, h)
    n_theta = _next_pow2(2 * work.n)

    def restrict(p: PhaseFunction) -> PhaseFunction:
        if signal.periodic:
            return p
        return PhaseFunction(signal.times, p.theta[:n], p.omega[:n])

    total = 0
    converged = False
    levels = []
    for level, width in enumerate(config.continuation_widths):
        converged = False
        it = 0
        for it in range(1, config.max_iters + 1):
            env = envelope_on_grid(work, phase, config.filter, n_theta)
            new, eta = phase_update(phase, env, config, dt=h, periodic=True,
                                    smoothing_width=width)
            if config.integer_cycles:
                new = _rescale_integer_cycles(new, h)
            change = np.linalg.norm(new.omega - phase.omega) / max(np.linalg.norm(phase.omega), 1e-300)
            phase = new
            total += 1
            if callback is not None:
                callback(level, it, restrict(phase))
            if change < config.eps0:
                converged = True
                break
        levels.append({"width": width, "iterations": it, "converged": converged})
        log.debug("level %d width %.4g: %d iterations, converged=%s", level, width, it, converged)

    env = envelope_on_grid(work, phase, config.filter, n_theta, config.fold_passes)
    correction = np.unwrap(np.arctan2(env.b, env.a))
    theta_out = phase.theta - correction
    envelope = np.hypot(env.a, env.b)
    folded = PhaseFunction(phase.t, theta_out, phase.omega)
    imf = IMFComponent(envelope[:n], restrict(folded))
    return ExtractionResult(imf, total, converged, levels)
