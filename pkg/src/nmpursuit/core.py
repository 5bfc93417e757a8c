"""Signal containers, grids, interpolation, dictionary bases and filters.

Everything here is shared by the FFT engine and the l1 engine. Arrays held by
the dataclasses are copied on construction and marked read-only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from .errors import InvalidInput, InvalidPhase, MonotonicityError, PhaseTooShort

__all__ = [
    "Signal",
    "SampledSignal",
    "PhaseFunction",
    "IMFComponent",
    "FilterSpec",
    "interpolate",
    "phase_from_frequency",
    "filter_weight",
    "eval_overcomplete_basis",
    "basis_at_times",
    "basis_size",
    "mirror_extend",
    "snr_db",
    "centered_diff",
]

# Tolerance used when flooring phase spans to whole periods.
_CYCLE_EPS = 1e-9


def _frozen(x, dtype=float) -> np.ndarray:
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Signal:
    """Uniformly sampled real signal on ``[t0, t1]``.

    For ``periodic=False`` the grid includes both end points, spacing
    ``(t1 - t0) / (N - 1)``. For ``periodic=True`` the right end point is the
    first sample of the next period and the spacing is ``(t1 - t0) / N``.
    """

    values: np.ndarray
    t0: float = 0.0
    t1: float = 1.0
    periodic: bool = False

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1:
            raise InvalidInput("signal values must be one-dimensional")
        if v.size < 8:
            raise InvalidInput(f"signal needs at least 8 samples, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise InvalidInput("signal values must be finite")
        if not self.t1 > self.t0:
            raise InvalidInput("t1 must be greater than t0")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def h(self) -> float:
        if self.periodic:
            return (self.t1 - self.t0) / self.n
        return (self.t1 - self.t0) / (self.n - 1)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.n)

    def with_values(self, values) -> "Signal":
        return Signal(values, self.t0, self.t1, self.periodic)


@dataclass(frozen=True)
class SampledSignal:
    """Scattered observations ``(times[i], values[i])`` on ``[t0, t1]``.

    ``gaps`` lists open intervals that are known to contain no samples.
    """

    times: np.ndarray
    values: np.ndarray
    t0: float = 0.0
    t1: float = 1.0
    gaps: tuple = ()

    def __post_init__(self):
        t = _frozen(self.times)
        v = _frozen(self.values)
        if t.ndim != 1 or t.shape != v.shape:
            raise InvalidInput("times and values must be 1-D arrays of equal length")
        if t.size == 0:
            raise InvalidInput("no samples")
        if np.any(np.diff(t) <= 0):
            raise InvalidInput("sample times must be strictly increasing")
        if t[0] < self.t0 or t[-1] > self.t1:
            raise InvalidInput("sample times must lie inside [t0, t1]")
        if not np.all(np.isfinite(v)):
            raise InvalidInput("sample values must be finite")
        gaps = tuple((float(a), float(b)) for a, b in self.gaps)
        for a, b in gaps:
            if not b > a:
                raise InvalidInput(f"empty gap ({a}, {b})")
            if np.any((t > a) & (t < b)):
                raise InvalidInput(f"samples found inside declared gap ({a}, {b})")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "gaps", gaps)

    @property
    def n(self) -> int:
        return self.times.size

    def gap_fraction(self) -> float:
        covered = sum(min(b, self.t1) - max(a, self.t0) for a, b in self.gaps)
        return max(covered, 0.0) / (self.t1 - self.t0)

    @classmethod
    def from_signal(cls, signal: Signal, gaps: Sequence = ()) -> "SampledSignal":
        """Drop the samples of a uniform signal that fall inside ``gaps``."""
        t = signal.times
        keep = np.ones(t.size, dtype=bool)
        for a, b in gaps:
            keep &= ~((t > a) & (t < b))
        return cls(t[keep], signal.values[keep], signal.t0, signal.t1, tuple(gaps))


@dataclass(frozen=True)
class PhaseFunction:
    """Nondecreasing phase ``theta`` sampled on the grid ``t``.

    ``omega`` is the instantaneous frequency ``theta'`` in radians per unit
    time on the same grid.
    """

    t: np.ndarray
    theta: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        t, th, om = _frozen(self.t), _frozen(self.theta), _frozen(self.omega)
        if not (t.shape == th.shape == om.shape) or t.ndim != 1:
            raise InvalidPhase("t, theta and omega must be 1-D arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise InvalidPhase("phase grid must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "omega", om)

    @property
    def span(self) -> float:
        return float(self.theta[-1] - self.theta[0])

    @property
    def L_theta(self) -> int:
        """Number of whole periods covered by the phase."""
        return int(np.floor(self.span / (2 * np.pi) + _CYCLE_EPS))

    def is_monotone(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.theta) >= -atol))

    def at(self, times) -> np.ndarray:
        """Phase at arbitrary times (Hermite cubic using ``omega``)."""
        from scipy.interpolate import CubicHermiteSpline

        times = np.clip(np.asarray(times, dtype=float), self.t[0], self.t[-1])
        return CubicHermiteSpline(self.t, self.theta, self.omega)(times)

    def omega_at(self, times) -> np.ndarray:
        times = np.clip(np.asarray(times, dtype=float), self.t[0], self.t[-1])
        return CubicSpline(self.t, self.omega)(times)

    @classmethod
    def from_callable(cls, t, theta_fn, omega_fn) -> "PhaseFunction":
        t = np.asarray(t, dtype=float)
        return cls(t, theta_fn(t), omega_fn(t))


@dataclass(frozen=True)
class IMFComponent:
    """One intrinsic mode function ``envelope * cos(theta)`` on a grid."""

    envelope: np.ndarray
    phase: PhaseFunction
    reconstruction: np.ndarray = field(init=False)

    def __post_init__(self):
        env = _frozen(self.envelope)
        if env.shape != self.phase.theta.shape:
            raise InvalidInput("envelope and phase must share the grid")
        object.__setattr__(self, "envelope", env)
        object.__setattr__(self, "reconstruction", _frozen(env * np.cos(self.phase.theta)))

    @property
    def omega(self) -> np.ndarray:
        return self.phase.omega

    @property
    def theta(self) -> np.ndarray:
        return self.phase.theta

    def mean_frequency(self) -> float:
        return float(np.mean(self.phase.omega))


@dataclass(frozen=True)
class FilterSpec:
    """Low-pass weight over normalized wavenumber ``kappa``.

    ``kind="cosine"`` is the raised cosine ``(1 + cos(pi kappa / width)) / 2``;
    ``kind="stair"`` is the indicator of ``|kappa| < width``;
    ``kind="cosine-literal"`` is ``1 + cos(pi kappa / width)`` (peak value 2).
    """

    kind: str = "cosine"
    width: float = 0.5

    def __post_init__(self):
        if self.kind not in ("cosine", "stair", "cosine-literal"):
            raise InvalidInput(f"unknown filter kind {self.kind!r}")
        if not 0.0 < self.width <= 0.5:
            raise InvalidInput(f"filter width must lie in (0, 1/2], got {self.width}")

    def with_width(self, width: float) -> "FilterSpec":
        return FilterSpec(self.kind, width)

    def __call__(self, kappa):
        return filter_weight(self, kappa)


def interpolate(nodes, values, queries, method: str = "cubic-spline") -> np.ndarray:
    """Interpolate ``values`` given at increasing ``nodes`` onto ``queries``.

    Queries outside the node range are clamped to the boundary nodes. The
    cubic path is a natural cubic spline.
    """
    x = np.asarray(nodes, dtype=float)
    y = np.asarray(values, dtype=float)
    q = np.asarray(queries, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InvalidInput("need at least 2 interpolation nodes")
    if y.shape != x.shape:
        raise InvalidInput("nodes and values differ in length")
    if np.any(np.diff(x) <= 0):
        raise InvalidInput("interpolation nodes must be strictly increasing")
    q = np.clip(q, x[0], x[-1])
    if method == "linear":
        return np.interp(q, x, y)
    if method == "cubic-spline":
        if x.size < 4:
            raise InvalidInput("cubic spline interpolation needs at least 4 nodes")
        return CubicSpline(x, y, bc_type="natural")(q)
    raise InvalidInput(f"unknown interpolation method {method!r}")


def phase_from_frequency(omega, dt: float, t0: float = 0.0) -> PhaseFunction:
    """Integrate a nonnegative frequency with the trapezoid rule, theta[0] = 0."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise MonotonicityError(
            f"frequency is negative at {int(np.sum(omega < 0))} grid points"
        )
    theta = cumulative_trapezoid(omega, dx=dt, initial=0.0)
    t = t0 + dt * np.arange(omega.size)
    return PhaseFunction(t, theta, omega)


def filter_weight(spec: FilterSpec, kappa):
    """Weight of ``spec`` at normalized wavenumber ``kappa`` (vectorized)."""
    k = np.abs(np.asarray(kappa, dtype=float))
    inside = k < spec.width
    if spec.kind == "stair":
        w = inside.astype(float)
    else:
        w = np.where(inside, 1.0 + np.cos(np.pi * k / spec.width), 0.0)
        if spec.kind == "cosine":
            w = 0.5 * w
    return w if w.ndim else float(w)


def basis_size(L_theta: int, lambda_V: float) -> int:
    """Column count of the 2-fold overcomplete basis of V(theta)."""
    return 1 + 2 * int(np.floor(2 * lambda_V * L_theta + _CYCLE_EPS))


def eval_overcomplete_basis(theta_at, L_theta: int, lambda_V: float) -> np.ndarray:
    """Evaluate ``{1, cos(k th / 2L), sin(k th / 2L)}`` at phase values.

    ``theta_at`` are phase values at the sample times, measured from the
    phase origin. Columns are ordered ``1, cos_1, sin_1, cos_2, sin_2, ...``.
    """
    if L_theta < 1:
        raise PhaseTooShort(f"phase covers {L_theta} whole periods, need at least 1")
    if not 0 < lambda_V <= 0.5:
        raise InvalidInput(f"lambda_V must lie in (0, 1/2], got {lambda_V}")
    th = np.asarray(theta_at, dtype=float)
    K = (basis_size(L_theta, lambda_V) - 1) // 2
    arg = np.outer(th, np.arange(1, K + 1)) / (2.0 * L_theta)
    out = np.empty((th.size, 1 + 2 * K))
    out[:, 0] = 1.0
    out[:, 1::2] = np.cos(arg)
    out[:, 2::2] = np.sin(arg)
    return out


def basis_at_times(phase: PhaseFunction, lambda_V: float, times) -> np.ndarray:
    """Overcomplete basis of V(theta) for ``phase``, evaluated at ``times``.

    Rows follow ``times``; the wavenumber unit is fixed by ``phase.L_theta``.
    """
    th = phase.at(times) - phase.theta[0]
    return eval_overcomplete_basis(th, phase.L_theta, lambda_V)


def mirror_extend(signal: Signal, mode: str = "half") -> Signal:
    """Append the time-reversed samples, giving a periodic record.

    ``mode="half"`` repeats the end samples, ``[1, 2, 3] -> [1, 2, 3, 3, 2, 1]``,
    which treats samples as cell centres. ``mode="whole"`` reflects about the
    end samples, ``[1, 2, 3] -> [1, 2, 3, 2]`` (length ``2N - 2``), which is
    the smooth continuation when the grid includes both end points. Both
    records keep the original spacing.
    """
    if signal.periodic:
        raise InvalidInput("mirror extension expects a non-periodic signal")
    v = signal.values
    if mode == "half":
        ext = np.concatenate([v, v[::-1]])
    elif mode == "whole":
        ext = np.concatenate([v, v[-2:0:-1]])
    else:
        raise InvalidInput(f"unknown mirror mode {mode!r}")
    h = signal.h
    return Signal(ext, signal.t0, signal.t0 + h * ext.size, periodic=True)


def snr_db(signal, sigma: float) -> float:
    """Signal-to-noise ratio ``10 log10(var f / sigma^2)`` in dB."""
    if not sigma > 0:
        raise InvalidInput("noise standard deviation must be positive")
    values = signal.values if hasattr(signal, "values") else np.asarray(signal, float)
    return float(10.0 * np.log10(np.var(values) / sigma**2))


def centered_diff(y, dx: float, periodic: bool = False) -> np.ndarray:
    """Second-order centered differences; one-sided at the ends unless periodic."""
    y = np.asarray(y, dtype=float)
    if periodic:
        return (np.roll(y, -1) - np.roll(y, 1)) / (2 * dx)
    return np.gradient(y, dx, edge_order=2)
