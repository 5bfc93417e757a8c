"""Analytic test signals with ground truth.

Every generator returns a :class:`TruthBundle` holding the (possibly noisy)
observation, the exact components and trend, and the noiseless signal on the
full uniform grid. Noise comes from a PCG64 stream seeded per call, so two
calls with the same :class:`ExampleSpec` give identical data.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .core import IMFComponent, PhaseFunction, SampledSignal, Signal
from .errors import InvalidInput

__all__ = ["EXAMPLES", "ExampleSpec", "TruthBundle", "generate", "white_noise"]

TWO_PI = 2 * np.pi

EXAMPLES = (
    "ex1-single",
    "ex2-tri",
    "chirp-nonperiodic",
    "incomplete-small",
    "incomplete-large",
    "sparse-random",
    "cross",
    "jump",
    "ss-pair",
    "chirp-iteration",
)


@dataclass(frozen=True)
class ExampleSpec:
    """Which example to build and how.

    ``variant`` only matters for ``ss-pair``: 1 gives the carrier at the base
    phase, 2 doubles the phase.
    """

    name: str
    N: int = 1024
    noise_amp: float = 0.0
    seed: int = 0
    n_samples: int = 64
    variant: int = 1

    def __post_init__(self):
        if self.name not in EXAMPLES:
            raise InvalidInput(f"unknown example {self.name!r}; choose from {', '.join(EXAMPLES)}")
        if self.N < 64:
            raise InvalidInput("N must be at least 64")
        if not self.noise_amp >= 0:
            raise InvalidInput("noise_amp must be nonnegative")
        if self.variant not in (1, 2):
            raise InvalidInput("variant must be 1 or 2")


@dataclass(frozen=True)
class TruthBundle:
    """Observation plus exact decomposition.

    ``clean`` is the noiseless signal on the full grid and equals the sum of
    component reconstructions plus trend, accumulated in list order.
    ``signal`` is what an algorithm gets to see.
    """

    signal: Union[Signal, SampledSignal]
    components: list
    clean: Signal
    trend: Optional[Signal] = None
    noise: Optional[np.ndarray] = None
    name: str = ""

    @property
    def grid(self) -> np.ndarray:
        return self.clean.times


def white_noise(n: int, seed: int = 0) -> np.ndarray:
    """``n`` i.i.d. standard normal draws from a PCG64 stream."""
    if n < 1:
        raise InvalidInput("n must be positive")
    return np.random.Generator(np.random.PCG64(seed)).standard_normal(n)


@dataclass
class _Model:
    # analytic pieces: list of (envelope, theta, omega) callables, optional trend
    parts: list
    trend: Optional[Callable] = None
    periodic: bool = False
    gaps: tuple = ()
    random_times: bool = False


def _grid(N: int, periodic: bool) -> np.ndarray:
    return np.arange(N) / N if periodic else np.linspace(0.0, 1.0, N)


def _piecewise_linear_phase(breaks, rates):
    """theta with theta(0)=0 and piecewise constant frequency ``rates``."""
    breaks = np.asarray(breaks, dtype=float)
    rates = np.asarray(rates, dtype=float)
    knots = np.concatenate([[0.0], breaks])
    offsets = np.concatenate([[0.0], np.cumsum(np.diff(knots) * rates[:-1])])

    def omega(t):
        return rates[np.searchsorted(breaks, t, side="left")]

    def theta(t):
        i = np.searchsorted(breaks, t, side="left")
        return offsets[i] + rates[i] * (t - knots[i])

    return theta, omega


def _model(spec: ExampleSpec) -> _Model:
    pi = np.pi
    name = spec.name
    if name == "ex1-single":
        return _Model(
            [(lambda t: np.ones_like(t),
              lambda t: 60 * pi * t + 15 * np.sin(2 * pi * t),
              lambda t: 60 * pi + 30 * pi * np.cos(2 * pi * t))],
            periodic=True,
        )
    if name == "ex2-tri":
        return _Model([
            (lambda t: 1 / (1.5 + np.cos(2 * pi * t)),
             lambda t: 60 * pi * t + 15 * np.sin(2 * pi * t),
             lambda t: 60 * pi + 30 * pi * np.cos(2 * pi * t)),
            (lambda t: 1 / (1.5 + np.sin(2 * pi * t)),
             lambda t: 160 * pi * t + np.sin(16 * pi * t),
             lambda t: 160 * pi + 16 * pi * np.cos(16 * pi * t)),
            (lambda t: 2 + np.cos(8 * pi * t),
             lambda t: 140 * pi * (t + 1) ** 2,
             lambda t: 280 * pi * (t + 1)),
        ])
    if name == "chirp-nonperiodic":
        return _Model([
            (lambda t: 2 * t + 1,
             lambda t: 20 * pi * (t + 1) ** 2 + 1,
             lambda t: 40 * pi * (t + 1)),
            (lambda t: (2 - t) ** 2,
             lambda t: 161.4 * pi * t + 4 * (1 - t) ** 2 * np.sin(16 * pi * t),
             lambda t: 161.4 * pi - 8 * (1 - t) * np.sin(16 * pi * t)
             + 64 * pi * (1 - t) ** 2 * np.cos(16 * pi * t)),
        ], trend=lambda t: 1 / (1.5 + np.sin(1.5 * pi * t)))
    if name in ("incomplete-small", "incomplete-large"):
        gap = (0.4, 0.6) if name == "incomplete-small" else (0.3, 0.7)
        return _Model([
            (lambda t: 2 + np.cos(2 * pi * t),
             lambda t: 120 * pi * t + 10 * np.cos(4 * pi * t),
             lambda t: 120 * pi - 40 * pi * np.sin(4 * pi * t)),
        ], gaps=(gap,))
    if name == "sparse-random":
        return _Model([
            (lambda t: 2 + np.cos(2 * pi * t),
             lambda t: 120 * pi * t + 10 * np.cos(2 * pi * t),
             lambda t: 120 * pi - 20 * pi * np.sin(2 * pi * t)),
        ], random_times=True)
    if name == "cross":
        return _Model([
            (lambda t: np.ones_like(t),
             lambda t: 20 * pi * t + 40 * pi * t**2 + np.sin(2 * pi * t),
             lambda t: 20 * pi + 80 * pi * t + 2 * pi * np.cos(2 * pi * t)),
            (lambda t: np.ones_like(t),
             lambda t: 40 * pi * t,
             lambda t: np.full_like(t, 40 * pi)),
        ])
    if name == "jump":
        th1, om1 = _piecewise_linear_phase([0.3], [40 * pi, 60 * pi])
        th2, om2 = _piecewise_linear_phase([0.6], [140 * pi, 160 * pi])
        return _Model([
            (lambda t: np.ones_like(t), th1, om1),
            (lambda t: np.ones_like(t), th2, om2),
        ], trend=lambda t: 1 / (1.5 + np.cos(2 * pi * t)))
    if name == "ss-pair":
        k = spec.variant
        env = lambda t: 1 / (1.1 + np.cos(2 * pi * t))  # noqa: E731
        return _Model([
            (env,
             lambda t: k * (10 * np.sin(2 * pi * t) + 40 * pi * t),
             lambda t: k * (20 * pi * np.cos(2 * pi * t) + 40 * pi)),
        ], trend=env, periodic=True)
    if name == "chirp-iteration":
        return _Model([
            (lambda t: np.ones_like(t),
             lambda t: 10 * pi * (3 * t + 1) ** 2,
             lambda t: 60 * pi * (3 * t + 1)),
        ])
    raise InvalidInput(f"unknown example {name!r}")  # pragma: no cover


def _evaluate(model: _Model, t: np.ndarray):
    comps = []
    total = np.zeros_like(t)
    for env_fn, th_fn, om_fn in model.parts:
        comp = IMFComponent(env_fn(t), PhaseFunction(t, th_fn(t), om_fn(t)))
        comps.append(comp)
        total = total + comp.reconstruction
    trend = None
    if model.trend is not None:
        trend = model.trend(t)
        total = total + trend
    return comps, trend, total


def generate(spec: ExampleSpec) -> TruthBundle:
    """Build the named example on an ``N``-point grid over ``[0, 1]``."""
    model = _model(spec)
    t = _grid(spec.N, model.periodic)
    comps, trend, total = _evaluate(model, t)
    clean = Signal(total, 0.0, 1.0, model.periodic)
    trend_sig = None if trend is None else Signal(trend, 0.0, 1.0, model.periodic)

    if model.random_times:
        rng = np.random.Generator(np.random.PCG64(spec.seed))
        times = np.sort(rng.uniform(0.0, 1.0, spec.n_samples))
        _, _, sample_clean = _evaluate(model, times)
        noise = spec.noise_amp * white_noise(times.size, spec.seed + 1) if spec.noise_amp else None
        values = sample_clean if noise is None else sample_clean + noise
        observed = SampledSignal(times, values, 0.0, 1.0)
    else:
        noise = spec.noise_amp * white_noise(t.size, spec.seed) if spec.noise_amp else None
        values = total if noise is None else total + noise
        full = Signal(values, 0.0, 1.0, model.periodic)
        observed = SampledSignal.from_signal(full, model.gaps) if model.gaps else full
    return TruthBundle(observed, comps, clean, trend_sig, noise, spec.name)
