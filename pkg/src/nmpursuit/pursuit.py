"""Outer matching-pursuit loop.

Repeatedly guesses a linear phase from the residual spectrum, refines it into
one IMF with either engine, subtracts it, and stops when the residual is small,
stops shrinking, or the component budget is used up.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy.ndimage import uniform_filter1d

from .core import IMFComponent, PhaseFunction, SampledSignal, Signal, mirror_extend
from .errors import (DegenerateEnvelope, InvalidInput, NMPError, NoOscillationFound,
                     PhaseTooShort)
from .fft_engine import FftEngineConfig, extract_imf_fft
from .separation import SeparationReport, separation_report

log = logging.getLogger(__name__)

__all__ = [
    "PursuitConfig",
    "Decomposition",
    "ComponentMetrics",
    "EvaluationReport",
    "initial_phase_guess",
    "ridge_phase_guess",
    "spectral_peak",
    "decompose",
    "evaluate_against_truth",
    "lowpass_trend",
]


@dataclass(frozen=True)
class PursuitConfig:
    """Settings for :func:`decompose`.

    ``residual_tol`` of ``None`` means ``1e-3 * ||f||``. ``exclude_below`` is
    the highest spectral bin (cycles per record) ignored by the initial
    guess. With ``normalize`` each residual is scaled to unit carrier
    amplitude before extraction so ``alpha`` acts as a relative threshold.
    A candidate whose norm is below ``min_component_norm * ||f||`` is
    treated as fitting error of earlier components: it is discarded and the
    loop stops (``None`` disables the check). With ``trend_extraction`` any
    component averaging fewer than ``trend_max_cycles`` oscillations over the
    record is moved into the trend, which also takes the low-pass part of the
    final residual below ``trend_cutoff`` cycles (default: half the lowest
    frequency of the remaining components). ``ridge_guess`` bends the linear
    initial phase along the local spectral ridge (see
    :func:`ridge_phase_guess`); ``None`` turns it on for scattered samples
    without declared gaps.
    """

    engine: str = "fft"
    max_imfs: int = 10
    residual_tol: Optional[float] = None
    min_residual_reduction: float = 0.99
    fft: FftEngineConfig = field(default_factory=FftEngineConfig)
    l1: Optional[object] = None
    trend_extraction: bool = False
    trend_cutoff: Optional[float] = None
    trend_max_cycles: float = 4.0
    ridge_guess: Optional[bool] = None
    exclude_below: int = 2
    floor_factor: float = 3.0
    normalize: bool = True
    min_component_norm: Optional[float] = 0.05

    def __post_init__(self):
        if self.engine not in ("fft", "l1"):
            raise InvalidInput(f"unknown engine {self.engine!r}")
        if self.max_imfs < 1:
            raise InvalidInput("max_imfs must be at least 1")
        if not 0 < self.min_residual_reduction < 1:
            raise InvalidInput("min_residual_reduction must lie in (0, 1)")
        if self.residual_tol is not None and self.residual_tol < 0:
            raise InvalidInput("residual_tol must be nonnegative")
        if self.l1 is None:
            from .l1_engine import L1EngineConfig

            # later components and any trend are still in the residual; a jointly
            # fitted local median keeps their slow part out of each envelope
            object.__setattr__(self, "l1", L1EngineConfig(fit_median=True))


@dataclass
class Decomposition:
    """Components ordered by decreasing mean frequency, plus what is left.

    ``residual`` satisfies ``f = sum(reconstructions) + trend + residual`` on
    the output grid.
    """

    components: list
    residual: np.ndarray
    grid: np.ndarray
    trend: Optional[np.ndarray] = None
    diagnostics: list = field(default_factory=list)
    separation: Optional[SeparationReport] = None
    input_values: Optional[np.ndarray] = None

    def reconstruction(self) -> np.ndarray:
        total = np.zeros_like(self.grid)
        for comp in self.components:
            total = total + comp.reconstruction
        if self.trend is not None:
            total = total + self.trend
        return total


def spectral_peak(times, values, t0: float, t1: float, n_bins: int,
                  exclude_below: int = 2, floor_factor: float = 3.0,
                  smooth: int = 5, cluster_level: float = 0.1) -> int:
    """Dominant oscillation frequency in cycles per record.

    A bin is detectable when its amplitude exceeds ``floor_factor`` times the
    median amplitude. Power in excess of the median-based noise power is
    lightly smoothed; runs of bins above ``cluster_level`` times its maximum
    form clusters, the cluster with the most excess power wins, and its
    power-weighted centroid is returned. A broadband IMF spreads over many
    side bins, so the centroid is a far better carrier estimate than the
    single tallest bin.

    With fewer samples than bins the spectrum is mostly aliased leakage and
    the floor test carries no information, so it is skipped. The smoothing
    window then widens to ``n_bins // 32`` bins and clusters must reach half
    of the maximum.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    x = (times - t0) / (t1 - t0)
    k = np.arange(n_bins + 1)
    uniform = np.allclose(np.diff(x), x[1] - x[0]) and np.isclose(x[0], 0.0)
    if uniform:
        mag = np.abs(np.fft.rfft(values - values.mean(), n=2 * n_bins))[: n_bins + 1]
    else:
        mag = np.abs(np.exp(-2j * np.pi * np.outer(k, x)) @ (values - values.mean()))
    usable = k > exclude_below
    if not usable.any():
        raise NoOscillationFound("no bins above the exclusion limit")
    compressive = values.size < n_bins
    if compressive:
        smooth = max(smooth, n_bins // 32)
        cluster_level = max(cluster_level, 0.5)
    elif not mag[usable].max() > floor_factor * np.median(mag[usable]):
        raise NoOscillationFound("spectrum has no peak above the detection floor")
    power = mag**2
    # the median of an exponential variable is ln 2 times its mean
    noise_power = np.median(power[usable]) / np.log(2.0)
    excess = np.where(usable, np.maximum(power - noise_power, 0.0), 0.0)
    sm = uniform_filter1d(excess, size=smooth, mode="constant")
    sm[~usable] = 0.0
    if not sm.max() > 0:
        raise NoOscillationFound("no power above the noise level")
    above = (sm > cluster_level * sm.max()) & usable
    edges = np.flatnonzero(np.diff(np.concatenate([[0], above.astype(int), [0]])))
    runs = list(zip(edges[::2], edges[1::2]))
    lo, hi = max(runs, key=lambda r: float(np.sum(excess[r[0]:r[1]])))
    w = excess[lo:hi]
    if not w.sum() > 0:
        w = sm[lo:hi]
    centroid = float(np.sum(k[lo:hi] * w) / np.sum(w))
    return max(int(round(centroid)), exclude_below + 1)


def initial_phase_guess(signal: Union[Signal, SampledSignal], exclude_below: int = 2,
                        grid=None, floor_factor: float = 3.0) -> PhaseFunction:
    """Linear phase at the dominant spectral cluster of ``signal``.

    Returns ``theta0 = 2 pi k* (t - t0) / (t1 - t0)`` on the signal grid, or
    on ``grid`` for scattered samples.
    """
    if isinstance(signal, Signal):
        if signal.n < 16:
            raise InvalidInput("initial guess needs at least 16 samples")
        times = signal.times
        # a non-periodic record behaves like its mirror image over twice the length
        if signal.periodic:
            n_bins = signal.n // 2
            kstar = spectral_peak(times, signal.values, signal.t0, signal.t1, n_bins,
                                  exclude_below, floor_factor)
        else:
            ext = mirror_extend(signal)
            n_bins = ext.n // 2
            k2 = spectral_peak(ext.times, ext.values, ext.t0, ext.t1, n_bins,
                               2 * exclude_below, floor_factor)
            kstar = k2 / 2.0 * (signal.t1 - signal.t0) / ((ext.t1 - ext.t0) / 2)
        out_t = times if grid is None else np.asarray(grid, dtype=float)
    else:
        if signal.n < 8:
            raise InvalidInput("initial guess needs at least 8 samples")
        out_t = np.linspace(signal.t0, signal.t1, 1024) if grid is None else np.asarray(grid, float)
        n_bins = out_t.size // 2
        kstar = spectral_peak(signal.times, signal.values, signal.t0, signal.t1, n_bins,
                              exclude_below, floor_factor)
    rate = 2 * np.pi * kstar / (signal.t1 - signal.t0)
    return PhaseFunction(out_t, rate * (out_t - out_t[0]), np.full(out_t.size, rate))


def ridge_phase_guess(samples: SampledSignal, grid, k0: float, half_width: float = 0.15,
                      n_windows: int = 21, span: float = 20.0, degree: int = 4) -> PhaseFunction:
    """Curved initial phase from the local spectral ridge of scattered samples.

    A linear phase is a poor start when few samples cover a strongly
    modulated carrier: the accumulated phase error runs to many radians and
    the Gauss-Newton loop cannot recover. Here the samples are cut into
    ``n_windows`` overlapping cosine-squared windows of half width
    ``half_width`` (in record lengths). In each one a nonuniform DFT over
    ``k0 +- span`` cycles per record (quarter-cycle steps) locates the local
    peak. A Chebyshev polynomial of ``degree`` is fitted to the peaks with
    repeated 3-MAD outlier rejection and integrated into a phase on ``grid``.

    Parameters
    ----------
    samples : SampledSignal
        Scattered samples.
    grid : array_like
        Uniform output grid spanning ``[samples.t0, samples.t1]``.
    k0 : float
        Carrier estimate in cycles per record, e.g. from :func:`spectral_peak`.

    Returns
    -------
    PhaseFunction
        Phase on ``grid``, starting at zero.
    """
    from .core import phase_from_frequency

    grid = np.asarray(grid, dtype=float)
    T = samples.t1 - samples.t0
    x = (samples.times - samples.t0) / T
    centres = np.linspace(0.0, 1.0, n_windows)
    ks = np.arange(max(k0 - span, 0.0), k0 + span + 1e-9, 0.25)
    peaks = np.full(n_windows, np.nan)
    for i, c in enumerate(centres):
        u = (x - c) / half_width
        inside = np.abs(u) < 1
        if inside.sum() < 4:
            continue
        w = np.cos(0.5 * np.pi * u[inside]) ** 2
        v = samples.values[inside] - np.average(samples.values[inside], weights=w)
        mag = np.abs(np.exp(-2j * np.pi * np.outer(ks, x[inside])) @ (w * v))
        peaks[i] = ks[np.argmax(mag)]
    keep = np.isfinite(peaks)
    if keep.sum() <= degree:
        raise NoOscillationFound("too few windows hold enough samples for a ridge")
    for _ in range(5):
        fit = np.polynomial.Chebyshev.fit(centres[keep], peaks[keep], degree, domain=[0, 1])
        r = np.abs(peaks - fit(centres))
        spread = 1.4826 * np.median(r[keep]) + 1e-9
        new_keep = np.isfinite(peaks) & (r <= 3 * spread)
        if np.array_equal(new_keep, keep) or new_keep.sum() <= degree:
            break
        keep = new_keep
    cycles = np.maximum(fit((grid - samples.t0) / T), 0.0)
    return phase_from_frequency(2 * np.pi * cycles / T, grid[1] - grid[0], grid[0])


def lowpass_trend(values, cutoff_cycles: float, periodic: bool) -> np.ndarray:
    """Smooth part of ``values`` below ``cutoff_cycles`` cycles per record."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if not periodic:
        v_ext = np.concatenate([v, v[-2:0:-1]])
        scale = 2 * (n - 1) / n
    else:
        v_ext = v
        scale = 1.0
    m = v_ext.size
    freqs = np.abs(np.fft.fftfreq(m, d=1.0 / m)) / scale
    w = np.where(freqs < cutoff_cycles, 0.5 * (1 + np.cos(np.pi * freqs / cutoff_cycles)), 0.0)
    return np.fft.ifft(np.fft.fft(v_ext) * w).real[:n]


def _norm(x) -> float:
    return float(np.linalg.norm(x))


def _scale_of(values) -> float:
    rms = float(np.sqrt(np.mean(np.square(values))))
    return np.sqrt(2.0) * rms if rms > 0 else 1.0


def _extract_one(kind, data, theta0, config: PursuitConfig, scale: float):
    """Run one engine on ``data / scale``; returns (component, info)."""
    if kind == "fft":
        res = extract_imf_fft(data.with_values(data.values / scale), theta0, config.fft)
        comp = res.component
        info = {"iterations": res.iterations, "converged": res.converged, "levels": res.levels}
    else:
        from .l1_engine import extract_imf_l1

        scaled = SampledSignal(data.times, data.values / scale, data.t0, data.t1, data.gaps)
        res = extract_imf_l1(scaled, theta0, config.l1)
        comp = res.component
        info = {"iterations": res.iterations, "converged": res.converged}
    comp = IMFComponent(comp.envelope * scale, comp.phase)
    return comp, info


def decompose(signal: Union[Signal, SampledSignal], config: Optional[PursuitConfig] = None,
              grid=None) -> Decomposition:
    """Sequentially extract IMFs until the residual is explained.

    Uniform :class:`Signal` input works with either engine. Scattered
    :class:`SampledSignal` input needs ``engine="l1"``; components are then
    returned on ``grid`` (default: 1024 uniform points).
    """
    config = config or PursuitConfig()
    scattered = isinstance(signal, SampledSignal)
    if scattered and config.engine != "l1":
        raise InvalidInput("scattered or gapped samples need engine='l1'")

    if scattered:
        out_grid = np.linspace(signal.t0, signal.t1, 1024) if grid is None else np.asarray(grid, float)
        sample_data = signal
        periodic = False
    else:
        out_grid = signal.times
        periodic = signal.periodic
        sample_data = SampledSignal(signal.times, signal.values, signal.t0, signal.t1)

    f = signal.values
    f_norm = _norm(f)
    delta = config.residual_tol if config.residual_tol is not None else 1e-3 * f_norm

    use_ridge = config.ridge_guess
    if use_ridge is None:
        use_ridge = scattered and not signal.gaps
    if use_ridge and not scattered:
        raise InvalidInput("ridge_guess applies to scattered samples only")

    comps: list = []
    diags: list = []
    sample_fits: list = []  # reconstructions at the sample times
    residual = f.copy()
    res_norm = f_norm
    while len(comps) < config.max_imfs and res_norm > delta:
        try:
            if scattered:
                current = SampledSignal(signal.times, residual, signal.t0, signal.t1, signal.gaps)
                theta0 = initial_phase_guess(current, config.exclude_below, grid=out_grid,
                                             floor_factor=config.floor_factor)
                if use_ridge:
                    k0 = theta0.omega[0] * (signal.t1 - signal.t0) / (2 * np.pi)
                    theta0 = ridge_phase_guess(current, out_grid, k0)
            else:
                theta0 = initial_phase_guess(signal.with_values(residual), config.exclude_below,
                                             floor_factor=config.floor_factor)
        except NoOscillationFound:
            log.info("no further oscillation above the spectral floor")
            break
        scale = _scale_of(residual) if config.normalize else 1.0
        try:
            if config.engine == "fft":
                comp, info = _extract_one("fft", signal.with_values(residual), theta0, config, scale)
                fit = comp.reconstruction
            else:
                data = SampledSignal(sample_data.times, residual, sample_data.t0, sample_data.t1,
                                     sample_data.gaps)
                comp, info = _extract_one("l1", data, theta0, config, scale)
                fit = _component_at(comp, sample_data.times)
        except (DegenerateEnvelope, PhaseTooShort) as exc:
            log.info("extraction stopped: %s", exc)
            break
        new_residual = residual - fit
        new_norm = _norm(new_residual)
        info = dict(info, initial_frequency=float(theta0.omega[0]),
                    residual_norm=new_norm)
        if new_norm > config.min_residual_reduction * res_norm:
            log.info("component discarded: residual ratio %.4f", new_norm / max(res_norm, 1e-300))
            break
        if config.min_component_norm is not None and _norm(fit) < config.min_component_norm * f_norm:
            log.info("component discarded: norm %.3g below significance level", _norm(fit))
            break
        info["accepted"] = True
        comps.append(comp)
        diags.append(info)
        sample_fits.append(fit)
        residual = new_residual
        res_norm = new_norm

    record = signal.t1 - signal.t0
    slow_grid = np.zeros_like(out_grid)
    if config.trend_extraction:
        fast = [i for i, c in enumerate(comps)
                if c.mean_frequency() * record / (2 * np.pi) >= config.trend_max_cycles]
        for i in range(len(comps)):
            if i not in fast:
                slow_grid = slow_grid + comps[i].reconstruction
        comps = [comps[i] for i in fast]
        diags = [diags[i] for i in fast]
        sample_fits = [sample_fits[i] for i in fast]

    order = sorted(range(len(comps)), key=lambda i: -comps[i].mean_frequency())
    comps = [comps[i] for i in order]
    diags = [diags[i] for i in order]
    sample_fits = [sample_fits[i] for i in order]

    if scattered:
        # the residual only exists where there are samples; report it on the grid
        # as the interpolated leftover so arrays keep the grid length
        total_s = np.zeros_like(f)
        for fit in sample_fits:
            total_s = total_s + fit
        res_samples = f - total_s
        residual_grid = np.interp(out_grid, signal.times, res_samples)
        input_grid = None
    else:
        total = np.zeros_like(f)
        for c in comps:
            total = total + c.reconstruction
        residual_grid = f - total
        input_grid = f

    trend = None
    if config.trend_extraction:
        cutoff = config.trend_cutoff
        if cutoff is None:
            span = out_grid[-1] - out_grid[0] if scattered or not periodic else signal.t1 - signal.t0
            lows = [np.min(c.omega) * span / (2 * np.pi) for c in comps]
            cutoff = 0.5 * min(lows) if lows else 0.0
            cutoff = max(cutoff, float(config.exclude_below + 1))
        trend = slow_grid + lowpass_trend(residual_grid - slow_grid, cutoff, periodic)
        residual_grid = residual_grid - trend

    report = None
    if len(comps) >= 1:
        try:
            asc = comps[::-1]
            report = separation_report([(c.envelope, c.phase) for c in asc])
        except NMPError:
            report = None
    return Decomposition(comps, residual_grid, out_grid, trend, diags, report, input_grid)


def _component_at(comp: IMFComponent, times) -> np.ndarray:
    """Component value at arbitrary times (spline on envelope, Hermite on phase)."""
    from scipy.interpolate import CubicSpline

    t = np.clip(np.asarray(times, dtype=float), comp.phase.t[0], comp.phase.t[-1])
    env = CubicSpline(comp.phase.t, comp.envelope)(t)
    return env * np.cos(comp.phase.at(t))


@dataclass
class ComponentMetrics:
    truth_index: int
    found_index: int
    recon_rel_l2: float
    recon_rel_l2_interior: float
    omega_rel_l2: float
    omega_rel_l2_interior: float
    omega_rel_sup: float
    omega_rel_sup_interior: float


@dataclass
class EvaluationReport:
    matched: list
    unmatched_found: list
    unmatched_truth: list
    interior: tuple

    def as_dict(self) -> dict:
        return {
            "matched": [m.__dict__ for m in self.matched],
            "unmatched": len(self.unmatched_found) + len(self.unmatched_truth),
            "unmatched_found": self.unmatched_found,
            "unmatched_truth": self.unmatched_truth,
            "interior": list(self.interior),
        }


def _rel_l2(err, ref) -> float:
    den = np.linalg.norm(ref)
    return float(np.linalg.norm(err) / den) if den > 0 else float(np.linalg.norm(err))


def evaluate_against_truth(decomposition: Decomposition, truth: Sequence[IMFComponent],
                           interior_fraction: float = 0.8) -> EvaluationReport:
    """Pair found and true components by mean frequency and measure errors.

    Truth components are visited from highest to lowest mean frequency and
    each takes the closest unused found component. Interior metrics use the
    central ``interior_fraction`` of the grid.
    """
    grid = decomposition.grid
    n = grid.size
    for c in truth:
        if c.envelope.size != n:
            raise InvalidInput("truth and decomposition grids differ")
    margin = int(round(n * (1 - interior_fraction) / 2))
    inner = slice(margin, n - margin)
    found = list(decomposition.components)
    used: set = set()
    matched = []
    unmatched_truth = []
    t_order = sorted(range(len(truth)), key=lambda i: -truth[i].mean_frequency())
    for ti in t_order:
        tc = truth[ti]
        cands = [j for j in range(len(found)) if j not in used]
        if not cands:
            unmatched_truth.append(ti)
            continue
        j = min(cands, key=lambda j: (abs(found[j].mean_frequency() - tc.mean_frequency()), j))
        used.add(j)
        fc = found[j]
        rec_err = fc.reconstruction - tc.reconstruction
        om_err = fc.omega - tc.omega
        rel = np.abs(om_err) / np.abs(tc.omega)
        matched.append(ComponentMetrics(
            ti, j,
            _rel_l2(rec_err, tc.reconstruction),
            _rel_l2(rec_err[inner], tc.reconstruction[inner]),
            _rel_l2(om_err, tc.omega),
            _rel_l2(om_err[inner], tc.omega[inner]),
            float(rel.max()),
            float(rel[inner].max()),
        ))
    unmatched_found = [j for j in range(len(found)) if j not in used]
    return EvaluationReport(matched, unmatched_found, unmatched_truth,
                            (int(margin), int(n - margin)))
