"""Scale-separation measures and the local convolution estimate.

``separation_report`` quantifies how slowly envelopes and frequencies vary
relative to the oscillation itself, and how far apart neighbouring
components sit in frequency. ``conv_lemma_residual`` checks numerically that
filtering ``a exp(-i theta)`` with a compact kernel is close to evaluating
the kernel's transform at the instantaneous frequency.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import PhaseFunction
from .errors import InvalidComponent, InvalidKernel

__all__ = ["SeparationReport", "separation_report", "LemmaCheck", "conv_lemma_residual",
           "kernel_transform"]


@dataclass(frozen=True)
class SeparationReport:
    """Per-component separation factor ``epsilon`` and frequency ratio ``d``.

    ``epsilon_profiles[k]`` is the pointwise ``max(|a'/w|, |w'/w^2|)`` with
    ``w = theta'``; ``ratio_profiles[k]`` is ``w_{k+1} / w_k`` for adjacent
    components. ``d`` is ``None`` for a single component.
    """

    epsilon: tuple
    d: Optional[float]
    epsilon_profiles: tuple
    ratio_profiles: tuple

    @property
    def epsilon_max(self) -> float:
        return max(self.epsilon)


def separation_report(components: Sequence) -> SeparationReport:
    """Separation metrics of ``(envelope, PhaseFunction)`` pairs.

    Components must be ordered by increasing mean frequency. Derivatives are
    second-order centred differences, one-sided at the ends.
    """
    if len(components) == 0:
        raise InvalidComponent("no components given")
    eps, profiles, omegas = [], [], []
    for k, (env, phase) in enumerate(components):
        env = np.asarray(env, dtype=float)
        if not isinstance(phase, PhaseFunction):
            raise InvalidComponent("phase must be a PhaseFunction")
        om = np.asarray(phase.omega, dtype=float)
        if env.shape != om.shape:
            raise InvalidComponent("envelope and phase grids differ")
        if np.any(om <= 0):
            raise InvalidComponent(f"component {k} has nonpositive frequency")
        t = phase.t
        da = np.gradient(env, t, edge_order=2)
        dom = np.gradient(om, t, edge_order=2)
        prof = np.maximum(np.abs(da / om), np.abs(dom / om**2))
        eps.append(float(prof.max()))
        profiles.append(prof)
        omegas.append(om)
    ratios = []
    for lo, hi in zip(omegas, omegas[1:]):
        if lo.shape != hi.shape:
            raise InvalidComponent("components live on different grids")
        ratios.append(hi / lo)
    d = float(min(r.min() for r in ratios)) if ratios else None
    return SeparationReport(tuple(eps), d, tuple(profiles), tuple(ratios))


@dataclass(frozen=True)
class LemmaCheck:
    """Outcome of :func:`conv_lemma_residual`; unpacks as ``(lhs, bound)``."""

    lhs: float
    bound: float
    quad_error: float
    envelope_term: float
    phase_term: float
    moments: tuple

    def __iter__(self):
        return iter((self.lhs, self.bound))

    def holds(self, slack_factor: float = 10.0) -> bool:
        return self.lhs <= self.bound + slack_factor * self.quad_error


def _gauss(n: int, half_width: float):
    x, w = np.polynomial.legendre.leggauss(n)
    return x * half_width, w * half_width


def kernel_transform(phi: Callable, support: float, xi, n: int = 256) -> np.ndarray:
    """``int phi(u) exp(-i xi u) du`` over ``[-support, support]``."""
    u, w = _gauss(n, support)
    vals = np.asarray(phi(u), dtype=float)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    return np.exp(-1j * np.outer(xi, u)) @ (w * vals)


def _sup_derivative(fn: Callable, lo: float, hi: float, order: int, n: int = 20001) -> float:
    t = np.linspace(lo, hi, n)
    y = np.asarray(fn(t), dtype=float)
    for _ in range(order):
        y = np.gradient(y, t, edge_order=2)
    return float(np.max(np.abs(y)))


def conv_lemma_residual(a: Callable, theta: Callable, phi: Callable, support: float,
                        t_eval, omega: Optional[Callable] = None,
                        a_prime: Optional[Callable] = None,
                        theta_second: Optional[Callable] = None,
                        n_quad: int = 400) -> LemmaCheck:
    """Compare ``phi * (a e^{-i theta})`` with ``a e^{-i theta} phi_hat(theta')``.

    Parameters
    ----------
    a, theta : callable
        Envelope and phase as functions of time.
    phi : callable
        Kernel, assumed zero outside ``[-support, support]``.
    support : float
        Half-width of the kernel support.
    t_eval : array_like
        Times at which the difference is evaluated; ``lhs`` is its maximum.
    omega, a_prime, theta_second : callable, optional
        Exact ``theta'``, ``a'`` and ``theta''``. Missing ones are obtained by
        finite differences on a dense grid.
    n_quad : int
        Gauss-Legendre nodes. The same integrals with ``2 * n_quad`` nodes
        give ``quad_error``.

    Returns
    -------
    LemmaCheck
        ``lhs``, ``bound`` and the pieces of the bound. Sups are taken over
        the union of kernel windows around ``t_eval``.
    """
    if not support > 0 or not np.isfinite(support):
        raise InvalidKernel("kernel support must be a positive finite half-width")
    t_eval = np.atleast_1d(np.asarray(t_eval, dtype=float))
    lo, hi = float(t_eval.min() - support), float(t_eval.max() + support)
    if omega is None:
        def omega(t):
            h = 1e-6
            return (theta(t + h) - theta(t - h)) / (2 * h)

    def lhs_at(n):
        u, w = _gauss(n, support)
        k = np.asarray(phi(u), dtype=float)
        if k.shape != u.shape or not np.all(np.isfinite(k)):
            raise InvalidKernel("kernel is not finite on its support")
        tau = t_eval[:, None] + u[None, :]
        conv = (a(tau) * np.exp(-1j * theta(tau))) @ (w * k)
        om = np.asarray(omega(t_eval), dtype=float)
        hat = np.exp(-1j * np.outer(om, u)) @ (w * k)
        approx = a(t_eval) * np.exp(-1j * theta(t_eval)) * hat
        return np.abs(conv - approx), k, u, w

    diff1, k1, u1, w1 = lhs_at(n_quad)
    diff2, k2, u2, w2 = lhs_at(2 * n_quad)
    m0 = float(np.sum(w2 * np.abs(k2)))
    if not np.isfinite(m0) or m0 == 0:
        raise InvalidKernel("kernel is not integrable or vanishes identically")
    I1 = float(np.sum(w2 * np.abs(u2 * k2)))
    I2 = float(np.sum(w2 * np.abs(u2**2 * k2)))
    I1_coarse = float(np.sum(w1 * np.abs(u1 * k1)))
    I2_coarse = float(np.sum(w1 * np.abs(u1**2 * k1)))

    sup_da = (_sup_derivative(a_prime, lo, hi, 0) if a_prime is not None
              else _sup_derivative(a, lo, hi, 1))
    sup_a = _sup_derivative(a, lo, hi, 0)
    sup_th2 = (_sup_derivative(theta_second, lo, hi, 0) if theta_second is not None
               else _sup_derivative(omega, lo, hi, 1))
    env_term = sup_da * I1
    phase_term = 0.5 * sup_a * sup_th2 * I2
    lhs = float(diff2.max())
    quad_err = float(np.max(np.abs(diff2 - diff1)))
    quad_err += sup_da * abs(I1 - I1_coarse) + 0.5 * sup_a * sup_th2 * abs(I2 - I2_coarse)
    quad_err += 1e-14 * max(1.0, sup_a * m0)
    return LemmaCheck(lhs, env_term + phase_term, quad_err, env_term, phase_term, (I1, I2))
