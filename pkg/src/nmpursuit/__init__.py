"""Sparse time-frequency decomposition by nonlinear matching pursuit.

A signal is split into components ``a(t) cos(theta(t))`` with smooth positive
envelopes and monotone phases, one component at a time. Periodic uniform data
goes through an FFT engine; non-periodic, gapped or scattered data goes
through an l1-regularized engine.
"""
from .core import (
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
from .errors import NMPError
from .fft_engine import FftEngineConfig, extract_imf_fft
from .l1_engine import (
    L1EngineConfig,
    L1Problem,
    L1SolverConfig,
    extract_imf_l1,
    recover_gapped,
    recover_undersampled,
    solve_l1_ls,
)
from .pursuit import Decomposition, PursuitConfig, decompose, evaluate_against_truth, initial_phase_guess
from .separation import conv_lemma_residual, separation_report
from .synth import ExampleSpec, TruthBundle, generate, white_noise

__version__ = "0.1.0"

__all__ = [
    "Decomposition",
    "ExampleSpec",
    "FftEngineConfig",
    "FilterSpec",
    "IMFComponent",
    "L1EngineConfig",
    "L1Problem",
    "L1SolverConfig",
    "NMPError",
    "PhaseFunction",
    "PursuitConfig",
    "SampledSignal",
    "Signal",
    "TruthBundle",
    "basis_at_times",
    "basis_size",
    "conv_lemma_residual",
    "decompose",
    "eval_overcomplete_basis",
    "evaluate_against_truth",
    "extract_imf_fft",
    "extract_imf_l1",
    "filter_weight",
    "generate",
    "initial_phase_guess",
    "interpolate",
    "mirror_extend",
    "phase_from_frequency",
    "recover_gapped",
    "recover_undersampled",
    "separation_report",
    "snr_db",
    "solve_l1_ls",
    "white_noise",
]
