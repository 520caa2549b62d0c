"""Purity and chaos in a driven, damped Kerr oscillator.

Master-equation and quantum-state-diffusion solvers in a truncated Fock
basis, Wigner functions, mean-field Lyapunov exponents and Poincare
sections, parameter sweeps, and a small run/export harness.
"""
from .drive import Bichromatic, Constant, GaussianTrain, evaluate
from .errors import (ConfigError, EmptySelection, KerrPurityError, NonFiniteState, NoPeriod,
                     TruncationOverflow)
from .fockspace import FockBasis, SystemParams
from .lindblad import EvolutionConfig, TimeSeries, evolve
from .observables import WignerGrid, entropies, excitation, purity, thermal_state, wigner
from .qsd import EnsembleConfig, qsd_step, run_ensemble
from .semiclassical import LyapunovConfig, cluster_count, lyapunov_max, poincare_section
from .sweep import SweepSpec, run_sweep, select_constant_excitation, transition_curve

__version__ = "0.1.0"
