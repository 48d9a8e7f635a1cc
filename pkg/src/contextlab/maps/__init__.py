"""Nonlinear state maps: cloning, Weinberg precession, Schrodinger-Newton phases, planar squash."""

from .counterexample import counterexample_map, interleave_bits
from .deutsch import deutsch_clone, deutsch_clone_set
from .schrodinger_newton import (
    SNConfig,
    SNPhaseResult,
    default_sn_config,
    sn_channel,
    sn_moment_evolution,
)
from .weinberg import WeinbergHamiltonian, weinberg_evolve, weinberg_omega

__all__ = [
    "SNConfig",
    "SNPhaseResult",
    "WeinbergHamiltonian",
    "counterexample_map",
    "default_sn_config",
    "deutsch_clone",
    "deutsch_clone_set",
    "interleave_bits",
    "sn_channel",
    "sn_moment_evolution",
    "weinberg_evolve",
    "weinberg_omega",
]
