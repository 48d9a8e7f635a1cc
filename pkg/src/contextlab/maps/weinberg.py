"""Weinberg nonlinear dynamics of a single qubit.

The Hamiltonian function is a polynomial hbar(a) in a = sin^2(theta). Each
state keeps its polar angle and precesses in phi at the state-dependent rate
omega = hbar'(a), so states sharing a meridian drift apart unless hbar is
linear in a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from ..errors import ValidationError
from ..qstate import BlochState, wrap_angle


@dataclass(frozen=True)
class WeinbergHamiltonian:
    """hbar(a) = sum_m coeffs[m] * a**m."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        if not c:
            raise ValidationError("WeinbergHamiltonian needs at least one coefficient")
        if not all(math.isfinite(x) for x in c):
            raise ValidationError("WeinbergHamiltonian coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def is_nonlinear(self) -> bool:
        return any(x != 0.0 for x in self.coeffs[2:])

    def __call__(self, a: float) -> float:
        return float(P.polyval(a, self.coeffs))

    def derivative(self, a):
        return P.polyval(a, P.polyder(self.coeffs)) if len(self.coeffs) > 1 else 0.0 * np.asarray(a)

    @classmethod
    def from_json(cls, obj) -> "WeinbergHamiltonian":
        if not isinstance(obj, dict) or "coeffs" not in obj:
            raise ValidationError("field 'coeffs' is required for a Weinberg Hamiltonian")
        coeffs = obj["coeffs"]
        if not isinstance(coeffs, list) or not all(isinstance(x, (int, float)) for x in coeffs):
            raise ValidationError("field 'coeffs' must be a list of numbers")
        return cls(tuple(coeffs))

    def to_json(self) -> dict:
        return {"coeffs": list(self.coeffs)}


def weinberg_omega(h: WeinbergHamiltonian, theta: float) -> float:
    """Precession rate hbar'(a) at a = sin^2(theta); finite at the poles."""
    if theta < -1e-12 or theta > math.pi / 2 + 1e-12:
        raise ValidationError(f"theta={theta} outside [0, pi/2]")
    return float(h.derivative(math.sin(theta) ** 2))


def weinberg_evolve(s: BlochState, h: WeinbergHamiltonian, t: float) -> BlochState:
    if t < 0:
        raise ValidationError("evolution time must be non-negative")
    if s.is_pole or t == 0:
        return s
    return BlochState(s.theta, wrap_angle(s.phi - weinberg_omega(h, s.theta) * t))
