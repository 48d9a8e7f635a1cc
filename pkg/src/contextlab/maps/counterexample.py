"""An injective, purity-preserving map of the Bloch sphere onto the XZ great circle.

Both Bloch angles are quantized to ``precision_bits`` bits, the two integers
are bit-interleaved into one fraction u in [0, 1), and u selects a point on the
XZ great circle. Because every image is a planar pure state, four or more
distinct images are always linearly dependent, so contextual sets stay
contextual.
"""

from __future__ import annotations

import math

from ..errors import ValidationError
from ..qstate import TWO_PI, BlochState

DEFAULT_PRECISION_BITS = 16


def interleave_bits(x: int, y: int, bits: int) -> int:
    """Morton code: bit k of ``x`` goes to position 2k+1, bit k of ``y`` to 2k."""
    out = 0
    for k in range(bits):
        out |= ((x >> k) & 1) << (2 * k + 1)
        out |= ((y >> k) & 1) << (2 * k)
    return out


def quantize(s: BlochState, bits: int) -> tuple[int, int]:
    """Nearest grid indices; theta uses 2**bits levels including both poles, phi wraps."""
    top = (1 << bits) - 1
    q_theta = int(round(s.theta / (math.pi / 2) * top))
    q_phi = int(round(s.phi / TWO_PI * (1 << bits))) % (1 << bits)
    if q_theta in (0, top):
        q_phi = 0
    return q_theta, q_phi


def grid_state(q_theta: int, q_phi: int, bits: int) -> BlochState:
    """The state at grid indices ``(q_theta, q_phi)`` (inverse of :func:`quantize` on the grid)."""
    top = (1 << bits) - 1
    return BlochState(q_theta / top * (math.pi / 2), q_phi / (1 << bits) * TWO_PI)


def circle_state(angle: float) -> BlochState:
    """Pure state cos(angle)|0> + sin(angle)|1> for angle in [0, pi), as a BlochState."""
    if angle <= math.pi / 2:
        return BlochState(angle, 0.0)
    return BlochState(math.pi - angle, math.pi)


def counterexample_code(s: BlochState, precision_bits: int = DEFAULT_PRECISION_BITS) -> int:
    if not 8 <= precision_bits <= 32:
        raise ValidationError(f"precision_bits must lie in [8, 32], got {precision_bits}")
    return interleave_bits(*quantize(s, precision_bits), precision_bits)


def counterexample_map(s: BlochState, precision_bits: int = DEFAULT_PRECISION_BITS) -> BlochState:
    code = counterexample_code(s, precision_bits)
    u = code / float(1 << (2 * precision_bits))
    return circle_state(math.pi * u)
