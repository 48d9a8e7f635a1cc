"""Density matrices, Bloch angles, projective measurements and Hermitian vectorization.

All objects are immutable: matrices are stored as read-only complex arrays and
validated once at construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadOutcomeCount,
    DimensionMismatch,
    EmptySet,
    InvalidState,
    NotHermitian,
    NotPure,
    ValidationError,
    WrongDimension,
)

EPS_HERM = 1e-10
EPS_TR = 1e-10
EPS_RES = 1e-10
EPS_PROJ = 1e-10
EPS_PSD = 1e-9
EPS_PURE = 1e-9
EPS_ANG = 1e-8
EPS_NUM = 1e-9

MAX_DIM = 16
TWO_PI = 2.0 * math.pi
# below this |rho_01| the azimuth carries no information
_POLE_COHERENCE = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def as_matrix(m) -> np.ndarray:
    """Return ``m`` as a 2-D complex array (accepts DensityMatrix or array-like)."""
    if isinstance(m, DensityMatrix):
        return m.matrix
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise WrongDimension(f"expected a 2-D matrix, got shape {a.shape}")
    return a


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix."""

    __slots__ = ("_m",)

    def __init__(self, matrix, *, check: bool = True):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise WrongDimension(f"density matrix must be square, got shape {m.shape}")
        if check:
            herm = np.max(np.abs(m - m.conj().T))
            if herm > EPS_HERM:
                raise NotHermitian(f"matrix is not Hermitian (max |M - M^H| = {herm:.3e})")
            tr = np.trace(m).real
            if abs(tr - 1.0) > EPS_TR:
                raise InvalidState(f"trace is {tr!r}, expected 1")
            lam_min = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
            if lam_min < -EPS_PSD:
                raise InvalidState(f"matrix has negative eigenvalue {lam_min:.3e}")
        self._m = _frozen(m)

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    @property
    def purity(self) -> float:
        return float(np.real(np.vdot(self._m.conj().T, self._m)))

    def is_pure(self, tol: float = EPS_PURE) -> bool:
        return self.purity >= 1.0 - tol

    @classmethod
    def from_ket(cls, ket) -> "DensityMatrix":
        v = np.asarray(ket, dtype=complex).ravel()
        norm = np.linalg.norm(v)
        if norm == 0:
            raise InvalidState("zero vector is not a state")
        v = v / norm
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d) / d)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self._m, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, DensityMatrix):
            return NotImplemented
        return self._m.shape == other._m.shape and np.array_equal(self._m, other._m)

    def __hash__(self):
        return hash((self._m.shape, self._m.tobytes()))

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, purity={self.purity:.6g})"


@dataclass(frozen=True)
class BlochState:
    """Pure qubit state ``cos(theta)|0> + sin(theta) e^{i phi}|1>``.

    ``theta`` lies in [0, pi/2]; ``phi`` is reduced to [0, 2 pi) and set to 0
    at the poles, where it is a pure gauge.
    """

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        theta = float(self.theta)
        phi = float(self.phi)
        if not (math.isfinite(theta) and math.isfinite(phi)):
            raise InvalidState(f"non-finite Bloch angles ({theta}, {phi})")
        if theta < -1e-12 or theta > math.pi / 2 + 1e-12:
            raise InvalidState(f"theta={theta} outside [0, pi/2]")
        theta = min(max(theta, 0.0), math.pi / 2)
        if theta == 0.0 or theta == math.pi / 2:
            phi = 0.0
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", wrap_angle(phi))

    @property
    def is_pole(self) -> bool:
        return self.theta == 0.0 or self.theta == math.pi / 2

    def ket(self) -> np.ndarray:
        return np.array(
            [math.cos(self.theta), math.sin(self.theta) * np.exp(1j * self.phi)],
            dtype=complex,
        )

    def bloch_vector(self) -> tuple[float, float, float]:
        """Cartesian coordinates in the export convention (x, y, z).

        x = sin(2 theta) cos(phi), y = -sin(2 theta) sin(phi), z = cos(2 theta).
        """
        s = math.sin(2 * self.theta)
        return (s * math.cos(self.phi), -s * math.sin(self.phi), math.cos(2 * self.theta))


def wrap_angle(phi: float) -> float:
    """Reduce an angle to [0, 2 pi)."""
    w = math.fmod(phi, TWO_PI)
    if w < 0:
        w += TWO_PI
    if w >= TWO_PI:
        w = 0.0
    return w


def bloch_to_density(s: BlochState) -> DensityMatrix:
    c, sn = math.cos(s.theta), math.sin(s.theta)
    off = c * sn * np.exp(1j * s.phi)
    m = np.array([[c * c, np.conj(off)], [off, sn * sn]], dtype=complex)
    return DensityMatrix(m)


def density_to_bloch(rho) -> BlochState:
    m = as_matrix(rho)
    if m.shape != (2, 2):
        raise WrongDimension(f"Bloch angles need a 2x2 state, got {m.shape}")
    purity = float(np.real(np.vdot(m.conj().T, m)))
    if purity < 1.0 - EPS_PURE:
        raise NotPure(f"state has purity {purity:.12g} < 1")
    coh = m[1, 0]
    theta = 0.5 * math.atan2(2.0 * abs(coh), float(np.real(m[0, 0] - m[1, 1])))
    phi = float(np.angle(coh)) if abs(coh) > _POLE_COHERENCE else 0.0
    return BlochState(theta, phi)


def tensor(a, b) -> DensityMatrix:
    return DensityMatrix(np.kron(as_matrix(a), as_matrix(b)))


def partial_trace(rho, dims: tuple[int, int], keep: str = "A") -> DensityMatrix:
    """Trace out one factor of a bipartite state.

    ``keep`` is ``"A"`` (first factor) or ``"B"`` (second factor).
    """
    m = as_matrix(rho)
    d_a, d_b = dims
    if d_a * d_b != m.shape[0] or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"dims {dims} incompatible with matrix of shape {m.shape}")
    t = m.reshape(d_a, d_b, d_a, d_b)
    if keep in ("A", "a", 0):
        out = np.einsum("ijkj->ik", t)
    elif keep in ("B", "b", 1):
        out = np.einsum("ijil->jl", t)
    else:
        raise ValidationError(f"keep must be 'A' or 'B', got {keep!r}")
    return DensityMatrix(out)


def vectorize_hermitian(m) -> np.ndarray:
    """Real coordinates of a Hermitian matrix in an orthonormal Hilbert-Schmidt basis.

    Diagonal entries come first, then sqrt(2) Re and sqrt(2) Im of each entry
    above the diagonal, so ``v(A) @ v(B) == Tr(A B)``.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise WrongDimension(f"expected a square matrix, got {a.shape}")
    if np.max(np.abs(a - a.conj().T), initial=0.0) > EPS_HERM:
        raise NotHermitian("cannot vectorize a non-Hermitian matrix")
    d = a.shape[0]
    iu = np.triu_indices(d, k=1)
    upper = a[iu]
    return np.concatenate(
        [np.real(np.diag(a)), math.sqrt(2) * np.real(upper), math.sqrt(2) * np.imag(upper)]
    )


def unvectorize_hermitian(v: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`vectorize_hermitian`."""
    v = np.asarray(v, dtype=float)
    if v.shape != (d * d,):
        raise DimensionMismatch(f"vector of length {v.shape} does not match dimension {d}")
    iu = np.triu_indices(d, k=1)
    k = len(iu[0])
    out = np.diag(v[:d]).astype(complex)
    upper = (v[d : d + k] + 1j * v[d + k :]) / math.sqrt(2)
    out[iu] = upper
    out[(iu[1], iu[0])] = np.conj(upper)
    return out


@dataclass(frozen=True)
class PVM:
    """Projective measurement: idempotent projectors summing to the identity."""

    projectors: tuple[np.ndarray, ...]

    def __post_init__(self):
        projs = tuple(_frozen(p) for p in self.projectors)
        if not projs:
            raise BadOutcomeCount("a PVM needs at least one projector")
        d = projs[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for p in projs:
            if p.shape != (d, d):
                raise DimensionMismatch("projectors must share one square shape")
            if np.max(np.abs(p @ p - p)) > EPS_PROJ:
                raise ValidationError("projector is not idempotent")
            total += p
        if np.max(np.abs(total - np.eye(d))) > EPS_RES:
            raise ValidationError("projectors do not resolve the identity")
        object.__setattr__(self, "projectors", projs)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def __len__(self):
        return len(self.projectors)

    @classmethod
    def computational(cls, d: int) -> "PVM":
        return cls(tuple(np.diag(np.eye(d)[k]) for k in range(d)))


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_unitary(d: int, rng) -> np.ndarray:
    rng = as_rng(rng)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_pvm(d: int, n_outcomes: int, seed) -> PVM:
    """PVM from a Haar-random unitary whose columns are split into ``n_outcomes`` groups.

    ``seed`` is an int or a ``numpy.random.Generator`` (which is advanced).
    """
    if not (1 <= n_outcomes <= d):
        raise BadOutcomeCount(f"n_outcomes must lie in [1, {d}], got {n_outcomes}")
    u = haar_unitary(d, seed)
    projs = []
    for cols in np.array_split(np.arange(d), n_outcomes):
        block = u[:, cols]
        projs.append(block @ block.conj().T)
    return PVM(tuple(projs))


def random_pure_state(d: int, rng) -> DensityMatrix:
    rng = as_rng(rng)
    return DensityMatrix.from_ket(rng.standard_normal(d) + 1j * rng.standard_normal(d))


@dataclass(frozen=True)
class StateSet:
    """Ordered, labelled collection of states of one common dimension."""

    states: tuple[DensityMatrix, ...]
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        states = tuple(s if isinstance(s, DensityMatrix) else DensityMatrix(s) for s in self.states)
        if not states:
            raise EmptySet("a state set needs at least one state")
        labels = tuple(self.labels) if self.labels else tuple(f"s{i}" for i in range(len(states)))
        if len(labels) != len(states):
            raise ValidationError("one label per state is required")
        if len(set(labels)) != len(labels):
            raise ValidationError("labels must be unique")
        d = states[0].dim
        if any(s.dim != d for s in states):
            raise DimensionMismatch("all states in a set must share one dimension")
        if d > MAX_DIM:
            raise WrongDimension(f"dimension {d} exceeds {MAX_DIM}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.states[0].dim

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def matrices(self) -> np.ndarray:
        return np.stack([s.matrix for s in self.states])

    def vectors(self) -> np.ndarray:
        """Vectorized states as columns, shape (d*d, n)."""
        return np.stack([vectorize_hermitian(s) for s in self.states], axis=1)

    def all_pure(self, tol: float = EPS_PURE) -> bool:
        return all(s.is_pure(tol) for s in self.states)

    @classmethod
    def from_bloch(cls, states: Iterable[BlochState], labels: Sequence[str] = ()) -> "StateSet":
        return cls(tuple(bloch_to_density(s) for s in states), tuple(labels))


def state_from_json(obj) -> tuple[DensityMatrix, str | None]:
    """Parse one entry of a states file: ``{"bloch": {...}}`` or ``{"matrix": [...]}``."""
    if not isinstance(obj, dict):
        raise ValidationError(f"state entry must be an object, got {type(obj).__name__}")
    label = obj.get("label")
    if label is not None and not isinstance(label, str):
        raise ValidationError("field 'label' must be a string")
    if "bloch" in obj:
        b = obj["bloch"]
        try:
            theta, phi = float(b["theta"]), float(b.get("phi", 0.0))
        except (TypeError, KeyError, ValueError) as exc:
            raise ValidationError(f"field 'bloch' needs numeric 'theta' and 'phi': {exc}") from None
        return bloch_to_density(BlochState(theta, phi)), label
    if "matrix" in obj:
        try:
            arr = np.asarray(obj["matrix"], dtype=float)
        except (TypeError, ValueError):
            raise ValidationError("field 'matrix' must be nested [re, im] pairs") from None
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise ValidationError(f"field 'matrix' must have shape (d, d, 2), got {arr.shape}")
        return DensityMatrix(arr[..., 0] + 1j * arr[..., 1]), label
    raise ValidationError("state entry needs a 'bloch' or 'matrix' field")


def state_to_json(rho: DensityMatrix, label: str) -> dict:
    m = rho.matrix
    return {"matrix": [[[float(z.real), float(z.imag)] for z in row] for row in m], "label": label}


def states_from_json(entries) -> StateSet:
    if not isinstance(entries, list):
        raise ValidationError("states file must hold a JSON array")
    if not entries:
        raise EmptySet("states file holds no states")
    states, labels = [], []
    for i, entry in enumerate(entries):
        rho, label = state_from_json(entry)
        states.append(rho)
        labels.append(label if label is not None else f"s{i}")
    return StateSet(tuple(states), tuple(labels))


def load_states(path) -> StateSet:
    text = Path(path).read_text()
    if not text.strip():
        raise EmptySet(f"{path} is empty")
    try:
        entries = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return states_from_json(entries)
