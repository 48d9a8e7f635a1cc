"""Deciding whether a finite set of states admits a noncontextual hidden-variable model.

For pure states the answer is purely linear-algebraic: the set is noncontextual
exactly when the density matrices are linearly independent. :func:`rank_test`
decides this with an SVD; :func:`dual_frame` and :func:`model_from_frame` build
the explicit model for independent sets; :func:`lp_oracle` answers the same
question by linear programming over a finite hidden-variable ansatz, which
also covers mixed states.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import DependentSet, DimensionMismatch, EmptySet, FrameMismatch, SolverFailure
from .qstate import (
    EPS_PURE,
    PVM,
    DensityMatrix,
    StateSet,
    unvectorize_hermitian,
    vectorize_hermitian,
)

EPS_RANK = 1e-8
EPS_FRAME = 1e-8
EPS_MODEL = 1e-8
EPS_CERT = 1e-7
EPS_LP = 1e-7

INFEASIBLE_LABEL = "infeasible w.r.t. ansatz"


class Verdict(str, enum.Enum):
    NONCONTEXTUAL_INDEPENDENT = "NONCONTEXTUAL_INDEPENDENT"
    CONTEXTUAL_DEPENDENT = "CONTEXTUAL_DEPENDENT"


@dataclass(frozen=True)
class ContextualityVerdict:
    rank: int
    singular_values: tuple[float, ...]
    verdict: Verdict
    certificate: tuple[float, ...] | None = None
    warnings: tuple[str, ...] = ()

    @property
    def independent(self) -> bool:
        return self.verdict is Verdict.NONCONTEXTUAL_INDEPENDENT

    @property
    def dependent(self) -> bool:
        return self.verdict is Verdict.CONTEXTUAL_DEPENDENT

    def to_json(self) -> dict:
        return {
            "rank": self.rank,
            "singular_values": list(self.singular_values),
            "verdict": self.verdict.value,
            "certificate": None if self.certificate is None else list(self.certificate),
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class DualFrame:
    """Hermitian operators F_j with Tr(rho_i F_j) = delta_ij."""

    operators: tuple[np.ndarray, ...]

    def __len__(self):
        return len(self.operators)

    def pairing(self, states: StateSet) -> np.ndarray:
        """Matrix of Tr(rho_i F_j)."""
        rho = states.matrices()
        f = np.stack(self.operators)
        return np.real(np.einsum("iab,jba->ij", rho, f))


@dataclass(frozen=True)
class NoncontextualModel:
    """Hidden-variable model: states sigma_lambda and response weights p[i, lambda]."""

    sigma: tuple[DensityMatrix, ...]
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[1] != len(self.sigma):
            raise FrameMismatch(
                f"weights shape {w.shape} does not match {len(self.sigma)} hidden states"
            )
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_hidden(self) -> int:
        return len(self.sigma)

    def reconstruct(self) -> np.ndarray:
        """sum_lambda p[i, lambda] sigma_lambda for every i, shape (n, d, d)."""
        sig = np.stack([s.matrix for s in self.sigma])
        return np.einsum("il,lab->iab", self.weights, sig)

    def violations(self, states: StateSet) -> dict[str, float]:
        """Magnitudes by which the model misses its defining constraints."""
        w = self.weights
        recon = self.reconstruct() - states.matrices()
        return {
            "min_weight": float(w.min()),
            "row_sum": float(np.max(np.abs(w.sum(axis=1) - 1.0))),
            "reconstruction": float(np.max(np.linalg.norm(recon, axis=(1, 2)))),
        }

    def is_valid(self, states: StateSet, eps_lp: float = EPS_LP, eps_model: float = EPS_MODEL) -> bool:
        v = self.violations(states)
        return v["min_weight"] >= -eps_lp and v["row_sum"] <= eps_lp and v["reconstruction"] <= eps_model

    def summary(self) -> dict:
        return {"n_hidden": self.n_hidden, "weights": self.weights.tolist()}


@dataclass(frozen=True)
class ModelCheck:
    max_deviation: float
    passed: bool
    tol: float


@dataclass(frozen=True)
class LPResult:
    feasible: bool
    model: NoncontextualModel | None
    status: str

    def __bool__(self):
        return self.feasible


def _stacked(states: StateSet) -> np.ndarray:
    return states.vectors()


def rank_test(states: StateSet, eps_rank: float = EPS_RANK) -> ContextualityVerdict:
    """Numerical rank of the vectorized states, with a dependence certificate.

    The certificate is the unit vector alpha (right singular vector of the
    smallest singular value) with sum_i alpha_i rho_i ~ 0, sign-fixed so that
    its first non-negligible entry is positive.
    """
    if len(states) == 0:
        raise EmptySet("cannot test an empty set")
    v = _stacked(states)
    n = v.shape[1]
    _, s, vh = np.linalg.svd(v, full_matrices=True)
    sigma_max = s[0] if s.size else 0.0
    rank = int(np.sum(s > eps_rank * sigma_max)) if sigma_max > 0 else 0
    notes = []
    if not states.all_pure(EPS_PURE):
        notes.append("mixed state present: independence certifies noncontextuality, "
                     "dependence does not certify contextuality")
    if rank < n:
        alpha = vh[-1].real.copy()
        lead = np.flatnonzero(np.abs(alpha) > 1e-6 * np.abs(alpha).max())[0]
        if alpha[lead] < 0:
            alpha = -alpha
        alpha /= np.linalg.norm(alpha)
        return ContextualityVerdict(
            rank, tuple(abs(float(x)) for x in s), Verdict.CONTEXTUAL_DEPENDENT,
            tuple(float(x) for x in alpha), tuple(notes),
        )
    return ContextualityVerdict(
        rank, tuple(abs(float(x)) for x in s), Verdict.NONCONTEXTUAL_INDEPENDENT, None, tuple(notes)
    )


def certificate_residual(states: StateSet, certificate: Sequence[float]) -> float:
    """Hilbert-Schmidt norm of sum_i alpha_i rho_i."""
    alpha = np.asarray(certificate, dtype=float)
    return float(np.linalg.norm(np.einsum("i,iab->ab", alpha, states.matrices())))


def gram_matrix(states: StateSet) -> np.ndarray:
    v = _stacked(states)
    return v.T @ v


def dual_frame(states: StateSet, eps_rank: float = EPS_RANK) -> DualFrame:
    """Dual operators F_j = sum_k (M^-1)_jk rho_k, with M the Gram matrix Tr(rho_j rho_k).

    Evaluated as the pseudo-inverse of the vectorized states, V (V^T V)^-1,
    which avoids squaring the condition number of nearly dependent sets.
    """
    if rank_test(states, eps_rank).dependent:
        raise DependentSet("states are linearly dependent; no dual frame exists")
    v = _stacked(states)
    u, s, vh = np.linalg.svd(v, full_matrices=False)
    dual_vectors = (u / s) @ vh                       # (d^2, n), column j is v(F_j)
    d = states.dim
    return DualFrame(tuple(unvectorize_hermitian(dual_vectors[:, j], d) for j in range(len(states))))


def model_from_frame(states: StateSet, frame: DualFrame) -> NoncontextualModel:
    """Model with sigma_lambda = rho_lambda and p[i, lambda] = Tr(rho_i F_lambda)."""
    if len(frame) != len(states):
        raise FrameMismatch(f"frame has {len(frame)} operators for {len(states)} states")
    if frame.operators[0].shape != (states.dim, states.dim):
        raise FrameMismatch("frame operators do not match the state dimension")
    return NoncontextualModel(states.states, frame.pairing(states))


def verify_model(
    states: StateSet,
    model: NoncontextualModel,
    pvms: Sequence[PVM],
    tol: float = EPS_MODEL,
) -> ModelCheck:
    """Largest |Tr(rho_i P_k) - sum_lambda p[i, lambda] Tr(sigma_lambda P_k)| over the PVMs."""
    if model.weights.shape[0] != len(states):
        raise DimensionMismatch(f"model has {model.weights.shape[0]} rows for {len(states)} states")
    d = states.dim
    if any(s.dim != d for s in model.sigma):
        raise DimensionMismatch("hidden states and prepared states differ in dimension")
    rho = states.matrices()
    sig = np.stack([s.matrix for s in model.sigma])
    worst = 0.0
    for pvm in pvms:
        if pvm.dim != d:
            raise DimensionMismatch(f"PVM of dimension {pvm.dim} applied to dimension {d}")
        proj = np.stack(pvm.projectors)
        p_true = np.real(np.einsum("iab,kba->ik", rho, proj))
        p_hidden = np.real(np.einsum("lab,kba->lk", sig, proj))
        dev = np.max(np.abs(p_true - model.weights @ p_hidden))
        worst = max(worst, float(dev))
    return ModelCheck(worst, worst <= tol, tol)


def default_ansatz(states: StateSet) -> list[DensityMatrix]:
    """Input states, computational-basis projectors and the maximally mixed state."""
    d = states.dim
    basis = [DensityMatrix(np.diag(np.eye(d)[k])) for k in range(d)]
    return list(states.states) + basis + [DensityMatrix.maximally_mixed(d)]


def null_space(v: np.ndarray, eps_rank: float = EPS_RANK) -> np.ndarray:
    """Orthonormal basis (rows) of the null space of ``v`` at relative cutoff ``eps_rank``."""
    _, s, vh = np.linalg.svd(v, full_matrices=True)
    if s.size == 0 or s[0] == 0:
        return vh
    rank = int(np.sum(s > eps_rank * s[0]))
    return vh[rank:]


def lp_oracle(
    states: StateSet,
    ansatz: Sequence[DensityMatrix] | None = None,
    eps_rank: float = EPS_RANK,
    eps_lp: float = EPS_LP,
) -> LPResult:
    """Search for weights p[i, lambda] >= 0 realizing a noncontextual model on ``ansatz``.

    Constraints: rows of p sum to one, sum_lambda p[i, lambda] sigma_lambda =
    rho_i, and every column of p is orthogonal to the null space of the
    vectorized states, so that p[i, lambda] = Tr(rho_i G_lambda) for some
    Hermitian G_lambda. Infeasibility is only conclusive for the given ansatz.
    """
    if ansatz is None:
        ansatz = default_ansatz(states)
    ansatz = [a if isinstance(a, DensityMatrix) else DensityMatrix(a) for a in ansatz]
    if not ansatz:
        raise DimensionMismatch("ansatz is empty")
    d = states.dim
    if any(a.dim != d for a in ansatz):
        raise DimensionMismatch("ansatz states must match the state dimension")

    n, L = len(states), len(ansatz)
    v_states = _stacked(states)                                   # (d^2, n)
    v_ansatz = np.stack([vectorize_hermitian(a) for a in ansatz], axis=1)  # (d^2, L)
    betas = null_space(v_states, eps_rank)                         # (k, n)

    # variable index i * L + lam
    rows, rhs = [], []
    for i in range(n):
        r = np.zeros(n * L)
        r[i * L:(i + 1) * L] = 1.0
        rows.append(r)
        rhs.append(1.0)
    for i in range(n):
        for c in range(d * d):
            r = np.zeros(n * L)
            r[i * L:(i + 1) * L] = v_ansatz[c]
            rows.append(r)
            rhs.append(v_states[c, i])
    for beta in betas:
        for lam in range(L):
            r = np.zeros(n * L)
            r[lam::L] = beta
            rows.append(r)
            rhs.append(0.0)
    a_eq = np.array(rows)
    b_eq = np.array(rhs)

    res = linprog(
        c=np.zeros(n * L),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": eps_lp, "dual_feasibility_tolerance": eps_lp},
    )
    if res.status == 2:
        return LPResult(False, None, INFEASIBLE_LABEL)
    if res.status != 0:
        raise SolverFailure(f"LP solver failed: {res.message}")
    p = res.x.reshape(n, L)
    resid = np.max(np.abs(a_eq @ res.x - b_eq))
    if resid > 10 * eps_lp:
        warnings.warn(f"LP solution violates equalities by {resid:.2e}", RuntimeWarning)
    return LPResult(True, NoncontextualModel(tuple(ansatz), p), "feasible")


def is_noncontextual(states: StateSet, eps_rank: float = EPS_RANK) -> bool:
    """Rank criterion; exact for pure states, sufficient only for mixed ones."""
    return rank_test(states, eps_rank).independent

