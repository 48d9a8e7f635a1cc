"""Perfect cloning rho -> rho (x) rho."""

from __future__ import annotations

from ..qstate import DensityMatrix, StateSet, tensor


def deutsch_clone(rho: DensityMatrix) -> DensityMatrix:
    return tensor(rho, rho)


def deutsch_clone_set(states: StateSet) -> StateSet:
    return StateSet(tuple(deutsch_clone(s) for s in states), states.labels)
