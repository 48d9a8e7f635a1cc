import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contextlab.errors import (
    BadOutcomeCount,
    DimensionMismatch,
    InvalidState,
    NotHermitian,
    NotPure,
    ValidationError,
    WrongDimension,
)
from contextlab.qstate import (
    EPS_ANG,
    EPS_NUM,
    EPS_RES,
    PVM,
    BlochState,
    DensityMatrix,
    StateSet,
    bloch_to_density,
    density_to_bloch,
    load_states,
    partial_trace,
    random_pvm,
    tensor,
    unvectorize_hermitian,
    vectorize_hermitian,
    wrap_angle,
)

from conftest import ket, random_hermitian

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def circ_dist(a, b):
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


class TestDensityMatrix:
    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitian):
            DensityMatrix([[0.5, 0.1], [0.0, 0.5]])

    def test_rejects_bad_trace(self):
        with pytest.raises(InvalidState):
            DensityMatrix(np.eye(2))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(InvalidState):
            DensityMatrix([[1.2, 0], [0, -0.2]])

    def test_rejects_non_square(self):
        with pytest.raises(WrongDimension):
            DensityMatrix(np.ones((2, 3)) / 2)

    def test_immutable(self):
        rho = DensityMatrix.maximally_mixed(2)
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1.0

    def test_purity(self):
        assert DensityMatrix.maximally_mixed(2).purity == pytest.approx(0.5)
        assert ket(1, 1j).purity == pytest.approx(1.0)


class TestBloch:
    def test_poles(self):
        np.testing.assert_allclose(bloch_to_density(BlochState(0, 0)).matrix, np.diag([1, 0]), atol=1e-15)
        np.testing.assert_allclose(
            bloch_to_density(BlochState(math.pi / 2, 0)).matrix, np.diag([0, 1]), atol=1e-15
        )

    def test_plus_projector(self):
        # |+><+| = (1/2)[[1,1],[1,1]]
        np.testing.assert_allclose(
            bloch_to_density(BlochState(math.pi / 4, 0)).matrix, np.full((2, 2), 0.5), atol=1e-15
        )

    def test_inverse_examples(self):
        assert density_to_bloch(np.diag([1.0, 0.0])) == BlochState(0, 0)
        b = density_to_bloch(np.full((2, 2), 0.5))
        assert b.theta == pytest.approx(math.pi / 4, abs=EPS_ANG)
        assert circ_dist(b.phi, 0.0) < EPS_ANG

    def test_mixed_rejected(self):
        with pytest.raises(NotPure):
            density_to_bloch(np.eye(2) / 2)

    def test_wrong_dimension(self):
        with pytest.raises(WrongDimension):
            density_to_bloch(np.diag([1.0, 0, 0]))

    def test_pole_gauge(self):
        assert BlochState(0.0, 1.3).phi == 0.0
        assert BlochState(math.pi / 2, 4.0).phi == 0.0

    def test_domain(self):
        with pytest.raises(InvalidState):
            BlochState(2.0, 0.0)
        assert BlochState(0.3, -0.5).phi == pytest.approx(2 * math.pi - 0.5)

    @settings(max_examples=300)
    @given(st.floats(1e-6, math.pi / 2 - 1e-6), st.floats(0, 2 * math.pi, exclude_max=True))
    def test_round_trip(self, theta, phi):
        s = BlochState(theta, phi)
        rho = bloch_to_density(s)
        assert rho.purity == pytest.approx(1.0, abs=1e-9)
        back = density_to_bloch(rho)
        assert back.theta == pytest.approx(theta, abs=EPS_ANG)
        assert circ_dist(back.phi, s.phi) < EPS_ANG

    def test_export_vector_matches_convention(self):
        # x = Tr(rho X) = sin 2t cos p, z = Tr(rho Z) = cos 2t; y is exported as -Tr(rho Y)
        s = BlochState(0.4, 1.1)
        rho = bloch_to_density(s).matrix
        y_op = np.array([[0, -1j], [1j, 0]])
        x, y, z = s.bloch_vector()
        assert x == pytest.approx(np.trace(rho @ PAULI_X).real)
        assert z == pytest.approx(np.trace(rho @ PAULI_Z).real)
        assert y == pytest.approx(-np.trace(rho @ y_op).real)

    def test_wrap_angle(self):
        assert wrap_angle(-1e-18) < 2 * math.pi
        assert wrap_angle(2 * math.pi) == 0.0


class TestTensorAndPartialTrace:
    def test_examples(self):
        zero = np.diag([1.0, 0.0])
        out = tensor(zero, zero).matrix
        expect = np.zeros((4, 4))
        expect[0, 0] = 1
        np.testing.assert_allclose(out, expect)
        np.testing.assert_allclose(tensor(np.eye(2) / 2, np.eye(2) / 2).matrix, np.eye(4) / 4)
        plus = np.full((2, 2), 0.5)
        np.testing.assert_allclose(tensor(plus, plus).matrix, np.full((4, 4), 0.25))

    def test_multiplicative(self, rng):
        for _ in range(50):
            a = DensityMatrix.from_ket(rng.standard_normal(3) + 1j * rng.standard_normal(3))
            w = rng.uniform(size=2)
            b = DensityMatrix(np.diag(w / w.sum()))
            ab = tensor(a, b)
            assert np.trace(ab.matrix).real == pytest.approx(1.0, abs=EPS_NUM)
            assert ab.purity == pytest.approx(a.purity * b.purity, abs=EPS_NUM)

    def test_partial_trace_of_product(self, rng):
        rho = DensityMatrix.from_ket(rng.standard_normal(2) + 1j * rng.standard_normal(2))
        both = tensor(rho, rho)
        for keep in ("A", "B"):
            np.testing.assert_allclose(partial_trace(both, (2, 2), keep).matrix, rho.matrix, atol=1e-12)

    def test_partial_trace_mixed_and_bell(self):
        np.testing.assert_allclose(partial_trace(np.eye(4) / 4, (2, 2)).matrix, np.eye(2) / 2)
        # (|00> + |11>)/sqrt2: the 4x4 projector has 1/2 at (0,0),(0,3),(3,0),(3,3)
        bell = np.zeros((4, 4))
        bell[np.ix_([0, 3], [0, 3])] = 0.5
        for keep in ("A", "B"):
            np.testing.assert_allclose(partial_trace(bell, (2, 2), keep).matrix, np.eye(2) / 2)

    def test_asymmetric_dims(self, rng):
        a = DensityMatrix.from_ket(rng.standard_normal(2))
        b = DensityMatrix.from_ket(rng.standard_normal(3))
        ab = tensor(a, b)
        np.testing.assert_allclose(partial_trace(ab, (2, 3), "A").matrix, a.matrix, atol=1e-12)
        np.testing.assert_allclose(partial_trace(ab, (2, 3), "B").matrix, b.matrix, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            partial_trace(np.eye(4) / 4, (2, 3))


class TestVectorize:
    def test_examples(self):
        assert np.dot(vectorize_hermitian(np.eye(2)), vectorize_hermitian(np.eye(2))) == pytest.approx(2.0)
        assert np.dot(vectorize_hermitian(PAULI_X), vectorize_hermitian(PAULI_Z)) == pytest.approx(0.0)

    def test_not_hermitian(self):
        with pytest.raises(NotHermitian):
            vectorize_hermitian(np.array([[0, 1], [0, 0]]))

    def test_isometry_on_1000_pairs(self, rng):
        worst = 0.0
        for _ in range(1000):
            d = int(rng.integers(1, 6))
            a, b = random_hermitian(d, rng), random_hermitian(d, rng)
            lhs = vectorize_hermitian(a) @ vectorize_hermitian(b)
            worst = max(worst, abs(lhs - np.trace(a @ b).real))
        assert worst < EPS_NUM

    @given(st.integers(0, 2**31 - 1))
    def test_linear_and_invertible(self, seed):
        r = np.random.default_rng(seed)
        d = int(r.integers(1, 5))
        a, b = random_hermitian(d, r), random_hermitian(d, r)
        c = float(r.standard_normal())
        np.testing.assert_allclose(
            vectorize_hermitian(a + c * b), vectorize_hermitian(a) + c * vectorize_hermitian(b), atol=1e-12
        )
        np.testing.assert_allclose(unvectorize_hermitian(vectorize_hermitian(a), d), a, atol=1e-12)


class TestPVM:
    def test_single_outcome_is_identity(self):
        pvm = random_pvm(2, 1, seed=3)
        assert len(pvm) == 1
        np.testing.assert_allclose(pvm.projectors[0], np.eye(2), atol=1e-12)

    def test_deterministic(self):
        a, b = random_pvm(2, 2, seed=7), random_pvm(2, 2, seed=7)
        for p, q in zip(a.projectors, b.projectors):
            np.testing.assert_array_equal(p, q)

    def test_qutrit_rank_one(self):
        pvm = random_pvm(3, 3, seed=1)
        assert len(pvm) == 3
        for p in pvm.projectors:
            assert np.linalg.matrix_rank(p, tol=1e-9) == 1
            np.testing.assert_allclose(p @ p, p, atol=1e-12)
        assert np.max(np.abs(sum(pvm.projectors) - np.eye(3))) < EPS_RES

    def test_bad_outcome_count(self):
        with pytest.raises(BadOutcomeCount):
            random_pvm(2, 3, seed=0)
        with pytest.raises(BadOutcomeCount):
            random_pvm(2, 0, seed=0)

    def test_invalid_projectors(self):
        with pytest.raises(ValidationError):
            PVM((np.diag([1.0, 0.0]),))


class TestStateSet:
    def test_validation(self):
        with pytest.raises(ValidationError):
            StateSet(())
        with pytest.raises(DimensionMismatch):
            StateSet((DensityMatrix.maximally_mixed(2), DensityMatrix.maximally_mixed(3)))
        with pytest.raises(ValidationError):
            StateSet((ket(1, 0), ket(0, 1)), ("a", "a"))

    def test_states_file(self, tmp_path):
        path = tmp_path / "states.json"
        path.write_text(
            '[{"bloch": {"theta": 0.0, "phi": 0.0}, "label": "zero"},'
            ' {"matrix": [[[0.5, 0], [0, 0]], [[0, 0], [0.5, 0]]], "label": "mixed"}]'
        )
        states = load_states(path)
        assert states.labels == ("zero", "mixed")
        np.testing.assert_allclose(states[1].matrix, np.eye(2) / 2)

    @pytest.mark.parametrize("text", ["", "[]", "{}", "[{\"foo\": 1}]", "[{\"bloch\": {\"phi\": 1}}]"])
    def test_bad_states_file(self, tmp_path, text):
        path = tmp_path / "bad.json"
        path.write_text(text)
        with pytest.raises(ValidationError):
            load_states(path)
