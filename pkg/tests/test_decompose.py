import numpy as np
import pytest

from mpsqc.circuit import Gate
from mpsqc.decompose import (CNOT01, CNOT10, SWAP, complete_isometry,
                             decompose_isometry_1to2, decompose_su4, gamma,
                             prep_two_qubit_state, real_trace_diag,
                             sequence_matrix, to_su4, u_lambda_gate)

from _oracles import circuit_unitary_dense, haar_unitary


def _product(gates):
    return sequence_matrix(gates, 0, 1)


def _product_oracle(gates):
    pairs = [(g.dense(), g.qubits) for g in gates]
    return circuit_unitary_dense(pairs, 2)


def _cnots(gates):
    return sum(1 for g in gates if g.kind == "cnot")


def _random_isometry(rng):
    z = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    return np.linalg.qr(z)[0]


class TestSu4:
    def test_identity(self):
        gates = decompose_su4(np.eye(4, dtype=complex))
        assert _cnots(gates) == 3
        assert np.max(np.abs(_product(gates) - np.eye(4))) < 1e-12

    def test_cnot_input_exact(self):
        gates = decompose_su4(CNOT01)
        assert _cnots(gates) == 3
        assert np.max(np.abs(_product(gates) - CNOT01)) < 1e-12

    def test_swap_and_reversed_cnot(self):
        for u in (SWAP, CNOT10):
            gates = decompose_su4(u)
            assert _cnots(gates) == 3
            assert np.max(np.abs(_product(gates) - u)) < 1e-12

    def test_hundred_haar(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(100):
            u = haar_unitary(4, rng)
            gates = decompose_su4(u)
            assert _cnots(gates) == 3
            worst = max(worst, np.max(np.abs(_product_oracle(gates) - u)))
        assert worst <= 1e-10

    def test_kronecker_product_input(self):
        rng = np.random.default_rng(3)
        u = np.kron(haar_unitary(2, rng), haar_unitary(2, rng))
        gates = decompose_su4(u)
        assert _cnots(gates) == 3
        assert np.max(np.abs(_product(gates) - u)) < 1e-10

    def test_wire_labels_respected(self):
        rng = np.random.default_rng(4)
        u = haar_unitary(4, rng)
        gates = decompose_su4(u, qubits=(5, 2))
        assert all(set(g.qubits) <= {2, 5} for g in gates)
        assert np.max(np.abs(sequence_matrix(gates, 5, 2) - u)) < 1e-10

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError):
            decompose_su4(np.ones((4, 4)))
        with pytest.raises(ValueError):
            decompose_su4(np.eye(3))

    def test_su4_scaling(self):
        rng = np.random.default_rng(5)
        u = haar_unitary(4, rng)
        s, phase = to_su4(u)
        assert abs(np.linalg.det(s) - 1.0) < 1e-12
        assert np.max(np.abs(phase * s - u)) < 1e-13


class TestIsometry:
    def test_trivial_identity_columns(self):
        iso = np.eye(4, dtype=complex)[:, :2]
        gates, realized = decompose_isometry_1to2(iso)
        assert _cnots(gates) == 2
        assert np.max(np.abs(realized[:, :2] - iso)) < 1e-12

    def test_hundred_random(self):
        rng = np.random.default_rng(12)
        worst = 0.0
        for _ in range(100):
            iso = _random_isometry(rng)
            gates, realized = decompose_isometry_1to2(iso)
            assert _cnots(gates) == 2
            prod = _product_oracle(gates)
            worst = max(worst, np.max(np.abs(prod[:, [0, 1]] - iso)))
            assert np.max(np.abs(prod - realized)) < 1e-12
        assert worst <= 1e-10

    def test_dummy_on_second_wire(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            iso = _random_isometry(rng)
            gates, realized = decompose_isometry_1to2(iso, dummy=1)
            assert _cnots(gates) == 2
            prod = _product_oracle(gates)
            # input |b 0>: columns 0 and 2 of the full matrix
            assert np.max(np.abs(prod[:, [0, 2]] - iso)) < 1e-10
            assert np.max(np.abs(prod - realized)) < 1e-12

    def test_accepts_supplied_completion(self):
        rng = np.random.default_rng(14)
        u = haar_unitary(4, rng)
        iso = u[:, :2]
        gates, realized = decompose_isometry_1to2(iso, completed=u)
        assert _cnots(gates) == 2
        assert np.max(np.abs(realized[:, :2] - iso)) < 1e-10

    def test_rejects_bad_completion(self):
        rng = np.random.default_rng(15)
        iso = _random_isometry(rng)
        with pytest.raises(ValueError):
            decompose_isometry_1to2(iso, completed=np.eye(4, dtype=complex))

    def test_rejects_non_isometry(self):
        with pytest.raises(ValueError):
            decompose_isometry_1to2(np.ones((4, 2)))
        with pytest.raises(ValueError):
            decompose_isometry_1to2(np.eye(4))

    def test_matches_u_lambda_state(self):
        lams = np.array([0.8, 0.6])
        _, u_lam = u_lambda_gate(lams)
        iso = u_lam[:, [0, 1]]
        gates, _ = decompose_isometry_1to2(iso)
        prod = _product(gates)
        target = np.array([lams[0], 0.0, 0.0, lams[1]])
        assert np.max(np.abs(prod[:, 0] - target)) < 1e-10

    def test_completion_unitary(self):
        rng = np.random.default_rng(16)
        for _ in range(20):
            iso = _random_isometry(rng)
            full = complete_isometry(iso)
            assert np.max(np.abs(full.conj().T @ full - np.eye(4))) < 1e-10
            assert np.max(np.abs(full[:, :2] - iso)) < 1e-14

    def test_real_trace_transform(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            s, _ = to_su4(haar_unitary(4, rng))
            d = real_trace_diag(s)
            assert abs(d[0, 0] - 1.0) < 1e-14 and abs(d[1, 1] - 1.0) < 1e-14
            w, _ = to_su4(s @ d)
            assert abs(np.trace(gamma(w)).imag) < 1e-10


class TestPrep:
    def test_entangled_state_one_cnot(self):
        rng = np.random.default_rng(18)
        for _ in range(25):
            phi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            phi /= np.linalg.norm(phi)
            gates = prep_two_qubit_state(phi)
            assert _cnots(gates) <= 1
            assert np.max(np.abs(_product_oracle(gates)[:, 0] - phi)) < 1e-10

    def test_product_state_no_cnot(self):
        rng = np.random.default_rng(19)
        a = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        a /= np.linalg.norm(a)
        b /= np.linalg.norm(b)
        phi = np.kron(a, b)
        gates = prep_two_qubit_state(phi)
        assert _cnots(gates) == 0
        assert np.max(np.abs(_product(gates)[:, 0] - phi)) < 1e-10

    def test_bell_state(self):
        phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
        gates = prep_two_qubit_state(phi)
        assert _cnots(gates) == 1
        assert np.max(np.abs(_product(gates)[:, 0] - phi)) < 1e-12

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            prep_two_qubit_state(np.array([1.0, 0, 0, 1.0]))


class TestULambda:
    def test_state_and_count(self):
        gates, mat = u_lambda_gate((0.8, 0.6))
        assert [g.kind for g in gates] == ["ry", "cnot"]
        assert _cnots(gates) == 1
        target = np.array([0.8, 0.0, 0.0, 0.6])
        assert np.max(np.abs(mat[:, 0] - target)) < 1e-12
        assert np.max(np.abs(_product(gates) - mat)) < 1e-12

    def test_theta_formula(self):
        lam = np.array([np.cos(0.3), np.sin(0.3)])
        gates, _ = u_lambda_gate(lam)
        assert abs(gates[0].angle - 2 * np.arctan2(lam[1], lam[0])) < 1e-12

    def test_degenerate_schmidt(self):
        gates, mat = u_lambda_gate((np.sqrt(0.5), np.sqrt(0.5)))
        bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
        assert np.max(np.abs(mat[:, 0] - bell)) < 1e-12

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            u_lambda_gate((0.6, 0.8))   # not sorted descending
        with pytest.raises(ValueError):
            u_lambda_gate((1.0, 0.5))   # not normalized


class TestGamma:
    def test_spectrum_is_gate_invariant(self):
        # gamma eigenvalues classify the double coset: local gates leave
        # them unchanged
        rng = np.random.default_rng(20)
        u = haar_unitary(4, rng)
        s, _ = to_su4(u)

        def su2(m):
            return m / np.sqrt(np.linalg.det(m))

        loc = np.kron(su2(haar_unitary(2, rng)), su2(haar_unitary(2, rng)))
        before = np.sort(np.angle(np.linalg.eigvals(gamma(s))))
        after = np.sort(np.angle(np.linalg.eigvals(gamma(loc @ s))))
        assert np.max(np.abs(before - after)) < 1e-8

    def test_cnot_class_has_real_trace(self):
        s, _ = to_su4(CNOT01)
        assert abs(np.trace(gamma(s)).imag) < 1e-12
