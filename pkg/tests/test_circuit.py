import json

import numpy as np
import pytest

from mpsqc.circuit import (Circuit, Gate, absorb_adjacent_gates, cnot_metrics,
                           lower, rx_matrix, ry_matrix, rz_matrix, simulate,
                           _zyz_angles)
from mpsqc.mps import MPS, overlap

from _oracles import apply_gate_dense, haar_unitary

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def _dense_of(circuit):
    state = np.zeros(2 ** circuit.n_qubits, dtype=complex)
    state[0] = 1.0
    for g in circuit.gates:
        state = apply_gate_dense(state, g.dense(), g.qubits)
    return state


def _fidelity(a, b):
    return abs(overlap(a.normalized(), b.normalized()))


class TestGate:
    def test_kind_validation(self):
        with pytest.raises(ValueError):
            Gate("hadamard", (0,))
        with pytest.raises(ValueError):
            Gate("cnot", (1, 1))
        with pytest.raises(ValueError):
            Gate("cnot", (0,))
        with pytest.raises(ValueError):
            Gate("rz", (0,))                       # missing angle
        with pytest.raises(ValueError):
            Gate("generic1", (0,), matrix=np.ones((2, 2)))  # not unitary
        with pytest.raises(ValueError):
            Gate("generic1", (0, 1), matrix=np.eye(2))
        with pytest.raises(ValueError):
            Gate("generic1", (0,), matrix=HADAMARD, fixed=(0,))
        with pytest.raises(ValueError):
            Gate("generic2", (0, 1), matrix=np.eye(4), fixed=(3,))

    def test_rotation_matrices(self):
        assert np.allclose(rx_matrix(np.pi),
                           np.array([[0, -1j], [-1j, 0]]), atol=1e-15)
        assert np.allclose(ry_matrix(np.pi),
                           np.array([[0, -1], [1, 0]]), atol=1e-15)
        assert np.allclose(rz_matrix(np.pi), np.diag([-1j, 1j]), atol=1e-15)

    def test_cnot_dense_orientation(self):
        g = Gate("cnot", (1, 0))
        up = g.dense(order=(0, 1))
        assert np.array_equal(up, np.eye(4)[[0, 3, 2, 1]])
        down = g.dense(order=(1, 0))
        assert np.array_equal(down, np.eye(4)[[0, 1, 3, 2]])

    def test_generic2_dense_reorder(self):
        rng = np.random.default_rng(0)
        m = haar_unitary(4, rng)
        g = Gate("generic2", (3, 1), matrix=m)
        swap = np.eye(4)[[0, 2, 1, 3]]
        assert np.allclose(g.dense(order=(1, 3)), swap @ m @ swap)
        with pytest.raises(ValueError):
            g.dense(order=(1, 2))


class TestSerialization:
    def test_round_trip_bit_exact(self):
        rng = np.random.default_rng(1)
        circ = Circuit(4, [
            Gate("generic1", (0,), matrix=haar_unitary(2, rng), tag="seed"),
            Gate("cnot", (2, 1)),
            Gate("rz", (3,), angle=-1.2345678901234567),
            Gate("generic2", (1, 2), matrix=haar_unitary(4, rng),
                 fixed=(1,), tag="layer:0"),
        ], tags={"run": "t1"})
        text = circ.to_json()
        back = Circuit.from_json(text)
        assert back.n_qubits == circ.n_qubits
        assert back.tags == circ.tags
        assert len(back) == len(circ)
        for g1, g2 in zip(circ.gates, back.gates):
            assert g1 == g2          # matrices compared element-exact
        assert back.to_json() == text

    def test_json_shape(self):
        circ = Circuit(2, [Gate("cnot", (0, 1))])
        doc = json.loads(circ.to_json())
        assert doc["version"] == 1
        assert doc["n_qubits"] == 2
        assert doc["gates"] == [{"kind": "cnot", "qubits": [0, 1]}]

    def test_rejects_unknown_version(self):
        with pytest.raises(ValueError):
            Circuit.from_json(json.dumps(
                {"version": 2, "n_qubits": 1, "gates": []}))

    def test_out_of_range_gate(self):
        with pytest.raises(ValueError):
            Circuit(2, [Gate("cnot", (1, 2))])


class TestQasm:
    def test_export_lines(self):
        circ = Circuit(2, [Gate("generic1", (0,), matrix=HADAMARD),
                           Gate("cnot", (0, 1)),
                           Gate("rx", (1,), angle=0.5)])
        text = circ.to_qasm2()
        assert text.startswith("OPENQASM 2.0;")
        assert "qreg q[2];" in text
        assert "cx q[0],q[1];" in text
        assert "rx(0.5) q[1];" in text
        assert "u3(" in text

    def test_generic2_rejected(self):
        circ = Circuit(2, [Gate("generic2", (0, 1),
                                matrix=np.eye(4, dtype=complex))])
        with pytest.raises(ValueError):
            circ.to_qasm2()

    def test_zyz_reconstruction(self):
        rng = np.random.default_rng(2)
        mats = [haar_unitary(2, rng) for _ in range(30)]
        mats += [np.diag([1.0, 1j]), np.array([[0, 1], [1, 0]], dtype=complex),
                 rz_matrix(0.3), ry_matrix(-2.1), np.eye(2, dtype=complex)]
        for m in mats:
            theta, phi, lam = _zyz_angles(m)
            rec = rz_matrix(phi) @ ry_matrix(theta) @ rz_matrix(lam)
            ph = np.trace(rec.conj().T @ m) / 2.0
            assert abs(abs(ph) - 1.0) < 1e-10
            assert np.max(np.abs(m - ph * rec)) < 1e-10


class TestAbsorb:
    def test_rz_pair_merges(self):
        circ = Circuit(1, [Gate("rz", (0,), angle=0.3),
                           Gate("rz", (0,), angle=0.4)])
        out = absorb_adjacent_gates(circ)
        assert len(out) == 1
        g = out.gates[0]
        assert g.kind == "generic1"
        ph = np.trace(g.matrix.conj().T @ rz_matrix(0.7)) / 2.0
        assert np.max(np.abs(g.matrix - ph * rz_matrix(0.7))) < 1e-12

    def test_cnot_pair_cancels(self):
        circ = Circuit(2, [Gate("cnot", (0, 1)), Gate("cnot", (0, 1))])
        assert len(absorb_adjacent_gates(circ)) == 0

    def test_opposite_cnots_merge_to_generic(self):
        circ = Circuit(2, [Gate("cnot", (0, 1)), Gate("cnot", (1, 0))])
        out = absorb_adjacent_gates(circ)
        assert len(out) == 1 and out.gates[0].kind == "generic2"

    def test_blocked_by_interposed_gate(self):
        circ = Circuit(2, [Gate("rz", (0,), angle=0.3),
                           Gate("cnot", (0, 1)),
                           Gate("rz", (0,), angle=0.4)])
        assert len(absorb_adjacent_gates(circ)) == 3

    def test_disjoint_supports_untouched(self):
        circ = Circuit(4, [Gate("rz", (0,), angle=0.3),
                           Gate("cnot", (2, 3)),
                           Gate("rx", (1,), angle=0.1)])
        assert len(absorb_adjacent_gates(circ)) == 3

    def test_cascade_collapses_inverse_chain(self):
        rng = np.random.default_rng(3)
        u = haar_unitary(4, rng)
        circ = Circuit(2, [Gate("generic2", (0, 1), matrix=u),
                           Gate("cnot", (0, 1)),
                           Gate("cnot", (0, 1)),
                           Gate("generic2", (0, 1), matrix=u.conj().T)])
        assert len(absorb_adjacent_gates(circ)) == 0

    def test_state_preserved_on_random_circuit(self):
        rng = np.random.default_rng(4)
        n = 5
        gates = []
        for _ in range(30):
            if rng.random() < 0.5:
                q = int(rng.integers(n))
                gates.append(Gate("generic1", (q,),
                                  matrix=haar_unitary(2, rng)))
            else:
                a = int(rng.integers(n - 1))
                if rng.random() < 0.3:
                    gates.append(Gate("cnot", (a, a + 1)))
                else:
                    gates.append(Gate("generic2", (a, a + 1),
                                      matrix=haar_unitary(4, rng)))
        circ = Circuit(n, gates)
        out = absorb_adjacent_gates(circ)
        assert len(out) <= len(circ)
        before = _dense_of(circ)
        after = _dense_of(out)
        assert abs(abs(np.vdot(before, after)) - 1.0) < 1e-12

    def test_merge_keeps_fixed_flag_of_first_gate(self):
        rng = np.random.default_rng(5)
        circ = Circuit(2, [
            Gate("generic2", (0, 1), matrix=haar_unitary(4, rng),
                 fixed=(0, 1)),
            Gate("generic2", (0, 1), matrix=haar_unitary(4, rng)),
        ])
        out = absorb_adjacent_gates(circ)
        assert len(out) == 1
        assert out.gates[0].fixed == (0, 1)


class TestMetrics:
    def test_single_cnot(self):
        assert cnot_metrics(Circuit(2, [Gate("cnot", (0, 1))])) == (1, 1)

    def test_disjoint_pairs_share_a_layer(self):
        circ = Circuit(4, [Gate("cnot", (0, 1)), Gate("cnot", (2, 3))])
        assert cnot_metrics(circ) == (2, 1)

    def test_chain_depth(self):
        circ = Circuit(3, [Gate("cnot", (0, 1)), Gate("cnot", (1, 2)),
                           Gate("cnot", (0, 1))])
        assert cnot_metrics(circ) == (3, 3)

    def test_single_qubit_gates_free(self):
        circ = Circuit(2, [Gate("rz", (0,), angle=1.0), Gate("cnot", (0, 1)),
                           Gate("generic1", (1,), matrix=HADAMARD),
                           Gate("cnot", (0, 1))])
        assert cnot_metrics(circ) == (2, 2)

    def test_error_on_generic2(self):
        circ = Circuit(2, [Gate("generic2", (0, 1),
                                matrix=np.eye(4, dtype=complex))])
        with pytest.raises(ValueError, match="lower"):
            cnot_metrics(circ)

    def test_empty(self):
        assert cnot_metrics(Circuit(3)) == (0, 0)


class TestSimulate:
    def test_empty_circuit_identity(self):
        init = MPS.random(4, 3, np.random.default_rng(6))
        out, disc, nerr = simulate(Circuit(4), initial=init)
        assert _fidelity(init, out) > 1 - 1e-12
        assert disc == 0.0 and nerr < 1e-12

    def test_bell_entropy(self):
        circ = Circuit(2, [Gate("generic1", (0,), matrix=HADAMARD),
                           Gate("cnot", (0, 1))])
        state, disc, nerr = simulate(circ)
        assert abs(state.bond_entropy_profile()[0] - np.log(2)) < 1e-12
        assert disc < 1e-14 and nerr < 1e-12
        target = np.array([1, 0, 0, 1]) / np.sqrt(2)
        assert np.max(np.abs(state.to_dense() - target)) < 1e-12

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(7)
        n = 6
        gates = []
        for _ in range(25):
            if rng.random() < 0.4:
                q = int(rng.integers(n))
                gates.append(Gate("generic1", (q,),
                                  matrix=haar_unitary(2, rng)))
            else:
                a = int(rng.integers(n - 1))
                gates.append(Gate("generic2", (a, a + 1),
                                  matrix=haar_unitary(4, rng)))
        circ = Circuit(n, gates)
        state, _, nerr = simulate(circ)
        assert nerr < 1e-12
        expect = _dense_of(circ)
        got = state.to_dense()
        assert abs(abs(np.vdot(expect, got)) - 1.0) < 1e-12

    def test_rejects_non_adjacent(self):
        circ = Circuit(3, [Gate("cnot", (0, 2))])
        with pytest.raises(ValueError, match="adjacent"):
            simulate(circ)

    def test_rejects_size_mismatch(self):
        init = MPS.product_state([0, 0])
        with pytest.raises(ValueError):
            simulate(Circuit(3), initial=init)

    def test_truncation_reported(self):
        rng = np.random.default_rng(8)
        gates = []
        n = 6
        for _ in range(3):
            for a in range(n - 1):
                gates.append(Gate("generic2", (a, a + 1),
                                  matrix=haar_unitary(4, rng)))
        circ = Circuit(n, gates)
        state, disc, nerr = simulate(circ, chi_max=2)
        assert disc > 1e-6            # random brickwork entangles past chi=2
        assert nerr > 1e-8            # lost weight shows up as norm drift
        assert abs(nerr - abs(1.0 - np.exp(2.0 * state.norm_log))) < 1e-14
        # the tracked weight approximates the true norm (exact only while
        # the gauge invariants hold, i.e. for mild truncation)
        assert abs(state.norm() ** 2 - (1.0 - nerr)) < 0.05
        exact, disc0, _ = simulate(circ)
        assert disc0 < 1e-12
        assert _fidelity(state, exact) < 1.0


class TestLower:
    def test_passthrough_kinds(self):
        circ = Circuit(2, [Gate("rz", (0,), angle=0.1), Gate("cnot", (0, 1)),
                           Gate("generic1", (1,), matrix=HADAMARD)])
        low = lower(circ)
        assert [g.kind for g in low.gates] == ["rz", "cnot", "generic1"]

    def test_generic_gate_costs_three(self):
        rng = np.random.default_rng(9)
        circ = Circuit(2, [Gate("generic2", (0, 1),
                                matrix=haar_unitary(4, rng))])
        low = lower(circ)
        assert cnot_metrics(low)[0] == 3

    def test_fixed_one_costs_two(self):
        rng = np.random.default_rng(10)
        circ = Circuit(2, [Gate("generic2", (0, 1),
                                matrix=haar_unitary(4, rng), fixed=(0,))])
        assert cnot_metrics(lower(circ))[0] == 2

    def test_fixed_both_costs_at_most_one(self):
        rng = np.random.default_rng(11)
        circ = Circuit(2, [Gate("generic2", (0, 1),
                                matrix=haar_unitary(4, rng), fixed=(0, 1))])
        assert cnot_metrics(lower(circ))[0] <= 1

    def test_closure_random_circuit(self):
        rng = np.random.default_rng(12)
        n = 6
        gates = []
        for _ in range(12):
            a = int(rng.integers(n - 1))
            gates.append(Gate("generic2", (a, a + 1),
                              matrix=haar_unitary(4, rng)))
        circ = Circuit(n, gates)
        low = lower(circ)
        assert all(g.kind != "generic2" for g in low.gates)
        s1, _, _ = simulate(circ)
        s2, _, _ = simulate(low)
        assert abs(1.0 - _fidelity(s1, s2)) < 1e-10
        d1, d2 = s1.to_dense(), s2.to_dense()
        assert abs(abs(np.vdot(d1, d2)) - 1.0) < 1e-10

    def test_closure_staircase_with_fixed_wires(self):
        # right-to-left staircase: every gate sees |0> on its upper wire,
        # the first also on its lower wire
        rng = np.random.default_rng(13)
        n = 8
        gates = []
        for i in range(n - 1, 0, -1):
            fixed = (i - 1, i) if i == n - 1 else (i - 1,)
            gates.append(Gate("generic2", (i - 1, i),
                              matrix=haar_unitary(4, rng), fixed=fixed))
        circ = Circuit(n, gates)
        low = lower(circ)
        s1, _, _ = simulate(circ)
        s2, _, _ = simulate(low)
        assert abs(1.0 - _fidelity(s1, s2)) < 1e-10
        n_cnot, d_cnot = cnot_metrics(low)
        assert n_cnot == 2 * (n - 2) + 1
        assert d_cnot == n_cnot          # staircase serializes on shared wires

    def test_lowered_tags_inherited(self):
        rng = np.random.default_rng(14)
        circ = Circuit(2, [Gate("generic2", (0, 1),
                                matrix=haar_unitary(4, rng), tag="layer:3")])
        low = lower(circ)
        assert all(g.tag == "layer:3" for g in low.gates)


class TestDagger:
    def test_rotation_negates_angle(self):
        g = Gate("ry", (2,), angle=0.7, tag="x")
        d = g.dagger()
        assert d.angle == -0.7 and d.tag == "x"
        assert np.allclose(g.dense() @ d.dense(), np.eye(2), atol=1e-14)

    def test_cnot_self_inverse(self):
        g = Gate("cnot", (1, 0))
        assert np.allclose(g.dense() @ g.dagger().dense(), np.eye(4),
                           atol=1e-14)

    def test_generic_conjugate_transpose_drops_fixed(self):
        rng = np.random.default_rng(3)
        g = Gate("generic2", (0, 1), matrix=haar_unitary(4, rng),
                 fixed=(0,))
        d = g.dagger()
        assert d.fixed == ()
        assert np.allclose(g.dense() @ d.dense(), np.eye(4), atol=1e-12)
