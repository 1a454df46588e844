"""Gate-list circuit representation, lowering to CNOT + single-qubit gates,
absorption transpilation, CNOT metrics, and an MPS-backed simulator.

Gates apply in list order onto |0...0> (or a supplied initial state).  For a
two-wire gate on qubits (a, b) the matrix row index is 2*s_a + s_b, i.e. the
first listed wire is the more significant bit.
"""

import json

import numpy as np

from .mps import MPS

GATE_KINDS = ("generic1", "generic2", "cnot", "rx", "ry", "rz")
_ROTATIONS = ("rx", "ry", "rz")

_CNOT01 = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
_CNOT10 = np.eye(4, dtype=complex)[[0, 3, 2, 1]]
_SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]


def rx_matrix(angle):
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry_matrix(angle):
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(angle):
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


_ROT_MATRIX = {"rx": rx_matrix, "ry": ry_matrix, "rz": rz_matrix}


class Gate:
    """One gate: kind, wires, and either an angle or an explicit matrix.

    `tag` records provenance (layer / origin).  `fixed` lists wires whose
    input is guaranteed |0> by the producer; lowering uses it to pick the
    cheaper isometry or state-preparation decomposition.
    """

    __slots__ = ("kind", "qubits", "angle", "matrix", "tag", "fixed")

    def __init__(self, kind, qubits, angle=None, matrix=None, tag="",
                 fixed=()):
        if kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {kind!r}")
        qubits = tuple(int(q) for q in qubits)
        if any(q < 0 for q in qubits) or len(set(qubits)) != len(qubits):
            raise ValueError("qubit indices must be distinct and >= 0")
        want = 2 if kind in ("generic2", "cnot") else 1
        if len(qubits) != want:
            raise ValueError(f"{kind} acts on {want} qubit(s)")
        if kind in _ROTATIONS:
            if angle is None or matrix is not None:
                raise ValueError("rotation gates take an angle, no matrix")
            angle = float(angle)
        elif kind == "cnot":
            if angle is not None or matrix is not None:
                raise ValueError("cnot takes neither angle nor matrix")
        else:
            if matrix is None or angle is not None:
                raise ValueError(f"{kind} takes a matrix, no angle")
            dim = 2 if kind == "generic1" else 4
            matrix = np.array(matrix, dtype=complex)
            if matrix.shape != (dim, dim):
                raise ValueError(f"{kind} needs a {dim}x{dim} matrix")
            if np.max(np.abs(matrix.conj().T @ matrix - np.eye(dim))) > 1e-12:
                raise ValueError("gate matrix is not unitary to 1e-12")
        fixed = tuple(sorted(int(q) for q in fixed))
        if fixed:
            if kind != "generic2":
                raise ValueError("fixed inputs only apply to generic2 gates")
            if not set(fixed) <= set(qubits):
                raise ValueError("fixed wires must be among the gate qubits")
        self.kind = kind
        self.qubits = qubits
        self.angle = angle
        self.matrix = matrix
        self.tag = str(tag)
        self.fixed = fixed

    @property
    def n_qubits(self):
        return len(self.qubits)

    def support(self):
        return tuple(sorted(self.qubits))

    def dense(self, order=None):
        """Gate matrix with wires in `order` (defaults to self.qubits)."""
        if order is None:
            order = self.qubits
        order = tuple(order)
        if set(order) != set(self.qubits):
            raise ValueError("order must list exactly the gate's qubits")
        if self.kind in _ROTATIONS:
            return _ROT_MATRIX[self.kind](self.angle)
        if self.kind == "generic1":
            return self.matrix.copy()
        if self.kind == "cnot":
            return _CNOT01.copy() if order == self.qubits else _CNOT10.copy()
        m = self.matrix
        if order != self.qubits:
            m = _SWAP @ m @ _SWAP
        return m.copy()

    def dagger(self):
        """Inverse gate on the same wires.

        `fixed` marks are dropped: the inverse maps the prepared state back
        to |0..0>, it does not receive |0> inputs itself.
        """
        if self.kind in _ROTATIONS:
            return Gate(self.kind, self.qubits, angle=-self.angle,
                        tag=self.tag)
        if self.kind == "cnot":
            return Gate("cnot", self.qubits, tag=self.tag)
        return Gate(self.kind, self.qubits, matrix=self.matrix.conj().T,
                    tag=self.tag)

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        if (self.kind, self.qubits, self.angle, self.tag, self.fixed) != \
                (other.kind, other.qubits, other.angle, other.tag,
                 other.fixed):
            return False
        if (self.matrix is None) != (other.matrix is None):
            return False
        return self.matrix is None or np.array_equal(self.matrix,
                                                     other.matrix)

    def __repr__(self):
        bits = [self.kind, str(self.qubits)]
        if self.angle is not None:
            bits.append(f"angle={self.angle:.6g}")
        if self.tag:
            bits.append(f"tag={self.tag!r}")
        if self.fixed:
            bits.append(f"fixed={self.fixed}")
        return f"Gate({', '.join(bits)})"


def _gate_to_dict(gate):
    d = {"kind": gate.kind, "qubits": list(gate.qubits)}
    if gate.angle is not None:
        d["angle"] = gate.angle
    if gate.matrix is not None:
        flat = gate.matrix.ravel()
        inter = np.empty(2 * flat.size)
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        d["matrix"] = inter.tolist()
    if gate.tag:
        d["tag"] = gate.tag
    if gate.fixed:
        d["fixed"] = list(gate.fixed)
    return d


def _gate_from_dict(d):
    matrix = None
    if "matrix" in d:
        inter = np.asarray(d["matrix"], dtype=float)
        flat = inter[0::2] + 1j * inter[1::2]
        dim = int(round(np.sqrt(flat.size)))
        matrix = flat.reshape(dim, dim)
    return Gate(d["kind"], tuple(d["qubits"]), angle=d.get("angle"),
                matrix=matrix, tag=d.get("tag", ""),
                fixed=tuple(d.get("fixed", ())))


class Circuit:
    """Ordered gate list on n_qubits wires plus free-form metadata tags.

    Treated as immutable once built; transforms return new circuits.
    """

    def __init__(self, n_qubits, gates=(), tags=None):
        n_qubits = int(n_qubits)
        if n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        self.n_qubits = n_qubits
        self.gates = []
        self.tags = dict(tags) if tags else {}
        for g in gates:
            self.append(g)

    def append(self, gate):
        if not isinstance(gate, Gate):
            raise TypeError("expected a Gate")
        if max(gate.qubits) >= self.n_qubits:
            raise ValueError(f"gate {gate!r} out of range for "
                             f"{self.n_qubits} qubits")
        self.gates.append(gate)

    def extend(self, gates):
        for g in gates:
            self.append(g)

    def copy(self):
        return Circuit(self.n_qubits, list(self.gates), dict(self.tags))

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def to_json(self, indent=None):
        doc = {"version": 1, "n_qubits": self.n_qubits,
               "gates": [_gate_to_dict(g) for g in self.gates],
               "tags": self.tags}
        return json.dumps(doc, indent=indent)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise ValueError("unsupported circuit format version")
        gates = [_gate_from_dict(d) for d in doc["gates"]]
        return cls(doc["n_qubits"], gates, doc.get("tags") or {})

    def to_qasm2(self):
        """OpenQASM 2 text; single-qubit generics become u3 (global phase
        dropped, as usual for QASM 2).  Generic two-qubit gates must be
        lowered first."""
        lines = ['OPENQASM 2.0;', 'include "qelib1.inc";',
                 f'qreg q[{self.n_qubits}];']
        for g in self.gates:
            if g.kind == "cnot":
                c, t = g.qubits
                lines.append(f"cx q[{c}],q[{t}];")
            elif g.kind in _ROTATIONS:
                lines.append(f"{g.kind}({g.angle!r}) q[{g.qubits[0]}];")
            elif g.kind == "generic1":
                theta, phi, lam = _zyz_angles(g.matrix)
                lines.append(f"u3({theta!r},{phi!r},{lam!r}) "
                             f"q[{g.qubits[0]}];")
            else:
                raise ValueError("circuit contains generic two-qubit gates; "
                                 "lower() it before QASM export")
        return "\n".join(lines) + "\n"


def _zyz_angles(m):
    """ZYZ Euler angles: m = phase * RZ(phi) RY(theta) RZ(lam)."""
    m = m * np.exp(-0.5j * np.angle(np.linalg.det(m)))
    theta = 2.0 * np.arctan2(abs(m[1, 0]), abs(m[0, 0]))
    if abs(m[1, 0]) < 1e-14:          # diagonal: lam is free
        plus, minus = 2.0 * np.angle(m[1, 1]), 0.0
    elif abs(m[0, 0]) < 1e-14:        # antidiagonal: only phi-lam matters
        plus, minus = 0.0, 2.0 * np.angle(m[1, 0])
    else:
        plus = 2.0 * np.angle(m[1, 1])
        minus = 2.0 * np.angle(m[1, 0])
    return float(theta), float((plus + minus) / 2.0), \
        float((plus - minus) / 2.0)


def _merge_target(done, gate):
    """Index in `done` of a same-support gate reachable without crossing any
    gate that touches `gate`'s wires, else None."""
    sup = set(gate.support())
    for k in range(len(done) - 1, -1, -1):
        other = set(done[k].support())
        if other & sup:
            return k if other == sup else None
    return None


def absorb_adjacent_gates(circuit):
    """Multiply adjacent same-support gates into one generic gate; drop
    products that are the identity up to phase.  Repeats to a fixed point.
    The prepared state is unchanged (up to global phase) and the gate count
    never increases."""
    gates = list(circuit.gates)
    changed = True
    while changed:
        changed = False
        done = []
        for g in gates:
            k = _merge_target(done, g)
            if k is None:
                done.append(g)
                continue
            h = done[k]
            order = h.support()
            prod = g.dense(order=order) @ h.dense(order=order)
            changed = True
            phase = prod[0, 0]
            if abs(abs(phase) - 1.0) < 1e-12 and \
                    np.max(np.abs(prod - phase * np.eye(len(prod)))) < 1e-12:
                del done[k]
                continue
            kind = "generic1" if len(order) == 1 else "generic2"
            tag = h.tag if h.tag == g.tag else "absorb"
            # the earlier gate's fixed-input guarantee survives the merge
            done[k] = Gate(kind, order, matrix=prod, tag=tag, fixed=h.fixed)
        gates = done
    return Circuit(circuit.n_qubits, gates, dict(circuit.tags))


def cnot_metrics(circuit):
    """(n_cnot, d_cnot): CNOT count and CNOT-only depth under greedy
    as-soon-as-possible layering; single-qubit gates cost nothing."""
    depth = [0] * circuit.n_qubits
    n_cnot = 0
    for g in circuit.gates:
        if g.kind == "generic2":
            raise ValueError(
                "undecomposed generic two-qubit gate; lower() the circuit "
                "(decompose_su4 / decompose_isometry_1to2) before counting")
        if g.kind != "cnot":
            continue
        c, t = g.qubits
        layer = max(depth[c], depth[t]) + 1
        depth[c] = depth[t] = layer
        n_cnot += 1
    return n_cnot, max(depth, default=0)


def lower(circuit):
    """Replace every generic two-qubit gate by its minimal-CNOT sequence:
    3 CNOTs in general, 2 when one input wire is fixed to |0>, and at most
    1 when both are."""
    from .decompose import (decompose_su4, decompose_isometry_1to2,
                            prep_two_qubit_state)
    out = Circuit(circuit.n_qubits, tags=dict(circuit.tags))
    for g in circuit.gates:
        if g.kind != "generic2":
            out.append(g)
            continue
        lo, hi = g.support()
        m = g.dense(order=(lo, hi))
        if not g.fixed:
            out.extend(decompose_su4(m, qubits=(lo, hi), tag=g.tag))
        elif len(g.fixed) == 2:
            out.extend(prep_two_qubit_state(m[:, 0], qubits=(lo, hi),
                                            tag=g.tag))
        else:
            dummy = 0 if g.fixed[0] == lo else 1
            iso = m[:, [0, 1]] if dummy == 0 else m[:, [0, 2]]
            seq, _ = decompose_isometry_1to2(iso, completed=m,
                                             qubits=(lo, hi), dummy=dummy,
                                             tag=g.tag)
            out.extend(seq)
    return out


def simulate(circuit, chi_max=None, eps_svd=0.0, initial=None):
    """Apply the circuit through the MPS engine.

    Two-qubit gates must act on adjacent wires (the reordering module
    supplies SWAP networks for anything else).  Returns
    (state, discarded_weight, norm_error) where both diagnostics cover only
    this circuit's gates.
    """
    if initial is None:
        state = MPS.product_state([0] * circuit.n_qubits)
    else:
        if initial.n_sites != circuit.n_qubits:
            raise ValueError("initial state size does not match the circuit")
        state = initial
    state = state.canonicalize("vidal")
    base_log = state.norm_log
    base_disc = state.discarded_weight
    for g in circuit.gates:
        if g.n_qubits == 1:
            state = state.apply_one_site_gate(g.qubits[0], g.dense())
            continue
        a, b = g.support()
        if b != a + 1:
            raise ValueError(
                f"gate on non-adjacent qubits {g.qubits}; apply a qubit "
                "reordering / SWAP network first")
        state = state.apply_two_site_gate(a, g.dense(order=(a, b)),
                                          chi_max=chi_max, eps_svd=eps_svd)
    discarded = state.discarded_weight - base_disc
    norm_error = abs(1.0 - np.exp(2.0 * (state.norm_log - base_log)))
    return state, discarded, norm_error
