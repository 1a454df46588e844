"""Closed-form two-qubit decompositions with minimal CNOT counts.

A general two-qubit unitary costs exactly 3 CNOTs.  When one input wire is
fixed to |0> (a 4x2 isometry) a diagonal input-side correction brings the
gate into the 2-CNOT class, and preparing a two-qubit state from |00> takes
a single CNOT (none if the state is a product).  All angles and local gates
come from eigenvalue phases of gamma(U) = (E+ U E)(E+ U E)^T in the magic
basis E; nothing is fitted numerically.  Every emitted sequence is
phase-corrected so its matrix product equals the requested operator exactly.
"""

import numpy as np

from .circuit import Gate, rx_matrix, ry_matrix, rz_matrix

# Magic basis: E maps SO(4) conjugation to SU(2) x SU(2).
E = np.array([[1, 1j, 0, 0],
              [0, 0, 1j, 1],
              [0, 0, 1j, -1],
              [1, -1j, 0, 0]], dtype=complex) / np.sqrt(2)
EDAG = E.conj().T

CNOT01 = np.eye(4, dtype=complex)[[0, 1, 3, 2]]  # control = first wire
CNOT10 = np.eye(4, dtype=complex)[[0, 3, 2, 1]]  # control = second wire
SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]

S_GATE = np.diag([1.0, 1j])
SX_GATE = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])

# Weights for mixing Re/Im parts when simultaneously diagonalizing gamma
# matrices; later entries only matter when an earlier mix is degenerate.
_MIX_LADDER = (1.0, 0.6180339887498949, 0.0, 1.7320508075688772, 0.31830988618)


def _assert_unitary(u, dim, tol=1e-10):
    u = np.asarray(u, dtype=complex)
    if u.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix")
    if np.max(np.abs(u.conj().T @ u - np.eye(dim))) > tol:
        raise ValueError("matrix is not unitary within tolerance")
    return u


def to_su4(u):
    """Scale into SU(4); returns (su4, phase) with u = phase * su4."""
    det = np.linalg.det(u)
    phase = np.exp(1j * np.angle(det) / 4)
    return u / phase, phase


def gamma(u):
    m = EDAG @ u @ E
    return m @ m.T


def _tensor_factors(m):
    """Split m in SU(2) x SU(2) into (A, B) with m = kron(A, B)."""
    c1, c2 = m[0:2, 0:2], m[0:2, 2:4]
    c3, c4 = m[2:4, 0:2], m[2:4, 2:4]
    a1 = np.sqrt((c1 @ c4.conj().T)[0, 0].astype(complex))
    a2 = np.sqrt(-(c2 @ c3.conj().T)[0, 0].astype(complex))
    if not np.isclose(a1 * np.conj(a2), (c1 @ c2.conj().T)[0, 0]):
        a2 = -a2
    a = np.array([[a1, a2], [-np.conj(a2), np.conj(a1)]])
    b = c2 / a[0, 1] if np.isclose(a[0, 0], 0.0, atol=1e-6) else c1 / a[0, 0]
    return a, b


def _extract_prefactors(u_target, v_target):
    """Find SU(2) gates A, B, C, D with (A x B) V (C x D) = U.

    U and V must share the gamma spectrum (same SU(4) double coset).  The
    simultaneous diagonalization mixes real and imaginary parts of the
    complex-symmetric gamma matrices; the mix weight is walked down a ladder
    until the pairing is consistent, which resolves degenerate spectra
    deterministically.
    """
    u = EDAG @ u_target @ E
    v = EDAG @ v_target @ E
    uut = u @ u.T
    vvt = v @ v.T
    for mix in _MIX_LADDER:
        _, p = np.linalg.eigh(uut.real + mix * uut.imag)
        _, q = np.linalg.eigh(vvt.real + mix * vvt.imag)
        p = p @ np.diag([1, 1, 1, np.sign(np.linalg.det(p))])
        q = q @ np.diag([1, 1, 1, np.sign(np.linalg.det(q))])
        du = p.T @ uut @ p
        dv = q.T @ vvt @ q
        off = max(np.max(np.abs(du - np.diag(np.diag(du)))),
                  np.max(np.abs(dv - np.diag(np.diag(dv)))))
        if off < 1e-9 and np.max(np.abs(np.diag(du) - np.diag(dv))) < 1e-9:
            break
    else:
        raise RuntimeError("could not pair gamma eigenbases")
    g = p @ q.T
    h = v.conj().T @ g.T @ u
    ab = E @ g @ EDAG
    cd = E @ h @ EDAG
    a, b = _tensor_factors(ab)
    c, d = _tensor_factors(cd)
    return a, b, c, d


def sequence_matrix(gates, q0, q1):
    """Product of a gate list supported on wires {q0, q1}, as a 4x4 matrix
    with q0 the more significant row bit."""
    full = np.eye(4, dtype=complex)
    for g in gates:
        if g.qubits == (q0,):
            m = np.kron(g.dense(), np.eye(2))
        elif g.qubits == (q1,):
            m = np.kron(np.eye(2), g.dense())
        else:
            m = g.dense(order=(q0, q1))
        full = m @ full
    return full


def _fold_phase(gates, q0, q1, target):
    """Multiply the first single-qubit gate by a global phase so the
    sequence product equals `target` exactly; verifies the result."""
    prod = sequence_matrix(gates, q0, q1)
    phase = np.trace(prod.conj().T @ target) / 4.0
    if abs(abs(phase) - 1.0) > 1e-9:
        raise RuntimeError("decomposition drifted from the target coset")
    phase /= abs(phase)
    for g in gates:
        if g.kind == "generic1":
            g.matrix = g.matrix * phase
            break
    else:
        raise RuntimeError("no single-qubit gate to absorb the phase")
    err = np.max(np.abs(sequence_matrix(gates, q0, q1) - target))
    if err > 1e-10:
        raise RuntimeError(f"decomposition reconstruction error {err:.2e}")
    return gates


def decompose_su4(u, qubits=(0, 1), tag=""):
    """Decompose a two-qubit unitary into single-qubit gates and exactly
    3 CNOTs; the emitted product equals `u` including global phase.

       q0: -C--x--RZ(d)--o---------x--B-
       q1: -D--o--RY(b)--x--RY(a)--o--A-

    (x = target, o = control); the SWAP conjugation trick cancels against
    the determinant fix, leaving the A/B gates on exchanged wires.
    """
    u = _assert_unitary(u, 4)
    q0, q1 = qubits
    s, _ = to_su4(u)
    swap_u = np.exp(1j * np.pi / 4) * SWAP @ s
    evs = np.linalg.eigvals(gamma(swap_u))
    x, y, z = np.sort(np.angle(evs))[:3]
    alpha, beta, delta = (x + y) / 2, (x + z) / 2, (z + y) / 2
    v = SWAP @ CNOT10 @ np.kron(np.eye(2), ry_matrix(alpha)) @ CNOT01 \
        @ np.kron(rz_matrix(delta), ry_matrix(beta)) @ CNOT10
    a, b, c, d = _extract_prefactors(swap_u, v)
    gates = [
        Gate("generic1", (q0,), matrix=c, tag=tag),
        Gate("generic1", (q1,), matrix=d, tag=tag),
        Gate("cnot", (q1, q0), tag=tag),
        Gate("rz", (q0,), angle=delta, tag=tag),
        Gate("ry", (q1,), angle=beta, tag=tag),
        Gate("cnot", (q0, q1), tag=tag),
        Gate("ry", (q1,), angle=alpha, tag=tag),
        Gate("cnot", (q1, q0), tag=tag),
        Gate("generic1", (q0,), matrix=b, tag=tag),
        Gate("generic1", (q1,), matrix=a, tag=tag),
    ]
    return _fold_phase(gates, q0, q1, u)


def _decompose_2cnot_class(w, q0, q1, tag=""):
    """Decompose w (SU(4), real gamma trace) with exactly 2 CNOTs; the
    product equals w exactly.

       q0: -C--x--RZ(d)--x--A-
       q1: -D--o--RX(p)--o--B-
    """
    evs = np.linalg.eigvals(gamma(w))
    if np.allclose(np.sort(evs.real), [-1, -1, 1, 1], atol=1e-7) \
            and np.max(np.abs(evs.imag)) < 1e-7:
        # adjacent-CNOT special case: interior is S x SX up to the CNOTs
        inner = np.kron(S_GATE, SX_GATE)
        interior = [
            Gate("cnot", (q1, q0), tag=tag),
            Gate("generic1", (q0,), matrix=S_GATE, tag=tag),
            Gate("generic1", (q1,), matrix=SX_GATE, tag=tag),
            Gate("cnot", (q1, q0), tag=tag),
        ]
    else:
        x = np.angle(evs[0])
        y = np.angle(evs[1])
        if np.isclose(x, -y, atol=1e-9):
            y = np.angle(evs[2])
        delta = (x + y) / 2
        phi = (x - y) / 2
        inner = np.kron(rz_matrix(delta), rx_matrix(phi))
        interior = [
            Gate("cnot", (q1, q0), tag=tag),
            Gate("rz", (q0,), angle=delta, tag=tag),
            Gate("rx", (q1,), angle=phi, tag=tag),
            Gate("cnot", (q1, q0), tag=tag),
        ]
    v = CNOT10 @ inner @ CNOT10
    a, b, c, d = _extract_prefactors(w, v)
    gates = [Gate("generic1", (q0,), matrix=c, tag=tag),
             Gate("generic1", (q1,), matrix=d, tag=tag),
             *interior,
             Gate("generic1", (q0,), matrix=a, tag=tag),
             Gate("generic1", (q1,), matrix=b, tag=tag)]
    return _fold_phase(gates, q0, q1, w)


def real_trace_diag(su4_mat):
    """Diagonal D = diag(1, 1, e^{-i psi}, e^{i psi}) such that su4_mat @ D
    lies in the 2-CNOT class; trivial on the |00>,|01> input subspace."""
    m = su4_mat.T
    a1 = -m[1, 3] * m[2, 0] + m[1, 2] * m[2, 1] + m[1, 1] * m[2, 2] \
        - m[1, 0] * m[2, 3]
    a2 = m[0, 3] * m[3, 0] - m[0, 2] * m[3, 1] - m[0, 1] * m[3, 2] \
        + m[0, 0] * m[3, 3]
    psi = np.arctan2(a1.imag + a2.imag, a1.real - a2.real)
    return np.diag(np.exp(-1j * np.array([0.0, 0.0, psi, -psi])))


def complete_isometry(iso):
    """Extend a 4x2 isometry to a unitary by Gram-Schmidt over basis vectors
    (deterministic; used as the completion seed for lowering)."""
    cols = [iso[:, 0], iso[:, 1]]
    for k in range(4):
        cand = np.zeros(4, dtype=complex)
        cand[k] = 1.0
        # second projection pass: a near-parallel candidate amplifies the
        # single-pass Gram-Schmidt roundoff by 1/norm otherwise
        for _ in range(2):
            for c in cols:
                cand = cand - c * np.vdot(c, cand)
        nrm = np.linalg.norm(cand)
        if nrm > 1e-7:
            cols.append(cand / nrm)
        if len(cols) == 4:
            break
    out = np.stack(cols, axis=1)
    cols01 = out[:, :2]
    if np.max(np.abs(cols01.conj().T @ cols01 - np.eye(2))) > 1e-10:
        raise ValueError("input is not an isometry within tolerance")
    return out


def decompose_isometry_1to2(iso, completed=None, qubits=(0, 1), dummy=0,
                            tag=""):
    """Decompose a 4x2 isometry (one wire's input fixed to |0>) into exactly
    2 CNOTs plus single-qubit gates.

    Args:
        iso: 4x2 matrix with orthonormal columns; column b is the output for
            input |0 b> when dummy == 0 (|b 0> when dummy == 1).
        completed: optional 4x4 unitary whose relevant columns equal iso;
            Gram-Schmidt completion is used when omitted.
        qubits: wire pair (first index = more significant bit of iso rows).
        dummy: which of the two wires carries the fixed |0> input.

    Returns:
        (gates, realized): gate list with 2 CNOTs, and the 4x4 unitary the
        sequence implements.  realized agrees with iso on the fixed-input
        columns exactly; the freedom on the remaining columns is spent on an
        input-side diagonal that removes the third CNOT.
    """
    iso = np.asarray(iso, dtype=complex)
    if iso.shape != (4, 2):
        raise ValueError("expected a 4x2 isometry")
    if np.max(np.abs(iso.conj().T @ iso - np.eye(2))) > 1e-10:
        raise ValueError("matrix columns are not orthonormal within 1e-10")
    if dummy not in (0, 1):
        raise ValueError("dummy must be 0 or 1")
    col_idx = [0, 1] if dummy == 0 else [0, 2]
    if completed is None:
        if dummy == 0:
            full = complete_isometry(iso)
        else:
            swapped = complete_isometry(iso[[0, 2, 1, 3], :])
            full = SWAP @ swapped @ SWAP
    else:
        full = _assert_unitary(completed, 4)
        if np.max(np.abs(full[:, col_idx] - iso)) > 1e-10:
            raise ValueError("completed unitary disagrees with the isometry")
    q0, q1 = qubits
    if dummy == 0:
        local = full
        wa, wb = q0, q1
    else:
        local = SWAP @ full @ SWAP  # dummy wire becomes the significant bit
        wa, wb = q1, q0
    s, _ = to_su4(local)
    diag = real_trace_diag(s)
    target = local @ diag  # preserves the |0 b> columns (diag is 1 there)
    w, _ = to_su4(target)
    gates = _decompose_2cnot_class(w, wa, wb, tag=tag)
    gates = _fold_phase(gates, wa, wb, target)
    realized = sequence_matrix(gates, q0, q1)
    return gates, realized


def prep_two_qubit_state(phi, qubits=(0, 1), tag="", rank_tol=1e-12):
    """Gate sequence preparing a two-qubit state from |00>: one CNOT via the
    Schmidt decomposition, or none when the state is a product."""
    phi = np.asarray(phi, dtype=complex).ravel()
    if phi.shape != (4,):
        raise ValueError("expected a 4-component state")
    nrm = np.linalg.norm(phi)
    if abs(nrm - 1.0) > 1e-10:
        raise ValueError("state must be normalized")
    q0, q1 = qubits
    u, s, vh = np.linalg.svd(phi.reshape(2, 2))
    if s[1] <= rank_tol * s[0]:
        return [Gate("generic1", (q0,), matrix=u, tag=tag),
                Gate("generic1", (q1,), matrix=vh.T, tag=tag)]
    theta = 2.0 * np.arctan2(s[1], s[0])
    gates = [Gate("ry", (q0,), angle=theta, tag=tag),
             Gate("cnot", (q0, q1), tag=tag),
             Gate("generic1", (q0,), matrix=u, tag=tag),
             Gate("generic1", (q1,), matrix=vh.T, tag=tag)]
    prod = sequence_matrix(gates, q0, q1)
    if np.max(np.abs(prod[:, 0] - phi)) > 1e-10:
        raise RuntimeError("state preparation drifted")
    return gates


def u_lambda_gate(lams, qubits=(0, 1), tag=""):
    """Single-CNOT gate mapping |00> to lam_1|00> + lam_2|11>.

    Returns (gates, matrix); theta* = 2 arctan(lam_2/lam_1).
    """
    lam = np.asarray(lams, dtype=float)
    if lam.size != 2 or lam[0] < lam[1] or lam[1] < 0:
        raise ValueError("expected two Schmidt values sorted descending")
    nrm = np.linalg.norm(lam)
    if abs(nrm - 1.0) > 1e-10:
        raise ValueError("Schmidt values must satisfy lam1^2+lam2^2=1")
    q0, q1 = qubits
    theta = 2.0 * np.arctan2(lam[1], lam[0])
    gates = [Gate("ry", (q0,), angle=theta, tag=tag),
             Gate("cnot", (q0, q1), tag=tag)]
    matrix = CNOT01 @ np.kron(ry_matrix(theta), np.eye(2))
    return gates, matrix
