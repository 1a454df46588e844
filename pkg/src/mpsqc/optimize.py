"""Variational refinement of a fixed-structure nearest-neighbor circuit
against an MPS target.

Everything is driven by environments: the overlap F = <circuit|target> is
linear in the conjugate of any single gate, F = Tr(U_m' F_m), so the best
single-gate move is available in closed form (SVD of F_m) and gradients are
a trace away.  A cursor keeps two boundary states, |0..0> pushed forward
through the gates before m and the target pulled back through the gates
after m, so stepping the cursor costs two gate applications instead of a
full recontraction.

Two optimizers share that plumbing: sweeping SVD updates with a
learning-rate power (U'' = U (U'U')^beta) and Riemannian Adam on the
unitary manifold (projected gradients, SVD retraction, transported
moments).  CNOTs are frozen; stranded rotation gates are upgraded to free
2x2 unitaries; an absorb pass first melts single-qubit gates into adjacent
two-qubit generics to cut the variational parameter count.
"""

import warnings

import numpy as np
from scipy.linalg import schur

from .bmpd import BmpdConfig, bmpd_build
from .circuit import Circuit, Gate, absorb_adjacent_gates, simulate
from .mps import MPS, overlap, svd_fixed
from .smpd import SmpdConfig, smpd_build

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


# -- environments --------------------------------------------------------


class EnvironmentBuilder:
    """Cursor over a circuit's gates yielding environment tensors.

    Holds |0..0> advanced through gates [0, m) and the target pulled back
    through gates (m, M); moving the cursor by one reuses both (two gate
    applications), which is what makes full sweeps O(M) instead of O(M^2).
    `set_gate` swaps the matrix at the cursor without touching either
    boundary state (neither contains gate m).
    """

    def __init__(self, circuit, target, chi_max=None, eps_svd=0.0):
        if not circuit.gates:
            raise ValueError("circuit has no gates")
        if target.n_sites != circuit.n_qubits:
            raise ValueError("target size does not match the circuit")
        self.gates = list(circuit.gates)
        self.n = circuit.n_qubits
        self.chi_max = chi_max
        self.eps_svd = eps_svd
        self.n_gate_applications = 0
        self.m = 0
        self.phi = MPS.product_state([0] * self.n).canonicalize("vidal")
        psi = target.canonicalize("vidal")
        for g in self.gates[:0:-1]:
            psi = self._apply(psi, g.dagger())
        self.psi = psi

    def _apply(self, state, gate):
        self.n_gate_applications += 1
        if gate.n_qubits == 1:
            return state.apply_one_site_gate(gate.qubits[0], gate.dense())
        a, b = gate.support()
        if b != a + 1:
            raise ValueError(f"gate on non-adjacent qubits {gate.qubits}")
        return state.apply_two_site_gate(a, gate.dense(order=(a, b)),
                                         chi_max=self.chi_max,
                                         eps_svd=self.eps_svd)

    def advance(self):
        if self.m >= len(self.gates) - 1:
            raise ValueError("cursor already at the last gate")
        self.phi = self._apply(self.phi, self.gates[self.m])
        self.psi = self._apply(self.psi, self.gates[self.m + 1])
        self.m += 1

    def retreat(self):
        if self.m == 0:
            raise ValueError("cursor already at the first gate")
        self.psi = self._apply(self.psi, self.gates[self.m].dagger())
        self.phi = self._apply(self.phi, self.gates[self.m - 1].dagger())
        self.m -= 1

    def set_gate(self, matrix):
        g = self.gates[self.m]
        if g.kind not in ("generic1", "generic2"):
            raise ValueError("only generic gates can be replaced")
        self.gates[self.m] = Gate(g.kind, g.qubits, matrix=matrix,
                                  tag=g.tag, fixed=g.fixed)

    def env(self):
        """Environment of the cursor gate: F_m with rows indexed by the
        target-side physical legs and columns by the circuit side, so the
        overlap is Tr(U_m' F_m)."""
        gate = self.gates[self.m]
        sites = gate.support()
        phi_t = self.phi._plain_tensors()
        psi_t = self.psi._plain_tensors()
        scale = np.exp(self.phi.norm_log + self.psi.norm_log)
        left = np.ones((1, 1), dtype=complex)
        for k in range(sites[0]):
            left = np.einsum("ab,sac,sbd->cd", left, phi_t[k].conj(),
                             psi_t[k], optimize=True)
        right = np.ones((1, 1), dtype=complex)
        for k in range(self.n - 1, sites[-1], -1):
            right = np.einsum("sac,sbd,cd->ab", phi_t[k].conj(), psi_t[k],
                              right, optimize=True)
        if gate.n_qubits == 1:
            q = sites[0]
            f = np.einsum("ab,jac,ibd,cd->ij", left, phi_t[q].conj(),
                          psi_t[q], right, optimize=True)
            return f * scale
        q = sites[0]
        f = np.einsum("ab,jac,ibd,kce,ldf,ef->iljk", left,
                      phi_t[q].conj(), psi_t[q], phi_t[q + 1].conj(),
                      psi_t[q + 1], right, optimize=True)
        return f.reshape(4, 4) * scale

    def current_overlap(self):
        g = self.gates[self.m]
        return complex(np.trace(g.dense(order=g.support()).conj().T
                                @ self.env()))


def environment(circuit, m, target, chi_max=None, eps_svd=0.0):
    """One-shot environment of gate m; for sweeps use EnvironmentBuilder
    directly so boundary states are reused between gates."""
    if not 0 <= m < len(circuit.gates):
        raise ValueError("gate index out of range")
    builder = EnvironmentBuilder(circuit, target, chi_max, eps_svd)
    for _ in range(m):
        builder.advance()
    return builder.env()


# -- Evenbly-Vidal updates -------------------------------------------------


def _unitary_power(w, beta):
    """w^beta for unitary w via Schur form, using only eigenphases so the
    result is exactly unitary up to roundoff."""
    t, z = schur(np.asarray(w, dtype=complex), output="complex")
    phases = np.exp(1j * beta * np.angle(np.diag(t)))
    return (z * phases[None, :]) @ z.conj().T


def ev_update(u, f, beta):
    """Single-gate update against a fixed environment: U' = XY from the SVD
    F = X D Y maximizes |Tr(U'^dag F)| at Sum(D); the returned gate is
    U'' = U (U^dag U')^beta.  Returns (U'', zero_env); an all-zero
    environment leaves the gate unchanged with the flag set."""
    u = np.asarray(u, dtype=complex)
    f = np.asarray(f, dtype=complex)
    if u.shape != f.shape:
        raise ValueError("gate and environment shapes differ")
    if not np.all(np.isfinite(f)):
        raise ValueError("environment is not finite")
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    if not np.any(f):
        return u, True
    x, _, y = svd_fixed(f)
    u_best = x @ y
    if beta == 1.0:
        return u_best, False
    return u @ _unitary_power(u.conj().T @ u_best, beta), False


def ev_sweep(circuit, target, beta=0.6, n_sweeps=100, chi_max=64,
             eps_svd=1e-12):
    """Forward+backward gate visits per sweep (each gate updated twice);
    CNOTs frozen.  Runs the absorb pass first.  Returns the refined circuit
    and the |overlap| recorded at the end of every sweep.  The target is
    normalized internally."""
    target = target.canonicalize("vidal").normalized()
    work = _variational_form(circuit)
    if not work.gates:
        f = abs(overlap(MPS.product_state([0] * circuit.n_qubits), target))
        return work, [f] * n_sweeps
    builder = EnvironmentBuilder(work, target, chi_max, eps_svd)
    m_last = len(work.gates) - 1
    history = []
    for _ in range(int(n_sweeps)):
        f = _ev_visit(builder, beta)
        while builder.m < m_last:
            builder.advance()
            f = _ev_visit(builder, beta)
        f = _ev_visit(builder, beta)
        while builder.m > 0:
            builder.retreat()
            f = _ev_visit(builder, beta)
        history.append(abs(f))
    out = Circuit(work.n_qubits, builder.gates,
                  {**circuit.tags, "optimizer": "ev"})
    return out, history


def _ev_visit(builder, beta):
    """Update the cursor gate in place; returns the overlap after."""
    g = builder.gates[builder.m]
    f_env = builder.env()
    u = g.dense(order=g.support())
    if g.kind == "cnot":
        return complex(np.trace(u.conj().T @ f_env))
    u_new, zero = ev_update(u, f_env, beta)
    if not zero:
        builder.set_gate(u_new)
    return complex(np.trace(u_new.conj().T @ f_env))


# -- variational form -------------------------------------------------------


def _upgrade_rotations(gates):
    out = []
    for g in gates:
        if g.kind in ("rx", "ry", "rz"):
            out.append(Gate("generic1", g.qubits, matrix=g.dense(),
                            tag=g.tag))
        elif g.kind == "generic2" and g.qubits != g.support():
            out.append(Gate("generic2", g.support(),
                            matrix=g.dense(order=g.support()), tag=g.tag,
                            fixed=g.fixed))
        else:
            out.append(g)
    return out


def _fold(host, g, g_before_host):
    """Multiply single-qubit gate g into `host` on the shared wire."""
    q = g.qubits[0]
    if host.kind == "generic1":
        m = host.matrix @ g.matrix if g_before_host \
            else g.matrix @ host.matrix
        return Gate("generic1", host.qubits, matrix=m, tag=host.tag)
    emb = np.kron(g.matrix, np.eye(2)) if q == host.qubits[0] \
        else np.kron(np.eye(2), g.matrix)
    m = host.matrix @ emb if g_before_host else emb @ host.matrix
    return Gate("generic2", host.qubits, matrix=m, tag=host.tag,
                fixed=host.fixed)


def _variational_form(circuit):
    """Absorb pass: upgrade rotations to free 2x2 unitaries, then melt
    single-qubit gates into an adjacent two-qubit generic on the same wire
    (never forward into a wire the host promises is |0>, which would break
    that mark).  Gates stranded between CNOTs stay as variational 2x2
    units; CNOTs themselves are left frozen."""
    gates = _upgrade_rotations(absorb_adjacent_gates(circuit).gates)
    changed = True
    while changed:
        changed = False
        for i, g in enumerate(gates):
            if g.kind != "generic1":
                continue
            q = g.qubits[0]
            j = next((k for k in range(i + 1, len(gates))
                      if q in gates[k].qubits), None)
            if j is not None and gates[j].kind == "generic2" \
                    and q not in gates[j].fixed:
                gates[j] = _fold(gates[j], g, g_before_host=True)
                del gates[i]
                changed = True
                break
            p = next((k for k in range(i - 1, -1, -1)
                      if q in gates[k].qubits), None)
            if p is not None and gates[p].kind == "generic2":
                gates[p] = _fold(gates[p], g, g_before_host=False)
                del gates[i]
                changed = True
                break
    out = Circuit(circuit.n_qubits, gates, dict(circuit.tags))
    return absorb_adjacent_gates(out)


# -- Riemannian machinery ----------------------------------------------------


def riemannian_gradient(u, egrad):
    """Project a Euclidean gradient onto the tangent space at the isometry
    u: (1/2) u (u'g - g'u) + (1 - uu')g.  Also serves as the vector
    transport (transport = projection at the new point)."""
    u = np.asarray(u, dtype=complex)
    egrad = np.asarray(egrad, dtype=complex)
    if u.shape != egrad.shape:
        raise ValueError("gradient shape does not match the isometry")
    uh_g = u.conj().T @ egrad
    return 0.5 * u @ (uh_g - uh_g.conj().T) \
        + egrad - u @ (u.conj().T @ egrad)


def svd_retraction(u, v):
    """Map a step v at the isometry u back onto the manifold: XY from the
    SVD of u+v.  Rank-deficient inputs get a deterministic 1e-14 identity
    jitter first."""
    u = np.asarray(u, dtype=complex)
    w = u + np.asarray(v, dtype=complex)
    x, s, y = svd_fixed(w)
    if s.size and s[-1] < 1e-14 * max(s[0], 1.0):
        w = w + 1e-14 * np.eye(*w.shape)
        x, s, y = svd_fixed(w)
    return x @ y


def euclidean_fidelity_gradient(circuit, m, target, chi_max=None,
                                eps_svd=0.0):
    """Gradient of the loss 1 - |F|^2 with respect to the entries of gate
    m, scaled so Re Tr(V' G) is the directional derivative along V (the
    finite-difference tests pin this convention): G = -2 conj(F) F_m."""
    f_env = environment(circuit, m, target, chi_max, eps_svd)
    g = circuit.gates[m]
    f = np.trace(g.dense(order=g.support()).conj().T @ f_env)
    return -2.0 * np.conj(f) * f_env


def riemannian_adam(circuit, target, lr=1e-4, n_iter=1000, seed=0,
                    chi_max=64, eps_svd=1e-12):
    """Adam on the unitary manifold: per iteration all environments are
    computed against an immutable snapshot, every variational gate takes a
    projected-gradient Adam step with SVD retraction, and first moments
    are carried to the new point by tangent projection (second moments are
    elementwise and stay put).  beta1=0.9, beta2=0.999, eps=1e-8.

    Returns (circuit, history) with history the snapshot infidelity per
    iteration plus one final entry.  Deterministic; `seed` is accepted for
    interface symmetry.  A non-finite update aborts with the last good
    circuit and a warning.
    """
    del seed
    target = target.canonicalize("vidal").normalized()
    work = _variational_form(circuit)
    gates = list(work.gates)
    var = [m for m, g in enumerate(gates)
           if g.kind in ("generic1", "generic2")]
    history = []
    if not gates or not var:
        out, _, _ = simulate(Circuit(work.n_qubits, gates),
                             chi_max=chi_max, eps_svd=eps_svd)
        f = abs(overlap(out, target))
        return work, [1.0 - f * f]
    mom1 = {m: np.zeros_like(gates[m].matrix) for m in var}
    mom2 = {m: np.zeros(gates[m].matrix.shape) for m in var}
    for it in range(1, int(n_iter) + 1):
        envs, f_ref = _snapshot_environments(
            Circuit(work.n_qubits, gates), target, var, chi_max, eps_svd)
        history.append(max(0.0, 1.0 - abs(f_ref) ** 2))
        new_gates = list(gates)
        ok = True
        for m in var:
            g = gates[m]
            f = np.trace(g.matrix.conj().T @ envs[m])
            egrad = -2.0 * np.conj(f) * envs[m]
            xi = riemannian_gradient(g.matrix, egrad)
            if not np.all(np.isfinite(xi)):
                ok = False
                break
            if np.linalg.norm(xi) <= 1e-12 * max(1.0,
                                                 np.linalg.norm(egrad)):
                # pure roundoff: Adam would amplify it to a full-lr step
                # (m/sqrt(v) saturates at +-1 on noise), walking an exact
                # optimum away from itself
                continue
            mom1[m] = _ADAM_BETA1 * mom1[m] + (1.0 - _ADAM_BETA1) * xi
            mom2[m] = _ADAM_BETA2 * mom2[m] \
                + (1.0 - _ADAM_BETA2) * np.abs(xi) ** 2
            m_hat = mom1[m] / (1.0 - _ADAM_BETA1 ** it)
            v_hat = mom2[m] / (1.0 - _ADAM_BETA2 ** it)
            step = -lr * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
            u_new = svd_retraction(g.matrix, step)
            if not np.all(np.isfinite(u_new)):
                ok = False
                break
            new_gates[m] = Gate(g.kind, g.qubits, matrix=u_new, tag=g.tag,
                                fixed=g.fixed)
            mom1[m] = riemannian_gradient(u_new, mom1[m])
        if not ok:
            warnings.warn("non-finite update; keeping the last good circuit",
                          stacklevel=2)
            break
        gates = new_gates
    _, f_fin = _snapshot_environments(Circuit(work.n_qubits, gates), target,
                                      var[:1], chi_max, eps_svd)
    history.append(max(0.0, 1.0 - abs(f_fin) ** 2))
    return Circuit(work.n_qubits, gates,
                   {**circuit.tags, "optimizer": "riemannian"}), history


def _snapshot_environments(circuit, target, wanted, chi_max, eps_svd):
    """Environments of the `wanted` gate indices against a fixed circuit,
    plus the overlap (independent of which gate it is read from)."""
    builder = EnvironmentBuilder(circuit, target, chi_max, eps_svd)
    wanted = set(wanted)
    envs = {}
    f_ref = None
    for m in range(len(circuit.gates)):
        if m > 0:
            builder.advance()
        if m in wanted:
            envs[m] = builder.env()
            if f_ref is None:
                f_ref = builder.current_overlap()
    return envs, f_ref


# -- interleaved pipeline ----------------------------------------------------


def _strip_fixed(g):
    if g.kind == "generic2" and g.fixed:
        return Gate("generic2", g.qubits, matrix=g.matrix, tag=g.tag)
    return g


def _prepared_infidelity(circuit, target, chi_max):
    if not circuit.gates:
        out = MPS.product_state([0] * circuit.n_qubits)
    else:
        out, _, _ = simulate(circuit, chi_max=chi_max, eps_svd=1e-12)
    nrm = out.norm()
    if nrm == 0.0:
        return 1.0
    return 1.0 - abs(overlap(out, target) / nrm) ** 2


def interleaved_pipeline(target, heuristic="smpd", optimizer="ev",
                         n_layers=2, budget=100, chi_tilde=64, eps_svd=1e-8,
                         beta=0.6, lr=1e-4, seed=0, gauge="mixed",
                         center=None, alpha=2.0):
    """Alternate one heuristic layer with a full-circuit optimization pass:
    pull the target back through the current circuit, let the heuristic
    disentangle the residual by one layer, prepend that layer, re-optimize
    everything, repeat.  The trace records the infidelity after every
    heuristic and every optimizer stage."""
    if heuristic not in ("smpd", "bmpd"):
        raise ValueError("heuristic must be 'smpd' or 'bmpd'")
    if optimizer not in ("ev", "riemannian"):
        raise ValueError("optimizer must be 'ev' or 'riemannian'")
    if int(n_layers) < 1 or int(budget) < 1:
        raise ValueError("n_layers and budget must be positive")
    target = target.canonicalize("vidal").normalized()
    n = target.n_sites
    gates = []
    trace = []
    for k in range(1, int(n_layers) + 1):
        if gates:
            undo = Circuit(n, [g.dagger() for g in reversed(gates)])
            resid, _, _ = simulate(undo, chi_max=chi_tilde, eps_svd=eps_svd,
                                   initial=target)
        else:
            resid = target
        if heuristic == "smpd":
            cfg = SmpdConfig(gauge=gauge, center=center, max_layers=1,
                             chi_tilde=chi_tilde, eps_svd=eps_svd)
            layer, _ = smpd_build(resid, cfg)
        else:
            cfg = BmpdConfig(alpha=alpha, max_layers=1, chi_tilde=chi_tilde,
                             eps_svd=eps_svd)
            layer, _ = bmpd_build(resid, cfg)
        gates = list(layer.gates) + [_strip_fixed(g) for g in gates]
        circ = Circuit(n, gates)
        trace.append({"layer": k, "stage": heuristic,
                      "infidelity": _prepared_infidelity(circ, target,
                                                         chi_tilde),
                      "n_gates": len(gates)})
        if optimizer == "ev":
            circ, _ = ev_sweep(circ, target, beta=beta, n_sweeps=budget,
                               chi_max=chi_tilde, eps_svd=1e-12)
        else:
            circ, _ = riemannian_adam(circ, target, lr=lr, n_iter=budget,
                                      seed=seed, chi_max=chi_tilde,
                                      eps_svd=1e-12)
        gates = list(circ.gates)
        trace.append({"layer": k, "stage": optimizer,
                      "infidelity": _prepared_infidelity(circ, target,
                                                         chi_tilde),
                      "n_gates": len(gates)})
    tags = {"method": f"{heuristic}+{optimizer}", "layers": int(n_layers)}
    return Circuit(n, gates, tags), trace
