"""Sequential staircase compilation: peel an MPS into layers of
nearest-neighbor gates, each layer exactly preparing the rank-2 truncation
of the current residual state.

One layer is read off the canonical tensors of the chi=2 truncation: every
on-site isometry becomes a two-qubit gate (completed to a unitary, with the
dummy input wire marked |0> for cheap lowering), boundary tensors stay
single-qubit unitaries, and in the mixed gauge the center bond contributes
the diagonal Schmidt gate made of one R_Y and one CNOT.  Applying the
inverse layer disentangles the state a little; repeating grows a circuit
whose reversed gate list prepares the target.
"""

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate, simulate
from .decompose import complete_isometry, u_lambda_gate
from .mps import overlap, svd_fixed

_GAUGES = ("left", "right", "mixed")


@dataclass
class SmpdConfig:
    """Knobs for the staircase construction.

    eps_svd doubles as the bond-skip threshold: with
    skip_disentangled_bonds, bonds whose relative second Schmidt value
    falls below it emit single-qubit gates only.  Suggested values: 1e-8
    for weakly entangled targets, 1e-4 for strongly entangled ones.
    """

    gauge: str = "mixed"
    center: int = None
    max_layers: int = 8
    chi_tilde: int = 64
    eps_svd: float = 1e-8
    skip_disentangled_bonds: bool = True
    stop_fidelity: float = None

    def __post_init__(self):
        if self.gauge not in _GAUGES:
            raise ValueError(f"gauge must be one of {_GAUGES}")
        if self.center is not None:
            self.center = int(self.center)
        self.max_layers = int(self.max_layers)
        if self.max_layers < 1:
            raise ValueError("max_layers must be >= 1")
        self.chi_tilde = int(self.chi_tilde)
        if self.chi_tilde < 2:
            raise ValueError("chi_tilde must be >= 2")
        self.eps_svd = float(self.eps_svd)
        if not 0.0 <= self.eps_svd < 1.0:
            raise ValueError("eps_svd must lie in [0, 1)")
        if self.stop_fidelity is not None:
            self.stop_fidelity = float(self.stop_fidelity)
            if not 0.0 < self.stop_fidelity <= 1.0:
                raise ValueError("stop_fidelity must lie in (0, 1]")


def _complete_column(phi):
    """4x4 unitary whose first column is phi (deterministic Gram-Schmidt)."""
    cols = [np.asarray(phi, dtype=complex)]
    for k in range(4):
        cand = np.zeros(4, dtype=complex)
        cand[k] = 1.0
        for _ in range(2):  # reorthogonalize, as in complete_isometry
            for c in cols:
                cand = cand - c * np.vdot(c, cand)
        nrm = np.linalg.norm(cand)
        if nrm > 1e-7:
            cols.append(cand / nrm)
        if len(cols) == 4:
            break
    return np.stack(cols, axis=1)


def _single_qubit_prep(phi):
    a, b = complex(phi[0]), complex(phi[1])
    return np.array([[a, -np.conj(b)], [b, np.conj(a)]])


def _segments(ranks):
    """Split the chain at rank-1 bonds into independently prepared pieces."""
    n = len(ranks) + 1
    out = []
    lo = 0
    for b in range(n - 1):
        if ranks[b] == 1:
            out.append((lo, b))
            lo = b + 1
    out.append((lo, n - 1))
    return out


def _emit_left(a_tens, lo, hi, tag):
    """Left-canonical staircase for sites lo..hi, unfolding from the right
    edge: state prep on (hi-1, hi), isometries moving left, one single-qubit
    unitary closing at lo.  Gates listed in application order."""
    if lo == hi:
        u = _single_qubit_prep(a_tens[lo][:, 0, 0])
        return [Gate("generic1", (lo,), matrix=u, tag=tag)]
    phi = a_tens[hi][:, :, 0].T.ravel()  # index 2a+s, bond on the high wire
    gates = [Gate("generic2", (hi - 1, hi), matrix=_complete_column(phi),
                  tag=tag, fixed=(hi - 1, hi))]
    for i in range(hi - 1, lo, -1):
        iso = a_tens[i].transpose(1, 0, 2).reshape(4, 2)  # rows 2a+s, cols b
        gates.append(Gate("generic2", (i - 1, i),
                          matrix=complete_isometry(iso), tag=tag,
                          fixed=(i - 1,)))
    gates.append(Gate("generic1", (lo,), matrix=a_tens[lo][:, 0, :], tag=tag))
    return gates


def _emit_right(b_tens, lo, hi, tag):
    """Mirror staircase from right-canonical tensors: prep on (lo, lo+1),
    isometries moving right, single-qubit close at hi."""
    if lo == hi:
        u = _single_qubit_prep(b_tens[lo][:, 0, 0])
        return [Gate("generic1", (lo,), matrix=u, tag=tag)]
    phi = b_tens[lo][:, 0, :].ravel()  # index 2s+b, bond on the low wire
    gates = [Gate("generic2", (lo, lo + 1), matrix=_complete_column(phi),
                  tag=tag, fixed=(lo, lo + 1))]
    for i in range(lo + 1, hi):
        iso = b_tens[i].transpose(0, 2, 1).reshape(4, 2)  # rows 2s+b, cols a
        # completion fills columns [0, 1]; the dummy wire here is the less
        # significant input bit, so the isometry must sit at columns [0, 2]
        full = complete_isometry(iso)[:, [0, 2, 1, 3]]
        gates.append(Gate("generic2", (i, i + 1), matrix=full, tag=tag,
                          fixed=(i + 1,)))
    gates.append(Gate("generic1", (hi,), matrix=b_tens[hi][:, :, 0], tag=tag))
    return gates


def _emit_mixed(a_tens, b_tens, lam_cb, lo, hi, cb, tag):
    """Center-bond Schmidt gate first, then staircases unfolding outward:
    left-canonical tensors descend to lo, right-canonical ones ascend to
    hi."""
    gates, _ = u_lambda_gate(lam_cb, qubits=(cb, cb + 1), tag=tag)
    for i in range(cb, lo, -1):
        iso = a_tens[i].transpose(1, 0, 2).reshape(4, 2)
        gates.append(Gate("generic2", (i - 1, i),
                          matrix=complete_isometry(iso), tag=tag,
                          fixed=(i - 1,)))
    gates.append(Gate("generic1", (lo,), matrix=a_tens[lo][:, 0, :], tag=tag))
    for i in range(cb + 1, hi):
        iso = b_tens[i].transpose(0, 2, 1).reshape(4, 2)
        full = complete_isometry(iso)[:, [0, 2, 1, 3]]
        gates.append(Gate("generic2", (i, i + 1), matrix=full, tag=tag,
                          fixed=(i + 1,)))
    gates.append(Gate("generic1", (hi,), matrix=b_tens[hi][:, :, 0], tag=tag))
    return gates


def rank2_layer(psi_d, config, tag=""):
    """One staircase layer for the rank-2 truncation of psi_d.

    Returns (gates, psi2): gates in application order prepare psi2 from
    |0...0> exactly, and psi2 is the chi=2 truncation (per-bond Schmidt
    renormalization, vidal form).  The configured gauge decides which
    canonical tensors the gates are read from; with
    skip_disentangled_bonds, bonds of rank 1 at eps_svd split the chain
    and emit no two-qubit gate.
    """
    n = psi_d.n_sites
    nrm = psi_d.norm()
    if not np.isfinite(nrm) or abs(nrm - 1.0) > 1e-3:
        raise ValueError("rank2_layer expects a normalized state")
    eps = config.eps_svd if config.skip_disentangled_bonds else 0.0
    psi2 = psi_d.truncate(2, eps_svd=eps)  # right-canonical tensors
    center = config.center if config.center is not None else n // 2
    if not 0 <= center < n:
        raise ValueError("center out of range")

    if n == 1:
        u = _single_qubit_prep(psi2.tensors[0][:, 0, 0])
        return [Gate("generic1", (0,), matrix=u, tag=tag)], psi2

    # canonical tensors are taken straight from orthogonalizing sweeps
    # (never by dividing out Schmidt values, which amplifies roundoff past
    # the gate unitarity tolerance when a kept value is small)
    gates = []
    if config.gauge == "left":
        psi2 = psi2.canonicalize("left")
        a_tens = psi2.tensors
        ranks = [t.shape[2] for t in a_tens[:-1]]
        for lo, hi in _segments(ranks):
            gates.extend(_emit_left(a_tens, lo, hi, tag))
        return gates, psi2

    if config.gauge == "right":
        b_tens = psi2.tensors
        ranks = [t.shape[2] for t in b_tens[:-1]]
        for lo, hi in _segments(ranks):
            gates.extend(_emit_right(b_tens, lo, hi, tag))
        return gates, psi2

    cb = min(center, n - 2)  # bond index of the mixed-gauge split
    psi2 = psi2.canonicalize("mixed", center=cb)
    mid = psi2.tensors[cb]
    d, l, r = mid.shape
    u, s, vh = svd_fixed(mid.reshape(d * l, r))
    lam_cb = s / np.linalg.norm(s)
    a_tens = list(psi2.tensors[:cb]) + [u.reshape(d, l, -1)]
    b_tens = [None] * (cb + 1)
    b_tens.append(np.tensordot(vh, psi2.tensors[cb + 1],
                               axes=([1], [1])).transpose(1, 0, 2))
    b_tens.extend(psi2.tensors[cb + 2:])
    ranks = [t.shape[2] for t in psi2.tensors[:-1]]
    ranks[cb] = len(lam_cb)
    for lo, hi in _segments(ranks):
        if hi <= cb:
            gates.extend(_emit_left(a_tens, lo, hi, tag))
        elif lo > cb:
            gates.extend(_emit_right(b_tens, lo, hi, tag))
        else:
            gates.extend(_emit_mixed(a_tens, b_tens, lam_cb, lo, hi, cb,
                                     tag))
    return gates, psi2


def smpd_build(target, config):
    """Iterate rank-2 layers until the residual is (nearly) a product state.

    Each round truncates the residual to chi=2, emits the layer preparing
    that truncation, and applies the inverse layer to the residual under the
    chi_tilde cap.  The returned circuit lists the layers in reverse
    construction order, so running it on |0...0> prepares the target.

    The trace records per layer: norm2 = <psi_d|psi_d> before
    renormalization (truncation-loss diagnostic) together with its square
    norm2_sq (the overlap-squared reading of the same quantity),
    rank2_fidelity = |<psi_2|psi_d>|^2, prep_infidelity
    = 1 - |<0...0|psi_d>|^2 after the inverse layer, the residual's maximal
    bond entropy, and the discarded weight of the inverse application.
    """
    n = target.n_sites
    nrm = target.norm()
    if not np.isfinite(nrm) or nrm < 1e-12:
        raise ValueError("target state has (near) zero norm")
    psi_d = target.canonicalize("vidal").normalized()

    layers = []
    trace = []
    for k in range(1, config.max_layers + 1):
        nrm = psi_d.norm()
        n2 = nrm * nrm
        # renormalize to unit norm; the emitted gates depend only on the
        # stored canonical tensors, so only the trace sees this scale
        psi_d.norm_log -= np.log(nrm)
        layer, psi2 = rank2_layer(psi_d, config, tag=f"l{k}")
        f2 = abs(overlap(psi2, psi_d) / psi2.norm()) ** 2
        layers.append(layer)

        inverse = Circuit(n, [g.dagger() for g in reversed(layer)])
        psi_d, disc, _ = simulate(inverse, chi_max=config.chi_tilde,
                                  eps_svd=config.eps_svd, initial=psi_d)
        p0 = abs(psi_d.amplitude([0] * n)) ** 2 / psi_d.norm() ** 2
        entropies = psi_d.bond_entropy_profile()
        trace.append({
            "layer": k,
            "norm2": float(n2),
            "norm2_sq": float(n2 * n2),
            "rank2_fidelity": float(f2),
            "prep_infidelity": float(1.0 - p0),
            "max_entropy": float(max(entropies, default=0.0)),
            "discarded_weight": float(disc),
        })
        if config.stop_fidelity is not None and p0 >= config.stop_fidelity:
            break

    gates = []
    for j, layer in enumerate(reversed(layers)):
        keep_fixed = j == 0  # only the first applied layer sees |0> inputs
        for g in layer:
            if keep_fixed or not g.fixed:
                gates.append(g)
            else:
                gates.append(Gate(g.kind, g.qubits, angle=g.angle,
                                  matrix=g.matrix, tag=g.tag))
    circuit = Circuit(n, gates, tags={"method": "smpd",
                                      "gauge": config.gauge,
                                      "layers": len(layers)})
    return circuit, trace
