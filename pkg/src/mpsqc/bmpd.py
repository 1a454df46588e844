"""Brick-wall disentangler: per-bond two-qubit gates chosen to minimize the
Renyi entropy of the bond they act on, assembled into alternating sublayers,
closed by a single-qubit product layer.

Each gate comes from a 9-angle ansatz: one single-qubit exponential per wire
followed by the commuting XX/YY/ZZ two-body exponential.  The single-qubit
factors act first; a Bell-like bond is a simultaneous eigenstate of the
two-body generators, so output-side locals could never disentangle it.
Optimization is quasi-Newton (L-BFGS-B) over central finite-difference
gradients, evaluated on the local two-site block only.  The emitted circuit
is the Hermitian conjugate of the applied gates in reverse order, so it
prepares the target from |0...0>.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from .circuit import Circuit, Gate
from .mps import overlap

_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_XX = np.kron(_X, _X)
_YY = np.kron(_Y, _Y)
_ZZ = np.kron(_Z, _Z)

_FD_STEP = 1e-6
_IDENTITY_TOL = 1e-12


def disentangler_ansatz(theta):
    """4x4 unitary from 9 angles: exp(-i sum theta_k P_k) over XX, YY, ZZ
    applied after one free single-qubit exponential per wire.  theta = 0
    gives the identity."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (9,):
        raise ValueError("expected 9 angles")
    two_body = expm(-1j * (theta[0] * _XX + theta[1] * _YY + theta[2] * _ZZ))
    u_a = expm(-1j * (theta[3] * _X + theta[4] * _Y + theta[5] * _Z))
    u_b = expm(-1j * (theta[6] * _X + theta[7] * _Y + theta[8] * _Z))
    return two_body @ np.kron(u_a, u_b)


@dataclass
class BmpdConfig:
    """Knobs for the brick-wall construction.

    entropy_skip_threshold defaults to 2 * eps_svd**2, the alpha=2 entropy
    of a bond whose relative second Schmidt value equals eps_svd; bonds
    below it are treated as already disentangled.  max_iter and gtol bound
    the per-bond optimizer.
    """

    alpha: float = 2.0
    max_layers: int = 8
    chi_tilde: int = 64
    eps_svd: float = 1e-8
    entropy_skip_threshold: float = None
    max_iter: int = 1000
    gtol: float = 1e-8

    def __post_init__(self):
        self.alpha = float(self.alpha)
        if self.alpha <= 0 or abs(self.alpha - 1.0) < 1e-12:
            raise ValueError("alpha must be positive and != 1")
        if not 0.1 <= self.alpha <= 10.0:
            warnings.warn("extreme Renyi order: small alpha explores more "
                          "but costs accuracy, large alpha is nearly "
                          "min-entropy", stacklevel=2)
        self.max_layers = int(self.max_layers)
        if self.max_layers < 1:
            raise ValueError("max_layers must be >= 1")
        self.chi_tilde = int(self.chi_tilde)
        if self.chi_tilde < 2:
            raise ValueError("chi_tilde must be >= 2")
        self.eps_svd = float(self.eps_svd)
        if not 0.0 <= self.eps_svd < 1.0:
            raise ValueError("eps_svd must lie in [0, 1)")
        if self.entropy_skip_threshold is None:
            self.entropy_skip_threshold = 2.0 * self.eps_svd ** 2
        self.entropy_skip_threshold = float(self.entropy_skip_threshold)
        self.max_iter = int(self.max_iter)
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        self.gtol = float(self.gtol)


def _renyi(lams, alpha):
    p = np.asarray(lams, dtype=float) ** 2
    p = p / p.sum()
    p = p[p > 1e-300]
    return float(np.log(np.sum(p ** alpha)) / (1.0 - alpha))


def _bond_block(mps, bond):
    """Two-site wavefunction around a bond of a vidal-gauge state, shape
    (chi_left, 2, 2, chi_right); its singular values across the middle are
    the bond's Schmidt spectrum."""
    n = mps.n_sites
    lam_l = mps.singular_values[bond - 1] if bond > 0 else np.ones(1)
    lam_r = mps.singular_values[bond + 1] if bond < n - 2 else np.ones(1)
    lam_m = mps.singular_values[bond]
    g1 = mps.tensors[bond]
    g2 = mps.tensors[bond + 1]
    return np.einsum("sam,a,m,tmb,b->astb", g1, lam_l, lam_m, g2, lam_r,
                     optimize=True)


def _spectrum_after(block, u):
    out = np.einsum("stuv,auvb->astb", u.reshape(2, 2, 2, 2), block)
    l, _, _, r = out.shape
    mat = out.reshape(l * 2, 2 * r)  # rows (chi_left, s), cols (t, chi_right)
    s = np.linalg.svd(mat, compute_uv=False)
    nrm = np.linalg.norm(s)
    if nrm == 0:
        return s
    return s / nrm


def optimize_bond_disentangler(mps, bond, config):
    """Angles minimizing the Renyi entropy at `bond` after the ansatz gate
    acts there, plus the achieved entropy.  The gate is not applied.

    Starts from the identity; if the relative decrease stays below 1%, up
    to 3 random restarts are tried (rng seeded by the bond index).  A NaN
    in the optimized spectrum falls back to theta = 0 with a warning.
    """
    if mps.gauge != "vidal":
        raise ValueError("optimize_bond_disentangler expects vidal gauge")
    if not 0 <= bond < mps.n_sites - 1:
        raise ValueError("bond out of range")
    block = _bond_block(mps, bond)
    alpha = config.alpha

    best = {"f": np.inf, "x": np.zeros(9), "nan": False}

    def objective(theta):
        lam = _spectrum_after(block, disentangler_ansatz(theta))
        val = _renyi(lam, alpha) if lam.size else np.nan
        if not np.isfinite(val):
            best["nan"] = True
            return 1e6
        if val < best["f"]:
            best["f"] = val
            best["x"] = np.array(theta)
        return val

    def gradient(theta):
        g = np.zeros(9)
        for k in range(9):
            step = np.zeros(9)
            step[k] = _FD_STEP
            g[k] = (objective(theta + step)
                    - objective(theta - step)) / (2.0 * _FD_STEP)
        return g

    s0 = objective(np.zeros(9))
    rng = np.random.default_rng(1009 * (bond + 1))
    for attempt in range(4):
        x0 = best["x"] if attempt == 0 else rng.uniform(-0.5, 0.5, size=9)
        minimize(objective, x0, jac=gradient, method="L-BFGS-B",
                 options={"maxiter": config.max_iter, "gtol": config.gtol})
        rel = (s0 - best["f"]) / max(s0, 1e-30)
        if rel >= 0.01 or s0 < 10 * config.entropy_skip_threshold:
            break

    if best["nan"] and best["f"] >= s0:
        warnings.warn(f"optimizer produced NaN at bond {bond}; keeping the "
                      "identity gate", stacklevel=2)
        return np.zeros(9), s0
    if best["f"] > s0:  # never worse than doing nothing
        return np.zeros(9), s0
    return best["x"], float(best["f"])


def _product_layer(psi):
    """Single-qubit gates sending the chi=1 truncation of psi to |0...0>."""
    prod = psi.truncate(1, eps_svd=0.0)
    gates = []
    for i in range(psi.n_sites):
        v = prod.tensors[i][:, 0, 0]
        a, b = complex(v[0]), complex(v[1])
        u = np.array([[np.conj(a), np.conj(b)], [-b, a]])  # maps v to |0>
        gates.append(Gate("generic1", (i,), matrix=u, tag="close"))
    return gates


def bmpd_build(target, config):
    """Alternating odd-bond/even-bond disentangling sublayers, then a
    closing single-qubit layer; returns the preparation circuit (Hermitian
    conjugates in reverse order) and a per-sublayer trace.

    Trace entries: {layer, sublayer, entropies, total_entropy, n_gates,
    prep_infidelity}, where entropies lists the per-bond Renyi entropy
    after the sublayer committed.  prep_infidelity is the |0...0>
    infidelity the circuit would reach if closed right there: the closing
    single-qubit layer maps the chi=1 truncation exactly to |0...0>, so
    mid-run this is the overlap with that truncation; the final "close"
    entry holds the literal |0...0> amplitude.
    """
    n = target.n_sites
    nrm = target.norm()
    if not np.isfinite(nrm) or nrm < 1e-12:
        raise ValueError("target state has (near) zero norm")
    psi = target.canonicalize("vidal").normalized()

    applied = []
    trace = []

    def record(layer, sublayer, n_gates, closed=False):
        lams = psi.singular_values or []
        entropies = [_renyi(lam, config.alpha) for lam in lams]
        if closed:
            p0 = abs(psi.amplitude([0] * n)) ** 2 / psi.norm() ** 2
        else:
            prod = psi.truncate(1, eps_svd=0.0)
            p0 = abs(overlap(prod, psi)) ** 2 \
                / (prod.norm() * psi.norm()) ** 2
        trace.append({
            "layer": layer,
            "sublayer": sublayer,
            "entropies": entropies,
            "total_entropy": float(sum(entropies)),
            "n_gates": n_gates,
            "prep_infidelity": float(1.0 - p0),
        })

    record(0, "init", 0)
    for k in range(1, config.max_layers + 1):
        for parity, name in ((1, "odd"), (0, "even")):
            n_gates = 0
            for b in range(parity, n - 1, 2):
                if _renyi(psi.singular_values[b], config.alpha) \
                        <= config.entropy_skip_threshold:
                    continue
                theta, achieved = optimize_bond_disentangler(psi, b, config)
                if np.max(np.abs(theta)) < _IDENTITY_TOL:
                    continue
                u = disentangler_ansatz(theta)
                psi = psi.apply_two_site_gate(b, u,
                                              chi_max=config.chi_tilde,
                                              eps_svd=config.eps_svd)
                applied.append(Gate("generic2", (b, b + 1), matrix=u,
                                    tag=f"l{k}:{name}"))
                n_gates += 1
            record(k, name, n_gates)

    closing = _product_layer(psi)
    for g in closing:
        psi = psi.apply_one_site_gate(g.qubits[0], g.matrix)
    applied.extend(closing)
    record(config.max_layers + 1, "close", n, closed=True)

    circuit = Circuit(n, [g.dagger() for g in reversed(applied)],
                      tags={"method": "bmpd", "alpha": config.alpha,
                            "layers": config.max_layers})
    return circuit, trace
