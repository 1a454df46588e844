"""Estimator-style wrappers over the functional core.

Two classes follow the fit/transform/predict conventions so circuit
compilation and qubit reordering drop into sklearn-style workflows
(parameter grids, cloning, pipelines).  Constructors only store their
arguments; everything is validated when `fit` sees data.  The numerical
work stays in the functional modules.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .bmpd import BmpdConfig, bmpd_build
from .circuit import cnot_metrics, lower, simulate
from .mps import MPS, overlap
from .optimize import ev_sweep, interleaved_pipeline, riemannian_adam
from .reorder import PermutationPlan, apply_permutation, \
    optimize_permutation
from .smpd import SmpdConfig, smpd_build


def as_target_mps(x, eps_svd=1e-12, chi_max=None):
    """Coerce input into an MPS: pass-through, or compress a dense
    amplitude vector of length 2^n."""
    if isinstance(x, MPS):
        return x
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.size < 2 or arr.size & (arr.size - 1):
        raise ValueError(
            "expected an MPS or a 1-D amplitude vector of length 2^n")
    return MPS.from_dense(arr, eps_svd=eps_svd, chi_max=chi_max)


def check_bit_rows(x, n_sites):
    """Validate an (m, N) array of 0/1 rows and return it as ints."""
    arr = np.asarray(x)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != n_sites:
        raise ValueError(f"expected rows of {n_sites} bits")
    bits = arr.astype(int)
    if not np.array_equal(bits, arr) or bits.min() < 0 or bits.max() > 1:
        raise ValueError("bit rows must contain only 0 and 1")
    return bits


class CircuitCompiler(BaseEstimator):
    """Compile an MPS (or dense amplitude vector) into a nearest-neighbor
    circuit, optionally refined by a variational pass.

    After `fit`: `circuit_` (as built), `state_` (its simulated output),
    `infidelity_`, `n_cnot_` / `d_cnot_` (counted on the lowered form),
    `trace_` and `history_` diagnostics.  `predict` returns amplitudes of
    the prepared state for bit rows; `score` is the fidelity against the
    fitted target.
    """

    def __init__(self, method="smpd", max_layers=2, chi_tilde=64,
                 eps_svd=1e-8, alpha=2.0, gauge="mixed", center=None,
                 optimizer=None, budget=100, beta=0.6, lr=1e-4, seed=0,
                 interleave=False):
        self.method = method
        self.max_layers = max_layers
        self.chi_tilde = chi_tilde
        self.eps_svd = eps_svd
        self.alpha = alpha
        self.gauge = gauge
        self.center = center
        self.optimizer = optimizer
        self.budget = budget
        self.beta = beta
        self.lr = lr
        self.seed = seed
        self.interleave = interleave

    def fit(self, X, y=None):
        if self.method not in ("smpd", "bmpd"):
            raise ValueError("method must be 'smpd' or 'bmpd'")
        if self.optimizer not in (None, "ev", "riemannian"):
            raise ValueError("optimizer must be None, 'ev' or 'riemannian'")
        target = as_target_mps(X).canonicalize("vidal").normalized()
        if self.interleave:
            if self.optimizer is None:
                raise ValueError("interleave=True requires an optimizer")
            circuit, trace = interleaved_pipeline(
                target, heuristic=self.method, optimizer=self.optimizer,
                n_layers=self.max_layers, budget=self.budget,
                chi_tilde=self.chi_tilde, eps_svd=self.eps_svd,
                beta=self.beta, lr=self.lr, seed=self.seed,
                gauge=self.gauge, center=self.center, alpha=self.alpha)
            history = [entry["infidelity"] for entry in trace]
        else:
            if self.method == "smpd":
                cfg = SmpdConfig(gauge=self.gauge, center=self.center,
                                 max_layers=self.max_layers,
                                 chi_tilde=self.chi_tilde,
                                 eps_svd=self.eps_svd)
                circuit, trace = smpd_build(target, cfg)
            else:
                cfg = BmpdConfig(alpha=self.alpha,
                                 max_layers=self.max_layers,
                                 chi_tilde=self.chi_tilde,
                                 eps_svd=self.eps_svd)
                circuit, trace = bmpd_build(target, cfg)
            if self.optimizer == "ev":
                circuit, hist = ev_sweep(circuit, target, beta=self.beta,
                                         n_sweeps=self.budget,
                                         chi_max=self.chi_tilde,
                                         eps_svd=1e-12)
                history = [max(0.0, 1.0 - f * f) for f in hist]
            elif self.optimizer == "riemannian":
                circuit, history = riemannian_adam(
                    circuit, target, lr=self.lr, n_iter=self.budget,
                    seed=self.seed, chi_max=self.chi_tilde, eps_svd=1e-12)
            else:
                history = None
        state, discarded, norm_error = simulate(
            circuit, chi_max=self.chi_tilde, eps_svd=1e-12)
        f = abs(overlap(state, target)) / state.norm()
        lowered = lower(circuit)
        self.circuit_ = circuit
        self.lowered_ = lowered
        self.state_ = state
        self.trace_ = trace
        self.history_ = history
        self.infidelity_ = max(0.0, 1.0 - f * f)
        self.discarded_weight_ = discarded
        self.norm_error_ = norm_error
        self.n_cnot_, self.d_cnot_ = cnot_metrics(lowered)
        self.n_qubits_ = target.n_sites
        return self

    def predict(self, X):
        """Amplitudes of the prepared state for (m, N) bit rows."""
        check_is_fitted(self, "state_")
        bits = check_bit_rows(X, self.n_qubits_)
        return np.array([self.state_.amplitude(row) for row in bits])

    def score(self, X=None, y=None):
        """Fidelity |<prepared|target>|^2 from the fit; X and y are
        ignored (the target is fixed at fit time)."""
        check_is_fitted(self, "infidelity_")
        return 1.0 - self.infidelity_


class QubitReorderer(TransformerMixin, BaseEstimator):
    """Learn an entanglement-aware qubit ordering from a state and apply
    it through an adjacent-SWAP network.

    `fit` computes the mutual-information matrix and searches for a
    permutation; `transform` rebuilds a state in that order.  After
    `fit`: `plan_`, `permutation_`, `qmi_`, `cost_before_`, `cost_after_`.
    """

    def __init__(self, eta=1.0, restarts=16, seed=0, frozen=None,
                 anneal=False, chi_max=None, eps_svd=1e-12,
                 discard_budget=1e-8):
        self.eta = eta
        self.restarts = restarts
        self.seed = seed
        self.frozen = frozen
        self.anneal = anneal
        self.chi_max = chi_max
        self.eps_svd = eps_svd
        self.discard_budget = discard_budget

    def fit(self, X, y=None):
        mps = as_target_mps(X)
        self.qmi_ = mps.qmi_matrix()
        self.plan_ = optimize_permutation(
            self.qmi_, eta=self.eta, frozen=self.frozen,
            restarts=self.restarts, seed=self.seed, anneal=self.anneal)
        self.permutation_ = self.plan_.pi
        self.cost_before_ = self.plan_.cost_before
        self.cost_after_ = self.plan_.cost_after
        self.n_qubits_ = mps.n_sites
        return self

    def transform(self, X):
        check_is_fitted(self, "plan_")
        mps = as_target_mps(X)
        return apply_permutation(mps, self.plan_, chi_max=self.chi_max,
                                 eps_svd=self.eps_svd,
                                 discard_budget=self.discard_budget)

    def inverse_transform(self, X):
        """Undo the learned ordering (send position pi[q] back to q)."""
        check_is_fitted(self, "plan_")
        inverse = [0] * len(self.plan_.pi)
        for q, p in enumerate(self.plan_.pi):
            inverse[p] = q
        undo = PermutationPlan(tuple(inverse), self.plan_.eta,
                               self.plan_.cost_after,
                               self.plan_.cost_before,
                               self.plan_.frozen)
        mps = as_target_mps(X)
        return apply_permutation(mps, undo, chi_max=self.chi_max,
                                 eps_svd=self.eps_svd,
                                 discard_budget=self.discard_budget)
