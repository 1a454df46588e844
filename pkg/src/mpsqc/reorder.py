"""Entanglement-based qubit ordering.

Pairwise mutual information defines a quadratic-assignment cost over site
permutations; multi-restart 2-opt (optionally refined by simulated
annealing) picks an ordering, and a sorting network of adjacent SWAPs
rebuilds the state in that ordering.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .mps import MPS

_SWAP = np.eye(4)[[0, 2, 1, 3]]


@dataclass
class PermutationPlan:
    """Qubit-to-position assignment with its cost bookkeeping.

    pi[q] is the new position of original qubit q.  Entropy fields are
    filled in by apply_permutation; they stay NaN until then.
    """

    pi: tuple
    eta: float
    cost_before: float
    cost_after: float
    frozen: frozenset = field(default_factory=frozenset)
    entropy_before_max: float = float("nan")
    entropy_after_max: float = float("nan")

    def __post_init__(self):
        pi = tuple(int(p) for p in self.pi)
        n = len(pi)
        if sorted(pi) != list(range(n)):
            raise ValueError("pi must be a permutation of 0..N-1")
        bad = [i for i in self.frozen if pi[i] != i]
        if bad:
            raise ValueError(f"frozen positions moved: {bad}")
        self.pi = pi
        self.frozen = frozenset(int(i) for i in self.frozen)

    @property
    def n_sites(self):
        return len(self.pi)

    def is_identity(self):
        return self.pi == tuple(range(self.n_sites))

    def to_json(self, indent=None):
        return json.dumps({
            "pi": list(self.pi),
            "eta": self.eta,
            "cost_before": self.cost_before,
            "cost_after": self.cost_after,
            "frozen": sorted(self.frozen),
        }, indent=indent)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(pi=tuple(d["pi"]), eta=float(d["eta"]),
                   cost_before=float(d["cost_before"]),
                   cost_after=float(d["cost_after"]),
                   frozen=frozenset(d.get("frozen", ())))


def qap_cost(qmi, pi, eta=1.0):
    """sum_ij I_ij |pi(i) - pi(j)|^eta over ordered pairs i != j."""
    qmi = np.asarray(qmi, dtype=float)
    pos = np.asarray(pi, dtype=float)
    if sorted(int(p) for p in pi) != list(range(qmi.shape[0])):
        raise ValueError("pi must be a permutation matching the QMI size")
    dist = np.abs(pos[:, None] - pos[None, :])
    off = ~np.eye(len(pos), dtype=bool)
    weight = np.zeros_like(dist)
    weight[off] = dist[off] ** eta
    return float((qmi * weight).sum())


def _two_opt(qmi, pi, eta, free, sign):
    """Repeated position-swap descent; every accepted swap strictly improves
    sign*cost.  Returns the locally optimal permutation."""
    pi = list(pi)
    cost = sign * qap_cost(qmi, pi, eta)
    improved = True
    while improved:
        improved = False
        for a_idx in range(len(free)):
            for b_idx in range(a_idx + 1, len(free)):
                a, b = free[a_idx], free[b_idx]
                pi[a], pi[b] = pi[b], pi[a]
                cand = sign * qap_cost(qmi, pi, eta)
                if cand < cost - 1e-15:
                    cost = cand
                    improved = True
                else:
                    pi[a], pi[b] = pi[b], pi[a]
    return tuple(pi), sign * cost


def _anneal(qmi, pi, eta, free, sign, rng, n_steps):
    """Geometric-schedule simulated annealing over position swaps; keeps the
    best configuration seen."""
    pi = list(pi)
    cost = sign * qap_cost(qmi, pi, eta)
    best, best_cost = tuple(pi), cost
    scale = max(abs(cost), 1e-12)
    t0, t1 = 0.1 * scale, 1e-4 * scale
    for k in range(n_steps):
        t = t0 * (t1 / t0) ** (k / max(n_steps - 1, 1))
        a, b = rng.choice(len(free), size=2, replace=False)
        a, b = free[a], free[b]
        pi[a], pi[b] = pi[b], pi[a]
        cand = sign * qap_cost(qmi, pi, eta)
        if cand <= cost or rng.random() < np.exp(-(cand - cost) / t):
            cost = cand
            if cost < best_cost:
                best, best_cost = tuple(pi), cost
        else:
            pi[a], pi[b] = pi[b], pi[a]
    return list(best)


def optimize_permutation(qmi, eta=1.0, frozen=None, restarts=16, seed=0,
                         anneal=False):
    """Multi-restart 2-opt search for a low-cost qubit ordering.

    Minimizes the QAP cost for eta > 0 and maximizes it for eta < 0.  The
    identity start is always included; `restarts` further random starts are
    drawn from the seeded generator.  Frozen positions keep pi[i] = i.
    """
    qmi = np.asarray(qmi, dtype=float)
    n = qmi.shape[0]
    if qmi.shape != (n, n) or n < 2:
        raise ValueError("qmi must be square with N >= 2")
    if eta == 0:
        raise ValueError("eta must be nonzero")
    frozen = frozenset(int(i) for i in (frozen or ()))
    if not frozen <= set(range(n)):
        raise ValueError("frozen positions out of range")
    identity = tuple(range(n))
    cost_id = qap_cost(qmi, identity, eta)
    free = sorted(set(range(n)) - frozen)
    if len(free) < 2:
        warnings.warn("all positions frozen; returning the identity plan")
        return PermutationPlan(identity, eta, cost_id, cost_id, frozen)
    sign = 1.0 if eta > 0 else -1.0
    rng = np.random.default_rng(seed)
    starts = [list(identity)]
    for _ in range(restarts):
        start = list(identity)
        perm = rng.permutation(len(free))
        for slot, src in zip(free, perm):
            start[slot] = free[src]
        starts.append(start)
    best_pi, best_cost = None, None
    for start in starts:
        if anneal:
            start = _anneal(qmi, start, eta, free, sign, rng,
                            n_steps=200 * n)
        cand_pi, cand_cost = _two_opt(qmi, start, eta, free, sign)
        if best_cost is None or sign * cand_cost < sign * best_cost - 1e-15:
            best_pi, best_cost = cand_pi, cand_cost
    if not frozen:
        mirror = tuple(n - 1 - p for p in best_pi)
        best_pi = min(best_pi, mirror)
    if sign * best_cost > sign * cost_id:
        best_pi, best_cost = identity, cost_id
    return PermutationPlan(best_pi, eta, cost_id, float(best_cost), frozen)


def apply_permutation(mps, plan, chi_max=None, eps_svd=1e-12,
                      discard_budget=1e-8):
    """Rebuild the state so site pi[q] holds original qubit q, using an
    adjacent-SWAP sorting network.

    Records the max bond entropy before/after on the plan.  Raises if the
    network's total discarded weight exceeds discard_budget (a permutation
    must not silently change the state)."""
    if plan.n_sites != mps.n_sites:
        raise ValueError("plan size does not match the state")
    ent_before = float(np.max(mps.bond_entropy_profile())) \
        if mps.n_sites > 1 else 0.0
    plan.entropy_before_max = ent_before
    if plan.is_identity():
        plan.entropy_after_max = ent_before
        return mps.copy()
    state = mps if mps.gauge == "vidal" else mps.canonicalize("vidal")
    base_discard = state.discarded_weight
    # cur[pos] = original qubit currently at pos; bubble-sort by target slot
    cur = list(range(plan.n_sites))
    key = plan.pi
    swapped = True
    while swapped:
        swapped = False
        for pos in range(plan.n_sites - 1):
            if key[cur[pos]] > key[cur[pos + 1]]:
                state = state.apply_two_site_gate(pos, _SWAP,
                                                  chi_max=chi_max,
                                                  eps_svd=eps_svd)
                cur[pos], cur[pos + 1] = cur[pos + 1], cur[pos]
                swapped = True
    leaked = state.discarded_weight - base_discard
    if leaked > discard_budget:
        raise RuntimeError(
            f"SWAP network discarded weight {leaked:.3e} exceeds the budget "
            f"{discard_budget:.1e}; raise chi_max or relax the budget")
    plan.entropy_after_max = float(np.max(state.bond_entropy_profile()))
    return state
