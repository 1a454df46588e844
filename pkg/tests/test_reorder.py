"""Qubit reordering: QAP cost, 2-opt search, SWAP-network application."""

import warnings

import numpy as np
import pytest

from mpsqc.mps import MPS
from mpsqc.reorder import (
    PermutationPlan,
    apply_permutation,
    optimize_permutation,
    qap_cost,
)

from _oracles import exhaustive_qap, qap_cost_dense, random_state


def _random_qmi(n, rng):
    q = rng.random((n, n))
    q = (q + q.T) / 2
    np.fill_diagonal(q, 0.0)
    return q


def _pair_state_dense(n, pairing):
    """Product of Bell pairs on the given disjoint qubit pairs."""
    amps = np.ones(2**n)
    for k in range(2**n):
        bits = [(k >> (n - 1 - i)) & 1 for i in range(n)]
        for a, b in pairing:
            if bits[a] != bits[b]:
                amps[k] = 0.0
                break
    return amps / np.linalg.norm(amps)


class TestQapCost:
    def test_zero_qmi(self):
        assert qap_cost(np.zeros((5, 5)), (3, 1, 4, 0, 2)) == 0.0

    def test_distant_bell_pair(self):
        n = 6
        q = np.zeros((n, n))
        q[0, n - 1] = q[n - 1, 0] = 2 * np.log(2)
        assert np.isclose(qap_cost(q, range(n), 1.0),
                          2 * (2 * np.log(2)) * (n - 1))

    @pytest.mark.parametrize("eta", [1.0, 2.0, -1.0])
    def test_matches_double_loop_oracle(self, eta):
        rng = np.random.default_rng(0)
        q = _random_qmi(6, rng)
        pi = tuple(int(x) for x in rng.permutation(6))
        assert np.isclose(qap_cost(q, pi, eta), qap_cost_dense(q, pi, eta))

    def test_rejects_non_permutation(self):
        with pytest.raises(ValueError):
            qap_cost(np.zeros((3, 3)), (0, 0, 2))


class TestPlan:
    def test_validation(self):
        with pytest.raises(ValueError):
            PermutationPlan((0, 0, 1), 1.0, 0.0, 0.0)
        with pytest.raises(ValueError, match="frozen"):
            PermutationPlan((1, 0), 1.0, 0.0, 0.0, frozen=frozenset({0}))

    def test_json_round_trip(self):
        p = PermutationPlan((2, 0, 1, 3), 1.0, 5.0, 3.0,
                            frozen=frozenset({3}))
        q = PermutationPlan.from_json(p.to_json())
        assert q.pi == p.pi and q.frozen == p.frozen
        assert q.cost_before == 5.0 and q.cost_after == 3.0


class TestTwoOpt:
    def test_bell_pair_made_adjacent(self):
        n = 7
        q = np.zeros((n, n))
        q[0, n - 1] = q[n - 1, 0] = 2 * np.log(2)
        plan = optimize_permutation(q, restarts=8, seed=1)
        assert abs(plan.pi[0] - plan.pi[n - 1]) == 1
        assert np.isclose(plan.cost_after, 4 * np.log(2))
        assert plan.cost_after <= plan.cost_before

    def test_matches_exhaustive_search(self):
        wins = 0
        for seed in range(15):
            q = _random_qmi(8, np.random.default_rng(seed))
            plan = optimize_permutation(q, restarts=16, seed=seed)
            _, best = exhaustive_qap(q, 1.0)
            wins += abs(plan.cost_after - best) < 1e-12
        assert wins >= 14

    def test_never_worse_than_identity(self):
        for seed in range(10):
            q = _random_qmi(10, np.random.default_rng(seed))
            plan = optimize_permutation(q, restarts=4, seed=seed)
            assert plan.cost_after <= plan.cost_before + 1e-12

    def test_deterministic_under_seed(self):
        q = _random_qmi(9, np.random.default_rng(42))
        a = optimize_permutation(q, restarts=8, seed=3)
        b = optimize_permutation(q, restarts=8, seed=3)
        assert a.pi == b.pi and a.cost_after == b.cost_after

    def test_frozen_positions_pinned(self):
        q = np.zeros((5, 5))
        q[1, 4] = q[4, 1] = 1.0
        plan = optimize_permutation(q, frozen={0}, seed=0)
        assert plan.pi[0] == 0
        assert abs(plan.pi[1] - plan.pi[4]) == 1

    def test_all_frozen_warns_identity(self):
        q = _random_qmi(4, np.random.default_rng(0))
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always")
            plan = optimize_permutation(q, frozen=set(range(4)))
        assert len(rec) == 1
        assert plan.pi == (0, 1, 2, 3)
        assert plan.cost_after == plan.cost_before

    def test_negative_eta_maximizes(self):
        # 1/distance weight: maximizing still pulls the pair together
        q = np.zeros((5, 5))
        q[0, 1] = q[1, 0] = 1.0
        plan = optimize_permutation(q, eta=-1.0, seed=0)
        assert abs(plan.pi[0] - plan.pi[1]) == 1
        assert np.isclose(plan.cost_after, 2.0)

    def test_mirror_tie_broken_lexicographically(self):
        # nearest-neighbor band: identity is optimal, beats its mirror
        n = 6
        q = np.zeros((n, n))
        for i in range(n - 1):
            q[i, i + 1] = q[i + 1, i] = 1.0
        plan = optimize_permutation(q, restarts=8, seed=0)
        assert plan.pi == tuple(range(n))

    def test_anneal_flag_not_worse(self):
        q = _random_qmi(8, np.random.default_rng(11))
        plain = optimize_permutation(q, restarts=4, seed=2)
        annealed = optimize_permutation(q, restarts=4, seed=2, anneal=True)
        assert annealed.cost_after <= plain.cost_after + 1e-12

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            optimize_permutation(np.zeros((1, 1)))
        with pytest.raises(ValueError):
            optimize_permutation(np.zeros((4, 4)), eta=0.0)
        with pytest.raises(ValueError):
            optimize_permutation(np.zeros((4, 4)), frozen={9})


class TestApply:
    def test_identity_returns_equal_tensors(self):
        m = MPS.from_dense(random_state(5, np.random.default_rng(0)))
        plan = PermutationPlan(tuple(range(5)), 1.0, 1.0, 1.0)
        out = apply_permutation(m, plan)
        assert all(np.array_equal(a, b)
                   for a, b in zip(out.tensors, m.tensors))

    def test_adjacent_product_swap(self):
        m = MPS.product_state([0, 1])
        plan = PermutationPlan((1, 0), 1.0, 0.0, 0.0)
        out = apply_permutation(m, plan)
        assert np.allclose(out.to_dense(), [0, 0, 1, 0])

    def test_random_state_matches_dense_oracle(self):
        n = 10
        v = random_state(n, np.random.default_rng(3))
        m = MPS.from_dense(v)
        pi = tuple(int(x) for x in np.random.default_rng(5).permutation(n))
        plan = PermutationPlan(pi, 1.0, 0.0, 0.0)
        out = apply_permutation(m, plan)
        ref = np.empty_like(v)
        for c in range(2**n):
            cb = [(c >> (n - 1 - i)) & 1 for i in range(n)]
            b = sum(cb[pi[q]] << (n - 1 - q) for q in range(n))
            ref[c] = v[b]
        assert np.max(np.abs(out.to_dense() - ref)) < 1e-10
        assert np.isfinite(plan.entropy_before_max)
        assert np.isfinite(plan.entropy_after_max)

    def test_budget_violation_raises(self):
        v = random_state(8, np.random.default_rng(1))
        m = MPS.from_dense(v)
        pi = (7, 6, 5, 4, 3, 2, 1, 0)
        plan = PermutationPlan(pi, 1.0, 0.0, 0.0)
        with pytest.raises(RuntimeError, match="budget"):
            apply_permutation(m, plan, chi_max=2)

    def test_size_mismatch(self):
        m = MPS.product_state([0, 0, 0])
        plan = PermutationPlan((1, 0), 1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            apply_permutation(m, plan)

    def test_pair_sorting_lowers_entropy(self):
        # interleaved Bell pairs (0,2) and (1,3): sorting them adjacent
        # drops the max bond entropy from 2 ln 2 to ln 2
        v = _pair_state_dense(4, [(0, 2), (1, 3)])
        m = MPS.from_dense(v)
        qmi = m.qmi_matrix()
        plan = optimize_permutation(qmi, restarts=8, seed=0)
        out = apply_permutation(m, plan)
        assert plan.cost_after < plan.cost_before
        assert plan.entropy_after_max < plan.entropy_before_max - 0.5
        assert np.isclose(plan.entropy_after_max, np.log(2), atol=1e-8)
        assert np.isclose(out.norm(), 1.0, atol=1e-10)
