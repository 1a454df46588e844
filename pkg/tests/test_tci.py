"""Tensor cross interpolation: rank discovery, pivot exactness, call budgets,
and failure modes."""

import numpy as np
import pytest

from mpsqc.loader import QuanticsGrid
from mpsqc.tci import _CrossState, tci_build


def _dense_error(mps, grid):
    return float(np.max(np.abs(mps.to_dense() - grid.to_dense())))


def _random_tt_grid(n, rank, seed):
    """Quantics grid backed by a random tensor train of known rank."""
    rng = np.random.default_rng(seed)
    cores = ([rng.standard_normal((2, 1, rank))]
             + [rng.standard_normal((2, rank, rank)) / np.sqrt(rank)
                for _ in range(n - 2)]
             + [rng.standard_normal((2, rank, 1))])

    def func(x):
        ks = np.round(np.asarray(x) * 2**n).astype(int)
        out = np.empty(len(ks))
        for j, k in enumerate(ks):
            v = cores[0][(k >> (n - 1)) & 1]
            for i in range(1, n):
                v = v @ cores[i][(k >> (n - 1 - i)) & 1]
            out[j] = v[0, 0]
        return out

    return QuanticsGrid(n, 1.0, func)


class TestRankDiscovery:
    def test_constant_is_rank_one(self):
        g = QuanticsGrid(8, 1.0, lambda x: np.full_like(x, 0.7))
        m, st = tci_build(g, tol=1e-12)
        assert max(m.bond_dims) == 1
        assert st.n_sweeps <= 2
        assert _dense_error(m, g) < 1e-13

    def test_single_harmonic_is_rank_two(self):
        g = QuanticsGrid(12, 1.0, lambda x: np.sin(2 * np.pi * x))
        m, st = tci_build(g, tol=1e-12)
        assert max(m.bond_dims) == 2
        assert _dense_error(m, g) < 1e-12
        assert st.n_calls < 2**9

    def test_cubic_is_rank_four(self):
        g = QuanticsGrid(10, 1.0,
                         lambda x: 1 + 2 * x - 3 * x**2 + 0.5 * x**3)
        m, _ = tci_build(g, tol=1e-12)
        assert max(m.bond_dims) == 4
        assert _dense_error(m, g) < 1e-9

    @pytest.mark.parametrize("rank", [2, 4, 6])
    def test_recovers_random_tensor_train(self, rank):
        g = _random_tt_grid(12, rank, seed=rank)
        m, st = tci_build(g, tol=1e-10, chi_max=16)
        assert _dense_error(m, g) < 1e-10
        assert max(m.bond_dims) <= rank
        assert st.n_calls < 2**11

    def test_complex_valued_function(self):
        g = QuanticsGrid(10, 1.0, lambda x: np.exp(2j * np.pi * x))
        m, _ = tci_build(g, tol=1e-12)
        assert max(m.bond_dims) == 1
        assert _dense_error(m, g) < 1e-12

    def test_single_bit_grid(self):
        g = QuanticsGrid(1, 1.0, lambda x: 1.0 + x)
        m, _ = tci_build(g)
        assert _dense_error(m, g) < 1e-14


class TestPivotProperties:
    def test_interpolation_exact_at_pivots(self):
        g = QuanticsGrid(10, 1.0,
                         lambda x: np.exp(-((x - 0.3) ** 2) / 0.02) + 0.1 * x)
        m, st = tci_build(g, tol=1e-12, chi_max=16)
        dense = m.to_dense()
        for rows, cols in st.pivots:
            pts = [r + c for r in rows for c in cols]
            vals = g.evaluate_bits(np.array(pts, dtype=float))
            idx = [int("".join(map(str, p)), 2) for p in pts]
            assert np.max(np.abs(dense[idx] - vals)) < 1e-12

    def test_nesting_condition(self):
        g = _random_tt_grid(10, 4, seed=11)
        _, st = tci_build(g, tol=1e-10, chi_max=8)
        n = g.n_bits
        for b in range(1, n - 1):
            rows_next = {r[:-1] for r in st.pivots[b][0]}
            rows_here = set(st.pivots[b - 1][0])
            assert rows_next <= rows_here
            cols_here = {c[1:] for c in st.pivots[b - 1][1]}
            cols_next = set(st.pivots[b][1])
            assert cols_here <= cols_next

    def test_stats_shape(self):
        g = QuanticsGrid(8, 1.0, lambda x: np.sin(7 * x) + 0.5)
        m, st = tci_build(g, tol=1e-12)
        assert st.bond_dims == tuple(m.bond_dims)
        assert len(st.calls_per_sweep) == st.n_sweeps
        assert sum(st.calls_per_sweep) <= st.n_calls
        assert st.max_condition >= 1.0


class TestCallBudget:
    def test_gaussian_twenty_bits(self):
        g = QuanticsGrid(
            20, 1.0, lambda x: np.exp(-((x - 0.5) ** 2) / (2 * 0.1**2)))
        m, st = tci_build(g, tol=1e-12, chi_max=30)
        v = m.to_dense()
        v = v / np.linalg.norm(v)
        ref = g.to_dense()
        ref = ref / np.linalg.norm(ref)
        fid = abs(np.vdot(ref, v)) ** 2
        assert fid > 1 - 1e-10
        assert st.n_calls < 5000          # far below the 2^20 grid
        assert st.call_bound_constant <= 8.0

    def test_calls_counted_once(self):
        counter = {"n": 0}

        def f(x):
            counter["n"] += len(np.atleast_1d(x))
            return np.cos(5 * np.asarray(x))

        g = QuanticsGrid(10, 1.0, f)
        _, st = tci_build(g, tol=1e-12)
        assert st.n_calls == counter["n"]
        assert st.n_calls < 2**10


class TestRookSearch:
    def test_matches_full_search_quality(self):
        g = QuanticsGrid(12, 1.0, lambda x: np.sin(2 * np.pi * x))
        m, _ = tci_build(g, tol=1e-12, pivot_search="rook", seed=5)
        assert max(m.bond_dims) == 2
        assert _dense_error(m, g) < 1e-10

    def test_rook_on_smooth_bump(self):
        g = QuanticsGrid(
            14, 1.0, lambda x: np.exp(-((x - 0.5) ** 2) / (2 * 0.05**2)))
        m, st = tci_build(g, tol=1e-10, chi_max=20, pivot_search="rook",
                          seed=2)
        v = m.to_dense()
        ref = g.to_dense()
        fid = abs(np.vdot(ref / np.linalg.norm(ref),
                          v / np.linalg.norm(v))) ** 2
        assert fid > 1 - 1e-8
        assert st.n_calls < 2**12


class TestFailureModes:
    def test_zero_function_rejected(self):
        g = QuanticsGrid(8, 1.0, lambda x: np.zeros_like(x))
        with pytest.raises(ValueError, match="zero"):
            tci_build(g)

    def test_ill_conditioned_pivot_matrix_aborts(self):
        g = QuanticsGrid(6, 1.0, lambda x: np.full_like(x, 1.0))
        state = _CrossState(g, 1e-12, 8, np.random.default_rng(0), True)
        # plant a duplicate pivot pair: the 2x2 all-ones matrix is singular
        state.I[3].append((1,) + state.I[3][0][1:])
        state.J[3].append((1,) + state.J[3][0][1:])
        with pytest.raises(RuntimeError, match="condition"):
            state.update_bond(3)

    def test_growth_respects_condition_limit(self):
        g = QuanticsGrid(10, 1.0,
                         lambda x: 1 + 2 * x - 3 * x**2 + 0.5 * x**3)
        _, st = tci_build(g, tol=1e-12)
        assert st.max_condition <= 1e12

    def test_argument_validation(self):
        g = QuanticsGrid(4, 1.0, lambda x: x + 1)
        with pytest.raises(ValueError):
            tci_build(g, tol=0.0)
        with pytest.raises(ValueError):
            tci_build(g, chi_max=0)
        with pytest.raises(ValueError):
            tci_build(g, pivot_search="diagonal")

    def test_chi_cap_limits_rank_honestly(self):
        g = _random_tt_grid(10, 5, seed=1)
        m, st = tci_build(g, tol=1e-10, chi_max=3, max_sweeps=4)
        assert max(m.bond_dims) == 3
        assert st.max_eps > 1e-6    # under-resolved and says so
