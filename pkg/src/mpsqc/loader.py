"""Build target states from classical data: quantics function grids, dense
SVD compression, dataset generators, and a small exact-diagonalization
transverse-field Ising oracle.

Bit/index conventions match the MPS module: qubit 0 is the most significant
bit, so the quantics point of a configuration (s_1, ..., s_N) is
sum_i s_i 2^{-i} and equals (integer index) / 2^N.
"""

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mps import MPS

_DENSE_MAX_QUBITS = 24


def quantics_index_to_point(s):
    """Map a bit vector (s_1, ..., s_N) to sum_i s_i 2^{-i} in [0, 1)."""
    s = np.asarray(s)
    n = s.shape[-1]
    weights = 0.5 ** np.arange(1, n + 1)
    return s @ weights


@dataclass
class QuanticsGrid:
    """A function sampled on the dyadic grid {k/2^N}.

    `func` maps an array of rescaled coordinates x~ in [0,1) to complex
    amplitudes (vectorized, pure).  `interval_length` records the physical
    interval [0, ell) the grid covers; func already includes the rescaling.
    """

    n_bits: int
    interval_length: float
    func: Callable = field(repr=False)

    def __post_init__(self):
        if self.n_bits < 1:
            raise ValueError("n_bits must be positive")
        if self.interval_length <= 0:
            raise ValueError("interval_length must be positive")

    def evaluate_bits(self, bit_rows):
        """Amplitudes for an (m, N) array of bit configurations."""
        bit_rows = np.asarray(bit_rows, dtype=float)
        if bit_rows.ndim == 1:
            bit_rows = bit_rows[None, :]
        if bit_rows.shape[1] != self.n_bits:
            raise ValueError("bit rows must have n_bits columns")
        return np.asarray(self.func(quantics_index_to_point(bit_rows)),
                          dtype=complex)

    def to_dense(self):
        """All 2^N amplitudes in index order (guarded for small N)."""
        if self.n_bits > _DENSE_MAX_QUBITS:
            raise ValueError("dense evaluation limited to 24 bits")
        x = np.arange(2 ** self.n_bits) / 2.0 ** self.n_bits
        return np.asarray(self.func(x), dtype=complex)


def dense_to_mps(amplitudes, eps_svd=1e-12, chi_max=None):
    """Compress a dense amplitude vector into a canonical MPS by successive
    truncated SVDs."""
    amplitudes = np.asarray(amplitudes)
    n = int(round(np.log2(amplitudes.size)))
    if n > _DENSE_MAX_QUBITS:
        raise ValueError("dense loading limited to 24 qubits")
    return MPS.from_dense(amplitudes, eps_svd=eps_svd, chi_max=chi_max)


def gaussian_amplitudes(n_bits, mu=0.5, sigma=0.1, ell=1.0):
    """Quantics grid of sqrt(normal density): psi(x~) = sqrt(f(x~ * ell))."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")

    def func(xt):
        x = np.asarray(xt, dtype=float) * ell
        dens = np.exp(-((x - mu) ** 2) / (2.0 * sigma ** 2)) \
            / np.sqrt(2.0 * np.pi * sigma ** 2)
        return np.sqrt(dens)

    return QuanticsGrid(n_bits, float(ell), func)


def levy_amplitudes(n_bits, c=32.0, ell=2.0 ** 30):
    """Quantics grid of the square root of the Levy density
    f(x) = sqrt(c/(2 pi)) exp(-c/(2x)) / x^{3/2} for x > 0, with the x = 0
    grid point set to the limit value 0."""
    if c <= 0:
        raise ValueError("c must be positive")

    def func(xt):
        x = np.asarray(xt, dtype=float) * ell
        out = np.zeros_like(x)
        pos = x > 0
        xp = x[pos]
        dens = np.sqrt(c / (2.0 * np.pi)) * np.exp(-c / (2.0 * xp)) \
            / xp ** 1.5
        out[pos] = np.sqrt(dens)
        return out

    return QuanticsGrid(n_bits, float(ell), func)


def lorenz_series(sigma=10.0, rho=28.0, beta=2.667, total_time=None,
                  dt=None, x0=(0.0, 1.0, 1.05), paper_scale=False):
    """Euler-integrated Lorenz trajectory, axis-stacked into one amplitude
    vector.

    The first two qubits select the axis (00, 01, 10, 11 -> x, y, z, w); the
    w block is zero padding.  Desk defaults are T=2^3, dt=2^-12 (17 qubits);
    paper_scale switches to T=2^7, dt=2^-20 (29 qubits, kept behind a flag
    because the dense vector alone is several GiB).
    """
    if total_time is None:
        total_time = 2.0 ** 7 if paper_scale else 2.0 ** 3
    if dt is None:
        dt = 2.0 ** -20 if paper_scale else 2.0 ** -12
    if dt <= 0 or total_time <= 0:
        raise ValueError("total_time and dt must be positive")
    steps = int(round(total_time / dt))
    if steps & (steps - 1):
        raise ValueError("total_time/dt must be a power of two")
    xs = np.empty(steps)
    ys = np.empty(steps)
    zs = np.empty(steps)
    x, y, z = map(float, x0)
    for k in range(steps):
        xs[k], ys[k], zs[k] = x, y, z
        dx = sigma * (y - x)
        dy = x * (rho - z) - y
        dz = x * y - beta * z
        x, y, z = x + dt * dx, y + dt * dy, z + dt * dz
    vec = np.concatenate([xs, ys, zs, np.zeros(steps)])
    nrm = np.linalg.norm(vec)
    if nrm == 0:
        raise ValueError("trajectory is identically zero")
    return vec / nrm


def csv_stacked_amplitudes(path, series_length, max_series):
    """Stack per-series values from a CSV with columns (series_id, t, value)
    into one amplitude vector.

    Takes the first `series_length` values of each series (ordered by t),
    stacks series-major, removes the mean of the stacked data, zero-pads to
    series_length * max_series, and normalizes.
    """
    for name, v in (("series_length", series_length),
                    ("max_series", max_series)):
        if v < 1 or v & (v - 1):
            raise ValueError(f"{name} must be a power of two")
    series = {}
    order = []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        for lineno, row in enumerate(rows):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ValueError(f"malformed CSV row {lineno + 1}: {row!r}")
            sid, t_raw, v_raw = (c.strip() for c in row)
            try:
                t, v = float(t_raw), float(v_raw)
            except ValueError:
                if lineno == 0:
                    continue        # header row
                raise ValueError(
                    f"malformed CSV row {lineno + 1}: {row!r}") from None
            if sid not in series:
                series[sid] = []
                order.append(sid)
            series[sid].append((t, v))
    complete = [sid for sid in order if len(series[sid]) >= series_length]
    if not complete:
        raise ValueError("no series has enough rows")
    complete = complete[:max_series]
    blocks = []
    for sid in complete:
        vals = [v for _, v in sorted(series[sid], key=lambda p: p[0])]
        blocks.append(np.asarray(vals[:series_length]))
    data = np.concatenate(blocks)
    data = data - data.mean()
    nrm = np.linalg.norm(data)
    if nrm < 1e-14:
        raise ValueError("data degenerate after centering")
    vec = np.zeros(series_length * max_series)
    vec[:data.size] = data / nrm
    return vec


def _spin_chain_hamiltonian(n, hx):
    """Dense H = sum_n S^z_n S^z_{n+1} - hx sum_n S^x_n, open boundary."""
    sz = np.diag([0.5, -0.5])
    sx = np.array([[0.0, 0.5], [0.5, 0.0]])
    dim = 2 ** n
    h = np.zeros((dim, dim))
    for i in range(n - 1):
        term = np.eye(1)
        for j in range(n):
            op = sz if j in (i, i + 1) else np.eye(2)
            term = np.kron(term, op)
        h += term
    for i in range(n):
        term = np.eye(1)
        for j in range(n):
            op = sx if j == i else np.eye(2)
            term = np.kron(term, op)
        h -= hx * term
    return h


def ising_groundstate_exact(n, hx, eps_svd=1e-12):
    """Ground state of the open-boundary transverse-field Ising chain via
    dense diagonalization (small-N stand-in for DMRG).

    Returns (mps, energy)."""
    if not 2 <= n <= 14:
        raise ValueError("dense diagonalization supports 2 <= N <= 14")
    h = _spin_chain_hamiltonian(n, hx)
    vals, vecs = np.linalg.eigh(h)
    return dense_to_mps(vecs[:, 0], eps_svd=eps_svd), float(vals[0])
