"""Matrix product states: gauges, truncation, entanglement, gate application.

Tensors are complex arrays of shape (2, chi_left, chi_right) with boundary
bonds of dimension 1; site 0 is the most significant bit of the dense
amplitude index.  Operations return new MPS instances; stored tensors always
represent a unit-norm state, with the actual log-norm kept in `norm_log` so
norm drops under truncation stay observable.

Gauge tags: "none", "left", "right", "mixed" (with a center site) and
"vidal".  In the vidal gauge, Lambda_{i-1} Gamma_i is left-orthonormal and
Gamma_i Lambda_i is right-orthonormal, with boundary Lambdas equal to (1,).
"""

import struct

import numpy as np

GAUGES = ("none", "left", "right", "mixed", "vidal")

# Relative threshold below which a Schmidt value is treated as an exact zero
# when its inverse is needed.
_ZERO_SV = 1e-12


def svd_fixed(m):
    """SVD with a deterministic phase: the largest-magnitude entry of each
    left singular vector is made real-positive."""
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    idx = np.argmax(np.abs(u), axis=0)
    piv = u[idx, np.arange(u.shape[1])]
    mag = np.abs(piv)
    phase = np.where(mag > 0, piv / np.where(mag > 0, mag, 1.0), 1.0)
    u = u / phase[None, :]
    vh = vh * phase[:, None]
    return u, s, vh


def _choose_rank(s, chi_max, eps):
    """Number of singular values to keep.

    Drops values below eps * s[0], caps at chi_max, then extends through a
    degenerate cluster at the boundary when the whole cluster still fits;
    otherwise the cut stays at the index cap so runs remain deterministic.
    """
    if s.size == 0:
        return 0
    smax = float(s[0])
    if smax <= 0.0:
        return 1
    if eps > 0:
        k = int(np.count_nonzero(s >= eps * smax))
        k = max(k, 1)
    else:
        k = s.size
    k = min(k, chi_max, s.size)
    j = k
    while j < s.size and s[j] >= s[k - 1] * (1.0 - 1e-12):
        j += 1
    if j <= chi_max:
        k = j
    return k


def _pinv_vec(lam):
    """Entrywise inverse with near-zero values mapped to exactly zero."""
    lam = np.asarray(lam, dtype=float)
    top = lam.max() if lam.size else 0.0
    out = np.zeros_like(lam)
    mask = lam > _ZERO_SV * top
    out[mask] = 1.0 / lam[mask]
    return out


class MPS:
    """Immutable-by-convention matrix product state on n qubits."""

    def __init__(self, tensors, gauge="none", center=None, singular_values=None,
                 norm_log=0.0, discarded_weight=0.0):
        if len(tensors) == 0:
            raise ValueError("empty MPS")
        if gauge not in GAUGES:
            raise ValueError(f"unknown gauge {gauge!r}")
        self.tensors = [np.ascontiguousarray(t, dtype=complex) for t in tensors]
        for i, t in enumerate(self.tensors):
            if t.ndim != 3 or t.shape[0] != 2:
                raise ValueError(f"site {i}: expected shape (2, chi_l, chi_r)")
            if i > 0 and t.shape[1] != self.tensors[i - 1].shape[2]:
                raise ValueError(f"bond mismatch between sites {i - 1} and {i}")
        if self.tensors[0].shape[1] != 1 or self.tensors[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        if gauge == "mixed":
            if center is None or not 0 <= center < len(tensors):
                raise ValueError("mixed gauge requires a center site index")
        else:
            center = None
        if gauge == "vidal":
            if singular_values is None or len(singular_values) != len(tensors) - 1:
                raise ValueError("vidal gauge requires N-1 singular value vectors")
            singular_values = [np.asarray(s, dtype=float) for s in singular_values]
        else:
            singular_values = None
        self.gauge = gauge
        self.center = center
        self.singular_values = singular_values
        self.norm_log = float(norm_log)
        self.discarded_weight = float(discarded_weight)

    # -- basic queries ----------------------------------------------------

    @property
    def n_sites(self):
        return len(self.tensors)

    @property
    def bond_dims(self):
        """Interior bond dimensions chi_1 .. chi_{N-1}."""
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self):
        return max(self.bond_dims) if self.n_sites > 1 else 1

    def copy(self):
        return MPS([t.copy() for t in self.tensors], self.gauge, self.center,
                   None if self.singular_values is None
                   else [s.copy() for s in self.singular_values],
                   self.norm_log, self.discarded_weight)

    def norm(self):
        return float(np.sqrt(abs(overlap(self, self))))

    def normalized(self):
        """Copy with norm_log cleared; stored tensors already carry unit norm
        in any canonical gauge."""
        out = self.copy()
        out.norm_log = 0.0
        return out

    def _plain_tensors(self):
        """Tensor list whose bare matrix product gives the state: for the
        vidal gauge each Lambda is folded into the Gamma on its right."""
        if self.gauge != "vidal":
            return self.tensors
        out = [self.tensors[0]]
        for i in range(1, self.n_sites):
            out.append(self.tensors[i] * self.singular_values[i - 1][None, :, None])
        return out

    def to_dense(self, max_qubits=24):
        """Contract into a dense amplitude vector (site 0 most significant)."""
        if self.n_sites > max_qubits:
            raise ValueError(f"refusing dense contraction beyond {max_qubits} qubits")
        plain = self._plain_tensors()
        v = plain[0][:, 0, :]
        for t in plain[1:]:
            v = np.tensordot(v, t, axes=([1], [1]))  # (prev, 2, chi)
            v = v.reshape(-1, t.shape[2])
        return v[:, 0] * np.exp(self.norm_log)

    def amplitude(self, bits):
        """Single computational-basis amplitude <bits|psi>, any chain length."""
        bits = [int(b) for b in bits]
        if len(bits) != self.n_sites or any(b not in (0, 1) for b in bits):
            raise ValueError("bits must list 0/1 for every site")
        plain = self._plain_tensors()
        v = plain[0][bits[0], 0, :]
        for t, b in zip(plain[1:], bits[1:]):
            v = v @ t[b]
        return complex(v[0] * np.exp(self.norm_log))

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_dense(cls, amplitudes, eps_svd=1e-12, chi_max=None):
        """Compress a dense vector by successive truncated SVDs, left to right."""
        vec = np.asarray(amplitudes, dtype=complex).ravel()
        n = int(round(np.log2(vec.size)))
        if 2**n != vec.size:
            raise ValueError("length must be a power of two")
        if n > 24:
            raise ValueError("dense input limited to 24 qubits")
        nrm = np.linalg.norm(vec)
        if nrm == 0:
            raise ValueError("all-zero amplitude vector")
        cap = chi_max if chi_max is not None else 1 << n
        if cap < 1:
            raise ValueError("chi_max must be positive")
        if n == 1:
            return cls([vec.reshape(2, 1, 1) / nrm], gauge="left",
                       norm_log=float(np.log(nrm)))
        tensors = []
        norm_extra = 0.0
        disc = 0.0
        chi = 1
        mat = (vec / nrm).reshape(2, -1)
        for i in range(n - 1):
            u, s, vh = svd_fixed(mat)
            total = float((s**2).sum())
            k = _choose_rank(s, cap, eps_svd)
            kept = float((s[:k] ** 2).sum())
            w = kept / total
            disc += 1.0 - w
            norm_extra += 0.5 * np.log(w)
            s_kept = s[:k] * np.sqrt(total / kept)
            tensors.append(u[:, :k].reshape(2, chi, k))
            nxt = s_kept[:, None] * vh[:k]
            chi = k
            if i < n - 2:
                mat = nxt.reshape(chi, 2, -1).swapaxes(0, 1).reshape(2 * chi, -1)
            else:
                tensors.append(nxt.reshape(chi, 2).T.reshape(2, chi, 1))
        return cls(tensors, gauge="left", norm_log=float(np.log(nrm)) + norm_extra,
                   discarded_weight=disc)

    @classmethod
    def product_state(cls, bits):
        """Computational basis state |b_0 b_1 ... b_{N-1}>."""
        tensors = []
        for b in bits:
            t = np.zeros((2, 1, 1), dtype=complex)
            t[int(b), 0, 0] = 1.0
            tensors.append(t)
        return cls(tensors, gauge="left")

    @classmethod
    def ghz(cls, n):
        """(|0...0> + |1...1>)/sqrt(2) as a chi=2 left-canonical MPS."""
        if n < 2:
            raise ValueError("GHZ needs at least 2 sites")
        first = np.zeros((2, 1, 2), dtype=complex)
        first[0, 0, 0] = first[1, 0, 1] = 1.0
        mid = np.zeros((2, 2, 2), dtype=complex)
        mid[0, 0, 0] = mid[1, 1, 1] = 1.0
        last = np.zeros((2, 2, 1), dtype=complex)
        last[0, 0, 0] = last[1, 1, 0] = 1.0 / np.sqrt(2.0)
        return cls([first] + [mid.copy() for _ in range(n - 2)] + [last],
                   gauge="left")

    @classmethod
    def random(cls, n, chi, rng):
        """Haar-ish random state of bond dimension at most chi, left gauge."""
        tensors = []
        left = 1
        for i in range(n):
            right = min(chi, 2 ** (i + 1), 2 ** (n - i - 1))
            t = rng.standard_normal((2, left, right)) \
                + 1j * rng.standard_normal((2, left, right))
            tensors.append(t)
            left = right
        out = cls(tensors).canonicalize("left")
        return MPS(out.tensors, gauge="left")  # reset norm_log to 0

    # -- gauges -------------------------------------------------------------

    def canonicalize(self, gauge, center=None):
        """Return the same state in the requested gauge.

        The represented state is unchanged up to norm_log bookkeeping; the
        stored tensors come out normalized.
        """
        if gauge == "none":
            return self.copy()
        if gauge == "left":
            tensors, extra = _left_sweep(self._plain_tensors())
            return MPS(tensors, "left", norm_log=self.norm_log + extra,
                       discarded_weight=self.discarded_weight)
        if gauge == "right":
            tensors, extra = _right_sweep(self._plain_tensors())
            return MPS(tensors, "right", norm_log=self.norm_log + extra,
                       discarded_weight=self.discarded_weight)
        if gauge == "mixed":
            if center is None:
                center = self.n_sites // 2
            if not 0 <= center < self.n_sites:
                raise ValueError("center out of range")
            tensors = [t.copy() for t in self._plain_tensors()]
            left, right = [], []
            if center > 0:
                left, (_, carry) = _left_sweep(tensors[:center], return_carry=True)
                tensors[center] = np.tensordot(carry, tensors[center],
                                               axes=([1], [1])).transpose(1, 0, 2)
            if center < self.n_sites - 1:
                right, (_, carry) = _right_sweep(tensors[center + 1:],
                                                 return_carry=True)
                tensors[center] = np.tensordot(tensors[center], carry,
                                               axes=([2], [0]))
            mid = tensors[center]
            nrm = float(np.linalg.norm(mid))
            if nrm == 0:
                raise ValueError("zero-norm state")
            tensors = list(left) + [mid / nrm] + list(right)
            return MPS(tensors, "mixed", center=center,
                       norm_log=self.norm_log + np.log(nrm),
                       discarded_weight=self.discarded_weight)
        if gauge == "vidal":
            if self.gauge == "vidal":
                return self.copy()
            lefts, extra = _left_sweep(self._plain_tensors())
            gammas, lams = _vidal_from_left(lefts)
            return MPS(gammas, "vidal", singular_values=lams,
                       norm_log=self.norm_log + extra,
                       discarded_weight=self.discarded_weight)
        raise ValueError(f"unknown gauge {gauge!r}")

    # -- truncation ----------------------------------------------------------

    def truncate(self, chi_max, eps_svd=1e-12):
        """Cap every bond at chi_max and drop relative singular values below
        eps_svd, renormalizing per bond; the removed norm goes to norm_log and
        the summed discarded weight to `discarded_weight`."""
        if chi_max is not None and chi_max < 1:
            raise ValueError("chi_max must be positive")
        cap = chi_max if chi_max is not None else max(self.bond_dims, default=1)
        lefts, extra = _left_sweep(self._plain_tensors())
        n = len(lefts)
        out = [None] * n
        carry = np.eye(1, dtype=complex)
        disc = 0.0
        for i in range(n - 1, 0, -1):
            t = np.tensordot(lefts[i], carry, axes=([2], [0]))
            d, l, r = t.shape
            u, s, vh = svd_fixed(t.transpose(1, 0, 2).reshape(l, d * r))
            total = float((s**2).sum())
            k = _choose_rank(s, cap, eps_svd)
            kept = float((s[:k] ** 2).sum())
            w = kept / total
            disc += 1.0 - w
            extra += 0.5 * np.log(w)
            s_kept = s[:k] * np.sqrt(total / kept)
            out[i] = vh[:k].reshape(k, d, r).transpose(1, 0, 2)
            carry = u[:, :k] * s_kept[None, :]
        out[0] = np.tensordot(lefts[0], carry, axes=([2], [0]))
        return MPS(out, "right", norm_log=self.norm_log + extra,
                   discarded_weight=self.discarded_weight + disc)

    # -- entanglement ----------------------------------------------------------

    def schmidt_spectra(self):
        """Schmidt values at every interior bond (computes vidal if needed)."""
        v = self if self.gauge == "vidal" else self.canonicalize("vidal")
        return [s.copy() for s in v.singular_values]

    def bond_entropy_profile(self, alpha=None):
        """Entanglement entropy at each bond.

        Args:
            alpha: None for von Neumann, a Renyi order otherwise (alpha != 1;
                numpy.inf gives the min-entropy -log(lambda_1^2)).
        """
        if alpha is not None and alpha == 1:
            raise ValueError("alpha=1 is the von Neumann branch; pass alpha=None")
        out = []
        for s in self.schmidt_spectra():
            p = s**2
            p = p[p > 1e-30]
            if alpha is None:
                out.append(float(-(p * np.log(p)).sum()))
            elif np.isinf(alpha):
                out.append(float(-np.log(p.max())))
            else:
                out.append(float(np.log((p**alpha).sum()) / (1.0 - alpha)))
        return np.array(out)

    def qmi_matrix(self):
        """Pairwise quantum mutual information I_ij = S_i + S_j - S_ij in
        natural-log units, computed from one- and two-site reduced densities
        by transfer contraction in the vidal gauge."""
        n = self.n_sites
        if n < 2:
            raise ValueError("need at least 2 sites")
        v = self if self.gauge == "vidal" else self.canonicalize("vidal")
        lam_l = [np.ones(1)] + v.singular_values
        lam_r = v.singular_values + [np.ones(1)]
        # Left-orthonormal site tensors and their Lambda-closed versions.
        a = [v.tensors[i] * lam_l[i][None, :, None] for i in range(n)]
        aw = [a[i] * lam_r[i][None, None, :] for i in range(n)]
        s_one = np.empty(n)
        for i in range(n):
            rho = np.einsum("sab,tab->st", aw[i], aw[i].conj())
            s_one[i] = _entropy_eigh(rho)
        out = np.zeros((n, n))
        for i in range(n):
            env = np.einsum("sab,tac->stbc", a[i], a[i].conj())
            for j in range(i + 1, n):
                rho = np.einsum("stbc,ubd,vcd->sutv", env, aw[j], aw[j].conj())
                rho = rho.reshape(4, 4)
                s_two = _entropy_eigh(rho)
                out[i, j] = out[j, i] = s_one[i] + s_one[j] - s_two
                if j < n - 1:
                    env = np.einsum("stbc,ubd,uce->stde", env, a[j], a[j].conj())
        return out

    # -- gate application -------------------------------------------------------

    def apply_one_site_gate(self, site, gate):
        gate = np.asarray(gate, dtype=complex)
        _check_unitary(gate, 2)
        if not 0 <= site < self.n_sites:
            raise ValueError("site out of range")
        tensors = [t.copy() for t in self.tensors]
        tensors[site] = np.tensordot(gate, tensors[site], axes=([1], [0]))
        return MPS(tensors, self.gauge, self.center,
                   self.singular_values, self.norm_log, self.discarded_weight)

    def apply_two_site_gate(self, site, gate, chi_max=None, eps_svd=0.0):
        """Apply a 4x4 unitary to sites (site, site+1).

        In the vidal gauge only Gamma_site, Lambda_site and Gamma_{site+1}
        change (theta contraction, SVD, inverse-Lambda absorption on the
        outer bonds).  Other gauges are routed through vidal and converted
        back; "none" comes back as vidal.
        """
        gate = np.asarray(gate, dtype=complex)
        _check_unitary(gate, 4)
        if not 0 <= site <= self.n_sites - 2:
            raise ValueError("site out of range")
        if self.gauge != "vidal":
            res = self.canonicalize("vidal").apply_two_site_gate(
                site, gate, chi_max, eps_svd)
            if self.gauge == "none":
                return res
            return res.canonicalize(self.gauge, center=self.center)
        i = site
        n = self.n_sites
        lam = self.singular_values
        lam_l = lam[i - 1] if i > 0 else np.ones(1)
        lam_m = lam[i]
        lam_r = lam[i + 1] if i + 1 < n - 1 else np.ones(1)
        g1 = self.tensors[i] * lam_l[None, :, None] * lam_m[None, None, :]
        g2 = self.tensors[i + 1] * lam_r[None, None, :]
        theta = np.tensordot(g1, g2, axes=([2], [1]))  # (s1, a, s2, c)
        a, c = theta.shape[1], theta.shape[3]
        theta = theta.transpose(0, 2, 1, 3).reshape(4, a * c)
        theta = (gate @ theta).reshape(2, 2, a, c)
        m = theta.transpose(0, 2, 1, 3).reshape(2 * a, 2 * c)
        u, s, vh = svd_fixed(m)
        cap = chi_max if chi_max is not None else s.size
        total = float((s**2).sum())
        k = _choose_rank(s, cap, eps_svd)
        kept = float((s[:k] ** 2).sum())
        w = kept / total
        s_new = s[:k] * np.sqrt(total / kept)
        inv_l = _pinv_vec(lam_l)
        inv_r = _pinv_vec(lam_r)
        new_g1 = u[:, :k].reshape(2, a, k) * inv_l[None, :, None]
        new_g2 = vh[:k].reshape(k, 2, c).transpose(1, 0, 2) * inv_r[None, None, :]
        tensors = [t.copy() for t in self.tensors]
        tensors[i], tensors[i + 1] = new_g1, new_g2
        svs = [v.copy() for v in lam]
        svs[i] = s_new
        return MPS(tensors, "vidal", singular_values=svs,
                   norm_log=self.norm_log + 0.5 * np.log(w),
                   discarded_weight=self.discarded_weight + (1.0 - w))


# -- sweeps ------------------------------------------------------------------


def _left_sweep(tensors, return_carry=False):
    """Left-orthonormalize every site; returns (tensors, log_norm) or, when
    return_carry is set, (tensors, (log_norm, carry_matrix))."""
    out = []
    carry = np.eye(1, dtype=complex)
    for t in tensors:
        t = np.tensordot(carry, t, axes=([1], [1])).transpose(1, 0, 2)
        d, l, r = t.shape
        u, s, vh = svd_fixed(t.reshape(d * l, r))
        out.append(u.reshape(d, l, u.shape[1]))
        carry = s[:, None] * vh
    if return_carry:
        return out, (0.0, carry)
    c = carry[0, 0]
    mag = abs(c)
    if mag == 0:
        raise ValueError("zero-norm state")
    out[-1] = out[-1] * (c / mag)
    return out, float(np.log(mag))


def _right_sweep(tensors, return_carry=False):
    out = []
    carry = np.eye(1, dtype=complex)
    for t in reversed(tensors):
        t = np.tensordot(t, carry, axes=([2], [0]))
        d, l, r = t.shape
        u, s, vh = svd_fixed(t.transpose(1, 0, 2).reshape(l, d * r))
        out.append(vh.reshape(vh.shape[0], d, r).transpose(1, 0, 2))
        carry = u * s[None, :]
    out.reverse()
    if return_carry:
        return out, (0.0, carry)
    c = carry[0, 0]
    mag = abs(c)
    if mag == 0:
        raise ValueError("zero-norm state")
    out[0] = out[0] * (c / mag)
    return out, float(np.log(mag))


def _vidal_from_left(lefts):
    """Vidal tensors from a left-canonical list: right sweep peeling off the
    Schmidt values at each bond."""
    n = len(lefts)
    if n == 1:
        return [lefts[0].copy()], []
    gammas = [None] * n
    lams = [None] * (n - 1)
    carry = np.eye(1, dtype=complex)
    u = None
    for i in range(n - 1, 0, -1):
        t = np.tensordot(lefts[i], carry, axes=([2], [0]))
        d, l, r = t.shape
        u, s, vh = svd_fixed(t.transpose(1, 0, 2).reshape(l, d * r))
        k = _choose_rank(s, s.size, 1e-14)  # drop only numerical zeros
        u, s, vh = u[:, :k], s[:k], vh[:k]
        s = s / np.linalg.norm(s)
        lams[i - 1] = s
        b = vh.reshape(k, d, r).transpose(1, 0, 2)
        lam_right = lams[i] if i < n - 1 else np.ones(1)
        gammas[i] = b * _pinv_vec(lam_right)[None, None, :]
        carry = u * s[None, :]
    gammas[0] = np.tensordot(lefts[0], u, axes=([2], [0]))
    return gammas, lams


def _entropy_eigh(rho):
    w = np.linalg.eigvalsh(rho)
    w = w[w > 1e-15]
    return float(-(w * np.log(w)).sum())


def _check_unitary(gate, dim):
    if gate.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} gate")
    if np.max(np.abs(gate.conj().T @ gate - np.eye(dim))) > 1e-10:
        raise ValueError("gate is not unitary within 1e-10")


# -- pairwise quantities -------------------------------------------------------


def overlap(a, b):
    """<a|b> by zip-up transfer contraction, including norm_log factors."""
    if a.n_sites != b.n_sites:
        raise ValueError("size mismatch")
    env = np.ones((1, 1), dtype=complex)
    for ta, tb in zip(a._plain_tensors(), b._plain_tensors()):
        env = np.einsum("xy,sxa,syb->ab", env, ta.conj(), tb)
    return complex(env[0, 0] * np.exp(a.norm_log + b.norm_log))


def negative_log_fidelity_per_site(target, prepared):
    """-ln |<target|prepared>| / N; +inf when the overlap underflows to 0."""
    f = abs(overlap(target, prepared))
    if f == 0.0:
        return np.inf
    return float(-np.log(f) / target.n_sites)


# -- file formats ---------------------------------------------------------------

_GAUGE_CODE = {g: i for i, g in enumerate(GAUGES)}
_GAUGE_NAME = {i: g for g, i in _GAUGE_CODE.items()}


def save_mps(mps, path):
    """Binary container: magic 'MPSC', version, N, gauge byte, center, norm_log,
    then per-site bond dims and row-major complex128 data; vidal states append
    one length-prefixed float64 block per bond."""
    with open(path, "wb") as fh:
        fh.write(b"MPSC")
        fh.write(struct.pack("<II", 1, mps.n_sites))
        fh.write(bytes([_GAUGE_CODE[mps.gauge]]))
        fh.write(struct.pack("<I", mps.center if mps.center is not None else 0))
        fh.write(struct.pack("<d", mps.norm_log))
        for t in mps.tensors:
            fh.write(struct.pack("<II", t.shape[1], t.shape[2]))
            fh.write(np.ascontiguousarray(t).astype("<c16").tobytes())
        if mps.gauge == "vidal":
            for s in mps.singular_values:
                fh.write(struct.pack("<I", s.size))
                fh.write(s.astype("<f8").tobytes())


def load_mps(path):
    with open(path, "rb") as fh:
        if fh.read(4) != b"MPSC":
            raise ValueError("not an MPS container")
        version, n = struct.unpack("<II", fh.read(8))
        if version != 1:
            raise ValueError(f"unsupported container version {version}")
        code = fh.read(1)[0]
        if code not in _GAUGE_NAME:
            raise ValueError(f"unknown gauge code {code}")
        gauge = _GAUGE_NAME[code]
        center = struct.unpack("<I", fh.read(4))[0]
        norm_log = struct.unpack("<d", fh.read(8))[0]
        tensors = []
        for _ in range(n):
            l, r = struct.unpack("<II", fh.read(8))
            raw = fh.read(2 * l * r * 16)
            tensors.append(np.frombuffer(raw, dtype="<c16").reshape(2, l, r).copy())
        svs = None
        if gauge == "vidal":
            svs = []
            for _ in range(n - 1):
                size = struct.unpack("<I", fh.read(4))[0]
                svs.append(np.frombuffer(fh.read(8 * size), dtype="<f8").copy())
        return MPS(tensors, gauge, center if gauge == "mixed" else None,
                   svs, norm_log)


def save_dense_amplitudes(vec, path):
    vec = np.asarray(vec, dtype=complex).ravel()
    n = int(round(np.log2(vec.size)))
    if 2**n != vec.size or n > 24:
        raise ValueError("dense export needs a power-of-two length up to 2^24")
    np.asarray(vec).astype("<c16").tofile(path)


def load_dense_amplitudes(path):
    vec = np.fromfile(path, dtype="<c16")
    n = int(round(np.log2(vec.size)))
    if 2**n != vec.size or n > 24:
        raise ValueError("dense import needs a power-of-two length up to 2^24")
    return vec.astype(complex)
