"""Translation x spin-flip symmetry sectors of the periodic chain.

The group G = {T^j F^f} (T: shift by one site, F: global spin flip) has
2N elements and commutes with H.  Its characters are

    chi_{kappa,p}(T^j F^f) = exp(-2 pi i kappa j / N) * p^f

and the sector (kappa, p) is spanned by the normalized projections of orbit
representatives r (the smallest index in each orbit):

    b_r(s) = conj(chi(g_s)) / sqrt(|orbit(r)|),   s = g_s r.

A representative contributes to a sector only when chi is trivial on its
stabilizer.  Sector vectors satisfy T psi = exp(-2 pi i kappa / N) psi and
F psi = p psi.  Sectors kappa and N - kappa are mirror images with equal
spectra, so only 0 <= kappa <= N/2 is ever built; for 0 < kappa < N/2 each
sector eigenvalue is an exact doublet in the full space.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError
from .hilbert import MIN_SITES

SECTOR_MAX_SITES = 24


@dataclass(frozen=True)
class OrbitTable:
    n_sites: int
    reps: np.ndarray          # representative basis indices, ascending
    orbit: np.ndarray         # orbit size per representative
    period: np.ndarray        # smallest j > 0 with T^j r = r
    flip_shift: np.ndarray    # smallest j >= 0 with T^j F r = r, or -1
    nn: np.ndarray            # sum_n s_n s_{n+1} per representative
    nnn: np.ndarray           # sum_n s_n s_{n+2}
    state_rep: np.ndarray     # representative position of every basis state
    state_shift: np.ndarray   # j with s = T^j F^f rep
    state_flip: np.ndarray    # f with s = T^j F^f rep


def _rotl(x, n, mask):
    return ((x << 1) | (x >> (n - 1))) & mask


@lru_cache(maxsize=2)
def orbit_table(n_sites: int) -> OrbitTable:
    if not MIN_SITES <= n_sites <= SECTOR_MAX_SITES:
        raise CapacityError(f"symmetry sectors limited to {MIN_SITES} <= N <= {SECTOR_MAX_SITES}")
    n = n_sites
    dim = 1 << n
    mask = dim - 1
    s = np.arange(dim, dtype=np.int64)
    best = s.copy()
    best_j = np.zeros(dim, dtype=np.int16)
    best_f = np.zeros(dim, dtype=np.int8)
    t = s.copy()
    for j in range(n):
        for f in (0, 1):
            img = t ^ mask if f else t
            better = img < best
            best[better] = img[better]
            best_j[better] = j
            best_f[better] = f
        t = _rotl(t, n, mask)
    # T^j F^f s = rep  =>  s = T^(-j) F^f rep
    state_shift = ((-best_j.astype(np.int64)) % n).astype(np.int16)
    reps = np.flatnonzero(best == s)
    state_rep = np.searchsorted(reps, best).astype(np.int32)
    del best, t

    period = np.zeros(len(reps), dtype=np.int64)
    flip_shift = np.full(len(reps), -1, dtype=np.int64)
    t = reps.copy()
    for j in range(n + 1):
        if j:
            hit = (t == reps) & (period == 0)
            period[hit] = j
        hitf = ((t ^ mask) == reps) & (flip_shift < 0)
        flip_shift[hitf] = j
        t = _rotl(t, n, mask)
    stab = (n // period) * np.where(flip_shift >= 0, 2, 1)
    orbit = (2 * n) // stab

    bits = ((reps[:, None] >> np.arange(n)) & 1) * 2 - 1
    nn = np.sum(bits * np.roll(bits, -1, axis=1), axis=1)
    nnn = np.sum(bits * np.roll(bits, -2, axis=1), axis=1)
    return OrbitTable(n, reps, orbit, period, flip_shift, nn, nnn, state_rep, state_shift,
                      best_f.astype(np.int8))


def sector_list(n_sites: int) -> list[tuple[int, int]]:
    """All independent sectors (kappa, p), kappa = 0..N/2, p = +1 then -1."""
    return [(kappa, p) for kappa in range(n_sites // 2 + 1) for p in (1, -1)]


def sector_multiplicity(n_sites: int, kappa: int) -> int:
    return 1 if kappa == 0 or 2 * kappa == n_sites else 2


def sector_label(kappa: int, p: int) -> str:
    return f"{kappa}{'+' if p > 0 else '-'}"


def _character(n, kappa, p, shift, flip):
    phase = np.exp(-2j * np.pi * kappa * np.asarray(shift) / n)
    return phase * np.where(np.asarray(flip) == 1, p, 1)


def _allowed(tab: OrbitTable, kappa: int, p: int) -> np.ndarray:
    n = tab.n_sites
    ok = (kappa * tab.period) % n == 0
    has_f = tab.flip_shift >= 0
    # on the stabilizer T^j0 F the character is +-1 once the period condition holds
    sign = np.where((2 * kappa * tab.flip_shift // n) % 2 == 0, 1, -1)
    ok &= ~has_f | (sign * p == 1)
    return ok


@dataclass(frozen=True)
class Sector:
    """One symmetry block: H_sector(alpha) = diag(-j1 nn + alpha j1 nnn) + offdiag."""

    n_sites: int
    kappa: int
    p: int
    members: np.ndarray       # positions into OrbitTable.reps
    offdiag: sp.csr_matrix    # transverse-field part, already scaled by -bx
    nn: np.ndarray
    nnn: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.members)

    @property
    def is_real(self) -> bool:
        return self.kappa == 0 or 2 * self.kappa == self.n_sites

    @property
    def label(self) -> str:
        return sector_label(self.kappa, self.p)

    @property
    def multiplicity(self) -> int:
        return sector_multiplicity(self.n_sites, self.kappa)

    def diagonal(self, alpha: float, j1: float = 1.0) -> np.ndarray:
        return -j1 * self.nn + (alpha * j1) * self.nnn

    def dense(self, alpha: float, j1: float = 1.0) -> np.ndarray:
        return self.offdiag.toarray() + np.diag(self.diagonal(alpha, j1))

    def expand(self, coeffs: np.ndarray) -> np.ndarray:
        """Full-space amplitudes of sector vectors (columns of ``coeffs``)."""
        tab = orbit_table(self.n_sites)
        coeffs = np.asarray(coeffs)
        one = coeffs.ndim == 1
        c = coeffs[:, None] if one else coeffs
        local = np.full(len(tab.reps), -1, dtype=np.int64)
        local[self.members] = np.arange(self.dim)
        pos = local[tab.state_rep]
        inside = pos >= 0
        amp = np.conj(_character(self.n_sites, self.kappa, self.p,
                                 tab.state_shift[inside], tab.state_flip[inside]))
        amp = amp / np.sqrt(tab.orbit[tab.state_rep[inside]])
        if self.is_real:
            amp = amp.real
        out = np.zeros((1 << self.n_sites, c.shape[1]), dtype=np.result_type(amp, c))
        out[inside] = amp[:, None] * c[pos[inside]]
        return out[:, 0] if one else out


@lru_cache(maxsize=64)
def build_sector(n_sites: int, kappa: int, p: int, bx: float) -> Sector:
    tab = orbit_table(n_sites)
    n = n_sites
    allowed = _allowed(tab, kappa, p)
    members = np.flatnonzero(allowed)
    local = np.full(len(tab.reps), -1, dtype=np.int64)
    local[members] = np.arange(len(members))
    real = kappa == 0 or 2 * kappa == n

    cols, rows, vals = [], [], []
    r = tab.reps[members]
    for site in range(n):
        s = r ^ (1 << site)
        tgt = tab.state_rep[s]
        keep = local[tgt] >= 0
        chi = _character(n, kappa, p, tab.state_shift[s[keep]], tab.state_flip[s[keep]])
        ratio = np.sqrt(tab.orbit[members[keep]] / tab.orbit[tgt[keep]])
        cols.append(np.flatnonzero(keep))
        rows.append(local[tgt[keep]])
        vals.append(-bx * chi * ratio)
    vals = np.concatenate(vals) if vals else np.empty(0)
    if real:
        vals = vals.real
    m = len(members)
    off = sp.csr_matrix((vals, (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))
    off.sum_duplicates()
    off.eliminate_zeros()
    return Sector(n, kappa, p, members, off, tab.nn[members].astype(np.float64),
                  tab.nnn[members].astype(np.float64))


def sectors(n_sites: int, bx: float) -> list[Sector]:
    out = []
    for kappa, p in sector_list(n_sites):
        sec = build_sector(n_sites, kappa, p, float(bx))
        if sec.dim:
            out.append(sec)
    return out
