"""Spin-1/2 computational basis and the matrix-free ANNNI Hamiltonian.

Basis convention: bit ``n`` of a basis index is the sigma^z value of site
``n`` (bit 1 is spin up, sigma^z = +1).  Boundaries are periodic, so site
``N`` is site 0 and site ``N + 1`` is site 1.  State vectors are plain 1-D
``float64`` numpy arrays of length ``2**n_sites``.

    H = sum_n ( -J1 s_n s_{n+1} + J2 s_n s_{n+2} ) - Bx sum_n sigma^x_n,
    J2 = alpha * J1
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.sparse.linalg as spla

from ._backend import get_kernels
from .errors import CapacityError, DimensionError, NormalizationError, ValidationError

MIN_SITES = 4
MAX_SITES = 28
MAX_DENSE_SITES = 12


@dataclass(frozen=True)
class ChainSpec:
    """Physical parameters of one periodic ANNNI chain."""

    n_sites: int
    alpha: float
    bx: float
    j1: float = 1.0
    boundary: str = "periodic"

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites:
            raise ValidationError(f"n_sites must be an integer, got {self.n_sites!r}")
        if not MIN_SITES <= self.n_sites <= MAX_SITES:
            raise CapacityError(
                f"n_sites={self.n_sites} outside supported range [{MIN_SITES}, {MAX_SITES}]"
            )
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")
        if not np.isfinite(self.bx) or self.bx < 0:
            raise ValidationError(f"bx must be >= 0, got {self.bx}")
        if not np.isfinite(self.j1) or self.j1 <= 0:
            raise ValidationError(f"j1 must be > 0, got {self.j1}")
        if self.boundary != "periodic":
            raise ValidationError(f"only periodic boundaries are supported, got {self.boundary!r}")

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    @property
    def j2(self) -> float:
        return self.alpha * self.j1

    def with_alpha(self, alpha: float) -> "ChainSpec":
        return replace(self, alpha=float(alpha))

    def with_bx(self, bx: float) -> "ChainSpec":
        return replace(self, bx=float(bx))


@lru_cache(maxsize=8)
def _bond_sums(n_sites: int, backend: str | None = None):
    nn, nnn = get_kernels(backend).bond_sums(n_sites)
    nn.setflags(write=False)
    nnn.setflags(write=False)
    return nn, nnn


def diagonal_energies(spec: ChainSpec, backend: str | None = None) -> np.ndarray:
    """sigma^z sigma^z energy of every basis state, as a length-2^N array."""
    nn, nnn = _bond_sums(spec.n_sites, backend)
    return -spec.j1 * nn + spec.j2 * nnn.astype(np.float64)


def diagonal_energy(spec: ChainSpec, basis_index: int) -> float:
    """Diagonal energy of a single basis state."""
    n = spec.n_sites
    if not 0 <= basis_index < (1 << n):
        raise ValidationError(f"basis_index {basis_index} out of range for N={n}")
    s = [1 if (basis_index >> i) & 1 else -1 for i in range(n)]
    nn = sum(s[i] * s[(i + 1) % n] for i in range(n))
    nnn = sum(s[i] * s[(i + 2) % n] for i in range(n))
    return -spec.j1 * nn + spec.j2 * nnn


class Hamiltonian:
    """Matrix-free ANNNI Hamiltonian bound to one ChainSpec.

    Each output amplitude depends only on its own row, and the row sum is
    accumulated over sites in a fixed order, so results are bitwise
    reproducible across backends and runs.
    """

    def __init__(self, spec: ChainSpec, backend: str | None = None):
        self.spec = spec
        self.dim = spec.dim
        self._kernels = get_kernels(backend)
        self.diag = np.ascontiguousarray(diagonal_energies(spec, backend))
        self.matvecs = 0

    def matvec(self, v: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        v = np.ascontiguousarray(v, dtype=np.float64)
        if v.ndim != 1 or v.shape[0] != self.dim:
            raise DimensionError(f"expected vector of length {self.dim}, got shape {v.shape}")
        if out is None:
            out = np.empty(self.dim)
        self._kernels.matvec(self.diag, v, out, self.spec.n_sites, float(self.spec.bx))
        self.matvecs += 1
        return out

    def matmat(self, block: np.ndarray) -> np.ndarray:
        out = np.empty((self.dim, block.shape[1]), order="F")
        for c in range(block.shape[1]):
            self.matvec(block[:, c], out[:, c])
        return out

    def __matmul__(self, v):
        return self.matvec(v) if np.ndim(v) == 1 else self.matmat(v)

    def norm_bound(self) -> float:
        """Cheap upper bound on the operator 2-norm."""
        return float(np.max(np.abs(self.diag)) + self.spec.n_sites * self.spec.bx)

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(
            (self.dim, self.dim), matvec=self.matvec, rmatvec=self.matvec, dtype=np.float64
        )


def apply_hamiltonian(spec: ChainSpec, v: np.ndarray) -> np.ndarray:
    """Return H v (not normalized)."""
    return Hamiltonian(spec).matvec(v)


def build_dense(spec: ChainSpec) -> np.ndarray:
    """Dense symmetric matrix of H; only for N <= 12."""
    if spec.n_sites > MAX_DENSE_SITES:
        raise CapacityError(f"dense matrix limited to N <= {MAX_DENSE_SITES}, got {spec.n_sites}")
    dim = spec.dim
    h = np.diag(diagonal_energies(spec))
    idx = np.arange(dim)
    for n in range(spec.n_sites):
        h[idx, idx ^ (1 << n)] = -spec.bx
    return h


def check_state(v: np.ndarray, n_sites: int | None = None, *, normalized: bool = False,
                atol: float = 1e-8) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"state must be 1-D, got shape {v.shape}")
    if n_sites is not None and v.shape[0] != 1 << n_sites:
        raise DimensionError(f"state length {v.shape[0]} != 2**{n_sites}")
    if normalized and abs(np.linalg.norm(v) - 1.0) > atol:
        raise NormalizationError(f"state norm {np.linalg.norm(v):.3e} is not 1")
    return v


def normalize(v: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise NormalizationError("cannot normalize the zero vector")
    return v / nrm


def basis_state(n_sites: int, index: int) -> np.ndarray:
    v = np.zeros(1 << n_sites)
    v[index] = 1.0
    return v


# --- lattice symmetries (all commute with H) ---------------------------------

def translate(v: np.ndarray, n_sites: int) -> np.ndarray:
    """Shift every spin one site to the right: site n -> n + 1 (mod N)."""
    # new index = (old << 1 | top bit) & mask; the transpose moves the top bit to bit 0
    return np.ascontiguousarray(v.reshape(2, -1).T).reshape(-1)


def spin_flip(v: np.ndarray) -> np.ndarray:
    """Global Z2 flip prod_n sigma^x_n; the complement of i is 2^N - 1 - i."""
    return v[::-1].copy()


def reflect(v: np.ndarray, n_sites: int) -> np.ndarray:
    """Mirror the chain: site n -> N - 1 - n (bit reversal of the index)."""
    return np.ascontiguousarray(v.reshape((2,) * n_sites).transpose()).reshape(-1)


def symmetry_label(v: np.ndarray, n_sites: int) -> str:
    """Momentum |k| in units of 2pi/N and spin-flip parity, e.g. ``"3-"``.

    Meaningful for eigenvectors that are symmetry eigenstates (or real
    combinations of +k and -k), which is what symmetrize_degenerate produces.
    """
    c = float(v @ translate(v, n_sites))
    p = float(v @ v[::-1])
    k = int(round(np.arccos(np.clip(c, -1.0, 1.0)) * n_sites / (2 * np.pi)))
    return f"{k}{'+' if p >= 0 else '-'}"
