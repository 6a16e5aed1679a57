"""Lowest eigenpairs of the ANNNI Hamiltonian.

The core is a block Lanczos iteration with full (two-pass) Gram-Schmidt
reorthogonalization and thick restarts.  It runs on any operator exposing
``dim``, ``dtype``, ``matmat`` and ``norm_bound``.  A start block of width
``b`` resolves at most ``b`` copies of an exactly degenerate level, so when
a level saturates the block and further levels follow inside the requested
window, another pass runs deflated against everything found so far.

Two drivers share it:

* ``method="full"`` iterates on the matrix-free operator in the whole
  2^N space.
* ``method="sectors"`` iterates inside each translation x spin-flip sector
  (about 2N times smaller), merges the sector spectra and expands the
  lowest states back to real full-space vectors.  Reorthogonalization is
  memory-bandwidth bound, so this is what makes N = 20 sweeps tractable.

``dense_lowest`` is the small-N reference.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import CapacityError, ValidationError
from .hilbert import MAX_DENSE_SITES, ChainSpec, Hamiltonian, build_dense, reflect, symmetry_label, translate
from .symmetry import SECTOR_MAX_SITES, Sector, sectors

log = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-10
# multiplets are only re-mixed when numerically exact; mixing a pair split
# by ~DEGENERACY_TOL would trade eigenvalue accuracy for symmetry labels
SYMMETRIZE_TOL = 1e-12
LARGE_CHAIN_SITES = 20
LARGE_CHAIN_KRYLOV = 200
SECTOR_DENSE_DIM = 256
SECTOR_KRYLOV = 40
SCREEN_TOL = 1e-3
SCREEN_RESTARTS = 2
METHODS = ("auto", "full", "sectors")


@dataclass(frozen=True)
class SolverConfig:
    k: int = 6
    tol: float = 1e-10
    max_krylov: int = 400
    seed: int = 0
    block_size: int = 2
    max_restarts: int = 400
    method: str = "auto"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValidationError(f"k must be an integer >= 1, got {self.k}")
        if not self.tol > 0:
            raise ValidationError(f"tol must be > 0, got {self.tol}")
        if self.max_krylov < 3 * self.k:
            raise ValidationError(f"max_krylov={self.max_krylov} must be >= 3k={3 * self.k}")
        if self.block_size < 1:
            raise ValidationError("block_size must be >= 1")
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}, got {self.method!r}")


@dataclass
class Spectrum:
    """k lowest eigenpairs; eigenvectors are the columns of a (2^N, k) array."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual_norms: np.ndarray
    iterations_used: int
    converged: bool
    tol: float
    n_sites: int
    labels: list[str] = field(default_factory=list)
    method: str = "full"
    alpha: float = float("nan")
    bx: float = float("nan")
    # per-sector Ritz data, reused to warm-start a nearby solve
    sector_state: dict | None = field(default=None, repr=False, compare=False)

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    @property
    def ground_state(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    def levels(self, tol: float = DEGENERACY_TOL) -> list[slice]:
        """Distinct levels as slices of state indices; see ``group_levels``."""
        merge = not self.labels or self.bx == 0
        return group_levels(self.eigenvalues, tol, None if merge else self.labels)


def group_levels(eigenvalues, tol: float = DEGENERACY_TOL, labels=None) -> list[slice]:
    """Split sorted eigenvalues into runs whose consecutive gaps are <= tol.

    With ``labels``, neighbours must also carry the same symmetry label.  For
    B_x > 0 the only exact multiplets are the +-k doublets, which share a
    label, while states of different sectors can be split by far less than
    ``tol`` (the two ferromagnetic states at N = 20) and must stay apart.
    """
    out = []
    start = 0
    n = len(eigenvalues)
    for i in range(1, n + 1):
        if (i == n or eigenvalues[i] - eigenvalues[i - 1] > tol
                or (labels is not None and labels[i] != labels[i - 1])):
            out.append(slice(start, i))
            start = i
    return out


def _effective_krylov(spec: ChainSpec, cfg: SolverConfig) -> int:
    m = cfg.max_krylov
    if spec.n_sites >= LARGE_CHAIN_SITES:
        m = min(m, LARGE_CHAIN_KRYLOV)
    return m


def _ct(a):
    return a.conj().T if np.iscomplexobj(a) else a.T


def _proj(q, w):
    """q^H w without materializing conj(q) when q is the wide operand."""
    if np.iscomplexobj(q):
        return (w.conj().T @ q).conj().T
    return q.T @ w


def _orthogonalize(w, bases):
    # two passes of classical Gram-Schmidt against each basis block
    for _ in range(2):
        for q in bases:
            if q is not None and q.shape[1]:
                w -= q @ _proj(q, w)
    return w


def _random_block(rng, dim, ncols, dtype):
    x = rng.standard_normal((dim, ncols))
    if np.dtype(dtype).kind == "c":
        x = x + 1j * rng.standard_normal((dim, ncols))
    return x


def _random_orthonormal(rng, dim, ncols, bases, dtype=np.float64):
    x = _orthogonalize(_random_block(rng, dim, ncols, dtype), bases)
    q, _ = np.linalg.qr(x)
    return np.asfortranarray(q)


def _start_block(rng, dim, width, dtype, locked, start):
    if start is None or not start.shape[1]:
        return _random_orthonormal(rng, dim, width, [locked], dtype)
    x = np.array(start, dtype=dtype)
    if x.shape[1] < width:
        x = np.hstack([x, _random_block(rng, dim, width - x.shape[1], dtype)])
    x = _orthogonalize(x, [locked])
    q, r = np.linalg.qr(x)
    # columns that were (nearly) dependent get fresh random directions
    weak = np.abs(np.diag(r)) < 1e-8 * max(1.0, np.abs(r).max())
    if np.any(weak):
        q[:, weak] = _random_orthonormal(rng, dim, int(weak.sum()),
                                         [locked, q[:, ~weak]], dtype)
    return np.asfortranarray(q)


def _lanczos_pass(op, want: int, tol: float, m_max: int, block: int,
                  rng: np.random.Generator, locked: np.ndarray | None, max_restarts: int,
                  start: np.ndarray | None = None):
    """One thick-restart block Lanczos run in the complement of ``locked``.

    Returns (theta, ritz_vectors, H @ ritz_vectors, true_residuals, converged, restarts).
    """
    dim = op.dim
    dtype = np.dtype(getattr(op, "dtype", np.float64))
    n_locked = 0 if locked is None else locked.shape[1]
    space = dim - n_locked
    want = min(want, space)
    width = 0 if start is None else start.shape[1]
    block = max(1, min(max(block, width), space))
    m_max = min(max(m_max, want + 2 * block), space)
    breakdown = 1e-12 * max(1.0, op.norm_bound())

    V = np.empty((dim, m_max), dtype=dtype, order="F")
    T = np.zeros((m_max, m_max), dtype=dtype)
    X = _start_block(rng, dim, block, dtype, locked, start)
    j = 0
    next_check = want
    restarts = 0
    R_prev = None
    while True:
        bsz = X.shape[1]
        if j + bsz > m_max:
            if restarts >= max_restarts:
                break
            restarts += 1
            keep = min(j - bsz, max(want + 2 * block, m_max // 3))
            keep = max(keep, min(want, j))
            theta, Y = sla.eigh(T[:j, :j], subset_by_index=[0, keep - 1], driver="evr")
            V[:, :keep] = V[:, :j] @ Y
            next_check = keep + bsz
            T[:] = 0.0
            T[:keep, :keep] = np.diag(theta)
            j = keep
            R_prev = None
        V[:, j:j + bsz] = X
        W = op.matmat(X)
        basis = V[:, :j + bsz]
        if R_prev is None or R_prev.shape[0] != bsz:
            # first block or first after a restart: plain two-pass Gram-Schmidt
            C = _proj(basis, W)
            W -= basis @ C
            if n_locked:
                W -= locked @ _proj(locked, W)
            passes = 1
        else:
            # three-term block recurrence, then full reorthogonalization
            C = np.zeros((j + bsz, bsz), dtype=dtype)
            C[j - bsz:j] = _ct(R_prev)
            C[j:] = _proj(X, W)
            W -= V[:, j - bsz:j + bsz] @ C[j - bsz:]
            passes = 1
        while passes < 3:
            before = np.linalg.norm(W, axis=0)
            C2 = _proj(basis, W)
            W -= basis @ C2
            if n_locked:
                W -= locked @ _proj(locked, W)
            C += C2
            passes += 1
            # DGKS: another pass only if this one removed a large fraction
            if passes >= 2 and np.all(np.linalg.norm(W, axis=0) > 0.7 * before):
                break
        T[:j + bsz, j:j + bsz] = C
        T[j:j + bsz, :j + bsz] = _ct(C)
        diag_blk = T[j:j + bsz, j:j + bsz]
        T[j:j + bsz, j:j + bsz] = 0.5 * (diag_blk + _ct(diag_blk))
        j += bsz

        if j >= space:
            break
        # next block by column-wise Gram-Schmidt; dependent columns are
        # replaced by fresh random directions with zero coupling.  Near the
        # end of a small space only the remaining dimensions are filled.
        ncols = min(bsz, space - j)
        R = np.zeros((ncols, bsz), dtype=dtype)
        Q = np.empty((dim, ncols), dtype=dtype, order="F")
        for c in range(ncols):
            w = W[:, c].copy()
            if c:
                for _ in range(2):
                    coef = _proj(Q[:, :c], w)
                    w -= Q[:, :c] @ coef
                    R[:c, c] += coef
            r = np.linalg.norm(w)
            if r > breakdown:
                Q[:, c] = w / r
                R[c, c] = r
            else:
                fresh = _random_orthonormal(rng, dim, 1, [V[:, :j], locked, Q[:, :c]], dtype)
                Q[:, c] = fresh[:, 0]

        X = Q
        R_prev = R if ncols == bsz else None
        if j < next_check:
            continue
        next_check = j + max(bsz, j // 8)
        theta, Y = sla.eigh(T[:j, :j], subset_by_index=[0, min(want, j) - 1], driver="evr")
        est = np.linalg.norm(R @ Y[j - bsz:j, :], axis=0)
        if j >= want and np.all(est <= 0.5 * tol):
            U = V[:, :j] @ Y
            HU = op.matmat(U)
            res = np.linalg.norm(HU - U * theta, axis=0)
            if np.all(res <= tol):
                return theta, U, HU, res, True, restarts

    theta, Y = sla.eigh(T[:j, :j], subset_by_index=[0, min(want, j) - 1], driver="evr")
    U = V[:, :j] @ Y
    HU = op.matmat(U)
    res = np.linalg.norm(HU - U * theta, axis=0)
    return theta, U, HU, res, bool(np.all(res <= tol)), restarts


def _block_lanczos(op, k: int, tol: float, m_max: int, block: int, max_restarts: int,
                   rng: np.random.Generator, start: np.ndarray | None = None, max_passes: int = 8):
    """k lowest pairs of ``op``, with deflated extra passes for saturated multiplets."""
    dtype = np.dtype(getattr(op, "dtype", np.float64))
    k = min(k, op.dim)
    vals = np.empty(0)
    vecs = np.empty((op.dim, 0), dtype=dtype)
    hvecs = np.empty((op.dim, 0), dtype=dtype)
    converged = True
    for npass in range(max_passes):
        locked = vecs if vecs.shape[1] else None
        theta, U, HU, res, ok, _ = _lanczos_pass(
            op, k, tol, m_max, block, rng, locked, max_restarts, start if npass == 0 else None
        )
        converged &= ok
        vals = np.concatenate([vals, theta])
        vecs = np.hstack([vecs, U])
        hvecs = np.hstack([hvecs, HU])
        order = np.argsort(vals, kind="stable")
        vals, vecs, hvecs = vals[order], vecs[:, order], hvecs[:, order]
        if vecs.shape[1] >= op.dim:
            break
        # a level with block-many copies in this pass may have more; only
        # matters if another level follows it inside the window
        window = vals[:k]
        saturated = any(
            sl.stop - sl.start >= block and theta[sl.start] < window[-1] - DEGENERACY_TOL
            for sl in group_levels(theta, DEGENERACY_TOL)
        )
        if not saturated:
            break
        log.debug("pass %d: saturated level, deflating (%d locked)", npass, vecs.shape[1])
    return vals[:k], vecs[:, :k], hvecs[:, :k], converged


# --- full-space driver --------------------------------------------------------

def symmetrize_degenerate(values, vectors, hvectors, n_sites, tol=SYMMETRIZE_TOL):
    """Rotate each degenerate multiplet onto translation/flip/reflection eigenstates.

    Returns rotated (values, vectors, hvectors).  Rayleigh quotients are
    recomputed from the rotation so near-degenerate members keep exact values.
    """
    values = values.copy()
    vectors = vectors.copy()
    hvectors = None if hvectors is None else hvectors.copy()
    for sl in group_levels(values, tol * max(1.0, float(np.max(np.abs(values))))):
        d = sl.stop - sl.start
        if d < 2:
            continue
        B = vectors[:, sl]
        TB = np.column_stack([translate(B[:, c], n_sites) for c in range(d)])
        PB = B[::-1, :]
        RB = np.column_stack([reflect(B[:, c], n_sites) for c in range(d)])
        t = B.T @ TB
        m = 0.5 * (t + t.T) + 1e-3 * (B.T @ PB) + 1e-6 * (B.T @ RB)
        _, Z = np.linalg.eigh(0.5 * (m + m.T))
        # sort by momentum (cos k descending) so ordering is reproducible
        cosk = np.einsum("ij,ij->j", Z, 0.5 * (t + t.T) @ Z)
        Z = Z[:, np.argsort(-np.round(cosk, 8), kind="stable")]
        vectors[:, sl] = B @ Z
        values[sl] = np.einsum("ij,i,ij->j", Z, values[sl], Z)
        if hvectors is not None:
            hvectors[:, sl] = hvectors[:, sl] @ Z
    return values, vectors, hvectors


def canonicalize_signs(vectors):
    """Flip each column so its largest-magnitude component is positive."""
    vectors = vectors.copy()
    for c in range(vectors.shape[1]):
        a = np.abs(vectors[:, c])
        i = int(np.argmax(a >= a.max() * (1 - 1e-8)))
        if vectors[i, c] < 0:
            vectors[:, c] *= -1
    return vectors


def _finish(spec, values, vectors, hvectors, tol, iterations, converged, method="full"):
    order = np.argsort(values, kind="stable")
    values, vectors = values[order], vectors[:, order]
    hvectors = None if hvectors is None else hvectors[:, order]
    values, vectors, hvectors = symmetrize_degenerate(values, vectors, hvectors, spec.n_sites)
    if hvectors is not None:
        res = np.linalg.norm(hvectors - vectors * values, axis=0)
    else:
        res = np.zeros(len(values))
    vectors = canonicalize_signs(vectors)
    labels = [symmetry_label(vectors[:, c], spec.n_sites) for c in range(vectors.shape[1])]
    return Spectrum(
        eigenvalues=values,
        eigenvectors=vectors,
        residual_norms=res,
        iterations_used=iterations,
        converged=bool(converged and np.all(res <= tol)),
        tol=tol,
        n_sites=spec.n_sites,
        labels=labels,
        method=method,
        alpha=spec.alpha,
        bx=spec.bx,
    )


def _full_lowest(spec, cfg, backend, max_passes):
    op = Hamiltonian(spec, backend)
    m_max = _effective_krylov(spec, cfg)
    rng = np.random.default_rng(cfg.seed)
    vals, vecs, hvecs, converged = _block_lanczos(
        op, cfg.k, cfg.tol, m_max, cfg.block_size, cfg.max_restarts, rng, max_passes=max_passes
    )
    return _finish(spec, vals, vecs, hvecs, cfg.tol, op.matvecs, converged)


# --- symmetry-sector driver ---------------------------------------------------

class SectorOperator:
    """H(alpha) restricted to one symmetry sector, as a CSR matrix."""

    def __init__(self, sector: Sector, spec: ChainSpec):
        self.sector = sector
        self.dim = sector.dim
        diag = sector.diagonal(spec.alpha, spec.j1)
        self.mat = (sector.offdiag + sp.diags(diag)).tocsr()
        self.dtype = self.mat.dtype
        self._bound = float(np.max(np.abs(diag)) + spec.n_sites * spec.bx)
        self.matvecs = 0

    def matmat(self, X):
        self.matvecs += X.shape[1]
        return np.asfortranarray(self.mat @ X)

    def norm_bound(self) -> float:
        return self._bound


@dataclass
class _SectorResult:
    values: np.ndarray
    coeffs: np.ndarray
    converged: bool
    lower: float        # lower bound on the sector's smallest eigenvalue
    refined: bool       # values converged to the solver tolerance


def _solve_sector(sector, spec, cfg, want, start, max_passes, screen=False):
    op = SectorOperator(sector, spec)
    if sector.dim <= SECTOR_DENSE_DIM:
        w, v = np.linalg.eigh(op.mat.toarray())
        return _SectorResult(w[:want], v[:, :want], True, float(w[0]), True), 0
    rng = np.random.default_rng([cfg.seed, sector.kappa, 0 if sector.p > 0 else 1, int(screen)])
    m_max = min(_effective_krylov(spec, cfg), SECTOR_KRYLOV)
    if screen:
        theta, U, _, res, _, _ = _lanczos_pass(op, want, SCREEN_TOL, m_max, cfg.block_size, rng,
                                               None, SCREEN_RESTARTS, start)
        # a Ritz pair brackets an eigenvalue within its residual; for a random
        # start the lowest Ritz value tracks the sector minimum
        return _SectorResult(theta, U, False, float(theta[0] - res[0]), False), op.matvecs
    vals, vecs, _, ok = _block_lanczos(
        op, want, 0.5 * cfg.tol, m_max, cfg.block_size, cfg.max_restarts, rng,
        start=start, max_passes=max_passes,
    )
    return _SectorResult(vals, vecs, ok, float(vals[0]), True), op.matvecs


def _phase_fix(psi):
    """Rotate a complex vector so its largest-magnitude entry is real positive."""
    a = np.abs(psi)
    i = int(np.argmax(a >= a.max() * (1 - 1e-8)))
    return psi * (np.conj(psi[i]) / a[i])


def _kth_state(results, secs, k):
    pool = sorted(e for key, res in results.items()
                  for e in res.values for _ in range(secs[key].multiplicity))
    return pool[k - 1] if len(pool) >= k else np.inf


def _sector_lowest(spec, cfg, backend, max_passes, warm):
    secs = {(s.kappa, s.p): s for s in sectors(spec.n_sites, spec.bx)}
    k = min(cfg.k, spec.dim)
    info: dict[tuple[int, int], _SectorResult] = {}
    want = {key: min(2, s.dim) for key, s in secs.items()}
    starts: dict = {}
    todo = set()
    matvecs = 0
    usable = (warm is not None and warm["n_sites"] == spec.n_sites and warm["bx"] == spec.bx
              and set(warm["info"]) == set(secs))
    if usable:
        # Weyl: every sector eigenvalue moves by at most |d alpha| j1 N
        shift = abs(spec.alpha - warm["alpha"]) * spec.j1 * spec.n_sites
        for key, old in warm["info"].items():
            if old.lower - shift > warm["cut"] + shift:
                info[key] = _SectorResult(old.values, old.coeffs, False, old.lower - shift, False)
            else:
                todo.add(key)
                starts[key] = old.coeffs
                want[key] = max(want[key], len(old.values)) if old.refined else want[key]
    else:
        for key in sorted(secs):
            info[key], mv = _solve_sector(secs[key], spec, cfg, want[key], None, max_passes,
                                          screen=True)
            matvecs += mv
        cut_up = _kth_state(info, secs, k)
        for key, res in info.items():
            if not res.refined and res.lower <= cut_up:
                todo.add(key)
                starts[key] = res.coeffs

    for _ in range(64):
        for key in sorted(todo):
            info[key], mv = _solve_sector(secs[key], spec, cfg, want[key], starts.get(key),
                                          max_passes)
            matvecs += mv
        results = {key: res for key, res in info.items() if res.refined}
        cut = _kth_state(results, secs, k)
        todo = set()
        for key, res in results.items():
            if len(res.values) < secs[key].dim and res.values[-1] <= cut + DEGENERACY_TOL:
                want[key] = min(secs[key].dim, len(res.values) + 2)
                starts[key] = res.coeffs
                todo.add(key)
        if not todo:
            break

    entries = sorted(
        ((e, key, i) for key, res in results.items() for i, e in enumerate(res.values)),
        key=lambda t: (t[0], t[1][0], -t[1][1]),
    )
    values, columns, labels = [], [], []
    for e, key, i in entries:
        if len(values) >= k:
            break
        sec = secs[key]
        psi = sec.expand(results[key].coeffs[:, i])
        if sec.is_real:
            cols = [np.real(psi)]
        else:
            psi = _phase_fix(psi)
            cols = [np.sqrt(2.0) * psi.real, np.sqrt(2.0) * psi.imag]
        for c in cols[: k - len(values)]:
            values.append(e)
            columns.append(c / np.linalg.norm(c))
            labels.append(sec.label)
    values = np.array(values)
    vectors = canonicalize_signs(np.column_stack(columns))
    h = Hamiltonian(spec, backend)
    res = np.linalg.norm(h.matmat(vectors) - vectors * values, axis=0)
    converged = all(r.converged for r in results.values()) and bool(np.all(res <= cfg.tol))
    state = {"n_sites": spec.n_sites, "bx": spec.bx, "alpha": spec.alpha, "cut": cut, "info": info}
    return Spectrum(
        eigenvalues=values,
        eigenvectors=vectors,
        residual_norms=res,
        iterations_used=matvecs + h.matvecs,
        converged=converged,
        tol=cfg.tol,
        n_sites=spec.n_sites,
        labels=labels,
        method="sectors",
        alpha=spec.alpha,
        bx=spec.bx,
        sector_state=state,
    )


def resolve_method(spec: ChainSpec, cfg: SolverConfig) -> str:
    if cfg.method == "auto":
        return "sectors" if spec.n_sites <= SECTOR_MAX_SITES else "full"
    if cfg.method == "sectors" and spec.n_sites > SECTOR_MAX_SITES:
        raise CapacityError(f"sector solver limited to N <= {SECTOR_MAX_SITES}")
    return cfg.method


def lanczos_lowest(spec: ChainSpec, cfg: SolverConfig | None = None, *,
                   backend: str | None = None, max_passes: int = 8,
                   warm: Spectrum | None = None) -> Spectrum:
    """k algebraically smallest eigenpairs of H(spec).

    ``warm`` may be a sector-method Spectrum at nearby parameters with the
    same N and B_x; its Ritz vectors seed the iteration and sectors that
    provably cannot reach the lowest k are skipped.
    """
    cfg = cfg or SolverConfig()
    if resolve_method(spec, cfg) == "full":
        return _full_lowest(spec, cfg, backend, max_passes)
    state = None if warm is None else warm.sector_state
    return _sector_lowest(spec, cfg, backend, max_passes, state)


def dense_lowest(spec: ChainSpec, k: int | None = None) -> Spectrum:
    """k lowest eigenpairs from a full dense diagonalization (N <= 12)."""
    if spec.n_sites > MAX_DENSE_SITES:
        raise CapacityError(f"dense solver limited to N <= {MAX_DENSE_SITES}, got {spec.n_sites}")
    h = build_dense(spec)
    k = spec.dim if k is None else min(k, spec.dim)
    vals, vecs = sla.eigh(h, subset_by_index=[0, k - 1])
    hvecs = h @ vecs
    return _finish(spec, vals, vecs, hvecs, np.inf, 0, True, method="dense")
