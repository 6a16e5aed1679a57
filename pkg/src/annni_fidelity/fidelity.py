"""Ground-state fidelity, its overlap decomposition and the susceptibility."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NormalizationError, UnconvergedError, ValidationError
from .lanczos import DEGENERACY_TOL, Spectrum

NORM_ATOL = 1e-8


def _unit(v, name):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > NORM_ATOL:
        raise NormalizationError(f"{name} has norm {nrm:.12g}, expected 1")
    return v


def fidelity(gs_a: np.ndarray, gs_b: np.ndarray) -> float:
    """|<gs_a|gs_b>| for two unit-normalized real states."""
    a = _unit(gs_a, "gs_a")
    b = _unit(gs_b, "gs_b")
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(min(1.0, abs(a @ b)))


@dataclass(frozen=True)
class OverlapDecomposition:
    """Expansion of |psi(alpha)> in the computed eigenstates of H(alpha + d_alpha).

    ``weights[m]`` is the per-state |C_m|^2.  Inside an exactly degenerate
    multiplet only the sum is basis independent; ``level_weights`` holds those
    sums, one entry per distinct level, and ``level_slices`` maps levels to
    state indices.
    """

    alpha: float
    d_alpha: float
    fidelity: float
    weights: np.ndarray
    residual_weight: float
    level_weights: np.ndarray
    level_slices: tuple
    subspace_fidelity: float
    gs_degenerate: bool

    def level_weight(self, level: int) -> float:
        if level >= len(self.level_weights):
            return 0.0
        return float(self.level_weights[level])


def decompose(gs_a: np.ndarray, spectrum_b: Spectrum, *, alpha: float = np.nan,
              d_alpha: float = np.nan, degeneracy_tol: float = DEGENERACY_TOL,
              require_converged: bool = True) -> OverlapDecomposition:
    """Weights |C_m|^2 of gs_a on the eigenvectors of spectrum_b.

    Sweeps pass ``require_converged=False`` so an unconverged point is still
    written (flagged) instead of dropped.
    """
    if require_converged and not spectrum_b.converged:
        bad = np.flatnonzero(spectrum_b.residual_norms > spectrum_b.tol)
        raise UnconvergedError(
            f"spectrum is unconverged (pairs {bad.tolist()}, max residual "
            f"{float(np.max(spectrum_b.residual_norms)):.3e} > tol {spectrum_b.tol:.1e})"
        )
    a = _unit(gs_a, "gs_a")
    vecs = spectrum_b.eigenvectors
    if vecs.shape[0] != a.shape[0]:
        raise DimensionError(f"state length {a.shape[0]} != spectrum dimension {vecs.shape[0]}")
    c = vecs.T @ a
    weights = c * c
    residual = 1.0 - float(np.sum(weights))
    slices = tuple(spectrum_b.levels(degeneracy_tol))
    level_weights = np.array([weights[sl].sum() for sl in slices])
    gs_sl = slices[0]
    return OverlapDecomposition(
        alpha=float(alpha),
        d_alpha=float(d_alpha),
        fidelity=float(min(1.0, abs(c[0]))),
        weights=weights,
        residual_weight=residual,
        level_weights=level_weights,
        level_slices=slices,
        subspace_fidelity=float(min(1.0, np.sqrt(level_weights[0]))),
        gs_degenerate=(gs_sl.stop - gs_sl.start) > 1,
    )


def fidelity_susceptibility(f: float, d_alpha: float) -> float:
    """chi_F = 2 (1 - F) / d_alpha^2."""
    if not 0.0 <= f <= 1.0:
        raise ValidationError(f"fidelity must lie in [0, 1], got {f}")
    if d_alpha == 0:
        raise ZeroDivisionError("d_alpha must be nonzero")
    if d_alpha < 0:
        raise ValidationError(f"d_alpha must be > 0, got {d_alpha}")
    return 2.0 * (1.0 - f) / (d_alpha * d_alpha)
