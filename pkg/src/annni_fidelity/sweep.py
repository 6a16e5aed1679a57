"""Alpha sweeps at fixed B_x, (alpha, B_x) grids, and their on-disk outputs.

Every grid point is solved independently (Spectrum at alpha, then at
alpha + d_alpha warm-started from it), so results do not depend on the
worker count or on the order points are computed in.

sweep.csv columns, in order (k = solver pair count):

    alpha                 grid point
    E0 .. E{k-1}          lowest eigenvalues at alpha, ascending
    F                     |<psi0(alpha)|psi0(alpha + d_alpha)>| for the canonical GS
    chi_F                 2 (1 - F) / d_alpha^2
    w1 .. w{k-1}          |C_m|^2 summed over distinct level m of H(alpha + d_alpha)
                          (exact +-k doublets count as one level; nan if absent)
    residual_weight       1 - F^2 - sum of all computed per-state weights
    gap01, gap12          L1 - L0 and L2 - L1 between distinct levels at alpha
    converged             true when both solves met the residual tolerance
    F_subspace            norm of the projection onto the GS level of H(alpha + d_alpha)
    gs_degenerate         true when that GS level has more than one state
    label0 .. label{k-1}  momentum |k| (units of 2pi/N) and spin-flip parity per state
    matvecs               operator applications spent on the point

Floats are written with 17 significant digits so they round-trip exactly.
"""
from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .crossings import (GAP_TOL, MANIFOLD_TOL, PROMINENCE_TOL, RESOLUTION, CrossingReport,
                        detect, level_set, tracked_gap, window_gap)
from .errors import ValidationError
from .fidelity import decompose, fidelity_susceptibility
from .hilbert import ChainSpec
from .lanczos import SolverConfig, lanczos_lowest

log = logging.getLogger(__name__)

CSV_NAME = "sweep.csv"
REPORT_NAME = "crossings.json"


@dataclass(frozen=True)
class SweepSpec:
    chain: ChainSpec
    alpha_min: float = 0.2
    alpha_max: float = 0.8
    grid_points: int = 241
    d_alpha: float = 1e-3
    solver: SolverConfig = field(default_factory=SolverConfig)
    workers: int = 1
    output_dir: str = "sweep_out"
    gap_tol: float = GAP_TOL
    resolution: float = RESOLUTION
    prominence_tol: float = PROMINENCE_TOL
    match_radius: float | None = None
    manifold_tol: float = MANIFOLD_TOL
    backend: str | None = None

    def __post_init__(self):
        if int(self.grid_points) != self.grid_points or self.grid_points < 3:
            raise ValidationError(f"grid_points must be an integer >= 3, got {self.grid_points}")
        if not (np.isfinite(self.alpha_min) and np.isfinite(self.alpha_max)):
            raise ValidationError("alpha bounds must be finite")
        if not self.alpha_min < self.alpha_max:
            raise ValidationError(f"alpha_min {self.alpha_min} must be < alpha_max {self.alpha_max}")
        if self.alpha_min < 0:
            raise ValidationError("alpha_min must be >= 0")
        if not (np.isfinite(self.d_alpha) and self.d_alpha > 0):
            raise ValidationError(f"d_alpha must be > 0, got {self.d_alpha}")
        if not self.d_alpha < self.spacing:
            raise ValidationError(f"d_alpha {self.d_alpha} must be below the grid spacing {self.spacing}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ValidationError(f"workers must be an integer >= 1, got {self.workers}")
        if self.match_radius is not None and self.match_radius < self.spacing * (1 - 1e-9):
            raise ValidationError(f"match_radius {self.match_radius} is below the grid spacing")
        for name in ("gap_tol", "resolution", "prominence_tol", "manifold_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0")

    @property
    def spacing(self) -> float:
        return (self.alpha_max - self.alpha_min) / (self.grid_points - 1)

    @property
    def alphas(self) -> np.ndarray:
        return np.linspace(self.alpha_min, self.alpha_max, self.grid_points)


@dataclass
class SweepRow:
    alpha: float
    energies: list
    fidelity: float
    chi_f: float
    weights: list
    residual_weight: float
    gap01: float
    gap12: float
    converged: bool
    fidelity_subspace: float
    gs_degenerate: bool
    labels: list
    matvecs: int


def csv_columns(k: int) -> list[str]:
    return (["alpha"] + [f"E{i}" for i in range(k)] + ["F", "chi_F"]
            + [f"w{i}" for i in range(1, k)]
            + ["residual_weight", "gap01", "gap12", "converged", "F_subspace", "gs_degenerate"]
            + [f"label{i}" for i in range(k)] + ["matvecs"])


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def row_to_record(row: SweepRow, k: int) -> list[str]:
    energies = list(row.energies) + [np.nan] * (k - len(row.energies))
    labels = list(row.labels) + [""] * (k - len(row.labels))
    values = ([row.alpha] + energies + [row.fidelity, row.chi_f] + list(row.weights)
              + [row.residual_weight, row.gap01, row.gap12, bool(row.converged),
                 row.fidelity_subspace, bool(row.gs_degenerate)] + labels + [int(row.matvecs)])
    return [_fmt(v) for v in values]


def record_to_row(rec: dict, k: int) -> SweepRow:
    def b(s):
        if s not in ("true", "false"):
            raise ValidationError(f"bad boolean {s!r} in sweep table")
        return s == "true"
    return SweepRow(
        alpha=float(rec["alpha"]),
        energies=[float(rec[f"E{i}"]) for i in range(k)],
        fidelity=float(rec["F"]),
        chi_f=float(rec["chi_F"]),
        weights=[float(rec[f"w{i}"]) for i in range(1, k)],
        residual_weight=float(rec["residual_weight"]),
        gap01=float(rec["gap01"]),
        gap12=float(rec["gap12"]),
        converged=b(rec["converged"]),
        fidelity_subspace=float(rec["F_subspace"]),
        gs_degenerate=b(rec["gs_degenerate"]),
        labels=[rec[f"label{i}"] for i in range(k)],
        matvecs=int(rec["matvecs"]),
    )


def infer_k(header: list[str]) -> int:
    k = sum(1 for h in header if h.startswith("E") and h[1:].isdigit())
    if k < 1 or header != csv_columns(k):
        raise ValidationError("sweep table header does not match the documented column layout")
    return k


def read_table(path) -> tuple[int, list[SweepRow]]:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"sweep table {path} does not exist")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"sweep table {path} is empty") from None
        k = infer_k(header)
        rows = [record_to_row(dict(zip(header, rec)), k) for rec in reader if rec]
    return k, rows


def write_table(path, rows: list[SweepRow], k: int) -> None:
    path = Path(path)
    tmp = path.with_suffix(".csv.tmp")
    with tmp.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_columns(k))
        for row in sorted(rows, key=lambda r: r.alpha):
            w.writerow(row_to_record(row, k))
    os.replace(tmp, path)


# --- per-point work ---------------------------------------------------------------

def compute_point(chain: ChainSpec, alpha: float, d_alpha: float, cfg: SolverConfig,
                  backend: str | None = None) -> SweepRow:
    k = cfg.k
    sa = lanczos_lowest(chain.with_alpha(alpha), cfg, backend=backend)
    sb = lanczos_lowest(chain.with_alpha(alpha + d_alpha), cfg, backend=backend, warm=sa)
    dec = decompose(sa.ground_state, sb, alpha=alpha, d_alpha=d_alpha, require_converged=False)
    ls = level_set(sa.eigenvalues, sa.labels, chain.bx)
    gaps = [ls.energies[m + 1] - ls.energies[m] if m + 1 < len(ls) else np.nan for m in (0, 1)]
    weights = [float(dec.level_weights[m]) if m < len(dec.level_weights) else np.nan
               for m in range(1, k)]
    return SweepRow(
        alpha=float(alpha),
        energies=[float(e) for e in sa.eigenvalues],
        fidelity=dec.fidelity,
        chi_f=fidelity_susceptibility(dec.fidelity, d_alpha),
        weights=weights,
        residual_weight=dec.residual_weight,
        gap01=float(gaps[0]),
        gap12=float(gaps[1]),
        converged=bool(sa.converged and sb.converged),
        fidelity_subspace=dec.subspace_fidelity,
        gs_degenerate=dec.gs_degenerate,
        labels=list(sa.labels),
        matvecs=int(sa.iterations_used + sb.iterations_used),
    )


def _point_task(args):
    return compute_point(*args)


class GapProbe:
    """Re-solved gap across a level window, for crossing refinement.

    The spectrum at the anchor grid point is solved lazily (inside the
    worker) and warm-starts every probe, so probes are deterministic.
    """

    def __init__(self, chain: ChainSpec, cfg: SolverConfig, anchor_alpha: float,
                 start: int, width: int, backend: str | None = None):
        self.chain = chain
        self.cfg = cfg
        self.anchor_alpha = float(anchor_alpha)
        self.start = start
        self.width = width
        self.backend = backend
        self._anchor = None

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_anchor"] = None
        return state

    def __call__(self, alpha: float) -> float:
        if self._anchor is None:
            self._anchor = lanczos_lowest(self.chain.with_alpha(self.anchor_alpha), self.cfg,
                                          backend=self.backend)
        sp = lanczos_lowest(self.chain.with_alpha(alpha), self.cfg, backend=self.backend,
                            warm=self._anchor)
        return window_gap(sp.eigenvalues, self.start, self.width)


class TrackedGapProbe(GapProbe):
    """Re-solved |E_y - E_x| between two labelled levels (see ``tracked_gap``)."""

    def __init__(self, chain, cfg, anchor_alpha, x, nx, y, ny, backend=None):
        super().__init__(chain, cfg, anchor_alpha, 0, 0, backend)
        self.track = (x, nx, y, ny)

    def __call__(self, alpha: float) -> float:
        if self._anchor is None:
            self._anchor = lanczos_lowest(self.chain.with_alpha(self.anchor_alpha), self.cfg,
                                          backend=self.backend)
        sp = lanczos_lowest(self.chain.with_alpha(alpha), self.cfg, backend=self.backend,
                            warm=self._anchor)
        return tracked_gap(sp.eigenvalues, sp.labels, self.chain.bx, *self.track)


class GroundProbe(GapProbe):
    """Re-solved E0, for locating kinks of the ground-state energy."""

    def __init__(self, chain, cfg, anchor_alpha, backend=None):
        super().__init__(chain, cfg, anchor_alpha, 0, 0, backend)

    def __call__(self, alpha: float) -> float:
        if self._anchor is None:
            self._anchor = lanczos_lowest(self.chain.with_alpha(self.anchor_alpha), self.cfg,
                                          backend=self.backend)
        sp = lanczos_lowest(self.chain.with_alpha(alpha), self.cfg, backend=self.backend,
                            warm=self._anchor)
        return float(sp.eigenvalues[0])


def analyze(spec: SweepSpec, rows: list[SweepRow], mapper=map) -> CrossingReport:
    rows = sorted(rows, key=lambda r: r.alpha)
    alphas = np.array([r.alpha for r in rows])
    levels = [level_set(np.array(r.energies), r.labels, spec.chain.bx) for r in rows]
    f_curve = np.clip([r.fidelity for r in rows], 0.0, 1.0)

    def make_gap_fn(i, start, width):
        return GapProbe(spec.chain, spec.solver, alphas[i], start, width, spec.backend)

    def make_tracked_fn(i, x, nx, y, ny):
        return TrackedGapProbe(spec.chain, spec.solver, alphas[i], x, nx, y, ny, spec.backend)

    def make_e0_fn(i):
        return GroundProbe(spec.chain, spec.solver, alphas[i], spec.backend)

    tracked = make_tracked_fn if spec.chain.bx != 0 else None
    return detect(alphas, levels, f_curve, make_gap_fn, k=spec.solver.k,
                  make_tracked_fn=tracked, make_e0_fn=make_e0_fn, gap_tol=spec.gap_tol,
                  resolution=spec.resolution, prominence_tol=spec.prominence_tol,
                  match_radius=spec.match_radius, manifold_tol=spec.manifold_tol, mapper=mapper)


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow]
    report: CrossingReport
    csv_path: Path
    report_path: Path
    plot_paths: list[Path]

    @property
    def unconverged(self) -> list[float]:
        return [r.alpha for r in self.rows if not r.converged]

    @property
    def alphas(self) -> np.ndarray:
        return np.array([r.alpha for r in self.rows])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def weight(self, m: int) -> np.ndarray:
        return np.array([r.weights[m - 1] for r in self.rows], dtype=float)


def _prepare_output(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ValidationError(f"output directory {path} is not writable")


def _existing_rows(csv_path: Path, spec: SweepSpec) -> dict[str, SweepRow]:
    if not csv_path.exists():
        return {}
    try:
        k, rows = read_table(csv_path)
    except (ValidationError, ValueError, KeyError) as exc:
        log.warning("ignoring unreadable %s: %s", csv_path, exc)
        return {}
    if k != spec.solver.k:
        log.warning("ignoring %s: it was written with k=%d", csv_path, k)
        return {}
    return {_fmt(r.alpha): r for r in rows}


def report_document(spec: SweepSpec, report: CrossingReport, rows: list[SweepRow]) -> dict:
    doc = {
        "n_sites": spec.chain.n_sites,
        "bx": spec.chain.bx,
        "j1": spec.chain.j1,
        "alpha_min": spec.alpha_min,
        "alpha_max": spec.alpha_max,
        "grid_points": spec.grid_points,
        "d_alpha": spec.d_alpha,
        "k": spec.solver.k,
        "tol": spec.solver.tol,
        "seed": spec.solver.seed,
    }
    doc.update(report.to_dict())
    doc["unconverged_alphas"] = [r.alpha for r in rows if not r.converged]
    return doc


def run_sweep(spec: SweepSpec, *, resume: bool = False, emit: bool = True, progress=None) -> SweepResult:
    from .plots import emit_plots

    out = Path(spec.output_dir)
    _prepare_output(out)
    csv_path = out / CSV_NAME
    k = spec.solver.k
    alphas = spec.alphas
    have = _existing_rows(csv_path, spec) if resume else {}
    rows = {key: have[key] for key in (_fmt(a) for a in alphas) if key in have}
    todo = [float(a) for a in alphas if _fmt(a) not in rows]
    log.info("N=%d bx=%g: %d points to compute, %d reused", spec.chain.n_sites, spec.chain.bx,
             len(todo), len(rows))

    tasks = [(spec.chain, a, spec.d_alpha, spec.solver, spec.backend) for a in todo]
    pool = ProcessPoolExecutor(spec.workers) if spec.workers > 1 else None
    mapper = pool.map if pool is not None else map
    try:
        # rows are appended as they arrive so an interrupted run can resume
        fresh = not resume or not csv_path.exists() or not have
        with csv_path.open("w" if fresh else "a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if fresh:
                w.writerow(csv_columns(k))
                for r in rows.values():
                    w.writerow(row_to_record(r, k))
            for n, row in enumerate(mapper(_point_task, tasks), 1):
                rows[_fmt(row.alpha)] = row
                w.writerow(row_to_record(row, k))
                fh.flush()
                if progress is not None:
                    progress(n, len(tasks), row)
        ordered = sorted(rows.values(), key=lambda r: r.alpha)
        write_table(csv_path, ordered, k)
        report = analyze(spec, ordered, mapper)
    finally:
        if pool is not None:
            pool.shutdown()

    report_path = out / REPORT_NAME
    with report_path.open("w") as fh:
        json.dump(report_document(spec, report, ordered), fh, indent=2, sort_keys=False,
                  default=float)
        fh.write("\n")
    plot_paths = emit_plots(csv_path, out, report_path) if emit else []
    return SweepResult(spec, ordered, report, csv_path, report_path, plot_paths)


def bx_values(bx_min: float, bx_max: float, bx_points: int) -> np.ndarray:
    if int(bx_points) != bx_points or bx_points < 1:
        raise ValidationError(f"bx_points must be an integer >= 1, got {bx_points}")
    if bx_min < 0 or bx_max < bx_min or (bx_points > 1 and bx_max == bx_min):
        raise ValidationError(f"invalid B_x range [{bx_min}, {bx_max}] with {bx_points} points")
    if bx_points == 1:
        return np.array([float(bx_min)])
    return np.linspace(bx_min, bx_max, bx_points)


def run_grid(spec: SweepSpec, bx_min: float, bx_max: float, bx_points: int, *,
             resume: bool = False, emit: bool = True, progress=None) -> list[SweepResult]:
    """One independent sweep per B_x value, in ``output_dir/bx_<value>``.

    With a single B_x value the sweep is written straight to ``output_dir``,
    identical to ``run_sweep``.
    """
    values = bx_values(bx_min, bx_max, bx_points)
    if len(values) == 1:
        sub = replace(spec, chain=spec.chain.with_bx(values[0]))
        return [run_sweep(sub, resume=resume, emit=emit, progress=progress)]
    results = []
    for bx in values:
        sub = replace(spec, chain=spec.chain.with_bx(bx),
                      output_dir=str(Path(spec.output_dir) / f"bx_{_fmt(bx)}"))
        results.append(run_sweep(sub, resume=resume, emit=emit, progress=progress))
    summary = {
        "slices": [
            {"bx": r.spec.chain.bx, "output_dir": str(r.csv_path.parent),
             "gs_crossings": [c.alpha for c in r.report.gs_crossings],
             "es_crossings": [c.alpha for c in r.report.es_crossings],
             "unconverged": len(r.unconverged)}
            for r in results
        ]
    }
    with (Path(spec.output_dir) / "grid.json").open("w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return results
