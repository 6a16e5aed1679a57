"""One test per acceptance criterion; each prints a PASS/FAIL line.

Long B_x = 0.2 sweeps (N = 12, 16, 20; 241 points over [0.2, 0.8]) are
kept in ANNNI_SWEEP_CACHE (default: .sweep_cache at the repository root).
N = 12 and N = 16 rows are reused but their crossing analysis is always
redone; the N = 20 report is reused as written by ``run_sweep`` unless
ANNNI_FRESH=1.  A missing cache is simply computed.
"""
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import annni_fidelity.lanczos as lanczos
from annni_fidelity.crossings import CRITICAL, SPURIOUS_ES
from annni_fidelity.fidelity import decompose, fidelity
from annni_fidelity.hilbert import ChainSpec, Hamiltonian, spin_flip, translate
from annni_fidelity.lanczos import SolverConfig, dense_lowest, lanczos_lowest
from annni_fidelity.sweep import (CSV_NAME, REPORT_NAME, SweepSpec, compute_point, read_table,
                                  run_sweep)

from conftest import ACCEPTANCE

ROOT = Path(__file__).resolve().parent.parent
CACHE = Path(os.environ.get("ANNNI_SWEEP_CACHE", ROOT / ".sweep_cache"))
FRESH = os.environ.get("ANNNI_FRESH") == "1"

# tolerances
ALPHA_C1, ALPHA_C2, CRIT_TOL = 0.42, 0.64, 0.02
SPURIOUS = {12: 0.47, 16: 0.51}
SPURIOUS_TOL = 0.01
GRID_STEP = 0.0025
SHIFT_TOL = 0.02
ZERO_FIELD_TOL, ZERO_FIELD_GAP = 1e-5, 1e-10
IDENTITY_TOL = 1e-10
SOLVER_TOL, RESIDUAL_TOL = 1e-9, 1e-10
N12_BUDGET, N20_BUDGET = 120.0, 1800.0
DESKTOP_CORES = 8
EPS = 1e-12     # grid values like 0.6200000000000001


def record(n, ok, msg):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {msg}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


@dataclass
class Sweep:
    n: int
    alphas: np.ndarray
    fidelity: np.ndarray
    w23: np.ndarray
    doc: dict
    seconds: float | None = None

    def gs(self):
        return [c["alpha"] for c in self.doc["gs_crossings"]]

    def es(self):
        return [c["alpha"] for c in self.doc["es_crossings"]]

    def drops(self, kind=None):
        return [d for d in self.doc["fidelity_drops"] if kind is None or d["classification"] == kind]


def _spec(n, out):
    return SweepSpec(ChainSpec(n, 0.2, 0.2), output_dir=str(out))


def _matches(doc, spec):
    return (doc.get("n_sites") == spec.chain.n_sites and doc.get("bx") == spec.chain.bx
            and doc.get("grid_points") == spec.grid_points and doc.get("alpha_min") == spec.alpha_min
            and doc.get("alpha_max") == spec.alpha_max and doc.get("d_alpha") == spec.d_alpha
            and doc.get("k") == spec.solver.k and doc.get("tol") == spec.solver.tol)


def _from_disk(n, out, seconds=None):
    _, rows = read_table(out / CSV_NAME)
    doc = json.loads((out / REPORT_NAME).read_text())
    return Sweep(n, np.array([r.alpha for r in rows]), np.array([r.fidelity for r in rows]),
                 np.array([r.weights[1] + r.weights[2] for r in rows]), doc, seconds)


_sweeps = {}


def sweep(n):
    if n in _sweeps:
        return _sweeps[n]
    out = CACHE / f"n{n}_bx0.2"
    spec = _spec(n, out)
    reuse_report = n == 20 and not FRESH and (out / REPORT_NAME).exists()
    if reuse_report:
        doc = json.loads((out / REPORT_NAME).read_text())
        _, rows = read_table(out / CSV_NAME)
        reuse_report = _matches(doc, spec) and len(rows) == spec.grid_points
    if not reuse_report:
        t = time.perf_counter()
        run_sweep(spec, resume=not FRESH)
        _sweeps[n] = _from_disk(n, out, time.perf_counter() - t)
    else:
        _sweeps[n] = _from_disk(n, out)
    return _sweeps[n]


def _near(values, target, tol):
    return [v for v in values if abs(v - target) <= tol + EPS]


# -- 1 --------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_1_critical_points(tmp_path):
    msgs, ok = [], True
    for n in (12, 16, 20):
        s = sweep(n)
        crit = [d["alpha"] for d in s.drops(CRITICAL)]
        c1, c2 = _near(crit, ALPHA_C1, CRIT_TOL), _near(crit, ALPHA_C2, CRIT_TOL)
        ok &= bool(c1) and bool(c2)
        msgs.append(f"N={n} critical drops {[round(a, 4) for a in crit]}")

    # timing: a fresh N = 12 sweep, and N = 20 per-point cost scaled to the desktop
    t = time.perf_counter()
    run_sweep(_spec(12, tmp_path / "n12"), emit=False)
    t12 = time.perf_counter() - t
    cfg = SolverConfig()
    chain = ChainSpec(20, 0.2, 0.2)
    t = time.perf_counter()
    probes = (0.3, 0.5, 0.7)
    for a in probes:
        compute_point(chain, a, 1e-3, cfg)
    per_point = (time.perf_counter() - t) / len(probes)
    t20 = per_point * 241 / DESKTOP_CORES
    ok &= t12 < N12_BUDGET and t20 < N20_BUDGET
    msgs.append(f"N=12 sweep {t12:.0f}s (<{N12_BUDGET:.0f}s)")
    msgs.append(f"N=20 {per_point:.1f}s/point on 1 core -> {241 * per_point / 60:.0f} min serial, "
                f"{t20 / 60:.1f} min with {DESKTOP_CORES} workers (<{N20_BUDGET / 60:.0f} min)")
    record(1, ok, "; ".join(msgs))


# -- 2 and 3 --------------------------------------------------------------------

def _spurious_drop(s):
    target = SPURIOUS[s.n]
    drops = s.drops()
    return min(drops, key=lambda d: abs(d["alpha"] - target)) if drops else None


@pytest.mark.slow
def test_criterion_2_spurious_drops():
    msgs, ok = [], True
    for n in (12, 16):
        d = _spurious_drop(sweep(n))
        good = (d is not None and abs(d["alpha"] - SPURIOUS[n]) <= SPURIOUS_TOL + EPS
                and d["classification"] == SPURIOUS_ES)
        ok &= good
        msgs.append(f"N={n} F min at {d and round(d['alpha'], 4)} ({d and d['classification']}),"
                    f" target {SPURIOUS[n]}+-{SPURIOUS_TOL}")
    record(2, ok, "; ".join(msgs))


@pytest.mark.slow
def test_criterion_3_weight_coincidence():
    def basin_argmax(s, d):
        lo, hi = d["left_base"], d["right_base"] + 1
        return s.alphas[lo + int(np.nanargmax(s.w23[lo:hi]))]

    msgs, ok = [], True
    for n in (12, 16):
        s = sweep(n)
        d = _spurious_drop(s)
        a = basin_argmax(s, d)
        ok &= abs(a - d["alpha"]) <= GRID_STEP + EPS
        msgs.append(f"N={n} argmax |C2|^2+|C3|^2 at {a:.4f} vs F min {d['alpha']:.4f}")
    # no reference positions at N=20, so every spurious drop must coincide
    s = sweep(20)
    for d in s.drops(SPURIOUS_ES):
        a = basin_argmax(s, d)
        ok &= abs(a - d["alpha"]) <= GRID_STEP + EPS
        msgs.append(f"N=20 argmax at {a:.4f} vs F min {d['alpha']:.4f}")
    record(3, ok, "; ".join(msgs))


# -- 4 --------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_4_size_trend():
    sweeps = [sweep(n) for n in (12, 16, 20)]
    counts, msgs, ok = [], [], True
    for s in sweeps:
        gs = s.gs()
        c1 = min(gs, key=lambda a: abs(a - ALPHA_C1))
        c2 = min(gs, key=lambda a: abs(a - ALPHA_C2))
        counts.append(sum(c1 < a < c2 for a in s.es()))
        msgs.append(f"N={s.n} GS {[round(a, 4) for a in gs]} ES {[round(a, 4) for a in s.es()]}")
    ok &= all(a <= b for a, b in zip(counts, counts[1:]))
    shifts = []
    for target in (ALPHA_C1, ALPHA_C2):
        locs = [min(s.gs(), key=lambda a: abs(a - target)) for s in sweeps]
        shifts.extend(abs(b - a) for a, b in zip(locs, locs[1:]))
    ok &= max(shifts) < SHIFT_TOL
    msgs.insert(0, f"ES counts {counts}, max GS shift {max(shifts):.4f} (limit {SHIFT_TOL})")
    record(4, ok, "; ".join(msgs))


# -- 5 --------------------------------------------------------------------------

def test_criterion_5_zero_field(tmp_path):
    msgs, ok = [], True
    for n in (8, 10, 12):
        rep = run_sweep(SweepSpec(ChainSpec(n, 0.2, 0.0), output_dir=str(tmp_path / f"z{n}")),
                        emit=False).report
        gs = rep.gs_crossings
        good = (len(gs) == 1 and abs(gs[0].alpha - 0.5) <= ZERO_FIELD_TOL
                and gs[0].gap <= ZERO_FIELD_GAP)
        ok &= good
        msgs.append(f"N={n} " + (", ".join(f"{c.alpha:.8f} (gap {c.gap:.1e})" for c in gs) or "none"))
    record(5, ok, "; ".join(msgs))


# -- 6 --------------------------------------------------------------------------

def test_criterion_6_identity():
    rng = np.random.default_rng(2024)
    worst_f, worst_r = 0.0, 0.0
    for _ in range(20):
        alpha = rng.uniform(0.0, 1.0)
        d_alpha = rng.uniform(1e-4, 1e-2)
        chain = ChainSpec(10, alpha, 0.2)
        a = dense_lowest(chain)
        b = dense_lowest(chain.with_alpha(alpha + d_alpha))
        dec = decompose(a.ground_state, b)
        worst_f = max(worst_f, abs(dec.fidelity - np.sqrt(1 - dec.weights[1:].sum())))
        worst_r = max(worst_r, abs(dec.residual_weight))
    ok = worst_f <= IDENTITY_TOL and worst_r <= IDENTITY_TOL
    record(6, ok, f"N=10, 20 draws: max |F - sqrt(1 - sum w)| {worst_f:.1e}, "
                  f"max |residual_weight| {worst_r:.1e} (<= {IDENTITY_TOL:.0e})")


# -- 7 --------------------------------------------------------------------------

def test_criterion_7_solver_oracle(monkeypatch):
    # force Krylov iterations inside every sector, not the small-sector dense path
    monkeypatch.setattr(lanczos, "SECTOR_DENSE_DIM", 0)
    rng = np.random.default_rng(7)
    worst = {"full": [0.0, 0.0], "sectors": [0.0, 0.0]}
    for _ in range(50):
        spec = ChainSpec(8, rng.uniform(0.0, 1.2), rng.uniform(0.0, 1.0))
        ref = dense_lowest(spec, 6).eigenvalues
        seed = int(rng.integers(2**31))
        for method in worst:
            sp = lanczos_lowest(spec, SolverConfig(k=6, seed=seed, method=method))
            worst[method][0] = max(worst[method][0], float(np.max(np.abs(sp.eigenvalues - ref))))
            worst[method][1] = max(worst[method][1], float(np.max(sp.residual_norms)))
    ok = all(e <= SOLVER_TOL and r <= RESIDUAL_TOL for e, r in worst.values())
    record(7, ok, "; ".join(f"{m}: max |dE| {e:.1e}, max residual {r:.1e}"
                            for m, (e, r) in worst.items()))


# -- 8 --------------------------------------------------------------------------

_props = {}


def _prop(name):
    def deco(fn):
        def run():
            try:
                settings(max_examples=25, deadline=None)(fn)()
                _props[name] = True
            except Exception:
                _props[name] = False
                raise
        return run
    return deco


@_prop("hermiticity")
@given(st.floats(0, 1.2), st.floats(0, 1), st.integers(0, 2**31))
def _hermitian(alpha, bx, seed):
    h = Hamiltonian(ChainSpec(8, alpha, bx))
    u, v = np.random.default_rng(seed).standard_normal((2, 256))
    assert abs(u @ h.matvec(v) - v @ h.matvec(u)) <= 1e-12 * (1 + abs(u @ h.matvec(v)))


@_prop("linearity")
@given(st.floats(0, 1.2), st.floats(0, 1), st.floats(-2, 2), st.integers(0, 2**31))
def _linear(alpha, bx, c, seed):
    h = Hamiltonian(ChainSpec(8, alpha, bx))
    u, v = np.random.default_rng(seed).standard_normal((2, 256))
    assert np.allclose(h.matvec(c * u + v), c * h.matvec(u) + h.matvec(v), atol=1e-11)


@_prop("translation/Z2")
@given(st.floats(0, 1.2), st.floats(0, 1), st.integers(0, 2**31))
def _symmetric(alpha, bx, seed):
    h = Hamiltonian(ChainSpec(8, alpha, bx))
    v = np.random.default_rng(seed).standard_normal(256)
    hv = h.matvec(v)
    assert np.allclose(h.matvec(translate(v, 8)), translate(hv, 8), atol=1e-12)
    assert np.allclose(h.matvec(spin_flip(v)), spin_flip(hv), atol=1e-12)


@_prop("gauge")
@given(st.floats(0, 1.2), st.floats(0.01, 1), st.sampled_from([-1.0, 1.0]))
def _gauge(alpha, bx, sign):
    chain = ChainSpec(8, alpha, bx)
    a = lanczos_lowest(chain, SolverConfig(k=2)).ground_state
    b = lanczos_lowest(chain.with_alpha(alpha + 1e-3), SolverConfig(k=2)).ground_state
    assert abs(fidelity(sign * a, -sign * b) - fidelity(a, b)) <= 1e-15


@_prop("multiplet weights")
@given(st.floats(0, 2 * np.pi))
def _multiplet(theta):
    import dataclasses
    chain = ChainSpec(8, 0.3, 0.2)
    a = lanczos_lowest(chain, SolverConfig(k=6))
    b = lanczos_lowest(chain.with_alpha(0.6), SolverConfig(k=6))
    sl = next(s for s in b.levels() if s.stop - s.start == 2)
    i, j = sl.start, sl.start + 1
    vecs = b.eigenvectors.copy()
    c, s = np.cos(theta), np.sin(theta)
    vecs[:, i] = c * b.eigenvectors[:, i] - s * b.eigenvectors[:, j]
    vecs[:, j] = s * b.eigenvectors[:, i] + c * b.eigenvectors[:, j]
    rot = dataclasses.replace(b, eigenvectors=vecs)
    assert np.allclose(decompose(a.ground_state, b).level_weights,
                       decompose(a.ground_state, rot).level_weights, atol=1e-14)


def test_criterion_8_properties(tmp_path):
    failures = []
    for fn in (_hermitian, _linear, _symmetric, _gauge, _multiplet):
        try:
            fn()
        except Exception as exc:   # collected and reported below
            failures.append(repr(exc)[:120])
    spec = SweepSpec(ChainSpec(8, 0.3, 0.2), alpha_min=0.3, alpha_max=0.4, grid_points=6)
    a = run_sweep(SweepSpec(**{**spec.__dict__, "output_dir": str(tmp_path / "a")}), emit=False)
    b = run_sweep(SweepSpec(**{**spec.__dict__, "output_dir": str(tmp_path / "b")}), emit=False)
    _props["sweep determinism"] = a.csv_path.read_bytes() == b.csv_path.read_bytes()
    ok = all(_props.values()) and not failures
    record(8, ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in _props.items()))
