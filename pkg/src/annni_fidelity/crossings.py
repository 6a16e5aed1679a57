"""Level crossings, fidelity drops and their classification along an alpha sweep.

Level curves L0 < L1 < L2 are distinct levels, not raw eigenvalue slots:
exact +-k doublets count once.  Crossings of L0/L1 are ground-state
crossings.  At B_x > 0 the ground state itself never changes sector on
these chains; the transition shows up instead as the first excited level
L1 leaving (or joining) the quasi-degenerate partner set of the ground
state, the levels that collapse onto E0 as N grows.  An L1/L2 crossing that
changes whether L1 is such a partner is therefore also reported as a
ground-state crossing.  Every other L1/L2 crossing is an excited-state
crossing.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .errors import ValidationError
from .lanczos import DEGENERACY_TOL, group_levels

GAP_TOL = 1e-7
RESOLUTION = 1e-5
PROMINENCE_TOL = 1e-4
MANIFOLD_TOL = 1e-2
MATCH_RADIUS_STEPS = 5
KINK_TOL = 1e-9

CRITICAL = "critical"
SPURIOUS_ES = "spurious_es"
UNMATCHED = "unmatched"

_INVGOLD = (math.sqrt(5.0) - 1.0) / 2.0


def check_grid(alphas, min_points: int = 3) -> np.ndarray:
    a = np.asarray(alphas, dtype=np.float64)
    if a.ndim != 1 or len(a) < min_points:
        raise ValidationError(f"need at least {min_points} grid points, got {a.size}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("grid contains non-finite values")
    if np.any(np.diff(a) <= 0):
        raise ValidationError("alpha grid must be strictly increasing")
    return a


# --- level curves ---------------------------------------------------------------

@dataclass(frozen=True)
class LevelSet:
    """Distinct levels of one spectrum: energy, first state index, size, label."""

    energies: tuple
    starts: tuple
    sizes: tuple
    labels: tuple

    def __len__(self):
        return len(self.energies)


def level_set(eigenvalues, labels=None, bx: float | None = None,
              tol: float = DEGENERACY_TOL) -> LevelSet:
    merge = labels is None or bx == 0
    slices = group_levels(np.asarray(eigenvalues), tol, None if merge else list(labels))
    return LevelSet(
        energies=tuple(float(eigenvalues[sl.start]) for sl in slices),
        starts=tuple(sl.start for sl in slices),
        sizes=tuple(sl.stop - sl.start for sl in slices),
        labels=tuple("" if labels is None else labels[sl.start] for sl in slices),
    )


def level_curve(levels: list[LevelSet], m: int) -> np.ndarray:
    """Energy of distinct level m along the sweep; NaN where it was not computed."""
    return np.array([ls.energies[m] if m < len(ls) else np.nan for ls in levels])


def tracked_gap(eigenvalues, labels, bx, x: str, nx: int, y: str, ny: int) -> float:
    """|E_y - E_x| between the nx-th level labelled x and the ny-th labelled y.

    Follows two symmetry sectors through a crossing no matter how other
    levels reorder around them; inf if either level is not in the window.
    """
    ls = level_set(eigenvalues, labels, bx)
    found = {}
    for lab, n in ((x, nx), (y, ny)):
        hits = [e for e, l in zip(ls.energies, ls.labels) if l == lab]
        if len(hits) <= n:
            return float("inf")
        found[lab, n] = hits[n]
    return float(abs(found[y, ny] - found[x, nx]))


def window_gap(eigenvalues, start: int, width: int) -> float:
    """Largest gap between neighbouring eigenvalues in [start, start + width).

    For two levels occupying ``width`` consecutive slots this is their
    separation on either side of a crossing and zero at it, without having
    to know which level is which.
    """
    e = np.asarray(eigenvalues)[start:start + width]
    if len(e) < 2:
        return float("nan")
    return float(np.max(np.diff(e)))


# --- refinement -----------------------------------------------------------------

def golden_section(fn, a: float, b: float, resolution: float, samples: dict | None = None):
    """Minimize fn on [a, b] until the bracket is narrower than ``resolution``.

    Returns (x_best, f_best, bracket, samples) where samples maps every
    evaluated abscissa to its value.
    """
    samples = {} if samples is None else samples

    def f(x):
        if x not in samples:
            samples[x] = float(fn(x))
        return samples[x]

    c = b - _INVGOLD * (b - a)
    d = a + _INVGOLD * (b - a)
    fc, fd = f(c), f(d)
    while b - a > resolution:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVGOLD * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVGOLD * (b - a)
            fd = f(d)
    x = min((s for s in samples if a <= s <= b), key=lambda s: samples[s], default=c)
    return x, samples[x], (a, b), samples


def _line(p, q):
    (x1, y1), (x2, y2) = p, q
    slope = (y2 - y1) / (x2 - x1)
    return slope, y1 - slope * x1


def vertex_polish(fn, samples: dict, bracket: tuple, rounds: int = 2):
    """Sharpen a V-shaped minimum by intersecting straight lines fitted to its arms.

    Golden-section alone stalls at gap ~ slope * resolution; the arms of a
    true crossing are locally straight, so their intersection lands within
    curvature * resolution^2 of the vertex.
    """
    a, b = bracket
    for _ in range(rounds):
        left = sorted(x for x in samples if x <= a)[-2:]
        right = sorted(x for x in samples if x >= b)[:2]
        if len(left) < 2 or len(right) < 2:
            break
        s1, c1 = _line(*[(x, samples[x]) for x in left])
        s2, c2 = _line(*[(x, samples[x]) for x in right])
        if not (s1 < 0 < s2):
            break
        xv = (c2 - c1) / (s1 - s2)
        if not left[-1] < xv < right[0] or xv in samples:
            break
        samples[xv] = float(fn(xv))
        # the new point tightens whichever arm it fell on
        best = min(samples, key=samples.get)
        if best != xv:
            break
        lo = max((x for x in samples if x < xv), default=a)
        hi = min((x for x in samples if x > xv), default=b)
        a, b = lo, hi
    best = min(samples, key=samples.get)
    return best, samples[best]


@dataclass(frozen=True)
class Crossing:
    alpha: float
    resolution: float
    gap: float
    coarse_gap: float
    level: int = 0                 # between distinct levels `level` and `level + 1`
    kind: str = ""                 # "gs" or "es" once classified
    labels_before: tuple = ()
    labels_after: tuple = ()
    probes: int = 0


def crossing_candidates(alphas, curve_a, curve_b, gap_tol: float = GAP_TOL) -> list[int]:
    """Grid indices of interior local minima of |curve_b - curve_a|.

    The gap must be open (> gap_tol) at both neighbours, which rejects
    stretches where the two curves are degenerate rather than crossing.
    """
    g = np.abs(np.asarray(curve_b, dtype=np.float64) - np.asarray(curve_a, dtype=np.float64))
    out = []
    for i in range(1, len(g) - 1):
        gl, gi, gr = g[i - 1], g[i], g[i + 1]
        if not (np.isfinite(gl) and np.isfinite(gi) and np.isfinite(gr)):
            continue
        if gi < gl and gi <= gr and gl > gap_tol and gr > gap_tol:
            out.append(i)
    return out


def refine_candidate(alphas, coarse_gap: float, i: int, gap_fn, resolution: float = RESOLUTION,
                     level: int = 0, bracket: tuple | None = None) -> Crossing:
    """Golden-section plus vertex polish of gap_fn on [alpha_{i-1}, alpha_{i+1}] (or ``bracket``)."""
    if bracket is None:
        lo, hi, mid = float(alphas[i - 1]), float(alphas[i + 1]), float(alphas[i])
        points = (mid, lo, hi)
    else:
        lo, hi = map(float, bracket)
        points = (lo, hi)
    samples = {x: float(gap_fn(x)) for x in points}
    x, fx, bracket, samples = golden_section(gap_fn, lo, hi, resolution, samples)
    x, fx = vertex_polish(gap_fn, samples, bracket)
    return Crossing(float(min(max(x, lo), hi)), float(resolution), float(fx), float(coarse_gap),
                    level, probes=len(samples))


def refine_kink(alphas, i: int, e0_fn, gap_fn, resolution: float = RESOLUTION) -> Crossing:
    """Locate a kink of E0 in [alpha_{i-1}, alpha_{i+1}] and measure the gap there.

    With E0 concave, chord - E0 is V-shaped with its vertex at the kink, so
    the same golden-section plus vertex polish applies.  ``gap_fn`` is
    evaluated once at the result and decides whether the kink is a crossing.
    """
    lo, hi = float(alphas[i - 1]), float(alphas[i + 1])
    elo, ehi = float(e0_fn(lo)), float(e0_fn(hi))

    def g(x):
        return elo + (ehi - elo) * (x - lo) / (hi - lo) - float(e0_fn(x))

    samples = {lo: 0.0, hi: 0.0, float(alphas[i]): g(float(alphas[i]))}
    x, fx, bracket, samples = golden_section(g, lo, hi, resolution, samples)
    x, fx = vertex_polish(g, samples, bracket)
    x = float(min(max(x, lo), hi))
    return Crossing(x, float(resolution), float(gap_fn(x)), float(-fx), 0,
                    probes=len(samples) + 1)


def find_level_crossings(alphas, curve_a, curve_b, gap_fn=None, gap_tol: float = GAP_TOL,
                         resolution: float = RESOLUTION, *, level: int = 0) -> list[Crossing]:
    """Locate true crossings of two sampled level curves.

    Every candidate from ``crossing_candidates`` is refined by golden-section
    search on ``gap_fn`` (which should re-solve the eigenproblem) followed by
    a vertex polish, and accepted when the refined gap is <= gap_tol.
    Without ``gap_fn`` the sampled curves are interpolated linearly.
    """
    alphas = check_grid(alphas)
    ea = np.asarray(curve_a, dtype=np.float64)
    eb = np.asarray(curve_b, dtype=np.float64)
    if ea.shape != alphas.shape or eb.shape != alphas.shape:
        raise ValidationError("curves must be sampled on the alpha grid")
    if not gap_tol > 0 or not resolution > 0:
        raise ValidationError("gap_tol and resolution must be > 0")
    if gap_fn is None:
        def gap_fn(x):
            return abs(np.interp(x, alphas, eb) - np.interp(x, alphas, ea))
    g = np.abs(eb - ea)
    found = []
    for i in crossing_candidates(alphas, ea, eb, gap_tol):
        c = refine_candidate(alphas, g[i], i, gap_fn, resolution, level)
        if c.gap <= gap_tol:
            found.append(c)
    return found


# --- fidelity drops -------------------------------------------------------------

@dataclass(frozen=True)
class FidelityDrop:
    alpha: float
    index: int
    f_min: float
    prominence: float
    left_base: int
    right_base: int


def find_fidelity_drops(alphas, f_curve, prominence_tol: float = PROMINENCE_TOL) -> list[FidelityDrop]:
    """Interior local minima of F whose prominence is at least ``prominence_tol``."""
    alphas = check_grid(alphas)
    f = np.asarray(f_curve, dtype=np.float64)
    if f.shape != alphas.shape:
        raise ValidationError("fidelity curve must be sampled on the alpha grid")
    if np.any(~np.isfinite(f)) or np.any(f < -1e-12) or np.any(f > 1 + 1e-12):
        raise ValidationError("fidelity values must lie in [0, 1]")
    if not prominence_tol > 0:
        raise ValidationError("prominence_tol must be > 0")
    idx, props = find_peaks(-f, prominence=prominence_tol)
    return [
        FidelityDrop(float(alphas[i]), int(i), float(f[i]), float(p), int(lb), int(rb))
        for i, p, lb, rb in zip(idx, props["prominences"], props["left_bases"], props["right_bases"])
    ]


def classify_drops(drops, gs_crossings, es_crossings, match_radius: float,
                   grid_spacing: float | None = None) -> list[str]:
    """critical near a GS crossing (checked first), spurious_es near an ES crossing, else unmatched."""
    if grid_spacing is not None and match_radius < grid_spacing * (1 - 1e-9):
        raise ValidationError(f"match_radius {match_radius} is below the grid spacing {grid_spacing}")
    tol = match_radius * (1 + 1e-9)   # grid values carry rounding noise

    def near(drop, crossings):
        return any(abs(drop.alpha - c.alpha) <= tol for c in crossings)

    out = []
    for d in drops:
        if near(d, gs_crossings):
            out.append(CRITICAL)
        elif near(d, es_crossings):
            out.append(SPURIOUS_ES)
        else:
            out.append(UNMATCHED)
    return out


def basin_argmax(values, drop: FidelityDrop) -> int:
    """Index of the largest value inside the drop's prominence basin."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = drop.left_base, drop.right_base + 1
    return lo + int(np.nanargmax(v[lo:hi]))


# --- sweep-level detection ------------------------------------------------------

def partner_labels(ls: LevelSet, manifold_tol: float = MANIFOLD_TOL) -> set[str]:
    """Labels of excited levels within manifold_tol of the ground state."""
    if not len(ls):
        return set()
    e0 = ls.energies[0]
    return {lab for e, lab in zip(ls.energies[1:], ls.labels[1:])
            if e - e0 <= manifold_tol and lab != ls.labels[0]}


@dataclass
class CrossingReport:
    gs_crossings: list[Crossing]
    es_crossings: list[Crossing]
    fidelity_drops: list[FidelityDrop]
    classifications: list[str]
    match_radius: float
    gap_tol: float
    resolution: float
    prominence_tol: float
    partners: dict = field(default_factory=dict)
    rejected: list[Crossing] = field(default_factory=list)

    def drops_of(self, kind: str) -> list[FidelityDrop]:
        return [d for d, c in zip(self.fidelity_drops, self.classifications) if c == kind]

    def to_dict(self) -> dict:
        def cross(c):
            return {"alpha": c.alpha, "resolution": c.resolution, "gap": c.gap,
                    "coarse_gap": c.coarse_gap, "levels": [c.level, c.level + 1],
                    "labels_before": list(c.labels_before), "labels_after": list(c.labels_after)}
        return {
            "gs_crossings": [cross(c) for c in self.gs_crossings],
            "es_crossings": [cross(c) for c in self.es_crossings],
            "fidelity_drops": [
                {**asdict(d), "classification": cls}
                for d, cls in zip(self.fidelity_drops, self.classifications)
            ],
            "parameters": {"match_radius": self.match_radius, "gap_tol": self.gap_tol,
                           "resolution": self.resolution, "prominence_tol": self.prominence_tol},
            "partners": {k: sorted(v) for k, v in self.partners.items()},
        }


def detect(alphas, levels: list[LevelSet], f_curve, make_gap_fn, *, k: int,
           make_tracked_fn=None, make_e0_fn=None, gap_tol: float = GAP_TOL, resolution: float = RESOLUTION,
           prominence_tol: float = PROMINENCE_TOL, match_radius: float | None = None,
           manifold_tol: float = MANIFOLD_TOL, mapper=map) -> CrossingReport:
    """Full crossing analysis of one sweep.

    Candidates come from two places.  Interior minima of |L_{a+1} - L_a| are
    refined with ``make_gap_fn(i, start, width)``, a callable alpha -> gap
    that re-solves the spectrum and applies ``window_gap``.  When levels
    carry sector labels, a change of L_a's label between grid points i and
    i+1 means two sectors crossed in between; those are refined with
    ``make_tracked_fn(i, x, nx, y, ny)`` applying ``tracked_gap``.  The
    second route catches crossings where a whole manifold passes through a
    level within one grid step, so |L_{a+1} - L_a| has no minimum there.
    A grid point sitting exactly on a crossing shows up as level a
    swallowing L_{a+1}; it is refined over the window of the level below.
    Without labels, ``make_e0_fn(i)`` (alpha -> E0) enables a third route:
    kinks of E0, refined by ``refine_kink``.
    ``mapper`` may be a parallel map; candidates are refined independently.
    """
    alphas = check_grid(alphas)
    spacing = float(np.min(np.diff(alphas)))
    if match_radius is None:
        match_radius = MATCH_RADIUS_STEPS * spacing
    curves = [level_curve(levels, m) for m in range(3)]
    n = len(alphas)

    jobs, tasks = [], []
    for a in (0, 1):
        for i in crossing_candidates(alphas, curves[a], curves[a + 1], gap_tol):
            ls = levels[i]
            width = min(ls.sizes[a] + ls.sizes[a + 1], k - ls.starts[a])
            before, after = levels[i - 1], levels[i + 1]
            pair = (before.labels[a] if a < len(before) else "",
                    after.labels[a] if a < len(after) else "")
            jobs.append((a, pair))
            tasks.append((refine_candidate, (alphas, abs(curves[a + 1][i] - curves[a][i]),
                          i, make_gap_fn(i, ls.starts[a], width), resolution, a, None)))
        # at an exact crossing the two levels merge into one multiplet and
        # L_{a+1} at that grid point is some other level (or absent)
        for i in range(1, n - 1):
            lo, mid, hi = levels[i - 1], levels[i], levels[i + 1]
            if not (a + 1 < len(lo) and a + 1 < len(hi) and a < len(mid)):
                continue
            if mid.sizes[a] < lo.sizes[a] + lo.sizes[a + 1] or mid.sizes[a] <= hi.sizes[a]:
                continue
            start = lo.starts[a]
            width = min(lo.sizes[a] + lo.sizes[a + 1], k - start)
            jobs.append((a, (lo.labels[a], hi.labels[a])))
            tasks.append((refine_candidate,
                          (alphas, 0.0, i, make_gap_fn(i, start, width), resolution, a, None)))
        if make_tracked_fn is None:
            continue
        for i in range(n - 1):
            lo, hi = levels[i], levels[i + 1]
            if a + 1 >= len(lo) or a + 1 >= len(hi):
                continue
            x, y = lo.labels[a], hi.labels[a]
            if not x or not y or x == y:
                continue
            nx = lo.labels[:a].count(x)
            ny = hi.labels[:a].count(y)
            coarse = min(abs(curves[a + 1][i] - curves[a][i]),
                         abs(curves[a + 1][i + 1] - curves[a][i + 1]))
            jobs.append((a, (x, y)))
            tasks.append((refine_candidate, (alphas, coarse, i, make_tracked_fn(i, x, nx, y, ny),
                                             resolution, a, (alphas[i], alphas[i + 1]))))
    if make_tracked_fn is None and make_e0_fn is not None:
        # no usable labels (B_x = 0): a ground-state crossing is a kink of E0,
        # and the new ground multiplet may not even fit in k states
        e0 = curves[0]
        kink = np.full(n, np.nan)
        kink[1:-1] = -(e0[:-2] - 2 * e0[1:-1] + e0[2:])
        for i in range(1, n - 1):
            left = kink[i - 1] if i > 1 else -np.inf
            right = kink[i + 1] if i < n - 2 else -np.inf
            if kink[i] > KINK_TOL and kink[i] > left and kink[i] >= right:
                width = min(levels[i - 1].sizes[0] + 1, k)
                jobs.append((0, (levels[i - 1].labels[0], levels[i + 1].labels[0])))
                tasks.append((refine_kink, (alphas, i, make_e0_fn(i), make_gap_fn(i, 0, width),
                                            resolution)))
    refined = list(mapper(_refine_task, tasks))

    partners = {"low": partner_labels(levels[0], manifold_tol),
                "high": partner_labels(levels[-1], manifold_tol)}
    partner_set = partners["low"] | partners["high"]
    accepted, rejected = [], []
    for (a, (x, y)), c in zip(jobs, refined):
        if not c.gap <= gap_tol:
            rejected.append(c)
            continue
        if a == 0 or (x in partner_set) != (y in partner_set):
            kind = "gs"
        else:
            kind = "es"
        accepted.append(Crossing(c.alpha, c.resolution, c.gap, c.coarse_gap, a, kind, (x,), (y,),
                                 c.probes))
    # both routes can find the same crossing; and an L1/L2 crossing on top of
    # an L0/L1 one is the same event seen twice
    dedup = 10 * resolution
    accepted.sort(key=lambda c: (c.level, c.gap, c.alpha))
    kept: list[Crossing] = []
    for c in accepted:
        if any(abs(c.alpha - d.alpha) <= dedup and (d.level == c.level or d.level == 0)
               for d in kept):
            continue
        kept.append(c)
    gs = sorted((c for c in kept if c.kind == "gs"), key=lambda c: c.alpha)
    es = sorted((c for c in kept if c.kind == "es"), key=lambda c: c.alpha)

    drops = find_fidelity_drops(alphas, f_curve, prominence_tol)
    classes = classify_drops(drops, gs, es, match_radius, spacing)
    return CrossingReport(gs, es, drops, classes, match_radius, gap_tol, resolution,
                          prominence_tol, partners, rejected)


def _with_kind(c: Crossing, kind: str) -> Crossing:
    return Crossing(c.alpha, c.resolution, c.gap, c.coarse_gap, c.level, kind,
                    c.labels_before, c.labels_after, c.probes)


def _refine_task(task):
    fn, args = task
    return fn(*args)
