"""Closed-form 3D position solvers from classified path parameters.

With a direct path present, the law of sines over the triangle (transmitter,
receiver, bounce point) turns each single-bounce path into an estimate of the
direct distance; the position is that distance along the direct departure
direction.  Without a direct path, stacking the per-path projector equations
gives a linear system in the position and the clock-offset range, which is
uniquely solvable once three single-bounce paths are available.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .channel import SPEED_OF_LIGHT
from .classifier import CLASS_FIRST_ORDER, CLASS_LOS
from .errors import DegenerateGeometry, NoValidCombination, SingularSystem

_SIN_EPS = 1e-9


@dataclass
class QualifiedChannel:
    mode: str  # 'LOS', 'NLOS' or 'UNLOCATABLE'
    los_path: object = None
    first_order: list = None


@dataclass
class LocationEstimate:
    x_hat: np.ndarray
    d0_hat: float = None
    combo_id: str = ""
    residual: float = 0.0
    mode: str = ""


def qualify(
    paths,
    classes,
    power_gap_db: float = 30.0,
    min_nlos_paths: int = 3,
    nlos_rel_power_db: float = 40.0,
) -> QualifiedChannel:
    """Decide which solver (if any) a classified channel supports.

    Direct mode needs a class-1 path, at least one single-bounce path, and a
    power gap between the direct path and the strongest single bounce of at
    most ``power_gap_db``.  Reflection-only mode needs ``min_nlos_paths``
    single bounces within ``nlos_rel_power_db`` of the strongest path.  When
    several paths carry the direct label, the strongest one is kept.
    """
    los_candidates = [p for p, c in zip(paths, classes) if c == CLASS_LOS]
    first = [p for p, c in zip(paths, classes) if c == CLASS_FIRST_ORDER]
    if los_candidates:
        los = max(los_candidates, key=lambda p: p.gain_mag)
        if first:
            gap_db = 20.0 * np.log10(los.gain_mag / max(p.gain_mag for p in first))
            if gap_db <= power_gap_db:
                return QualifiedChannel(mode="LOS", los_path=los, first_order=first)
        return QualifiedChannel(mode="UNLOCATABLE", first_order=first)
    if first:
        top = max(p.gain_mag for p in paths)
        strong = [
            p for p in first if 20.0 * np.log10(top / max(p.gain_mag, 1e-300)) <= nlos_rel_power_db
        ]
        if len(strong) >= min_nlos_paths:
            return QualifiedChannel(mode="NLOS", first_order=strong)
    return QualifiedChannel(mode="UNLOCATABLE", first_order=first)


def _sine_terms(los_doa, los_dod, path):
    """(numerator factor, denominator) of the single-bounce range estimate."""
    theta_dot = np.arccos(np.clip(los_doa @ path.doa, -1.0, 1.0))
    phi_dot = np.arccos(np.clip(los_dod @ path.dod, -1.0, 1.0))
    den = np.sin(theta_dot) + np.sin(phi_dot) - np.sin(theta_dot + phi_dot)
    return np.sin(theta_dot + phi_dot), den


def locate_los(los, reflections, x_t, tdoas_rel=None) -> LocationEstimate:
    """Direct-mode solve: least-squares direct distance, then step along the
    departure direction.

    ``tdoas_rel`` are the reflection delays relative to the direct arrival;
    by default they are taken from the paths' stored delays minus the direct
    path's.  Bounces collinear with the direct path are skipped; if all are,
    DegenerateGeometry is raised.
    """
    x_t = np.asarray(x_t, dtype=float)
    if tdoas_rel is None:
        tdoas_rel = [p.tdoa_s - los.tdoa_s for p in reflections]
    num = 0.0
    den = 0.0
    for path, tau in zip(reflections, tdoas_rel):
        sin_sum, d = _sine_terms(los.doa, los.dod, path)
        if d <= _SIN_EPS:
            continue
        num += SPEED_OF_LIGHT * tau * sin_sum * d
        den += d * d
    if den == 0.0:
        raise DegenerateGeometry("all reflections are collinear with the direct path")
    d_los = num / den
    return LocationEstimate(x_hat=x_t + d_los * los.dod, d0_hat=None, mode="LOS")


def projector_complement(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """I - (theta+phi)(theta+phi)^T / ||theta+phi||^2 (rank-2 for theta != -phi)."""
    s = theta + phi
    norm2 = float(s @ s)
    if norm2 < 1e-18:
        raise DegenerateGeometry("arrival and departure directions are opposite")
    return np.eye(3) - np.outer(s, s) / norm2


def locate_nlos(reflections, x_t, cond_max: float = 1e12) -> LocationEstimate:
    """Reflection-only solve for position and clock-offset range.

    Accumulates A = sum [I, th]^T (I - P) [I, th] and
    b = sum [I, th]^T (I - P) (x_t - th * dd) over the usable single bounces
    (dd = c * stored delay), then solves A [x; d0] = b.  Paths whose arrival
    and departure directions are opposite are dropped with a warning.  Unique
    solvability needs at least three usable bounces (each contributes rank
    two against four unknowns); fewer, or a condition number above
    ``cond_max``, raises SingularSystem.
    """
    x_t = np.asarray(x_t, dtype=float)
    a = np.zeros((4, 4))
    b = np.zeros(4)
    rows = []
    rhs = []
    for path in reflections:
        try:
            comp = projector_complement(path.doa, path.dod)
        except DegenerateGeometry:
            warnings.warn("dropping back-reflected path (doa = -dod)", stacklevel=2)
            continue
        delta_d = SPEED_OF_LIGHT * path.tdoa_s
        block = np.concatenate([np.eye(3), path.doa[:, None]], axis=1)  # 3x4
        a += block.T @ comp @ block
        target = comp @ (x_t - path.doa * delta_d)
        b += block.T @ target
        rows.append(comp @ block)
        rhs.append(target)
    if len(rows) < 3 or np.linalg.cond(a) > cond_max:
        raise SingularSystem("fewer than three effective single-bounce constraints")
    sol = np.linalg.solve(a, b)
    stacked = np.concatenate([r @ sol - t for r, t in zip(rows, rhs)])
    residual = float(np.linalg.norm(stacked) / np.sqrt(len(rows)))
    return LocationEstimate(x_hat=sol[:3], d0_hat=float(sol[3]), residual=residual, mode="NLOS")


def reflection_points(x_hat, d0_hat, reflections, x_t):
    """Bounce-point estimates x_t + dod * d_dep for each usable reflection.

    d_dep projects the closed loop onto the bisector direction.  Paths with
    opposite arrival/departure directions (including any direct path passed
    in by mistake) yield no point.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    d0 = 0.0 if d0_hat is None else float(d0_hat)
    points = []
    for path in reflections:
        s = path.doa + path.dod
        norm2 = float(s @ s)
        if norm2 < 1e-18:
            points.append(None)
            continue
        delta_d = SPEED_OF_LIGHT * path.tdoa_s
        d_dep = float(s @ (x_hat - x_t + path.doa * (delta_d + d0))) / norm2
        points.append(x_t + path.dod * d_dep)
    return points


@dataclass(frozen=True)
class LocateOptions:
    height_band: tuple = (0.0, 4.0)
    max_nlos_combos: int = 35
    cond_max: float = 1e12
    # reflection-only solves whose stacked equation mismatch exceeds this are
    # treated as illogical results (None disables the gate)
    max_nlos_residual: float = None


def _los_candidates(qualified: QualifiedChannel, x_t):
    """Full-set estimate first, then per-reflection singles; the residual of a
    candidate is the median disagreement of the per-reflection range
    estimates with the candidate's range."""
    los = qualified.los_path
    reflections = qualified.first_order
    singles = {}
    for i, path in enumerate(reflections):
        try:
            est = locate_los(los, [path], x_t)
        except DegenerateGeometry:
            continue
        singles[i] = float(np.linalg.norm(est.x_hat - np.asarray(x_t)))
    if not singles:
        raise DegenerateGeometry("all reflections are collinear with the direct path")
    candidates = []
    try:
        full = locate_los(los, reflections, x_t)
        full.combo_id = "all"
        candidates.append(full)
    except DegenerateGeometry:
        pass
    for i in singles:
        est = locate_los(los, [reflections[i]], x_t)
        est.combo_id = f"single:{i}"
        candidates.append(est)
    for est in candidates:
        d_est = float(np.linalg.norm(est.x_hat - np.asarray(x_t)))
        est.residual = float(np.median([abs(d - d_est) for d in singles.values()]))
        est.mode = "LOS"
    return candidates


def _nlos_candidates(qualified: QualifiedChannel, x_t, opts: LocateOptions):
    """3-subset solves (power ranked, capped) plus the all-paths solve.

    When several subsets exist, a candidate's residual is blended with its
    disagreement against the median candidate position, so subsets poisoned
    by one bad path (self-consistent but displaced) rank behind the
    mutually-agreeing majority.
    """
    reflections = sorted(qualified.first_order, key=lambda p: -p.gain_mag)
    candidates = []
    if len(reflections) > 3:
        try:
            est = locate_nlos(reflections, x_t, opts.cond_max)
            est.combo_id = "all"
            candidates.append(est)
        except SingularSystem:
            pass
    for combo in list(combinations(range(len(reflections)), 3))[: opts.max_nlos_combos]:
        try:
            est = locate_nlos([reflections[i] for i in combo], x_t, opts.cond_max)
        except SingularSystem:
            continue
        est.combo_id = "subset:" + ",".join(map(str, combo))
        candidates.append(est)
    if opts.max_nlos_residual is not None:
        candidates = [c for c in candidates if c.residual <= opts.max_nlos_residual]
    if len(candidates) >= 3:
        center = np.median(np.stack([c.x_hat for c in candidates]), axis=0)
        for c in candidates:
            c.residual += float(np.linalg.norm(c.x_hat - center))
    return candidates


def locate(qualified: QualifiedChannel, x_t, opts: LocateOptions = LocateOptions()) -> LocationEstimate:
    """Iterate path combinations, drop implausible heights, keep the best fit.

    Candidates whose height component leaves ``opts.height_band`` are
    discarded; the survivor with the smallest residual wins (stable order on
    ties, full-set candidate first).  Raises NoValidCombination when nothing
    survives.
    """
    if qualified.mode == "LOS":
        candidates = _los_candidates(qualified, x_t)
    elif qualified.mode == "NLOS":
        candidates = _nlos_candidates(qualified, x_t, opts)
    else:
        raise NoValidCombination("channel was qualified as unlocatable")
    lo, hi = opts.height_band
    survivors = [c for c in candidates if lo <= c.x_hat[2] <= hi]
    if not survivors:
        raise NoValidCombination("every candidate was filtered by height or rank")
    return min(survivors, key=lambda c: c.residual)
