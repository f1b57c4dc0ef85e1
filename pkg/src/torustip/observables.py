"""Diagnostics over trajectories: amplitude envelopes, stroboscopic
sections, locking / rotation-number classification, residence statistics.

All operations are pure functions over immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import (DegenerateGeometry, IncommensurateSampling,
                     InsufficientData, SeriesTooShort, ValidationError)
from .sdde_core import TimeSeries

_GRID_TOL = 1e-9


@dataclass(frozen=True)
class AmplitudeSeries:
    """Per-window amplitude (max minus min of h) on a sliding window."""

    window: float
    stride: float
    centers: np.ndarray
    amps: np.ndarray
    # Optional parameter tag per window (e.g. the c value at the window
    # center during a ramp); used by the event detector's c axis.
    tags: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True)
class StroboscopicSection:
    """(h(n), h(n - tau_eff)) at integer times n; shape (n_points, 2)."""

    points: np.ndarray
    t_start: float


@dataclass(frozen=True)
class LockingRatio:
    p: int
    q: int

    def __post_init__(self):
        if not (1 <= self.p < self.q):
            raise ValidationError(f"need 1 <= p < q, got {self.p}:{self.q}")
        if math.gcd(self.p, self.q) != 1:
            raise ValidationError(f"{self.p}:{self.q} is not in lowest terms")

    def __str__(self):
        return f"{self.p}:{self.q}"


@dataclass(frozen=True)
class AttractorClass:
    """Classification verdict with the residuals that produced it."""

    kind: str  # "FixedPoint" | "Locked" | "Torus" | "Unclassified"
    ratio: Optional[LockingRatio] = None
    rotation: Optional[float] = None
    residuals: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in ("FixedPoint", "Locked", "Torus", "Unclassified"):
            raise ValidationError(f"unknown attractor kind {self.kind!r}")
        if (self.kind == "Locked") != (self.ratio is not None):
            raise ValidationError("Locked verdicts carry a ratio; others do not")


@dataclass(frozen=True)
class ResidenceStats:
    threshold: float
    visits_upper: int
    visits_lower: int
    durations_upper: List[float]
    durations_lower: List[float]
    fraction_lower: float


@dataclass(frozen=True)
class Threshold:
    """2-means split level with its diagnostics."""

    level: float
    centers: Tuple[float, float]
    spreads: Tuple[float, float]
    unreliable: bool


def amp_window(ts: TimeSeries, window: float = 200.0,
               stride: Optional[float] = None) -> AmplitudeSeries:
    """Max-minus-min of h over sliding windows of the given length.

    Stride defaults to window/2 (50% overlap). Windows are aligned to the
    sample grid; centers are window midpoints in time units.
    """
    if stride is None:
        stride = window / 2.0
    dt_s = ts.dt_sample
    w = int(round(window / dt_s))
    s = max(1, int(round(stride / dt_s)))
    n = len(ts.values)
    if w < 2 or n < w:
        raise SeriesTooShort(
            f"series of {n} samples cannot fill a {window}-unit window")
    view = np.lib.stride_tricks.sliding_window_view(ts.values, w)[::s]
    amps = view.max(axis=1) - view.min(axis=1)
    starts = np.arange(len(amps), dtype=float) * s * dt_s
    centers = ts.t0 + starts + (w - 1) * dt_s / 2.0
    return AmplitudeSeries(window=window, stride=s * dt_s,
                           centers=centers, amps=amps)


def stroboscopic(ts: TimeSeries, tau_eff: Optional[float] = None) -> StroboscopicSection:
    """Section (h(n), h(n - tau_eff)) at integer times n.

    Prefers the integrator's strobe channel (exact delayed reads from the
    ring buffer); otherwise derives the section from a stride-1 series.
    """
    if tau_eff is None:
        tau_eff = ts.meta.tau_eff
    if ts.strobe_h is not None and len(ts.strobe_h) > 0 \
            and abs(tau_eff - ts.meta.tau_eff) <= _GRID_TOL:
        pts = np.column_stack((ts.strobe_h, ts.strobe_hd))
        return StroboscopicSection(points=pts, t_start=float(ts.strobe_t[0]))

    dt_s = ts.dt_sample
    per = 1.0 / dt_s
    if abs(per - round(per)) > _GRID_TOL * max(1.0, per):
        raise IncommensurateSampling(
            f"1/dt_sample = {per} is not an integer within {_GRID_TOL}")
    spp = int(round(per))
    lag = int(round(tau_eff / dt_s))
    if lag < 0 or lag >= len(ts.values):
        raise SeriesTooShort(f"series does not span tau_eff={tau_eff}")
    # first integer time with the delayed sample in range
    t_first = math.ceil((ts.t0 + lag * dt_s) - _GRID_TOL)
    i_first = int(round((t_first - ts.t0) / dt_s))
    idx = np.arange(i_first, len(ts.values), spp)
    if len(idx) == 0:
        raise SeriesTooShort("series spans less than one forcing period")
    pts = np.column_stack((ts.values[idx], ts.values[idx - lag]))
    return StroboscopicSection(points=pts, t_start=ts.t0 + i_first * dt_s)


def _drop_transient(points: np.ndarray) -> np.ndarray:
    """Drop the first 25% of points, at least 50."""
    cut = max(len(points) // 4, 50)
    return points[cut:]


def _angles(points: np.ndarray) -> np.ndarray:
    center = points.mean(axis=0)
    rel = points - center
    radii = np.hypot(rel[:, 0], rel[:, 1])
    tiny = radii < 1e-9
    if tiny.sum() > 0.1 * len(points):
        raise DegenerateGeometry(
            f"{tiny.sum()} of {len(points)} points lie at the centroid")
    return np.arctan2(rel[:, 1], rel[:, 0])


def rotation_number(section: StroboscopicSection) -> float:
    """Mean angular advance per forcing period about the centroid, in [0, 1).

    Increments are unwrapped to the principal branch; the mean is reduced
    mod 1, so rotation numbers above 1/2 are reported correctly.
    """
    pts = np.asarray(section.points, float)
    if len(pts) < 2:
        raise InsufficientData("need at least two section points")
    theta = _angles(pts)
    inc = np.diff(theta)
    inc = (inc + math.pi) % (2.0 * math.pi) - math.pi
    rho = float(inc.mean() / (2.0 * math.pi)) % 1.0
    return rho


def _winding(points: np.ndarray, q: int) -> Optional[int]:
    """Rotation count p of a q-periodic section, from angular cluster ranks.

    The q cluster representatives are ordered by angle about the centroid;
    a genuine p:q locking advances the angular rank by a constant p each
    period. Returns None when the advance is not constant.
    """
    reps = np.stack([points[i::q].mean(axis=0) for i in range(q)])
    theta = _angles(reps)
    order = np.argsort(theta)
    rank = np.empty(q, dtype=int)
    rank[order] = np.arange(q)
    steps = np.diff(rank[np.arange(q + 1) % q]) % q
    if np.all(steps == steps[0]):
        return int(steps[0])
    return None


def detect_locking(section: StroboscopicSection, q_max: int = 40,
                   tol: float = 1e-3) -> AttractorClass:
    """Classify a section as FixedPoint, Locked(p:q), Torus, or Unclassified.

    Locked(p:q) uses the smallest q <= q_max with all q-separated point
    pairs within tol relative to the section's mean radius (the verdict
    must not change under uniform scaling of the points, so the gap test
    cannot be absolute); p is the constant angular-rank advance of the q
    cluster representatives. Torus requires a near-monotone angle sequence
    about the centroid (>= 98% same-sign increments). The FixedPoint test
    stays absolute: a collapsed section has no scale of its own.
    """
    pts = _drop_transient(np.asarray(section.points, float))
    if len(pts) < 4 * q_max:
        raise InsufficientData(
            f"{len(pts)} points after transient removal; need >= {4 * q_max}")

    consec = float(np.hypot(*(pts[1:] - pts[:-1]).T).max())
    residuals = {"consecutive_max": consec}
    if consec < tol:
        return AttractorClass(kind="FixedPoint", residuals=residuals)

    center = pts.mean(axis=0)
    scale = float(np.hypot(*(pts - center).T).mean())
    residuals["scale"] = scale

    gaps = {}
    for q in range(2, q_max + 1):
        gap = float(np.hypot(*(pts[q:] - pts[:-q]).T).max())
        gaps[q] = gap
        if gap < tol * scale:
            p = _winding(pts, q)
            residuals["q_gap"] = gap
            if p is None or not (1 <= p < q) or math.gcd(p, q) != 1:
                continue
            return AttractorClass(kind="Locked", ratio=LockingRatio(p, q),
                                  residuals=residuals)
    residuals["best_q_gap"] = min(gaps.values()) if gaps else None

    try:
        theta = _angles(pts)
    except DegenerateGeometry:
        return AttractorClass(kind="Unclassified", residuals=residuals)
    inc = np.diff(theta)
    inc = (inc + math.pi) % (2.0 * math.pi) - math.pi
    nonzero = inc[inc != 0.0]
    if len(nonzero) == 0:
        return AttractorClass(kind="Unclassified", residuals=residuals)
    frac_same = max((nonzero > 0).mean(), (nonzero < 0).mean())
    residuals["monotone_fraction"] = float(frac_same)
    if frac_same >= 0.98:
        rho = float(inc.mean() / (2.0 * math.pi)) % 1.0
        return AttractorClass(kind="Torus", rotation=rho, residuals=residuals)
    return AttractorClass(kind="Unclassified", residuals=residuals)


def residence_times(amps: AmplitudeSeries, threshold: float) -> ResidenceStats:
    """Merge consecutive same-state windows into visits; durations in time units.

    Intended for non-overlapping windows so durations are additive.
    """
    a = np.asarray(amps.amps, float)
    if len(a) == 0:
        raise SeriesTooShort("empty amplitude series")
    upper = a > threshold
    dur_u, dur_l = [], []
    i, n = 0, len(a)
    while i < n:
        j = i
        while j + 1 < n and upper[j + 1] == upper[i]:
            j += 1
        run = (j - i + 1) * amps.stride
        (dur_u if upper[i] else dur_l).append(run)
        i = j + 1
    total = n * amps.stride
    frac = sum(len_ for len_ in dur_l) / total if total > 0 else 0.0
    return ResidenceStats(threshold=threshold,
                          visits_upper=len(dur_u), visits_lower=len(dur_l),
                          durations_upper=dur_u, durations_lower=dur_l,
                          fraction_lower=frac)


def choose_threshold(amps: AmplitudeSeries) -> Threshold:
    """Midpoint of the two cluster centers of an exact 1-D 2-means split.

    The split minimizing within-cluster sum of squares is found by scanning
    the sorted prefix sums (deterministic, no seeding). Flagged unreliable
    when the centers are separated by less than twice the summed
    within-cluster spreads.
    """
    a = np.sort(np.asarray(amps.amps, float))
    n = len(a)
    if n < 20:
        raise InsufficientData(f"need >= 20 windows, got {n}")
    ps = np.concatenate(([0.0], np.cumsum(a)))
    ps2 = np.concatenate(([0.0], np.cumsum(a * a)))
    ks = np.arange(1, n)
    sse_lo = ps2[ks] - ps[ks] ** 2 / ks
    sse_hi = (ps2[n] - ps2[ks]) - (ps[n] - ps[ks]) ** 2 / (n - ks)
    k = int(ks[np.argmin(sse_lo + sse_hi)])
    lo, hi = a[:k], a[k:]
    c_lo, c_hi = float(lo.mean()), float(hi.mean())
    s_lo = float(lo.std()) if len(lo) > 1 else 0.0
    s_hi = float(hi.std()) if len(hi) > 1 else 0.0
    sep = c_hi - c_lo
    return Threshold(level=0.5 * (c_lo + c_hi), centers=(c_lo, c_hi),
                     spreads=(s_lo, s_hi),
                     unreliable=bool(sep < 2.0 * (s_lo + s_hi)))
