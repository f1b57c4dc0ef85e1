"""The four numerical experiments: quasi-static ramps, hysteresis sweeps,
resonance-tongue scans, noise-driven intermittency, and a multistability
probe, plus the amplitude-drop event detector they share.

Every experiment's output is a pure function of (config, seeds); parallel
execution never changes results (work items are keyed by index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._pool import run_indexed
from .errors import NonFiniteState, ValidationError
from .observables import (AmplitudeSeries, AttractorClass, StroboscopicSection,
                          amp_window, choose_threshold, detect_locking,
                          residence_times, Threshold, ResidenceStats)
from .sdde_core import (Constant, ConstantHistory, HistorySpec,
                        IntegratorConfig, LinearRamp, ModelParams,
                        ParamSchedule, ReplaySegment, StepPerturbation,
                        TimeSeries, evaluate_schedule, integrate)


@dataclass(frozen=True)
class DropEvent:
    c: float
    size: float


@dataclass(frozen=True)
class SweepResult:
    direction: str  # "up" | "down"
    c_values: np.ndarray
    amps: np.ndarray
    classes: List[AttractorClass]
    events: List[DropEvent]
    # Per-seed event lists for seed-robustness checks (same direction).
    events_by_seed: Dict[int, List[DropEvent]] = field(default_factory=dict)


@dataclass(frozen=True)
class TongueMap:
    c_grid: np.ndarray
    tau_grid: np.ndarray
    amp_matrix: np.ndarray  # shape (len(tau_grid), len(c_grid))
    class_matrix: List[List[AttractorClass]]


@dataclass(frozen=True)
class IntermittencyResult:
    delta_c: float
    series: TimeSeries
    amps: AmplitudeSeries
    stats: ResidenceStats
    seed: int
    threshold: Threshold


@dataclass(frozen=True)
class StateGroup:
    attractor: AttractorClass
    amp: float
    basin_count: int


@dataclass(frozen=True)
class MultistabilityReport:
    c: float
    found_states: List[StateGroup]


def _moving_median(x: np.ndarray, width: int) -> np.ndarray:
    """Centered moving median with reflect padding; width forced odd."""
    n = len(x)
    if width < 2 or n < 3:
        return x.copy()
    if width % 2 == 0:
        width += 1
    width = min(width, n if n % 2 == 1 else n - 1)
    r = width // 2
    pad = np.concatenate((x[r:0:-1], x, x[-2:-2 - r:-1]))
    view = np.lib.stride_tricks.sliding_window_view(pad, width)
    return np.median(view, axis=1)


def detect_drops(amps: AmplitudeSeries, threshold: Optional[float] = None,
                 smooth_width: int = 5, min_size: float = 0.0) -> List[DropEvent]:
    """Significant decreases of the smoothed envelope along ascending c.

    The envelope is sorted by its c tags (window centers when untagged),
    median-smoothed, and scanned for maximal runs of successive decreases
    each exceeding the significance threshold. The default threshold is
    5x the median absolute successive difference of the raw envelope.
    Event size is the smoothed level difference across the run; location
    is the run's midpoint on the c axis.
    """
    a = np.asarray(amps.amps, float)
    if len(a) == 0:
        raise ValidationError("empty amplitude series")
    cs = np.asarray(amps.tags if amps.tags is not None else amps.centers, float)
    order = np.argsort(cs, kind="stable")
    cs, a = cs[order], a[order]
    if len(a) < 3:
        return []
    if threshold is None:
        scale = float(np.median(np.abs(np.diff(a))))
        threshold = 5.0 * scale
    s = _moving_median(a, smooth_width)
    d = np.diff(s)
    flagged = d < -threshold if threshold > 0 else d < 0
    events: List[DropEvent] = []
    i, n = 0, len(d)
    while i < n:
        if flagged[i]:
            j = i
            while j + 1 < n and flagged[j + 1]:
                j += 1
            size = float(s[i] - s[j + 1])
            if size >= min_size:
                events.append(DropEvent(c=float(0.5 * (cs[i] + cs[j + 1])),
                                        size=size))
            i = j + 1
        else:
            i += 1
    return events


def _classify_rows(series: TimeSeries, row_ends: np.ndarray,
                   class_window: float, q_max: int,
                   tol: float) -> List[AttractorClass]:
    """Classify the trailing class_window of strobe points before each row end.

    Rows without enough points (sweep start) come back Unclassified.

    tol here is looser than the constant-parameter default: during a ramp
    a locked orbit drifts with c, so q-separated section points pick up a
    spread of order q * rate * d(orbit)/dc on top of the locking residual.
    Competing q <= q_max rationals sit far enough away that the loose tol
    cannot relabel them; it can only widen a verdict into the tongue skirt.
    """
    st, sh, shd = series.strobe_t, series.strobe_h, series.strobe_hd
    out: List[AttractorClass] = []
    need = 4 * q_max + max(int(class_window) // 4, 50)
    for t_end in row_ends:
        hi = int(np.searchsorted(st, t_end, side="left"))
        lo = int(np.searchsorted(st, t_end - class_window, side="left"))
        if hi - lo < need:
            out.append(AttractorClass(kind="Unclassified",
                                      residuals={"points": hi - lo}))
            continue
        pts = np.column_stack((sh[lo:hi], shd[lo:hi]))
        sec = StroboscopicSection(points=pts, t_start=float(st[lo]))
        out.append(detect_locking(sec, q_max=q_max, tol=tol))
    return out


def ramp_run(params: ModelParams, c_start: float, c_stop: float, rate: float,
             history: HistorySpec, config: IntegratorConfig, *,
             window: float = 200.0, stride: Optional[float] = None
             ) -> Tuple[TimeSeries, AmplitudeSeries]:
    """Integrate with linearly ramped c; envelope windows tagged by c.

    rate = 0 degenerates to a constant-c run of duration t_end - t0.
    """
    if rate == 0:
        schedule: ParamSchedule = Constant()
        cfg = config
        c_of = lambda t: evaluate_schedule(schedule, c_start, t)
        params = replace(params, c_base=c_start)
    else:
        if (c_stop - c_start) * rate <= 0:
            raise ValidationError(
                f"rate {rate} cannot reach c_stop={c_stop} from c_start={c_start}")
        duration = (c_stop - c_start) / rate
        n = max(1, int(round(duration / config.dt)))
        schedule = LinearRamp(rate=rate,
                              c_start=c_start - rate * config.t0,
                              c_stop=c_stop)
        cfg = replace(config, t_end=config.t0 + n * config.dt)
        c_of = lambda t: evaluate_schedule(schedule, params.c_base, t)
    series = integrate(params, schedule, history, cfg)
    env = amp_window(series, window=window, stride=stride)
    env = replace(env, tags=np.asarray(c_of(env.centers), float))
    return series, env


def hysteresis_sweep(params: ModelParams, c_min: float, c_max: float,
                     rate: float, seeds: Sequence[int], *,
                     dt: float = 1e-3, settle: float = 2000.0, h0: float = 1.0,
                     window: float = 200.0, stride: Optional[float] = None,
                     sample_dt: float = 0.01, class_window: float = 400.0,
                     class_tol: float = 9e-2, q_max: int = 40,
                     min_drop_frac: float = 0.05, threads: int = 1
                     ) -> Tuple[SweepResult, SweepResult]:
    """Quasi-static up sweep from a settled upper-branch history, then a
    down sweep resuming from the up sweep's terminal state.

    Runs the full loop once per seed; the returned pair belongs to
    seeds[0], and per-seed event lists ride along in events_by_seed.
    Events smaller than min_drop_frac of the envelope span are dropped
    (noise-induced relaxation wiggles near transitions are not regime
    changes; genuine drops here are an order of magnitude larger).
    """
    if not (c_min < c_max):
        raise ValidationError(f"need c_min < c_max, got {c_min}, {c_max}")
    if not seeds:
        raise ValidationError("need at least one seed")
    rec = max(1, int(round(sample_dt / dt)))
    duration = (c_max - c_min) / rate
    n_steps = int(round(duration / dt))

    def one_seed(_i: int, seed: int):
        cfg0 = IntegratorConfig(dt=dt, t_end=settle, seed=seed,
                                record_stride=rec, substream=0)
        settled = integrate(params, Constant(),
                            ConstantHistory(h0), cfg0)
        results = {}
        hist: HistorySpec = ReplaySegment(settled)
        for direction, substream in (("up", 1), ("down", 2)):
            if direction == "up":
                sched = LinearRamp(rate=rate, c_start=c_min, c_stop=c_max)
            else:
                sched = LinearRamp(rate=-rate, c_start=c_max, c_stop=c_min)
            cfg = IntegratorConfig(dt=dt, t_end=n_steps * dt, seed=seed,
                                   record_stride=rec, substream=substream)
            series = integrate(params, sched, hist, cfg)
            hist = ReplaySegment(series)
            env = amp_window(series, window=window, stride=stride)
            tags = np.asarray(
                evaluate_schedule(sched, params.c_base, env.centers), float)
            env = replace(env, tags=tags)
            row_ends = env.centers + window / 2.0
            classes = _classify_rows(series, row_ends, class_window,
                                     q_max, class_tol)
            span = float(env.amps.max() - env.amps.min())
            events = detect_drops(env, min_size=min_drop_frac * span)
            results[direction] = (tags, env.amps.copy(), classes, events)
            del series
        return results

    per_seed = run_indexed(one_seed, seeds, threads=threads)

    out = []
    for direction in ("up", "down"):
        tags, amps, classes, events = per_seed[0][direction]
        by_seed = {seed: per_seed[i][direction][3]
                   for i, seed in enumerate(seeds)}
        out.append(SweepResult(direction=direction, c_values=tags, amps=amps,
                               classes=classes, events=events,
                               events_by_seed=by_seed))
    return out[0], out[1]


def tongue_scan(params: ModelParams, c_grid: Sequence[float],
                tau_grid: Sequence[float], rate: float, *,
                dt: float = 1e-3, settle: float = 2000.0, h0: float = 1.0,
                window: float = 200.0, sample_dt: float = 0.01,
                class_window: float = 400.0, class_tol: float = 9e-2,
                q_max: int = 40, seed: int = 0, threads: int = 1) -> TongueMap:
    """One slow up-ramp per tau row, amplitude and class at each grid c.

    Rows are independent work items; per-row failures are recorded in the
    affected cells (amp NaN, Unclassified with the error message) rather
    than aborting the scan.
    """
    c_grid = np.asarray(c_grid, float)
    tau_grid = np.asarray(tau_grid, float)
    if len(c_grid) == 0 or len(tau_grid) == 0:
        raise ValidationError("grids must be nonempty")
    if np.any(np.diff(c_grid) < 0) or np.any(np.diff(tau_grid) < 0):
        raise ValidationError("grids must be monotone nondecreasing")
    rec = max(1, int(round(sample_dt / dt)))
    single = len(c_grid) == 1 or c_grid[-1] == c_grid[0]

    def one_row(i_row: int, tau: float):
        p_row = replace(params, tau=tau)
        try:
            cfg0 = IntegratorConfig(dt=dt, t_end=settle, seed=seed,
                                    record_stride=rec, substream=2 * i_row)
            settled = integrate(p_row, Constant(), ConstantHistory(h0),
                                replace(cfg0, t_end=settle))
            if single:
                obs = max(window, class_window) + 200.0
                cfg1 = IntegratorConfig(dt=dt, t_end=obs, seed=seed,
                                        record_stride=rec,
                                        substream=2 * i_row + 1)
                series = integrate(replace(p_row, c_base=float(c_grid[0])),
                                   Constant(), ReplaySegment(settled), cfg1)
                env = amp_window(series, window=window, stride=window / 2)
                amp_row = np.array([env.amps[-1]])
                cls_row = _classify_rows(series, np.array([series.t[-1]]),
                                         class_window, q_max, class_tol)
                return amp_row, cls_row
            duration = float(c_grid[-1] - c_grid[0]) / rate
            n = int(round(duration / dt))
            sched = LinearRamp(rate=rate, c_start=float(c_grid[0]),
                               c_stop=float(c_grid[-1]))
            cfg1 = IntegratorConfig(dt=dt, t_end=n * dt, seed=seed,
                                    record_stride=rec, substream=2 * i_row + 1)
            series = integrate(p_row, sched, ReplaySegment(settled), cfg1)
            env = amp_window(series, window=window, stride=window / 2)
            t_cross = (c_grid - c_grid[0]) / rate
            # amp of the window ending at the crossing time of each grid c
            want = t_cross - window / 2.0
            idx = np.clip(np.searchsorted(env.centers, want), 0,
                          len(env.centers) - 1)
            left = np.clip(idx - 1, 0, len(env.centers) - 1)
            pick = np.where(np.abs(env.centers[left] - want)
                            <= np.abs(env.centers[idx] - want), left, idx)
            amp_row = env.amps[pick]
            cls_row = _classify_rows(series, t_cross, class_window,
                                     q_max, class_tol)
            return amp_row, cls_row
        except NonFiniteState as exc:
            bad = AttractorClass(kind="Unclassified",
                                 residuals={"error": str(exc)})
            return (np.full(len(c_grid), np.nan),
                    [bad for _ in range(len(c_grid))])

    rows = run_indexed(one_row, tau_grid, threads=threads)
    amp_matrix = np.stack([r[0] for r in rows])
    class_matrix = [r[1] for r in rows]
    return TongueMap(c_grid=c_grid, tau_grid=tau_grid,
                     amp_matrix=amp_matrix, class_matrix=class_matrix)


def intermittency_protocol(params: ModelParams, deltas: Sequence[float],
                           t_unperturbed: float = 1.5e4,
                           t_total: float = 2.5e4,
                           seeds: Sequence[int] = (0,), *,
                           dt: float = 2.5e-4, window: float = 100.0,
                           sample_dt: float = 0.02, h0: float = 1.0,
                           threads: int = 1) -> List[IntermittencyResult]:
    """Step perturbation of c at t_unperturbed, one run per (delta, seed).

    Residence statistics use non-overlapping windows over the
    post-perturbation segment; the upper/lower threshold is chosen
    per-result by the 2-means split of that segment's amplitudes.
    """
    if len(deltas) == 0:
        raise ValidationError("deltas must be nonempty")
    if not (t_total > t_unperturbed):
        raise ValidationError("t_total must exceed t_unperturbed")
    rec = max(1, int(round(sample_dt / dt)))
    cells = [(d_i, d, s) for d_i, d in enumerate(deltas) for s in seeds]

    def one_cell(_i: int, cell):
        d_i, delta, seed = cell
        sched = StepPerturbation(t_step=t_unperturbed, delta=delta)
        cfg = IntegratorConfig(dt=dt, t_end=t_total, seed=seed,
                               record_stride=rec, substream=d_i)
        series = integrate(params, sched, ConstantHistory(h0), cfg)
        i_post = int(round(t_unperturbed / series.dt_sample))
        post = replace(series, t0=t_unperturbed,
                       values=series.values[i_post:],
                       strobe_t=np.empty(0), strobe_h=np.empty(0),
                       strobe_hd=np.empty(0), tail=series.tail)
        amps = amp_window(post, window=window, stride=window)
        thr = choose_threshold(amps)
        stats = residence_times(amps, thr.level)
        return IntermittencyResult(delta_c=delta, series=series, amps=amps,
                                   stats=stats, seed=seed, threshold=thr)

    return run_indexed(one_cell, cells, threads=threads)


def multistability_probe(params: ModelParams, c: float, trials: int = 30,
                         h0_range: Tuple[float, float] = (0.0, 2.0),
                         seeds: Sequence[int] = (0,), *,
                         dt: float = 2.5e-4, explore_eps: float = 1e-3,
                         explore_time: float = 3000.0,
                         settle_time: float = 2500.0,
                         observe_time: float = 800.0, window: float = 200.0,
                         merge_tol: float = 0.05, tol: float = 1e-3,
                         q_max: int = 40, threads: int = 1
                         ) -> MultistabilityReport:
    """Probe for coexisting attractors at one c.

    Each trial starts from a constant history sampled over h0_range, runs
    a noisy exploration leg (params.eps when positive, explore_eps
    otherwise -- purely deterministic probes settle onto a thin subset of
    the attractors), then settles and classifies with eps = 0.  States
    whose representative amplitudes differ by less than merge_tol form
    one group; basin counts sum to the number of trials.
    """
    if trials < 10:
        raise ValidationError(f"need >= 10 trials, got {trials}")
    if not seeds:
        raise ValidationError("need at least one seed")
    h0s = np.linspace(h0_range[0], h0_range[1], trials)
    p_c = replace(params, c_base=c)
    eps_x = params.eps if params.eps > 0 else explore_eps
    rec_obs = max(1, int(round(0.01 / dt)))
    rec_coarse = max(1, int(round(1.0 / dt)))

    def one_trial(i: int, h0: float):
        seed = seeds[i % len(seeds)]
        explored = integrate(
            replace(p_c, eps=eps_x), Constant(), ConstantHistory(float(h0)),
            IntegratorConfig(dt=dt, t_end=explore_time, seed=seed,
                             record_stride=rec_coarse, substream=i))
        settled = integrate(
            replace(p_c, eps=0.0), Constant(), ReplaySegment(explored),
            IntegratorConfig(dt=dt, t_end=settle_time, seed=seed,
                             record_stride=rec_coarse, substream=i))
        observed = integrate(
            replace(p_c, eps=0.0), Constant(), ReplaySegment(settled),
            IntegratorConfig(dt=dt, t_end=observe_time, seed=seed,
                             record_stride=rec_obs, substream=i))
        sec = StroboscopicSection(
            points=np.column_stack((observed.strobe_h, observed.strobe_hd)),
            t_start=float(observed.strobe_t[0]))
        cls = detect_locking(sec, q_max=q_max, tol=tol)
        rep = float(amp_window(observed, window=window, stride=window).amps.mean())
        return cls, rep

    outcomes = run_indexed(one_trial, h0s, threads=threads)
    order = np.argsort([rep for _cls, rep in outcomes])
    groups: List[List[int]] = []
    prev = None
    for idx in order:
        rep = outcomes[idx][1]
        if prev is None or rep - prev >= merge_tol:
            groups.append([idx])
        else:
            groups[-1].append(idx)
        prev = rep
    found: List[StateGroup] = []
    for members in groups:
        reps = [outcomes[m][1] for m in members]
        mean_amp = float(np.mean(reps))
        rep_member = members[int(np.argmin([abs(r - mean_amp) for r in reps]))]
        found.append(StateGroup(attractor=outcomes[rep_member][0],
                                amp=mean_amp, basin_count=len(members)))
    found.sort(key=lambda g: -g.amp)
    return MultistabilityReport(c=c, found_states=found)
