"""Fixed-step Euler-Maruyama integration of a delayed-feedback oscillator.

The model is

    dh(t) = ( -tanh(kappa * h(t - tau)) + c(t) * cos(2*pi*t) ) dt + eps dW

with forcing period 1. The delayed value is read from a ring buffer at
exactly d = round(tau/dt) steps back (no interpolation); the effective
delay d*dt is recorded in the result metadata. With eps = 0 no random
draws are consumed, so deterministic runs are seed-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import InvalidDelay, NonFiniteState, ValidationError

TWO_PI = 2.0 * math.pi

# Relative slack when checking that a ratio of times is an integer.
_GRID_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """The four scalars of the model: feedback, forcing, delay, noise."""

    kappa: float = 11.0
    c_base: float = 2.966
    tau: float = 0.953
    eps: float = 0.0

    def __post_init__(self):
        if not (self.kappa > 0):
            raise ValidationError(f"kappa must be > 0, got {self.kappa}")
        if not (self.tau > 0):
            raise ValidationError(f"tau must be > 0, got {self.tau}")
        if not (self.eps >= 0):
            raise ValidationError(f"eps must be >= 0, got {self.eps}")
        if not (self.c_base >= 0):
            raise ValidationError(f"c_base must be >= 0, got {self.c_base}")


@dataclass(frozen=True)
class Constant:
    """c(t) = c_base."""


@dataclass(frozen=True)
class LinearRamp:
    """c(t) = start + rate*t, clamped at c_stop once reached.

    When c_start is None the ramp starts from the run's c_base.
    """

    rate: float
    c_start: Optional[float] = None
    c_stop: Optional[float] = None


@dataclass(frozen=True)
class StepPerturbation:
    """c(t) = c_base for t < t_step, c_base + delta afterwards."""

    t_step: float
    delta: float


ParamSchedule = Union[Constant, LinearRamp, StepPerturbation]


def evaluate_schedule(schedule: ParamSchedule, c_base: float, t):
    """Forcing amplitude at time t (scalar or array)."""
    if isinstance(schedule, Constant):
        return c_base if np.isscalar(t) else np.full_like(np.asarray(t, float), c_base)
    if isinstance(schedule, LinearRamp):
        start = schedule.c_start if schedule.c_start is not None else c_base
        c = start + schedule.rate * np.asarray(t, float)
        if schedule.c_stop is not None:
            if schedule.rate >= 0:
                c = np.minimum(c, schedule.c_stop)
            else:
                c = np.maximum(c, schedule.c_stop)
        return float(c) if np.isscalar(t) else c
    if isinstance(schedule, StepPerturbation):
        c = np.where(np.asarray(t, float) < schedule.t_step,
                     c_base, c_base + schedule.delta)
        return float(c) if np.isscalar(t) else c
    raise ValidationError(f"unknown schedule {schedule!r}")


@dataclass(frozen=True)
class ConstantHistory:
    """h(t) = h0 on the whole initial interval [t0 - tau, t0]."""

    h0: float


@dataclass(frozen=True)
class ReplaySegment:
    """Resume from a previous run: history read from its stride-1 tail."""

    source: "TimeSeries"


HistorySpec = Union[ConstantHistory, ReplaySegment]


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_end: float = 1000.0
    seed: int = 0
    record_stride: int = 1
    t0: float = 0.0
    substream: int = 0

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValidationError(f"dt must be > 0, got {self.dt}")
        if not (self.t_end > self.t0):
            raise ValidationError(
                f"t_end must exceed t0, got t_end={self.t_end}, t0={self.t0}")
        if self.record_stride < 1:
            raise ValidationError(
                f"record_stride must be >= 1, got {self.record_stride}")
        if self.seed < 0 or self.seed > 2**64 - 1:
            raise ValidationError(f"seed must fit in 64 bits, got {self.seed}")


@dataclass(frozen=True)
class RunMeta:
    """Full provenance: enough to reproduce the series bit-identically."""

    params: ModelParams
    schedule: ParamSchedule
    history: str
    config: IntegratorConfig
    tau_eff: float


@dataclass(frozen=True)
class TimeSeries:
    t0: float
    dt_sample: float
    values: np.ndarray
    meta: RunMeta
    # Last d+1 raw-step samples, covering [t_end - tau_eff, t_end]: the
    # exact state a ReplaySegment needs to continue this run.
    tail: np.ndarray = field(repr=False, default=None)
    # Stroboscopic channel: (h(n), h(n - tau_eff)) at integer times n,
    # collected during integration because the delayed value lives in the
    # ring buffer and is generally not on the recorded sample grid.
    strobe_t: np.ndarray = field(repr=False, default=None)
    strobe_h: np.ndarray = field(repr=False, default=None)
    strobe_hd: np.ndarray = field(repr=False, default=None)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.values)) * self.dt_sample

    def __len__(self) -> int:
        return len(self.values)


def drift(h_delayed, t, c_now, kappa):
    """Deterministic rate of change: -tanh(kappa*h_delayed) + c_now*cos(2*pi*t)."""
    return -np.tanh(kappa * np.asarray(h_delayed, float)) \
        + np.asarray(c_now, float) * np.cos(TWO_PI * np.asarray(t, float))


def gaussian_stream(seed: int, substream: int = 0) -> np.random.Generator:
    """Reproducible standard-normal stream keyed by (seed, substream).

    Counter-based Philox generator with the 128-bit key
    (substream << 64) | seed: distinct substreams are independent streams
    by construction, and the algorithm is fixed so draws are portable
    across platforms and numpy releases.
    """
    key = (int(substream) << 64) | (int(seed) & (2**64 - 1))
    return np.random.Generator(np.random.Philox(key=key))


def _near_int(x: float) -> bool:
    return abs(x - round(x)) <= _GRID_TOL * max(1.0, abs(x))


def integrate(params: ModelParams, schedule: ParamSchedule,
              history: HistorySpec, config: IntegratorConfig) -> TimeSeries:
    """Euler-Maruyama: h_{n+1} = h_n + drift(h_{n-d}, t_n)*dt + eps*sqrt(dt)*xi_n.

    The drift depends only on the delayed state, so each block of d steps
    is an exact cumulative sum of precomputed increments; the recursion is
    bit-identical to the scalar loop. Aborts with NonFiniteState if |h|
    exceeds 1e6 (the attractors of interest are O(1)).
    """
    dt, t0 = config.dt, config.t0
    ratio = params.tau / dt
    d = int(round(ratio))
    if d < 1:
        raise InvalidDelay(f"tau={params.tau} is shorter than dt={dt}")
    if abs(ratio - d) > _GRID_TOL:
        raise ValidationError(
            f"tau/dt = {ratio} is not an integer within {_GRID_TOL}")
    tau_eff = d * dt

    n_steps = int(round((config.t_end - t0) / dt))
    if abs((config.t_end - t0) / dt - n_steps) > _GRID_TOL:
        raise ValidationError(
            f"(t_end - t0)/dt = {(config.t_end - t0) / dt} is not an integer")

    if isinstance(history, ConstantHistory):
        buf = np.full(d, float(history.h0))
        h_cur = float(history.h0)
        hist_desc = f"ConstantHistory({history.h0})"
    elif isinstance(history, ReplaySegment):
        tail = history.source.tail
        src_dt = history.source.meta.config.dt
        if tail is None or len(tail) < d + 1:
            raise ValidationError(
                f"ReplaySegment tail must hold >= {d + 1} stride-1 samples")
        if abs(src_dt - dt) > _GRID_TOL * dt:
            raise ValidationError(
                f"ReplaySegment dt {src_dt} differs from config dt {dt}")
        buf = np.asarray(tail[-(d + 1):-1], float).copy()
        h_cur = float(tail[-1])
        hist_desc = "ReplaySegment"
    else:
        raise ValidationError(f"unknown history {history!r}")

    stride = config.record_stride
    n_rec = n_steps // stride + 1
    out = np.empty(n_rec)
    out[0] = h_cur

    # Stroboscopic channel: step indices n with t0 + n*dt integer. Only
    # collected when both 1/dt and t0/dt sit on the step grid.
    spp = int(round(1.0 / dt))
    strobe_on = _near_int(1.0 / dt) and _near_int(t0 / dt)
    if strobe_on:
        phase = int(round(t0 / dt)) % spp
        off0 = (-phase) % spp  # first strobe step index
        n_str = (n_steps - off0) // spp + 1 if n_steps >= off0 else 0
        s_h = np.empty(n_str)
        s_hd = np.empty(n_str)
        s_fill = 0
    else:
        off0 = 0
        s_h = s_hd = np.empty(0)
        s_fill = 0

    rng = gaussian_stream(config.seed, config.substream) if params.eps > 0 else None
    sqdt = math.sqrt(dt)

    pos = 0
    while pos < n_steps:
        L = min(d, n_steps - pos)
        delayed = buf[:L]
        t_blk = t0 + (pos + np.arange(L, dtype=float)) * dt
        c_blk = evaluate_schedule(schedule, params.c_base, t_blk)
        incr = (-np.tanh(params.kappa * delayed) + c_blk * np.cos(TWO_PI * t_blk)) * dt
        if rng is not None:
            incr += params.eps * sqdt * rng.standard_normal(L)
        seq = np.cumsum(np.concatenate(([h_cur], incr)))

        if not np.all(np.abs(seq) <= 1e6):
            raise NonFiniteState(
                f"|h| exceeded 1e6 near t={t0 + pos * dt:.6g}; "
                "reduce dt or check parameters")

        # strobe points inside this block: seq[j] pairs with buf[j]
        if strobe_on:
            j0 = (off0 - pos) % spp
            if j0 < L:
                js = np.arange(j0, L, spp)
                k = len(js)
                s_h[s_fill:s_fill + k] = seq[js]
                s_hd[s_fill:s_fill + k] = buf[js]
                s_fill += k

        # recorded samples at global step indices k*stride in (pos, pos+L]
        k_lo = pos // stride + 1
        k_hi = (pos + L) // stride
        if k_hi >= k_lo:
            ks = np.arange(k_lo, k_hi + 1)
            out[ks] = seq[ks * stride - pos]

        if L == d:
            buf = seq[:d].copy()
        else:
            buf = np.concatenate((buf[L:], seq[:L]))
        h_cur = float(seq[L])
        pos += L

    # final point t_end: delayed partner is buf[0] = h(t_end - tau_eff)
    if strobe_on and n_steps >= off0 and (n_steps - off0) % spp == 0:
        s_h[s_fill] = h_cur
        s_hd[s_fill] = buf[0] if d <= len(buf) else h_cur
        s_fill += 1
    if strobe_on:
        s_t = t0 + (off0 + np.arange(s_fill, dtype=float) * spp) * dt
        s_h = s_h[:s_fill]
        s_hd = s_hd[:s_fill]
    else:
        s_t = np.empty(0)

    meta = RunMeta(params=params, schedule=schedule, history=hist_desc,
                   config=config, tau_eff=tau_eff)
    return TimeSeries(
        t0=t0, dt_sample=stride * dt, values=out, meta=meta,
        tail=np.concatenate((buf, [h_cur])),
        strobe_t=s_t, strobe_h=s_h, strobe_hd=s_hd,
    )
