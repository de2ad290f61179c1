"""Reference integrators (classic RK4, Modified Euler) and benchmark error metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trace import StepRecord, Trace, TraceRecorder

BLOWUP = 1e12


class ComparisonError(ValueError):
    """Trace and benchmark do not cover compatible time ranges."""


def _rk4_step(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _me_step(f, x, h):
    k1 = f(x)
    k2 = f(x + h * k1)
    return x + 0.5 * h * (k1 + k2)


def rk4_integrate(system, x0, h: float, t0: float, t_end: float, events=(),
                  angle_threshold_deg: float | None = 1000.0, record_every: int = 1,
                  sample_times=None) -> Trace:
    """Classic four-stage Runge-Kutta with constant ``h`` (clipped at events).

    ``sample_times`` adds off-grid samples: each is reached by a partial step
    from the preceding grid point, leaving the grid itself untouched.  This
    lets a benchmark be read exactly at another trace's step times.
    """
    return _fixed(_rk4_step, "rk4", system, x0, h, t0, t_end, events, angle_threshold_deg,
                  record_every, sample_times)


def me_integrate(system, x0, h: float, t0: float, t_end: float, events=(),
                 angle_threshold_deg: float | None = 1000.0, record_every: int = 1) -> Trace:
    """Modified Euler (Heun predictor-corrector) with constant ``h``."""
    return _fixed(_me_step, "me", system, x0, h, t0, t_end, events, angle_threshold_deg, record_every)


def _fixed(stepper, tag, system, x0, h, t0, t_end, events, threshold, record_every,
           sample_times=None):
    if h <= 0:
        raise ValueError("h must be positive")
    if hasattr(system, "rhs"):
        provider, f = system, None
    else:
        if events:
            raise ValueError("events need a system object with apply_event")
        provider, f = None, system
    post = getattr(provider, "post_step", None)
    angle = getattr(provider, "relative_angle_deg", None) if threshold is not None else None
    pending = sorted(events, key=lambda e: e.time)
    samples = sorted(float(ts) for ts in (sample_times if sample_times is not None else ()))
    si = 0
    x = np.array(x0, dtype=float)
    while pending and pending[0].time <= t0 + 1e-12:
        provider.apply_event(pending.pop(0), x)
    rec = TraceRecorder(t0, x, getattr(provider, "state_names", ()))
    t, n, status, msg, max_ang = t0, 0, "completed", "", 0.0
    while t_end - t > 1e-12:
        t_stop = min(pending[0].time if pending else t_end, t_end)
        h_try = h if t_stop - t - h > 1e-6 * h else t_stop - t
        rhs = f or provider.rhs
        t_next = t_stop if h_try == t_stop - t else t + h_try
        while si < len(samples) and samples[si] <= t + 1e-12:
            si += 1
        while si < len(samples) and samples[si] < t_next - 1e-12:
            xs = stepper(rhs, x, samples[si] - t)
            rec.push(samples[si], post(xs) if post is not None else xs,
                     StepRecord(samples[si], samples[si] - t, 0, 0.0, 0.0, tag + "-sample", 0))
            si += 1
        x = stepper(rhs, x, h_try)
        t = t_next
        n += 1
        if post is not None:
            x = post(x)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > BLOWUP:
            rec.push(t, x, StepRecord(t, h_try, 0, 0.0, 0.0, tag, 0))
            status, msg = "diverged", f"non-finite or exploding state at t={t:.6g}"
            break
        fired = False
        while pending and pending[0].time <= t + 1e-12:
            provider.apply_event(pending.pop(0), x)
            fired = True
        if fired or n % record_every == 0 or t_end - t <= 1e-12:
            rec.push(t, x, StepRecord(t, h_try, 0, 0.0, 0.0, tag, 0))
        if angle is not None:
            a = angle(x)
            max_ang = max(max_ang, a)
            if a > threshold:
                if rec.times[-1] != t:
                    rec.push(t, x, StepRecord(t, h_try, 0, 0.0, 0.0, tag, 0))
                status, msg = "unstable", f"relative rotor angle {a:.1f} deg at t={t:.6g}"
                break
    return rec.finish(status=status, t_final=t, max_relative_angle_deg=max_ang, message=msg)


@dataclass
class ErrorSeries:
    times: np.ndarray
    errors: np.ndarray

    @property
    def max(self) -> float:
        return float(np.max(self.errors)) if self.errors.size else 0.0

    @property
    def mean_max(self) -> float:
        """Average over steps of the per-step infinity-norm error."""
        return float(np.mean(self.errors)) if self.errors.size else 0.0


def benchmark_error(trace: Trace, benchmark: Trace, t_start: float | None = None) -> ErrorSeries:
    """Per-step ``||x_bench(t_n) - x_n||_inf`` at the trace's accepted steps.

    The benchmark is sampled at its nearest grid point, which must lie within
    half the local benchmark spacing of ``t_n``.  The initial point and, when
    given, steps before ``t_start`` are excluded.
    """
    tb = np.asarray(benchmark.times)
    tt = np.asarray(trace.times)[1:]
    xs = np.asarray(trace.states)[1:]
    if t_start is not None:
        keep = tt >= t_start
        tt, xs = tt[keep], xs[keep]
    if tt.size == 0:
        return ErrorSeries(tt, np.zeros(0))
    if tt[0] < tb[0] - 1e-12 or tt[-1] > tb[-1] + 1e-12:
        raise ComparisonError(f"trace spans [{tt[0]:.6g}, {tt[-1]:.6g}] outside benchmark "
                              f"[{tb[0]:.6g}, {tb[-1]:.6g}]")
    if benchmark.states.shape[1] != xs.shape[1]:
        raise ComparisonError("trace and benchmark have different state dimensions")
    j = np.clip(np.searchsorted(tb, tt), 1, len(tb) - 1)
    j = np.where(np.abs(tb[j - 1] - tt) <= np.abs(tb[j] - tt), j - 1, j)
    gaps = np.diff(tb)
    local = np.maximum(gaps[np.clip(j - 1, 0, len(gaps) - 1)], gaps[np.clip(j, 0, len(gaps) - 1)])
    if np.any(np.abs(tb[j] - tt) > 0.5 * local + 1e-12):
        raise ComparisonError("benchmark sampling too coarse for the trace times")
    err = np.max(np.abs(benchmark.states[j] - xs), axis=1)
    return ErrorSeries(tt, err)
