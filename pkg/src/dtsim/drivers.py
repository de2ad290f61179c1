"""Fixed-step DT, variable-step DT (PI control) and variable-step/optimal-order DT drivers."""
from __future__ import annotations

import logging
import math

import numpy as np

from .engine import AugmentedSystemSpec, StepDivergence, dt_step
from .order_control import (CandidateUnavailable, ComplexityModel, OrderControllerConfig,
                            decrease_candidate, increase_candidate, select_operating_point)
from .step_control import (StepControllerConfig, TruncationDivergence, accept_step,
                           error_radius, pi_step, truncation_error)
from .trace import StepRecord, Trace, TraceRecorder

log = logging.getLogger(__name__)

TIME_EPS = 1e-12
BLOWUP = 1e12
E_CAP = 1e300  # stands in for a divergent error estimate accepted at h_min


class ScheduleError(ValueError):
    """An event cannot be applied to the system."""


class StaticProvider:
    """Wraps a single immutable spec; no events, no mode switches."""

    def __init__(self, spec: AugmentedSystemSpec):
        self._spec = spec

    def spec(self) -> AugmentedSystemSpec:
        return self._spec

    @property
    def state_names(self):
        names = self._spec.names[: self._spec.n_state]
        return names or tuple(f"x{i}" for i in range(self._spec.n_state))

    def apply_event(self, event, x):
        raise ScheduleError("a bare AugmentedSystemSpec does not support events")

    def complexity_model(self) -> ComplexityModel:
        return ComplexityModel.measured(self._spec)


def as_provider(obj):
    return StaticProvider(obj) if isinstance(obj, AugmentedSystemSpec) else obj


class _Schedule:
    def __init__(self, events):
        self.pending = sorted(events, key=lambda e: e.time)

    def next_time(self, default):
        return self.pending[0].time if self.pending else default

    def fire(self, provider, t, x, out):
        n = 0
        while self.pending and self.pending[0].time <= t + TIME_EPS:
            ev = self.pending.pop(0)
            provider.apply_event(ev, x)
            out.append((t, ev))
            n += 1
        return n


def _angle_check(provider, x, threshold):
    fn = getattr(provider, "relative_angle_deg", None)
    if fn is None or threshold is None:
        return 0.0, False
    ang = fn(x)
    return ang, ang > threshold


def _switch(provider, block, h, x_start):
    detect = getattr(provider, "detect_switch", None)
    if detect is None:
        return None
    return detect(block, h, x_start)


def fixed_integrate(spec_provider, x0, K: int, h: float, t0: float, t_end: float, events=(),
                    model: ComplexityModel | None = None, eta=1e-19,
                    angle_threshold_deg: float | None = 1000.0) -> Trace:
    """Constant-step, constant-order DT integration.

    Steps are clipped to land on scheduled event times and on ``t_end``.  A
    non-finite recursion or a state growing past ``1e12`` ends the run with
    ``status='diverged'``.
    """
    provider = as_provider(spec_provider)
    model = model or provider.complexity_model()
    x = np.array(x0, dtype=float)
    sched = _Schedule(events)
    fired = []
    sched.fire(provider, t0, x, fired)
    rec = TraceRecorder(t0, x, getattr(provider, "state_names", ()))
    t, mults, status, msg, max_ang = t0, 0.0, "completed", "", 0.0
    switches = []
    eta_v = np.broadcast_to(np.asarray(eta, dtype=float), x.shape)
    while t_end - t > TIME_EPS:
        t_stop = min(sched.next_time(t_end), t_end)
        # a remainder below 1e-6 h would only leave a rounding-sized sliver: land instead
        landing = t_stop - t - h <= 1e-6 * h
        h_try = t_stop - t if landing else h
        try:
            block, x_new = dt_step(provider.spec(), x, K, h_try)
        except StepDivergence as exc:
            status, msg = "diverged", f"step divergence at t={t:.6g}: {exc}"
            break
        mults += model(K)
        sw = _switch(provider, block, h_try, x)
        if sw is not None:
            h_try = sw.tau
            x_new = provider.commit_switch(block.evaluate(h_try), sw)
            switches.append(sw)
            landing = False
        r = error_radius(block, x, K, h_try, eta_v)
        e = r ** (K + 1) / (1 - r) / h_try if r < 1 else math.inf
        t = t_stop if landing else t + h_try
        x = x_new
        if np.max(np.abs(x)) > BLOWUP:
            rec.push(t, x, StepRecord(t, h_try, K, e, r, "fixed", 0))
            status, msg = "diverged", f"state magnitude exceeded {BLOWUP:g} at t={t:.6g}"
            break
        sched.fire(provider, t, x, fired)
        rec.push(t, x, StepRecord(t, h_try, K, e, r, "fixed", 0))
        ang, bad = _angle_check(provider, x, angle_threshold_deg)
        max_ang = max(max_ang, ang)
        if bad:
            status, msg = "unstable", f"relative rotor angle {ang:.1f} deg at t={t:.6g}"
            break
    return rec.finish(status=status, t_final=t, multiplies=mults, switches=switches,
                      max_relative_angle_deg=max_ang, message=msg)


def vs_integrate(spec_provider, x0, K: int, t0: float, t_end: float,
                 step_cfg: StepControllerConfig | None = None, events=(), h0: float = 1e-3,
                 model: ComplexityModel | None = None, angle_threshold_deg: float | None = 1000.0,
                 max_steps: int = 1_000_000) -> Trace:
    """Variable-step DT at fixed order ``K`` with PI step control."""
    return _adaptive(spec_provider, x0, t0, t_end, K, step_cfg or StepControllerConfig(), None,
                     model, events, h0, angle_threshold_deg, max_steps)


def vsoo_integrate(spec_provider, x0, t0: float, t_end: float,
                   step_cfg: StepControllerConfig | None = None,
                   order_cfg: OrderControllerConfig | None = None,
                   model: ComplexityModel | None = None, events=(), h0: float = 1e-3,
                   angle_threshold_deg: float | None = 1000.0, max_steps: int = 1_000_000) -> Trace:
    """Variable-step DT with complexity-optimal order selection."""
    order_cfg = order_cfg or OrderControllerConfig()
    return _adaptive(spec_provider, x0, t0, t_end, order_cfg.K0, step_cfg or StepControllerConfig(),
                     order_cfg, model, events, h0, angle_threshold_deg, max_steps)


def _adaptive(spec_provider, x0, t0, t_end, K0, step_cfg, order_cfg, model, events, h0,
              threshold, max_steps) -> Trace:
    provider = as_provider(spec_provider)
    follow_model = model is None
    model = model or provider.complexity_model()
    x = np.array(x0, dtype=float)
    eta = step_cfg.eta_vector(x.size)
    sched = _Schedule(events)
    fired = []
    sched.fire(provider, t0, x, fired)
    rec = TraceRecorder(t0, x, getattr(provider, "state_names", ()))
    t, h, K = t0, step_cfg.clamp(h0), K0
    provenance = "initial"
    e_prev = None
    history: list[tuple[float, int]] = []
    mults, rejected, rejected_here = 0.0, 0, 0
    status, msg, max_ang = "completed", "", 0.0
    switches = []
    n_attempts = 0
    while t_end - t > TIME_EPS:
        n_attempts += 1
        if n_attempts > max_steps:
            status, msg = "diverged", f"step limit {max_steps} reached at t={t:.6g}"
            break
        t_stop = min(sched.next_time(t_end), t_end)
        # a remainder below 1e-6 h would only leave a rounding-sized sliver: land instead
        landing = t_stop - t - h <= 1e-6 * h
        h_try = t_stop - t if landing else h
        try:
            block, x_new = dt_step(provider.spec(), x, K, h_try)
        except StepDivergence:
            mults += model(K)
            if block_failed_at_floor(h_try, step_cfg):
                status, msg = "diverged", f"non-finite series at h_min, t={t:.6g}"
                break
            h = max(h_try / 2, step_cfg.h_min)
            rejected += 1
            rejected_here += 1
            continue
        mults += model(K)
        r = error_radius(block, x, K, h_try, eta)
        try:
            _, e = truncation_error(r, K, h_try)
            ok = accept_step(e, step_cfg)
        except TruncationDivergence:
            ok, e = False, math.inf
        if not ok:
            if h_try > step_cfg.h_min * (1 + 1e-9):
                h = max(h_try / 2, step_cfg.h_min)
                rejected += 1
                rejected_here += 1
                continue
            log.warning("step pinned at h_min=%g accepted with e_n=%.3g > %g*Tol at t=%.6g",
                        step_cfg.h_min, e, step_cfg.reject_factor, t)
        h_used = h_try
        sw = _switch(provider, block, h_try, x)
        if sw is not None:
            h_used = sw.tau
            x_new = block.evaluate(h_used)
            r = error_radius(block, x, K, h_used, eta)
            e = _error_or_inf(r, K, h_used)
            x_new = provider.commit_switch(x_new, sw)
            switches.append(sw)
            landing = False
        t_new = t_stop if (landing and sw is None) else t + h_used
        rec.push(t_new, x_new, StepRecord(t_new, h_used, K, e, r, provenance, rejected_here))
        rejected_here = 0
        # controller update from the step just taken
        e = min(e, E_CAP)
        h_es = pi_step(e, e_prev, K, h_used, step_cfg)
        history.append((h_used, K))
        if order_cfg is None:
            nxt = (h_es, K, "held")
        else:
            nxt = _choose(block, x, e, h_used, K, h_es, history, model, order_cfg, step_cfg)
        e_prev = e
        t, x = t_new, x_new
        if sched.fire(provider, t, x, fired) and follow_model:
            # topology changes (a tripped machine) alter the per-order cost
            model = provider.complexity_model()
        h, K, provenance = nxt
        ang, bad = _angle_check(provider, x, threshold)
        max_ang = max(max_ang, ang)
        if bad:
            status, msg = "unstable", f"relative rotor angle {ang:.1f} deg at t={t:.6g}"
            break
    return rec.finish(status=status, t_final=t, multiplies=mults, rejected=rejected,
                      switches=switches, max_relative_angle_deg=max_ang, message=msg)


def _error_or_inf(r, K, h):
    try:
        return truncation_error(r, K, h)[1]
    except TruncationDivergence:
        return math.inf


def block_failed_at_floor(h_try, step_cfg):
    return h_try <= step_cfg.h_min * (1 + 1e-9)


def _choose(block, x, e, h_n, K_n, h_es, history, model, order_cfg, step_cfg):
    try:
        h_de, K_de, _ = decrease_candidate(block, x, h_n, K_n, order_cfg, step_cfg)
        cand_de = (h_de, K_de)
    except CandidateUnavailable:
        cand_de = None
    try:
        cand_in = increase_candidate(block, e, h_n, K_n, order_cfg, step_cfg)
    except CandidateUnavailable:
        cand_in = None
    hist = (history[-2], history[-1]) if len(history) >= 2 else None
    op = select_operating_point(cand_de, (h_es, K_n), cand_in, hist, model, order_cfg)
    return op.h, op.K, op.provenance
