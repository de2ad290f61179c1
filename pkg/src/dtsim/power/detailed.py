"""Detailed two-axis machine with governor, turbine, stabiliser and exciter controls.

The network is reduced to the internal subtransient nodes of the machines,
i.e. each machine is a source ``E''`` behind ``ra + j x''``. Machine and
network frames are related by ``xy = dq * (sin d - j cos d)``.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..engine import AugmentedSystemSpec, SpecBuilder, SpecError
from .machines import DETAILED_STATES, DetailedMachineParams, InitError

NX = len(DETAILED_STATES)
ROW = {name: k for k, name in enumerate(DETAILED_STATES)}
LIMITER_MODES = ("free", "max", "min")
SUB_TOL = 1e-12


def state_names(n: int, labels=None) -> list[str]:
    labels = labels or [str(i + 1) for i in range(n)]
    return [f"{s}_{g}" for g in labels for s in DETAILED_STATES]


def source_impedance(p: DetailedMachineParams) -> complex:
    if abs(p.xd_sub - p.xq_sub) > SUB_TOL:
        raise SpecError("reduced-network interface needs equal subtransient reactances (xd_sub == xq_sub)")
    return complex(p.ra, p.xd_sub)


def rotate_to_network(d, q, delta):
    """dq components to network (x, y) components."""
    s, c = np.sin(delta), np.cos(delta)
    return s * d + c * q, -c * d + s * q


def rotate_to_machine(x, y, delta):
    """Inverse of :func:`rotate_to_network`."""
    s, c = np.sin(delta), np.cos(delta)
    return s * x - c * y, c * x + s * y


def _stabiliser_signal(p, pe, vt, v1):
    return p.K_w + p.K_p * pe + p.K_v * vt + v1


def network_outputs(params, Y_r, x, fixed_current=None, active=None) -> dict:
    """Algebraic quantities (currents, voltages, power) of the active machines."""
    n = len(params)
    active = list(range(n)) if active is None else list(active)
    x = np.asarray(x, dtype=float)
    base = np.array([NX * g for g in active], dtype=int)
    delta = x[base + ROW["delta"]]
    rot = np.sin(delta) - 1j * np.cos(delta)
    Eint = (x[base + ROW["ed_sub"]] + 1j * x[base + ROW["eq_sub"]]) * rot
    I = np.asarray(Y_r, complex) @ Eint
    if fixed_current is not None:
        I = I + fixed_current
    z = np.array([source_impedance(params[g]) for g in active])
    V = Eint - z * I
    Idq = I * np.conj(rot)
    Vdq = V * np.conj(rot)
    pe = (V * np.conj(I)).real
    vt = np.abs(V)
    v1 = x[base + ROW["v_1"]]
    vs = np.array([_stabiliser_signal(params[g], pe[a], vt[a], v1[a]) for a, g in enumerate(active)])
    return {"i_x": I.real, "i_y": I.imag, "v_x": V.real, "v_y": V.imag,
            "i_d": Idq.real, "i_q": Idq.imag, "v_d": Vdq.real, "v_q": Vdq.imag,
            "v_t": vt, "p_e": pe, "v_s": vs}


def _check_modes(params, limiter_modes, active, x):
    for g in active:
        mode = limiter_modes[g]
        if mode not in LIMITER_MODES:
            raise SpecError(f"unknown limiter mode {mode!r}")
        if x is None or mode == "free":
            continue
        vr = x[NX * g + ROW["v_r"]]
        lim = params[g].vr_max if mode == "max" else params[g].vr_min
        if abs(vr - lim) > 1e-9 * max(1.0, abs(lim)):
            raise SpecError(f"machine {g + 1}: limiter mode {mode} but v_r={vr:.6g} is not at the limit")


def detailed_spec(params: list[DetailedMachineParams], Y_r, limiter_modes=None, fixed_current=None,
                  active=None, labels=None, x=None) -> AugmentedSystemSpec:
    """Lifted detailed model; ``limiter_modes[g]`` in {"free", "max", "min"}.

    A saturated mode freezes ``v_r`` (its row of J is zero). When ``x`` is
    given, saturated modes are checked against the actual ``v_r``.
    """
    n = len(params)
    active = list(range(n)) if active is None else list(active)
    modes = list(limiter_modes) if limiter_modes is not None else ["free"] * n
    if len(modes) != n:
        raise SpecError("one limiter mode per machine required")
    _check_modes(params, modes, active, x)
    Y_r = np.asarray(Y_r, dtype=complex)
    m = len(active)
    if Y_r.shape != (m, m):
        raise ValueError(f"reduced admittance must be {m}x{m}, got {Y_r.shape}")
    i_fix = np.zeros(m, complex) if fixed_current is None else np.asarray(fixed_current, complex)
    z = np.array([source_impedance(params[g]) for g in active])
    tags = [str(g + 1) for g in range(n)] if labels is None else list(labels)

    b = SpecBuilder(state_names(n, labels))
    one = b.const()
    row = lambda g, name: NX * g + ROW[name]  # noqa: E731
    sc = [b.sincos(row(g, "delta"), tags[g]) for g in active]

    # rotor-frame EMF products: [s*ed, c*eq, s*eq, c*ed] per machine
    prod = []
    for a, g in enumerate(active):
        s, c = sc[a]
        prod += [b.product(s, row(g, "ed_sub"), f"sin_ed_{tags[g]}"),
                 b.product(c, row(g, "eq_sub"), f"cos_eq_{tags[g]}"),
                 b.product(s, row(g, "eq_sub"), f"sin_eq_{tags[g]}"),
                 b.product(c, row(g, "ed_sub"), f"cos_ed_{tags[g]}")]
    Mx = np.zeros((m, 4 * m))
    My = np.zeros((m, 4 * m))
    for a in range(m):
        Mx[a, 4 * a] = Mx[a, 4 * a + 1] = 1.0
        My[a, 4 * a + 2], My[a, 4 * a + 3] = 1.0, -1.0
    G, B = Y_r.real, Y_r.imag
    Wix, Wiy = G @ Mx - B @ My, B @ Mx + G @ My
    ra, xs = np.diag(z.real), np.diag(z.imag)
    Wvx = Mx - ra @ Wix + xs @ Wiy
    Wvy = My - ra @ Wiy - xs @ Wix
    bix, biy = i_fix.real, i_fix.imag
    bvx = -(z.real * bix - z.imag * biy)
    bvy = -(z.real * biy + z.imag * bix)

    def lin(name, w, bias):
        nz = np.flatnonzero(w)
        return b.linear(name, [prod[k] for k in nz], w[nz], bias)

    ix = [lin(f"i_x_{tags[g]}", Wix[a], bix[a]) for a, g in enumerate(active)]
    iy = [lin(f"i_y_{tags[g]}", Wiy[a], biy[a]) for a, g in enumerate(active)]
    vx = [lin(f"v_x_{tags[g]}", Wvx[a], bvx[a]) for a, g in enumerate(active)]
    vy = [lin(f"v_y_{tags[g]}", Wvy[a], bvy[a]) for a, g in enumerate(active)]

    for a, g in enumerate(active):
        p, t = params[g], tags[g]
        s, c = sc[a]
        q1 = b.product(s, ix[a], f"sin_ix_{t}")
        q2 = b.product(c, iy[a], f"cos_iy_{t}")
        q3 = b.product(c, ix[a], f"cos_ix_{t}")
        q4 = b.product(s, iy[a], f"sin_iy_{t}")
        q5 = b.product(vx[a], ix[a], f"vx_ix_{t}")
        q6 = b.product(vy[a], iy[a], f"vy_iy_{t}")
        q7 = b.product(vx[a], vx[a], f"vx_sq_{t}")
        q8 = b.product(vy[a], vy[a], f"vy_sq_{t}")
        i_d = b.linear(f"i_d_{t}", [q1, q2], [1.0, -1.0])
        i_q = b.linear(f"i_q_{t}", [q3, q4], [1.0, 1.0])
        p_e = b.linear(f"p_e_{t}", [q5, q6], [1.0, 1.0])
        w = b.linear(f"v_t_sq_{t}", [q7, q8], [1.0, 1.0])
        v_t = b.sqrt(w, f"v_t_{t}")
        r = lambda name: row(g, name)  # noqa: E731

        b.add(r("p_sv"), r("p_sv"), -1 / p.T_sv)
        b.add(r("p_sv"), one, p.p_ref / p.T_sv)
        b.add(r("p_sv"), r("slip"), -1 / (p.R * p.T_sv))
        b.add(r("p_m"), r("p_m"), -1 / p.T_ch)
        b.add(r("p_m"), r("p_sv"), 1 / p.T_ch)
        for src, k in ((one, p.K_w), (p_e, p.K_p), (v_t, p.K_v), (r("v_1"), 1.0)):
            b.add(r("v_1"), src, -k / p.T_w)
        b.add(r("e_fd"), r("v_r"), 1 / p.T_e)
        b.add(r("e_fd"), r("e_fd"), -p.K_e / p.T_e)
        b.add(r("v_f"), r("v_f"), -1 / p.T_f)
        b.add(r("v_f"), r("e_fd"), p.K_f / p.T_f)
        b.add(r("v_ts"), r("v_ts"), -1 / p.T_r)
        b.add(r("v_ts"), v_t, 1 / p.T_r)
        if modes[g] == "free":
            ka = p.K_a / p.T_a
            b.add(r("v_r"), r("v_r"), -1 / p.T_a)
            b.add(r("v_r"), one, ka * (p.v_ref + p.K_w))
            b.add(r("v_r"), p_e, ka * p.K_p)
            b.add(r("v_r"), v_t, ka * p.K_v)
            b.add(r("v_r"), r("v_1"), ka)
            b.add(r("v_r"), r("v_ts"), -ka)
            b.add(r("v_r"), r("v_f"), -ka)
        b.add(r("delta"), r("slip"), p.omega_s)
        k = 1 / (2 * p.H)
        b.add(r("slip"), r("p_m"), k)
        b.add(r("slip"), p_e, -k)
        b.add(r("slip"), r("slip"), -p.D * k)
        dq = p.xq_tr - p.xq_sub
        b.add(r("ed_tr"), r("ed_tr"), -(p.xq - p.xq_sub) / dq / p.Tq0_tr)
        b.add(r("ed_tr"), r("ed_sub"), (p.xq - p.xq_tr) / dq / p.Tq0_tr)
        dd = p.xd_tr - p.xd_sub
        b.add(r("eq_tr"), r("eq_tr"), -(p.xd - p.xd_sub) / dd / p.Td0_tr)
        b.add(r("eq_tr"), r("eq_sub"), (p.xd - p.xd_tr) / dd / p.Td0_tr)
        b.add(r("eq_tr"), r("e_fd"), 1 / p.Td0_tr)
        b.add(r("ed_sub"), r("ed_tr"), 1 / p.Tq0_sub)
        b.add(r("ed_sub"), r("ed_sub"), -1 / p.Tq0_sub)
        b.add(r("ed_sub"), i_q, dq / p.Tq0_sub)
        b.add(r("eq_sub"), r("eq_tr"), 1 / p.Td0_sub)
        b.add(r("eq_sub"), r("eq_sub"), -1 / p.Td0_sub)
        b.add(r("eq_sub"), i_d, -dd / p.Td0_sub)
    return b.build()


def regulator_free_derivative(p: DetailedMachineParams, xm, pe, vt) -> float:
    """Unlimited regulator derivative for one machine's 13-state slice."""
    vs = _stabiliser_signal(p, pe, vt, xm[ROW["v_1"]])
    return (-xm[ROW["v_r"]] + p.K_a * (p.v_ref + vs - xm[ROW["v_ts"]] - xm[ROW["v_f"]])) / p.T_a


def detailed_rhs(params, Y_r, fixed_current=None, active=None):
    """Plain right-hand side with the regulator limits applied pointwise."""
    n = len(params)
    active = list(range(n)) if active is None else list(active)

    def f(x):
        x = np.asarray(x, dtype=float)
        dx = np.zeros_like(x)
        if not active:
            return dx
        out = network_outputs(params, Y_r, x, fixed_current, active)
        for a, g in enumerate(active):
            p = params[g]
            xm = x[NX * g: NX * (g + 1)]
            d = dx[NX * g: NX * (g + 1)]
            v = lambda name: xm[ROW[name]]  # noqa: E731
            pe, vt, i_d, i_q = out["p_e"][a], out["v_t"][a], out["i_d"][a], out["i_q"][a]
            d[ROW["p_sv"]] = (-v("p_sv") + p.p_ref - v("slip") / p.R) / p.T_sv
            d[ROW["p_m"]] = (-v("p_m") + v("p_sv")) / p.T_ch
            d[ROW["v_1"]] = -_stabiliser_signal(p, pe, vt, v("v_1")) / p.T_w
            d[ROW["e_fd"]] = (v("v_r") - p.K_e * v("e_fd")) / p.T_e
            d[ROW["v_f"]] = (-v("v_f") + p.K_f * v("e_fd")) / p.T_f
            d[ROW["v_ts"]] = (-v("v_ts") + vt) / p.T_r
            dvr = regulator_free_derivative(p, xm, pe, vt)
            if (v("v_r") >= p.vr_max and dvr > 0) or (v("v_r") <= p.vr_min and dvr < 0):
                dvr = 0.0
            d[ROW["v_r"]] = dvr
            d[ROW["delta"]] = p.omega_s * v("slip")
            d[ROW["slip"]] = (v("p_m") - pe - p.D * v("slip")) / (2 * p.H)
            dq, dd = p.xq_tr - p.xq_sub, p.xd_tr - p.xd_sub
            d[ROW["ed_tr"]] = (-(p.xq - p.xq_sub) / dq * v("ed_tr") + (p.xq - p.xq_tr) / dq * v("ed_sub")) / p.Tq0_tr
            d[ROW["eq_tr"]] = (-(p.xd - p.xd_sub) / dd * v("eq_tr") + (p.xd - p.xd_tr) / dd * v("eq_sub")
                               + v("e_fd")) / p.Td0_tr
            d[ROW["ed_sub"]] = (v("ed_tr") - v("ed_sub") + dq * i_q) / p.Tq0_sub
            d[ROW["eq_sub"]] = (v("eq_tr") - v("eq_sub") - dd * i_d) / p.Td0_sub
        return dx

    return f


def init_detailed_machine(p: DetailedMachineParams, V: complex, I: complex):
    """Steady state of one machine from its terminal voltage and current phasors.

    Returns the 13-element state and a copy of ``p`` with ``p_ref``/``v_ref`` set.
    """
    delta = np.angle(V + complex(p.ra, p.xq) * I)
    i_d, i_q = rotate_to_machine(I.real, I.imag, delta)
    v_d, v_q = rotate_to_machine(V.real, V.imag, delta)
    ed_tr = (p.xq - p.xq_tr) * i_q
    ed_sub = (p.xq - p.xq_sub) * i_q
    eq_sub = v_q + p.ra * i_q + p.xd_sub * i_d
    eq_tr = eq_sub + (p.xd_tr - p.xd_sub) * i_d
    e_fd = eq_sub + (p.xd - p.xd_sub) * i_d
    v_r = p.K_e * e_fd
    if not p.vr_min <= v_r <= p.vr_max:
        raise InitError(f"required regulator output {v_r:.4g} lies outside [{p.vr_min}, {p.vr_max}]")
    v_f = p.K_f * e_fd
    vt = abs(V)
    pe = (V * np.conj(I)).real
    v_1 = -(p.K_w + p.K_p * pe + p.K_v * vt)
    v_ref = v_r / p.K_a + vt + v_f
    x = np.zeros(NX)
    vals = dict(p_sv=pe, p_m=pe, v_1=v_1, e_fd=e_fd, v_f=v_f, v_ts=vt, v_r=v_r, delta=delta,
                slip=0.0, ed_tr=ed_tr, eq_tr=eq_tr, ed_sub=ed_sub, eq_sub=eq_sub)
    for k, val in vals.items():
        x[ROW[k]] = val
    return x, replace(p, p_ref=float(pe), v_ref=float(v_ref))
