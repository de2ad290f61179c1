"""Classical (swing-equation) multi-machine model on a reduced network."""
from __future__ import annotations

import numpy as np

from ..engine import AugmentedSystemSpec, SpecBuilder
from .machines import ClassicalMachineParams


def _state_names(n: int, labels=None) -> list[str]:
    labels = labels or [str(i + 1) for i in range(n)]
    return [f"{s}_{g}" for g in labels for s in ("delta", "slip")]


def classical_spec(params: list[ClassicalMachineParams], Y_r, fixed_current=None,
                   active=None, labels=None) -> AugmentedSystemSpec:
    """Lifted swing equations with ``P_e,i = Re(E_i e^{j delta_i} conj(I_i))``.

    States per machine are the rotor angle and the per-unit slip:
    ``delta' = omega_s s`` and ``2H s' = P_m - P_e - D s``.

    ``Y_r`` is reduced to the internal nodes of the ``active`` machines (all by
    default); ``fixed_current`` is the constant injection from retained
    fixed-voltage nodes. Inactive machines keep their rows with zero derivative.
    """
    n = len(params)
    active = list(range(n)) if active is None else list(active)
    Y_r = np.asarray(Y_r, dtype=complex)
    m = len(active)
    if Y_r.shape != (m, m):
        raise ValueError(f"reduced admittance must be {m}x{m}, got {Y_r.shape}")
    i_fix = np.zeros(m, complex) if fixed_current is None else np.asarray(fixed_current, complex)
    b = SpecBuilder(_state_names(n, labels))
    one = b.const()
    sc = [b.sincos(2 * g, str(g + 1)) for g in active]
    G, B = Y_r.real, Y_r.imag
    E = np.array([params[g].E for g in active])
    re_rows, im_rows = [], []
    for a, g in enumerate(active):
        rows = [r for s, c in sc for r in (c, s)]
        w_re = [x for j in range(m) for x in (G[a, j] * E[j], -B[a, j] * E[j])]
        w_im = [x for j in range(m) for x in (B[a, j] * E[j], G[a, j] * E[j])]
        re_rows.append(b.linear(f"ire_{g + 1}", rows, w_re, i_fix[a].real))
        im_rows.append(b.linear(f"iim_{g + 1}", rows, w_im, i_fix[a].imag))
    for a, g in enumerate(active):
        p = params[g]
        s, c = sc[a]
        pc = b.product(c, re_rows[a], f"cos_ire_{g + 1}")
        ps = b.product(s, im_rows[a], f"sin_iim_{g + 1}")
        d, w = 2 * g, 2 * g + 1
        b.add(d, w, p.omega_s)
        k = 1.0 / (2 * p.H)
        b.add(w, one, p.P_m * k)
        b.add(w, pc, -p.E * k)
        b.add(w, ps, -p.E * k)
        b.add(w, w, -p.D * k)
    return b.build()


def electrical_power(params, Y_r, x, fixed_current=None, active=None) -> np.ndarray:
    """Electrical output of the active machines at state ``x``."""
    n = len(params)
    active = list(range(n)) if active is None else list(active)
    x = np.asarray(x, dtype=float)
    E = np.array([params[g].E for g in active])
    F = E * np.exp(1j * x[[2 * g for g in active]])
    I = np.asarray(Y_r, complex) @ F
    if fixed_current is not None:
        I = I + fixed_current
    return (F * np.conj(I)).real


def classical_rhs(params, Y_r, fixed_current=None, active=None):
    """Plain right-hand side ``f(x)`` of the same model, for the reference integrators."""
    n = len(params)
    active = list(range(n)) if active is None else list(active)
    H = np.array([params[g].H for g in active])
    D = np.array([params[g].D for g in active])
    Pm = np.array([params[g].P_m for g in active])
    ws = np.array([params[g].omega_s for g in active])
    d_idx = np.array([2 * g for g in active], dtype=int)

    def f(x):
        x = np.asarray(x, dtype=float)
        dx = np.zeros_like(x)
        if len(active) == 0:
            return dx
        s = x[d_idx + 1]
        pe = electrical_power(params, Y_r, x, fixed_current, active)
        dx[d_idx] = ws * s
        dx[d_idx + 1] = (Pm - pe - D * s) / (2 * H)
        return dx

    return f
