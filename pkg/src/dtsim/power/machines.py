"""Machine parameter records for the classical and detailed generator models."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

DETAILED_STATES = ("p_sv", "p_m", "v_1", "e_fd", "v_f", "v_ts", "v_r",
                   "delta", "slip", "ed_tr", "eq_tr", "ed_sub", "eq_sub")
CLASSICAL_STATES = ("delta", "slip")


class InitError(ValueError):
    """No admissible equilibrium exists for the given parameters."""


def _from_dict(cls, d: dict):
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names - {"id"}
    if unknown:
        raise ValueError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class ClassicalMachineParams:
    """Constant EMF behind transient reactance. ``E``/``P_m`` are filled by initialisation."""

    H: float
    xd_tr: float
    D: float = 0.0
    E: float = 1.0
    P_m: float = 0.0
    omega_s: float = 2 * math.pi * 60

    def __post_init__(self):
        if self.H <= 0:
            raise ValueError("inertia H must be positive")
        if self.xd_tr <= 0:
            raise ValueError("transient reactance must be positive")

    from_dict = classmethod(_from_dict)


@dataclass
class DetailedMachineParams:
    """Two-axis subtransient machine with governor/turbine, stabiliser and exciter."""

    H: float
    xd: float
    xq: float
    xd_tr: float
    xq_tr: float
    xd_sub: float
    xq_sub: float
    Td0_tr: float
    Tq0_tr: float
    Td0_sub: float
    Tq0_sub: float
    D: float = 0.0
    ra: float = 0.0
    omega_s: float = 2 * math.pi * 60
    # governor / turbine
    T_sv: float = 0.2
    T_ch: float = 0.3
    R: float = 0.05
    p_ref: float = 0.0
    # stabiliser
    T_w: float = 10.0
    K_w: float = 0.0
    K_p: float = 0.0
    K_v: float = 0.0
    # exciter
    T_e: float = 0.314
    K_e: float = 1.0
    T_f: float = 0.35
    K_f: float = 0.063
    T_r: float = 0.02
    T_a: float = 0.2
    K_a: float = 20.0
    v_ref: float = 1.0
    vr_min: float = -5.0
    vr_max: float = 5.0

    def __post_init__(self):
        if self.H <= 0:
            raise ValueError("inertia H must be positive")
        taus = ("Td0_tr", "Tq0_tr", "Td0_sub", "Tq0_sub", "T_sv", "T_ch", "T_w", "T_e", "T_f", "T_r", "T_a")
        bad = [n for n in taus if getattr(self, n) <= 0]
        if bad:
            raise ValueError(f"time constants must be positive: {bad}")
        if not self.vr_min < self.vr_max:
            raise ValueError("vr_min must be below vr_max")
        if not (0 < self.xd_sub < self.xd_tr <= self.xd and 0 < self.xq_sub < self.xq_tr <= self.xq):
            raise ValueError("reactances must satisfy 0 < x'' < x' <= x on both axes")
        if self.R <= 0:
            raise ValueError("droop R must be positive")

    from_dict = classmethod(_from_dict)
