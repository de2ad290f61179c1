"""Truncation-error estimation, I/PI step-size controllers and their stability analysis."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .series import CoefficientBlock

log = logging.getLogger(__name__)

ERROR_FLOOR = 1e-300


class TruncationDivergence(ArithmeticError):
    """The coefficient decay ratio ``r`` is >= 1, so the geometric tail bound fails."""


@dataclass(frozen=True)
class StepControllerConfig:
    """Tolerance, step bounds and controller gains.

    Defaults follow the 9-bus settings: ``Tol=1e-5``, ``h`` in ``[1e-4, 0.2]``,
    ``gamma=1``, ``theta_max=2``, ``eta=1e-19``; integral and proportional gains
    are ``ki_coeff / K`` and ``kp_coeff / K``.
    """

    tol: float = 1e-5
    gamma: float = 1.0
    theta_max: float = 2.0
    h_min: float = 1e-4
    h_max: float = 0.2
    eta: float | tuple = 1e-19
    ki_coeff: float = 0.3
    kp_coeff: float = 0.4
    reject_factor: float = 2.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.h_min < self.h_max:
            raise ValueError("need 0 < h_min < h_max")
        if not self.theta_max > 1:
            raise ValueError("theta_max must exceed 1")
        if not self.reject_factor >= 1:
            raise ValueError("reject_factor must be >= 1")
        if np.any(np.asarray(self.eta) < 0):
            raise ValueError("eta must be non-negative")

    def eta_vector(self, n: int) -> np.ndarray:
        eta = np.asarray(self.eta, dtype=float)
        return np.full(n, float(eta)) if eta.ndim == 0 else eta

    def gains(self, K: int) -> tuple[float, float]:
        return self.ki_coeff / K, self.kp_coeff / K

    def clamp(self, h: float) -> float:
        return min(max(h, self.h_min), self.h_max)


@dataclass
class StepControllerState:
    h_n: float
    e_n: float = 0.0
    e_prev: float = 0.0
    n: int = 0
    has_history: bool = False


def _normalised_terms(block: CoefficientBlock, x, order: int, h: float, eta) -> np.ndarray:
    X = block.state[:, order]
    denom = np.abs(np.asarray(x, dtype=float)) + np.asarray(eta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = np.abs(X) * h**order / denom
    return np.where(X == 0, 0.0, t)


def error_radius(block: CoefficientBlock, x, K: int, h: float, eta) -> float:
    """Root-criterion radius ``(max_i |X_i(K) h^K| / (|x_i| + eta_i))^(1/K)``."""
    if h <= 0:
        raise ValueError("h must be positive")
    m = float(np.max(_normalised_terms(block, x, K, h, eta), initial=0.0))
    if m == 0.0:
        return 0.0
    return m ** (1.0 / K)


def truncation_error(r: float, K: int, h: float) -> tuple[float, float]:
    """Geometric tail bound ``E = r^(K+1) / (1 - r)`` and the per-time error ``E / h``."""
    if h <= 0:
        raise ValueError("h must be positive")
    if not r < 1.0:
        raise TruncationDivergence(f"decay ratio r={r:.4g} >= 1")
    E = r ** (K + 1) / (1.0 - r)
    return E, E / h


def basic_step(e_n: float, K: int, h_n: float, cfg: StepControllerConfig) -> float:
    """Integral (elementary) controller: ``theta = min(gamma (Tol/e)^(1/K), theta_max)``."""
    e = max(e_n, ERROR_FLOOR)
    theta = min(cfg.gamma * (cfg.tol / e) ** (1.0 / K), cfg.theta_max)
    return cfg.clamp(theta * h_n)


def pi_step(e_n: float, e_prev: float | None, K: int, h_n: float, cfg: StepControllerConfig) -> float:
    """PI controller ``h_n (gamma^K Tol / e_n)^KI (e_prev / e_n)^KP``.

    Without error history the elementary controller is used instead.  Growth is
    capped at ``theta_max`` before clamping to ``[h_min, h_max]``.
    """
    if e_prev is None:
        return basic_step(e_n, K, h_n, cfg)
    e = max(e_n, ERROR_FLOOR)
    ep = max(e_prev, ERROR_FLOOR)
    ki, kp = cfg.gains(K)
    # log form keeps gamma^K * Tol representable for tiny tolerances
    log_theta = ki * (K * math.log(cfg.gamma) + math.log(cfg.tol) - math.log(e)) + kp * (math.log(ep) - math.log(e))
    theta = min(math.exp(min(log_theta, 700.0)), cfg.theta_max)
    return cfg.clamp(theta * h_n)


def accept_step(e_n: float, cfg: StepControllerConfig) -> bool:
    """Accept iff ``e_n <= reject_factor * Tol`` (boundary inclusive)."""
    return e_n <= cfg.reject_factor * cfg.tol


def char_roots(K: int, ki: float, kp: float, variant: str = "full") -> tuple[complex, complex]:
    """Roots of the step-size recursion's characteristic polynomial.

    ``variant='full'``: ``l^2 - (K a - 1) l - K b = 0``;
    ``variant='last'``: ``l^2 - (K a - 1 - a) l - (K - 1) b = 0``, where
    ``a = ki + kp`` and ``b = kp``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    a, b = ki + kp, kp
    if variant in ("full", "full-series"):
        p, q = K * a - 1.0, K * b
    elif variant in ("last", "last-term"):
        p, q = K * a - 1.0 - a, (K - 1) * b
    else:
        raise ValueError(f"unknown variant {variant!r}")
    disc = complex(p * p + 4.0 * q) ** 0.5
    r1, r2 = (p + disc) / 2.0, (p - disc) / 2.0
    return (r1, r2) if abs(r1) >= abs(r2) or r1 == r2 else (r2, r1)


def stability_polynomial(z, K: int):
    """``D(z) = sum_{p<=K} z^p / p!`` and its derivative."""
    z = complex(z)
    terms = [1.0 + 0j]
    for p in range(1, K + 1):
        terms.append(terms[-1] * z / p)
    D = sum(terms)
    dD = sum(terms[:-1])
    return D, dD


@dataclass
class StabilityProbe:
    K: int
    alpha: float
    beta: float
    z: complex
    u: float = field(init=False)
    v: float = field(init=False)

    def __post_init__(self):
        D, dD = stability_polynomial(self.z, self.K)
        if D == 0:
            raise ZeroDivisionError("D(z) = 0: pole of the log-map")
        self.u = (dD * self.z / D).real
        # E(z) = z^K / K!  =>  E'(z) z / E(z) = K identically
        self.v = float(self.K)

    def jacobian(self) -> np.ndarray:
        a, b, u, v = self.alpha, self.beta, self.u, self.v
        return np.array([
            [1.0, u, 0.0, 0.0],
            [-a, 1.0 - a * v, b, b * v],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
        ])


def pi_jacobian_radius(z, K: int, alpha: float, beta: float) -> float:
    """Spectral radius of the linearised DT+PI log-map at ``z = lambda h``."""
    probe = StabilityProbe(K, alpha, beta, complex(z))
    return float(np.max(np.abs(np.linalg.eigvals(probe.jacobian()))))


def stability_table(K: int, ki: float, kp: float, variant: str = "full", zs=()) -> list[dict]:
    """Rows for the stability CSV: characteristic roots and Jacobian radii on a z-grid."""
    l1, l2 = char_roots(K, ki, kp, variant)
    base = {"K": K, "ki": ki, "kp": kp, "variant": variant,
            "root1_re": l1.real, "root1_im": l1.imag, "root2_re": l2.real, "root2_im": l2.imag,
            "max_root_modulus": max(abs(l1), abs(l2))}
    if not zs:
        return [dict(base, z_re="", z_im="", u="", v="", spectral_radius="")]
    rows = []
    for z in zs:
        z = complex(z)
        p = StabilityProbe(K, ki + kp, kp, z)
        rho = float(np.max(np.abs(np.linalg.eigvals(p.jacobian()))))
        rows.append(dict(base, z_re=z.real, z_im=z.imag, u=p.u, v=p.v, spectral_radius=rho))
    return rows
