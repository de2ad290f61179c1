"""Complexity models and the step/order operating-point selection."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import AugmentedSystemSpec
from .series import CoefficientBlock
from .step_control import ERROR_FLOOR, StepControllerConfig, _normalised_terms


class CandidateUnavailable(LookupError):
    """The requested order lies outside ``[K_min, K_max]``."""


@dataclass(frozen=True)
class ComplexityModel:
    """Multiplication count per DT step, ``C(K) = n1 K^2 + n2 K + n3``."""

    kind: str
    n1: float
    n2: float
    n3: float
    n_gen: int = 0
    n_state: int = 0
    n_aug: int = 0

    @classmethod
    def classical(cls, n_gen: int, n_state: int, n_aug: int) -> "ComplexityModel":
        g, nx, nz = n_gen, n_state, n_aug
        return cls("classical", 2 * g, 2 * g + 4 * g * g + nx * nz + nx, nx, g, nx, nz)

    @classmethod
    def detailed(cls, n_gen: int, n_state: int, n_aug: int) -> "ComplexityModel":
        g, nx, nz = n_gen, n_state, n_aug
        return cls("detailed", 17 * g / 2, 4 * g * g + 27 * g / 2 + nx * nz + nx, nx, g, nx, nz)

    @classmethod
    def measured(cls, spec: AugmentedSystemSpec, n_gen: int = 0) -> "ComplexityModel":
        """Count multiplications of the registered rules.

        Per recursion order ``k`` (``k = 0..K-1``): a product costs ``k + 1``,
        each sin or cos row ``1.5 k`` (the shared ``m * Delta(m)`` term is split
        between the pair), a square root ``k``, a linear rule one per weight, and
        ``J Z(k) / (k+1)`` costs ``nnz(J) + N_x``.  Horner evaluation adds
        ``N_x K``; the constant term is ``N_x``.
        """
        n_prod = n_sc = n_sqrt = n_lin = 0
        for r in spec.rules:
            if r.kind == "product":
                n_prod += 1
            elif r.kind in ("sin", "cos"):
                n_sc += 1
            elif r.kind == "sqrt":
                n_sqrt += 1
            else:
                n_lin += sum(1 for w in r.weights if w != 0)
        quad = 1.5 * n_sc + n_sqrt  # sum_{k<K} k = K^2/2 - K/2
        nx = spec.n_state
        n1 = 0.5 * n_prod + 0.5 * quad
        n2 = 0.5 * n_prod - 0.5 * quad + n_lin + np.count_nonzero(spec.J) + 2 * nx
        return cls("measured", n1, n2, nx, n_gen, nx, spec.n_aug)

    def scaled(self, factor: float) -> "ComplexityModel":
        return ComplexityModel(self.kind, self.n1 * factor, self.n2 * factor, self.n3 * factor,
                               self.n_gen, self.n_state, self.n_aug)

    def __call__(self, K: int) -> float:
        return complexity(self, K)


def complexity(model: ComplexityModel, K: int) -> float:
    return model.n1 * K * K + model.n2 * K + model.n3


@dataclass(frozen=True)
class OrderControllerConfig:
    """Order bounds and switching thresholds (9-bus defaults)."""

    K0: int = 4
    K_min: int = 4
    K_max: int = 45
    mu_de: float = 1.0
    mu_in: float = 1.02
    dK_dec: int = 1
    dK_inc: int = 1

    def __post_init__(self):
        if not self.K_min <= self.K0 <= self.K_max:
            raise ValueError("need K_min <= K0 <= K_max")
        if self.K_min < 1 or self.dK_dec < 1 or self.dK_inc < 1:
            raise ValueError("orders and order increments must be positive")
        if self.mu_de < 1 or self.mu_in < 1:
            raise ValueError("switching factors must be >= 1")

    def check_envelope(self) -> list[str]:
        """Violations of the recommended envelope ``4 <= K_min``, ``K_max <= 45``, ``mu <= 2.5``."""
        out = []
        if self.K_min < 4:
            out.append("K_min below 4")
        if self.K_max > 45:
            out.append("K_max above 45")
        if self.mu_de > 2.5 or self.mu_in > 2.5:
            out.append("switching factor above 2.5")
        return out


@dataclass(frozen=True)
class OperatingPoint:
    h: float
    K: int
    provenance: str  # 'decreased' | 'held' | 'increased'


def _theta(tol_ratio_log: float, K: int, cfg: StepControllerConfig) -> float:
    return min(cfg.gamma * math.exp(min(tol_ratio_log / K, 700.0)), cfg.theta_max)


def decrease_candidate(block: CoefficientBlock, x, h_n: float, K_n: int,
                       cfg: OrderControllerConfig, step_cfg: StepControllerConfig):
    """Lower-order candidate ``(h_de, K_de, e_de)`` re-using the already computed ``X(K_de)``."""
    K_de = K_n - cfg.dK_dec
    if K_de < cfg.K_min:
        raise CandidateUnavailable(f"K_de={K_de} < K_min={cfg.K_min}")
    eta = step_cfg.eta_vector(block.n_state)
    m = float(np.max(_normalised_terms(block, x, K_de, h_n, eta), initial=0.0))
    r = m ** (1.0 / K_de) if m > 0 else 0.0
    if r >= 1.0:
        return step_cfg.h_min, K_de, math.inf
    e_de = r ** (K_de + 1) / ((1.0 - r) * h_n)
    theta = _theta(math.log(step_cfg.tol) - math.log(max(e_de, ERROR_FLOOR)), K_de, step_cfg)
    h_de = step_cfg.clamp(theta * h_n)
    return h_de, K_de, e_de


def convergence_rate(block: CoefficientBlock, K_n: int, eta, h: float = 1.0) -> float:
    """Ratio factor ``rho_in`` estimated from orders ``K_n-3 .. K_n``.

    Ratios are taken between the step terms ``X(k) h^k``, so the result is the
    dimensionless factor by which one more order shrinks the tail; ``h=1``
    gives the raw coefficient ratios.
    """
    X = np.abs(block.state)
    floor = np.maximum(np.asarray(eta, dtype=float), ERROR_FLOOR)
    with np.errstate(over="ignore"):
        t1 = np.max(X[:, K_n - 1] / np.maximum(X[:, K_n], floor))
        t2 = max(np.max(np.sqrt(X[:, K_n - j - 2] / np.maximum(X[:, K_n - j], floor))) for j in (0, 1))
    return float(min(t1, t2)) / h


def increase_candidate(block: CoefficientBlock, e_n: float, h_n: float, K_n: int,
                       cfg: OrderControllerConfig, step_cfg: StepControllerConfig):
    """Higher-order candidate ``(h_in, K_in)`` extrapolated with ``rho_in``."""
    K_in = K_n + cfg.dK_inc
    if K_in > cfg.K_max:
        raise CandidateUnavailable(f"K_in={K_in} > K_max={cfg.K_max}")
    if K_n < 3:
        raise CandidateUnavailable("order increase needs K_n >= 3")
    rho = convergence_rate(block, K_n, step_cfg.eta_vector(block.n_state), h_n)
    if rho <= 0:
        return step_cfg.h_min, K_in
    log_e_in = math.log(max(e_n, ERROR_FLOOR)) - cfg.dK_inc * math.log(rho)
    theta = _theta(math.log(step_cfg.tol) - log_e_in, K_in, step_cfg)
    return step_cfg.clamp(theta * h_n), K_in


def select_operating_point(cand_de, cand_hold, cand_in, history, model: ComplexityModel,
                           cfg: OrderControllerConfig) -> OperatingPoint:
    """Choose the next ``(h, K)`` from the decrease/hold/increase candidates.

    ``cand_de`` and ``cand_in`` are ``(h, K)`` pairs or ``None`` when out of
    bounds; ``cand_hold = (h_es, K_n)``.  ``history`` is
    ``((h_prev, K_prev), (h_n, K_n))`` or ``None`` (forces the held point).
    """
    h_es, K_n = cand_hold
    held = OperatingPoint(h_es, K_n, "held")
    if history is None:
        return held
    (h_prev, K_prev), (h_cur, K_cur) = history
    cond_de = h_prev <= h_cur or K_cur <= K_prev
    cond_in = h_cur <= h_prev or K_prev <= K_cur
    base = h_es / model(K_n)
    if cond_de and cond_in and cand_de is not None and cand_in is not None:
        options = [OperatingPoint(cand_de[0], cand_de[1], "decreased"), held,
                   OperatingPoint(cand_in[0], cand_in[1], "increased")]
        # ties resolve toward the lower order: options are sorted by K and max() keeps the first
        return max(options, key=lambda p: p.h / model(p.K))
    if cond_de and cand_de is not None and cand_de[0] / model(cand_de[1]) > cfg.mu_de * base:
        return OperatingPoint(cand_de[0], cand_de[1], "decreased")
    if cond_in and cand_in is not None and cand_in[0] / model(cand_in[1]) > cfg.mu_in * base:
        return OperatingPoint(cand_in[0], cand_in[1], "increased")
    return held
