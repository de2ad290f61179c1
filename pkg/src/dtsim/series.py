"""Power-series coefficient containers and the differential-transformation rules.

A differential transform of ``x(t)`` around a step start ``t_n`` is the sequence
``X(k) = x^(k)(t_n) / k!``.  Every rule below maps lower-order coefficients of
its operands to the order-``k`` coefficient of the result.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SeriesEvaluationError(ArithmeticError):
    """Raised when a coefficient block holds non-finite values."""


@dataclass
class CoefficientBlock:
    """Taylor coefficients of one step, rows = variables, columns = orders.

    State rows come first (``n_state`` of them), followed by the intermediate
    (lifted) rows, so ``coeffs.shape == (n_aug, order + 1)``.
    """

    order: int
    n_state: int
    coeffs: np.ndarray

    @property
    def n_aug(self) -> int:
        return self.coeffs.shape[0]

    @property
    def state(self) -> np.ndarray:
        return self.coeffs[: self.n_state]

    def evaluate(self, h: float, rows=None, order: int | None = None) -> np.ndarray:
        """Evaluate selected rows (state rows by default) at offset ``h``."""
        c = self.state if rows is None else self.coeffs[rows]
        if order is not None:
            c = c[..., : order + 1]
        return horner(c, h)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.coeffs).all())


def horner(coeffs: np.ndarray, h: float) -> np.ndarray:
    """Evaluate ``sum_k coeffs[..., k] * h**k`` by Horner's scheme."""
    coeffs = np.asarray(coeffs, dtype=float)
    out = coeffs[..., -1].copy()
    for k in range(coeffs.shape[-1] - 2, -1, -1):
        out = out * h + coeffs[..., k]
    return out


def series_eval(block: CoefficientBlock, h: float) -> np.ndarray:
    """State vector ``sum_{k<=K} X(k) h^k`` of a filled block.

    Raises
    ------
    SeriesEvaluationError
        If any state coefficient is NaN or infinite (a diverged step).
    """
    if h < 0:
        raise ValueError("step offset must be non-negative")
    X = block.state
    if not np.isfinite(X).all():
        raise SeriesEvaluationError("non-finite coefficient in block")
    if h == 0:
        return X[:, 0].copy()
    return horner(X, h)


def conv_product(U, V, k: int) -> float:
    """Order-``k`` coefficient of the Cauchy product of two series."""
    a = np.asarray(U, dtype=float)[: k + 1] * np.asarray(V, dtype=float)[k::-1]
    # pair term m with term k-m so that swapping U and V gives the same sum bit for bit
    n = (k + 1) // 2
    total = np.sum(a[:n] + a[::-1][:n])
    return float(total + a[n] if k % 2 == 0 else total)


def dt_sincos(Delta, S, C, k: int) -> tuple[float, float]:
    """Order-``k`` coefficients of ``sin(delta)`` and ``cos(delta)``.

    ``S`` and ``C`` must be known through order ``k - 1``; order 0 is seeded
    with ``sin(Delta[0])`` and ``cos(Delta[0])`` by the caller.
    """
    if k < 1:
        raise ValueError("k must be >= 1; order 0 is sin/cos of Delta[0]")
    Delta = np.asarray(Delta, dtype=float)
    md = np.arange(1, k + 1) * Delta[1 : k + 1]
    s_k = np.dot(md, np.asarray(C, dtype=float)[k - 1 :: -1][:k]) / k
    c_k = -np.dot(md, np.asarray(S, dtype=float)[k - 1 :: -1][:k]) / k
    return float(s_k), float(c_k)


def dt_sqrt(W, R, k: int) -> float:
    """Order-``k`` coefficient of ``r = sqrt(w)`` from ``r * r = w``.

    ``R`` must be known through order ``k - 1`` with ``R[0] = sqrt(W[0]) > 0``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    R = np.asarray(R, dtype=float)
    inner = np.dot(R[1:k], R[k - 1 : 0 : -1]) if k > 1 else 0.0
    return float((W[k] - inner) / (2.0 * R[0]))


def sincos_series(delta0: float, rate: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Series of ``sin`` and ``cos`` of the linear ramp ``delta0 + rate * t``."""
    D = np.zeros(order + 1)
    D[0] = delta0
    if order >= 1:
        D[1] = rate
    S = np.zeros(order + 1)
    C = np.zeros(order + 1)
    S[0], C[0] = np.sin(delta0), np.cos(delta0)
    for k in range(1, order + 1):
        S[k], C[k] = dt_sincos(D, S, C, k)
    return S, C
