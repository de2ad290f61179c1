"""Augmented-system DT recursion: ``X(k+1) = J Z(k) / (k+1)``.

The vector field is lifted into a form that is linear in the augmented vector
``z = (x, y)``.  The intermediates ``y`` are produced order by order by
:class:`IntermediateRule` objects, evaluated in the order they are listed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .series import CoefficientBlock, horner

MAX_ORDER = 60

RULE_KINDS = ("sin", "cos", "product", "linear", "sqrt")


class StepDivergence(ArithmeticError):
    """A DT recursion produced non-finite coefficients; retry with a smaller step."""


class SpecError(ValueError):
    """An augmented-system spec is malformed."""


@dataclass(frozen=True)
class IntermediateRule:
    """How one intermediate row is generated from earlier rows.

    kinds
        ``sin``/``cos``: ``sources = (angle_row, partner_row)`` where the partner is
        the matching cos/sin row (read at lower orders only).
        ``product``: ``sources = (a, b)``.
        ``linear``: ``sum(w * z[src]) + bias``; the bias enters order 0 only.
        ``sqrt``: ``sources = (w,)``, the target squared equals row ``w``.
    """

    target: int
    kind: str
    sources: tuple[int, ...]
    weights: tuple[float, ...] = ()
    bias: float = 0.0

    def reads(self) -> tuple[int, ...]:
        """Rows that must be complete at the current order before this rule runs."""
        if self.kind in ("sin", "cos"):
            return self.sources[:1]
        return self.sources


@dataclass(frozen=True, eq=False)
class AugmentedSystemSpec:
    """Constant matrix ``J`` plus ordered intermediate rules for one segment."""

    n_state: int
    J: np.ndarray
    rules: tuple[IntermediateRule, ...] = ()
    names: tuple[str, ...] = ()
    _plan: list = field(default=None, init=False, repr=False, compare=False)
    _abs_J: np.ndarray = field(default=None, init=False, repr=False, compare=False)
    _noise: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "J", np.asarray(self.J, dtype=float))
        object.__setattr__(self, "rules", tuple(self.rules))
        problems = [p for p in validate_spec(self) if not p.endswith("never read")]
        if problems:
            raise SpecError("; ".join(problems))
        object.__setattr__(self, "_plan", _compile(self))
        # rounding-error bound of each row of J @ z, relative to |J| @ |z|
        object.__setattr__(self, "_abs_J", np.abs(self.J))
        object.__setattr__(self, "_noise", (np.count_nonzero(self.J, axis=1) + 1) * np.finfo(float).eps)

    @property
    def n_aug(self) -> int:
        return self.J.shape[1]


def validate_spec(spec) -> list[str]:
    """Return human-readable diagnostics; an empty list means well-formed."""
    out = []
    J = np.asarray(spec.J)
    n_x = spec.n_state
    if J.ndim != 2 or J.shape[0] != n_x:
        out.append(f"dimension mismatch: J has {J.shape[0] if J.ndim == 2 else '?'} rows, expected {n_x}")
        return out
    n_z = J.shape[1]
    if n_z < n_x:
        out.append(f"dimension mismatch: J has {n_z} columns, fewer than {n_x} states")
        return out
    defined = set(range(n_x))
    targets = {}
    for i, rule in enumerate(spec.rules):
        if rule.kind not in RULE_KINDS:
            out.append(f"rule {i}: unknown kind {rule.kind!r}")
            continue
        if not (n_x <= rule.target < n_z):
            out.append(f"dimension mismatch: rule {i} targets row {rule.target} outside intermediates [{n_x}, {n_z})")
            continue
        if rule.target in targets:
            out.append(f"row {rule.target} defined twice (rules {targets[rule.target]} and {i})")
        targets[rule.target] = i
        expected = {"sin": 2, "cos": 2, "product": 2, "sqrt": 1}.get(rule.kind)
        if expected is not None and len(rule.sources) != expected:
            out.append(f"rule {i}: {rule.kind} takes {expected} sources, got {len(rule.sources)}")
        if rule.kind == "linear" and len(rule.weights) != len(rule.sources):
            out.append(f"rule {i}: linear rule needs one weight per source")
        for s in rule.sources:
            if not (0 <= s < n_z):
                out.append(f"dimension mismatch: rule {i} reads row {s} outside [0, {n_z})")
        for s in rule.reads():
            if 0 <= s < n_z and s not in defined:
                out.append(f"ordering violation: rule {i} (row {rule.target}) reads row {s} before it is computed")
        defined.add(rule.target)
    for i, rule in enumerate(spec.rules):
        if rule.kind in ("sin", "cos"):
            partner = rule.sources[1] if len(rule.sources) > 1 else None
            other = "cos" if rule.kind == "sin" else "sin"
            j = targets.get(partner)
            if j is None or spec.rules[j].kind != other or spec.rules[j].sources[0] != rule.sources[0]:
                out.append(f"rule {i}: {rule.kind} partner row {partner} is not the matching {other} rule")
    missing = sorted(set(range(n_x, n_z)) - set(targets))
    if missing:
        out.append(f"unreferenced rows: intermediates {missing} have no rule")
    used = {c for c in range(n_z) if np.any(J[:, c] != 0)}
    for rule in spec.rules:
        used.update(rule.sources)
    orphans = sorted(set(targets) - used)
    if orphans:
        out.append(f"unreferenced rows: intermediates {orphans} are never read")
    return out


def _compile(spec: AugmentedSystemSpec) -> list:
    """Group consecutive rules into vectorised batches."""
    plan = []
    batch_kind, batch, produced = None, [], set()

    def flush():
        if batch:
            plan.append(_make_batch(batch_kind, batch, spec.n_aug))

    for rule in spec.rules:
        kind = "sincos" if rule.kind in ("sin", "cos") else rule.kind
        clash = any(s in produced for s in rule.reads())
        if kind != batch_kind or clash:
            flush()
            batch_kind, batch, produced = kind, [], set()
        batch.append(rule)
        produced.add(rule.target)
    flush()
    return plan


def _make_batch(kind, rules, n_aug):
    tgt = np.array([r.target for r in rules])
    if kind == "sincos":
        ang = np.array([r.sources[0] for r in rules])
        partner = np.array([r.sources[1] for r in rules])
        sign = np.array([1.0 if r.kind == "sin" else -1.0 for r in rules])
        is_sin = np.array([r.kind == "sin" for r in rules])
        return ("sincos", tgt, ang, partner, sign, is_sin)
    if kind == "product":
        a = np.array([r.sources[0] for r in rules])
        b = np.array([r.sources[1] for r in rules])
        return ("product", tgt, a, b)
    if kind == "linear":
        W = np.zeros((len(rules), n_aug))
        for i, r in enumerate(rules):
            for s, w in zip(r.sources, r.weights):
                W[i, s] += w
        cols = np.flatnonzero(np.any(W != 0, axis=0))
        bias = np.array([r.bias for r in rules])
        return ("linear", tgt, W[:, cols], cols, bias)
    if kind == "sqrt":
        src = np.array([r.sources[0] for r in rules])
        return ("sqrt", tgt, src)
    raise SpecError(f"unknown rule kind {kind}")


def _fill_order(plan, Z: np.ndarray, k: int) -> None:
    for op in plan:
        kind, tgt = op[0], op[1]
        if kind == "sincos":
            _, _, ang, partner, sign, is_sin = op
            if k == 0:
                a0 = Z[ang, 0]
                Z[tgt, 0] = np.where(is_sin, np.sin(a0), np.cos(a0))
            else:
                md = np.arange(1, k + 1) * Z[ang, 1 : k + 1]
                Z[tgt, k] = sign * np.einsum("ij,ij->i", md, Z[partner, k - 1 :: -1]) / k
        elif kind == "product":
            _, _, a, b = op
            Z[tgt, k] = np.einsum("ij,ij->i", Z[a, : k + 1], Z[b, k::-1])
        elif kind == "linear":
            _, _, W, cols, bias = op
            Z[tgt, k] = W @ Z[cols, k]
            if k == 0:
                Z[tgt, 0] += bias
        else:
            _, _, src = op
            if k == 0:
                w0 = Z[src, 0]
                if np.any(w0 <= 0):
                    raise StepDivergence("square root of a non-positive series")
                Z[tgt, 0] = np.sqrt(w0)
            else:
                inner = np.einsum("ij,ij->i", Z[tgt, 1:k], Z[tgt, k - 1 : 0 : -1]) if k > 1 else 0.0
                Z[tgt, k] = (Z[src, k] - inner) / (2.0 * Z[tgt, 0])


def dt_coefficients(spec: AugmentedSystemSpec, x0, K: int) -> CoefficientBlock:
    """Fill the coefficient block of all rows through order ``K``."""
    if K < 1:
        raise ValueError("order K must be >= 1")
    if K > MAX_ORDER:
        raise ValueError(f"order K={K} exceeds the supported maximum {MAX_ORDER}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.n_state,):
        raise ValueError(f"initial state has shape {x0.shape}, expected ({spec.n_state},)")
    if not np.isfinite(x0).all():
        raise StepDivergence("non-finite initial state")
    Z = np.zeros((spec.n_aug, K + 1))
    Z[: spec.n_state, 0] = x0
    J = spec.J
    plan = spec._plan
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K + 1):
            _fill_order(plan, Z, k)
            if k < K:
                JZ = J @ Z[:, k]
                # a result below its own rounding bound carries no information
                JZ[(np.abs(JZ) <= spec._noise * (spec._abs_J @ np.abs(Z[:, k]))) & np.isfinite(JZ)] = 0.0
                Z[: spec.n_state, k + 1] = JZ / (k + 1)
    if not np.isfinite(Z).all():
        raise StepDivergence("non-finite DT coefficient")
    return CoefficientBlock(order=K, n_state=spec.n_state, coeffs=Z)


def dt_step(spec: AugmentedSystemSpec, x0, K: int, h: float):
    """One DT step: coefficient block through order ``K`` and the state at ``h``."""
    block = dt_coefficients(spec, x0, K)
    x_next = horner(block.state, h)
    if not np.isfinite(x_next).all():
        raise StepDivergence("non-finite state after series evaluation")
    return block, x_next


def linear_spec(A) -> AugmentedSystemSpec:
    """Spec for ``x' = A x`` (no intermediates)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return AugmentedSystemSpec(n_state=A.shape[0], J=A)


class SpecBuilder:
    """Incremental helper for assembling augmented specs row by row."""

    def __init__(self, state_names: Sequence[str]):
        self.names = list(state_names)
        self.n_state = len(self.names)
        self.rules: list[IntermediateRule] = []
        self._entries: list[tuple[int, int, float]] = []
        self._const = None

    def _new_row(self, name):
        self.names.append(name)
        return len(self.names) - 1

    def const(self) -> int:
        if self._const is None:
            self._const = self.linear("one", [], [], bias=1.0)
        return self._const

    def sincos(self, angle_row: int, tag: str) -> tuple[int, int]:
        s = self._new_row(f"sin_{tag}")
        c = self._new_row(f"cos_{tag}")
        self.rules.append(IntermediateRule(s, "sin", (angle_row, c)))
        self.rules.append(IntermediateRule(c, "cos", (angle_row, s)))
        return s, c

    def product(self, a: int, b: int, name: str) -> int:
        r = self._new_row(name)
        self.rules.append(IntermediateRule(r, "product", (a, b)))
        return r

    def linear(self, name, rows, weights, bias=0.0) -> int:
        r = self._new_row(name)
        self.rules.append(IntermediateRule(r, "linear", tuple(int(i) for i in rows),
                                           tuple(float(w) for w in weights), float(bias)))
        return r

    def sqrt(self, w: int, name: str) -> int:
        r = self._new_row(name)
        self.rules.append(IntermediateRule(r, "sqrt", (w,)))
        return r

    def add(self, state_row: int, z_row: int, coef: float) -> None:
        """Add ``coef * z[z_row]`` to the derivative of ``state_row``."""
        if coef != 0.0:
            self._entries.append((state_row, z_row, float(coef)))

    def build(self) -> AugmentedSystemSpec:
        J = np.zeros((self.n_state, len(self.names)))
        for i, j, c in self._entries:
            J[i, j] += c
        return AugmentedSystemSpec(self.n_state, J, tuple(self.rules), tuple(self.names))
