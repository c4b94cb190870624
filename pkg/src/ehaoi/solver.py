"""Average-cost solver: relative value iteration and policy extraction.

The iteration keeps values normalized against a fixed reference state and
stops on the span seminorm of the Bellman update, so it converges even
though average-cost values themselves are only defined up to a constant.
Two extraction routes are provided: a full per-state argmin, and a
threshold-exploiting scan that walks each battery row in increasing age
and stops evaluating argmins once the row starts transmitting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import (
    IDLE,
    TRANSMIT,
    DomainError,
    ModelParams,
    State,
    kernel_arrays,
    one_step_cost,
    state_count,
    state_index,
    transition,
)

DEFAULT_EPS = 1e-9
DEFAULT_MAX_ITER = 100_000


class ConvergenceError(RuntimeError):
    """Value iteration did not reach the stopping tolerance."""

    def __init__(self, message: str, iterations: int, span_residual: float):
        super().__init__(message)
        self.iterations = iterations
        self.span_residual = span_residual


class ThresholdStructureError(ValueError):
    """A policy row goes back to idling above an age that transmits.

    ``witnesses`` lists (battery, first transmitting age, later idle age)
    triples, one per offending row.
    """

    def __init__(self, message: str, witnesses: list[tuple[int, int, int]]):
        super().__init__(message)
        self.witnesses = witnesses


class TruncationWarning(UserWarning):
    """A threshold is high enough that the age cap may distort the solution."""


@dataclass(frozen=True)
class ThresholdPolicy:
    """Transmit at battery level q exactly when age >= thresholds[q].

    A threshold of delta_max + 1 means the row never transmits.
    """

    thresholds: tuple[int, ...]

    def __post_init__(self):
        if not self.thresholds:
            raise DomainError("thresholds must be non-empty")
        for t in self.thresholds:
            if not (isinstance(t, int) and t >= 1):
                raise DomainError(f"thresholds must be ints >= 1, got {t!r}")

    def expand(self, m: ModelParams) -> np.ndarray:
        """Full action table in enumerate_states order."""
        if len(self.thresholds) != m.battery_cap + 1:
            raise DomainError(
                f"expected {m.battery_cap + 1} thresholds, got {len(self.thresholds)}"
            )
        ages = np.arange(1, m.delta_max + 1)
        return np.concatenate(
            [(ages >= t).astype(np.int8) for t in self.thresholds]
        )


@dataclass
class SolveResult:
    gain: float               # long-run average cost per slot
    values: np.ndarray        # relative values, enumerate_states order
    policy: np.ndarray        # 0/1 action per state
    iterations: int
    span_residual: float      # span of the final Bellman update
    span_history: np.ndarray  # residual after each sweep
    argmin_evals: int         # states whose action came from an explicit argmin


def q_value(v: np.ndarray, s: State, a: int, m: ModelParams) -> float:
    """One-step lookahead value of (s, a) against value table ``v``."""
    total = one_step_cost(s, a, m)
    for ns, pr in transition(s, a, m).entries:
        total += pr * float(v[state_index(ns, m)])
    return float(total)


def bellman_backup_q(v: np.ndarray, m: ModelParams) -> np.ndarray:
    """Q-values for every (action, state) pair as a (2, n) array."""
    kern = kernel_arrays(m)
    v = np.asarray(v, dtype=float)
    return kern.cost + (kern.prob * v[kern.next_idx]).sum(axis=2)


def _iterate_values(m: ModelParams, eps: float, max_iter: int):
    if eps <= 0.0:
        raise DomainError(f"eps must be > 0, got {eps}")
    if max_iter < 1:
        raise DomainError(f"max_iter must be >= 1, got {max_iter}")
    kern = kernel_arrays(m)
    n = state_count(m)
    ref = state_index(State(1, m.battery_cap), m)
    v = np.zeros(n)
    spans = np.empty(max_iter)
    span = np.inf
    for k in range(max_iter):
        q = kern.cost + (kern.prob * v[kern.next_idx]).sum(axis=2)
        tv = q.min(axis=0)
        diff = tv - v
        hi = float(diff.max())
        lo = float(diff.min())
        span = hi - lo
        spans[k] = span
        v = tv - tv[ref]
        if span <= eps:
            gain = 0.5 * (hi + lo)
            return v, gain, k + 1, span, spans[: k + 1].copy()
    raise ConvergenceError(
        f"span residual {span:.3e} after {max_iter} iterations (eps={eps:.3e})",
        max_iter,
        span,
    )


def relative_value_iteration(
    m: ModelParams, eps: float = DEFAULT_EPS, max_iter: int = DEFAULT_MAX_ITER
) -> SolveResult:
    """Solve the average-cost problem; greedy policy via full argmin."""
    v, gain, iters, span, spans = _iterate_values(m, eps, max_iter)
    policy = extract_policy(v, m)
    return SolveResult(gain, v, policy, iters, span, spans, argmin_evals=state_count(m))


def extract_policy(v: np.ndarray, m: ModelParams) -> np.ndarray:
    """Greedy 0/1 action per state; exact Q ties resolve to idle."""
    q = bellman_backup_q(v, m)
    return (q[TRANSMIT] < q[IDLE]).astype(np.int8)


def modified_via(
    m: ModelParams, eps: float = DEFAULT_EPS, max_iter: int = DEFAULT_MAX_ITER
) -> tuple[SolveResult, ThresholdPolicy]:
    """Solve, then extract the policy with the threshold-exploiting scan.

    Each battery row is scanned in increasing age; once a state chooses to
    transmit, the action is copied forward and no further argmins are
    evaluated in that row. ``argmin_evals`` records the work actually done,
    at most sum_q min(threshold_q, delta_max).
    """
    v, gain, iters, span, spans = _iterate_values(m, eps, max_iter)
    kern = kernel_arrays(m)
    dm = m.delta_max
    actions = np.zeros(state_count(m), dtype=np.int8)
    thresholds = []
    evals = 0
    for q in range(m.battery_cap + 1):
        base = q * dm
        thr = dm + 1
        carry = False
        for d in range(1, dm + 1):
            i = base + d - 1
            if carry:
                actions[i] = TRANSMIT
                continue
            evals += 1
            q_idle = kern.cost[IDLE, i] + kern.prob[IDLE, i] @ v[kern.next_idx[IDLE, i]]
            q_tx = kern.cost[TRANSMIT, i] + kern.prob[TRANSMIT, i] @ v[kern.next_idx[TRANSMIT, i]]
            if q_tx < q_idle:
                actions[i] = TRANSMIT
                carry = True
                thr = d
        thresholds.append(thr)
    tp = ThresholdPolicy(tuple(thresholds))
    _warn_if_truncation_tight(tp, m)
    result = SolveResult(gain, v, actions, iters, span, spans, argmin_evals=evals)
    return result, tp


def extract_thresholds(policy: np.ndarray, m: ModelParams) -> ThresholdPolicy:
    """Read per-battery thresholds off a 0/1 policy table.

    Raises ThresholdStructureError when some row idles again above its
    first transmitting age, i.e. the policy is not of threshold form.
    """
    arr = np.asarray(policy).reshape(m.battery_cap + 1, m.delta_max)
    thresholds = []
    witnesses = []
    for q, row in enumerate(arr):
        ones = np.flatnonzero(row == TRANSMIT)
        if ones.size == 0:
            thresholds.append(m.delta_max + 1)
            continue
        first = int(ones[0]) + 1
        holes = np.flatnonzero(row[ones[0]:] == IDLE)
        if holes.size:
            witnesses.append((q, first, first + int(holes[0])))
        thresholds.append(first)
    if witnesses:
        detail = ", ".join(
            f"(q={q}, transmit at age {lo}, idle at age {hi})" for q, lo, hi in witnesses
        )
        raise ThresholdStructureError(
            f"policy is not threshold-form: {detail}", witnesses
        )
    tp = ThresholdPolicy(tuple(thresholds))
    _warn_if_truncation_tight(tp, m)
    return tp


def _warn_if_truncation_tight(tp: ThresholdPolicy, m: ModelParams) -> None:
    worst = max(tp.thresholds)
    if worst > m.delta_max / 2:
        warnings.warn(
            f"largest threshold {worst} exceeds half the age cap "
            f"(delta_max={m.delta_max}); increase delta_max to keep the "
            f"truncation inert",
            TruncationWarning,
            stacklevel=3,
        )
