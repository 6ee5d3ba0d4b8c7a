"""Optimality cuts: affine upper bounds on the master surrogate.

Every cut generated from an incumbent selection has the incumbent's CVaR as
its constant, zero coefficients on the incumbent's support, and nonnegative
coefficients elsewhere, so it is tight at the incumbent and valid for every
feasible selection. Three families are provided, ordered here from weakest
to strongest at single flips:

* ``lshaped_cut``  - one global coefficient, the full-ground-set expectation
  minus the incumbent CVaR.
* ``new_cut``      - per-variable coefficients from the expectation after a
  single flip minus the incumbent CVaR.
* ``greedy_lifted_cut`` - sequentially lifted coefficients from relaxed
  lifting problems, built along a greedy order.
"""

from __future__ import annotations

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np

from .errors import CapacityError, ParameterError
from .instance import FeasibleRegion, as_selection, support_of
from .risk import _check_alpha, evaluate_support

COEFF_CLAMP = 1e-12

EXACT_LIFTING_MAX_VARS = 16


class CutFamily(str, Enum):
    LSHAPED = "lshaped"
    NEW = "new"
    LIFTED = "lifted"


@dataclass(frozen=True, eq=False)
class Cut:
    """Inequality ``psi <= constant + coeffs . x``, tagged with its origin."""

    constant: float
    coeffs: np.ndarray
    family: CutFamily
    incumbent: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        incumbent = as_selection(self.incumbent)
        if coeffs.ndim != 1 or coeffs.shape != incumbent.shape:
            raise ParameterError("cut coefficients and incumbent must match in length")
        if np.any(coeffs < -COEFF_CLAMP):
            raise ParameterError("cut coefficients must be nonnegative")
        on_support = coeffs[incumbent == 1]
        if on_support.size and np.any(np.abs(on_support) > COEFF_CLAMP):
            raise ParameterError("cut coefficients must vanish on the incumbent support")
        coeffs = np.where(np.abs(coeffs) <= COEFF_CLAMP, 0.0, coeffs)
        coeffs[incumbent == 1] = 0.0
        coeffs.setflags(write=False)
        incumbent.setflags(write=False)
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "incumbent", incumbent)
        object.__setattr__(self, "family", CutFamily(self.family))

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]


def rhs(cut: Cut, x) -> float:
    """Right-hand side of the cut at selection ``x``."""
    x = as_selection(x, cut.n)
    return float(cut.constant + cut.coeffs @ x)


def cut_to_text(cut: Cut) -> str:
    """Debug form ``family constant j:coeff ...`` listing free coefficients."""
    parts = [cut.family.value, repr(cut.constant)]
    free = np.flatnonzero(cut.incumbent == 0)
    parts.extend(f"{int(j)}:{float(cut.coeffs[j])!r}" for j in free)
    return " ".join(parts)


def lshaped_cut(oracle, xbar, alpha: float) -> Cut:
    """Classical cut: every free coefficient is the same global slack.

    The coefficient is the full-ground-set expectation minus the incumbent
    CVaR, so any single flip is bounded by the best value any selection can
    reach.
    """
    alpha = _check_alpha(alpha)
    n = oracle.ground_set_size()
    xbar = as_selection(xbar, n)
    base = oracle.evaluate(xbar, alpha)
    full = evaluate_support(oracle, range(n), 1.0)
    coeffs = np.where(xbar == 1, 0.0, max(full - base, 0.0))
    return Cut(base, coeffs, CutFamily.LSHAPED, xbar)


def new_cut(oracle, xbar, alpha: float) -> Cut:
    """Per-variable cut: free coefficient j is the single-flip expectation gap.

    Coefficient j equals the expectation after adding j to the incumbent,
    minus the incumbent CVaR. The expectation (not the level-alpha CVaR) of
    the flipped selection is what makes the inequality valid; the
    level-alpha difference would not be.
    """
    alpha = _check_alpha(alpha)
    n = oracle.ground_set_size()
    xbar = as_selection(xbar, n)
    base = oracle.evaluate(xbar, alpha)
    sup = support_of(xbar)
    free = [j for j in range(n) if xbar[j] == 0]
    coeffs = np.zeros(n)
    batch = getattr(oracle, "evaluate_additions", None)
    if batch is not None and free:
        coeffs[free] = batch(sup, free, 1.0) - base
    else:
        for j in free:
            coeffs[j] = evaluate_support(oracle, sup + (j,), 1.0) - base
    return Cut(base, np.maximum(coeffs, 0.0), CutFamily.NEW, xbar)


def greedy_lifting_order(oracle, xbar, alpha: float, threads: int = 1):
    """Greedy lifting order over the incumbent's free variables.

    At each step the unplaced candidate whose inclusion gives the smallest
    CVaR of the grown prefix is placed next (ties to the smallest index),
    and its coefficient is that prefix CVaR minus the incumbent CVaR.
    Returns ``(order, deltas)``; deltas are nonnegative and nondecreasing.

    Worst case O(r^2) oracle calls for r free variables; in practice far
    fewer, because a candidate's value can only grow as the prefix grows,
    so values from earlier steps are valid lower bounds and most candidates
    never need re-evaluation (lazy-greedy).
    """
    alpha = _check_alpha(alpha)
    n = oracle.ground_set_size()
    xbar = as_selection(xbar, n)
    base = oracle.evaluate(xbar, alpha)
    prefix = list(support_of(xbar))
    remaining = [j for j in range(n) if xbar[j] == 0]

    order: list[int] = []
    deltas: list[float] = []
    if not remaining:
        return order, np.array(deltas)

    batch = getattr(oracle, "evaluate_additions", None)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        if batch is not None:
            hints = batch(prefix, remaining, alpha)
        elif pool is not None:
            hints = list(
                pool.map(lambda s: evaluate_support(oracle, tuple(prefix) + (s,), alpha), remaining)
            )
        else:
            hints = [evaluate_support(oracle, tuple(prefix) + (s,), alpha) for s in remaining]
        heap = [(float(v), s) for v, s in zip(hints, remaining)]
        heapq.heapify(heap)
        stamp = {s: 0 for s in remaining}

        for step in range(len(remaining)):
            while True:
                value, s = heapq.heappop(heap)
                if step == 0 or stamp[s] == step:
                    break
                value = evaluate_support(oracle, tuple(prefix) + (s,), alpha)
                stamp[s] = step
                heapq.heappush(heap, (value, s))
            # recompute through the cached oracle path so the stored
            # coefficient is exactly the oracle's value for the prefix
            exact = evaluate_support(oracle, tuple(prefix) + (s,), alpha)
            order.append(s)
            deltas.append(max(exact - base, 0.0))
            prefix.append(s)
    finally:
        if pool is not None:
            pool.shutdown()
    return order, np.array(deltas)


def greedy_lifted_cut(oracle, xbar, alpha: float, threads: int = 1) -> Cut:
    """Sequentially lifted cut along the greedy order of the free variables."""
    n = oracle.ground_set_size()
    xbar = as_selection(xbar, n)
    base = oracle.evaluate(xbar, _check_alpha(alpha))
    order, deltas = greedy_lifting_order(oracle, xbar, alpha, threads=threads)
    coeffs = np.zeros(n)
    for j, d in zip(order, deltas):
        coeffs[j] = d
    return Cut(base, coeffs, CutFamily.LIFTED, xbar)


def exact_lifting_coefficients(
    oracle, xbar, alpha: float, order, region: FeasibleRegion
) -> np.ndarray:
    """Exact sequential-lifting coefficients for a given free-variable order.

    Solves each lifting problem by enumeration: position t maximizes
    ``CVaR(x) - sum of earlier coefficients picked up by x`` over feasible
    selections with variable t forced in, later order positions forced out,
    and all remaining variables free. Intended as a test oracle for the
    relaxed (greedy) coefficients, which must dominate these. Refuses
    ground sets larger than 16.
    """
    alpha = _check_alpha(alpha)
    n = oracle.ground_set_size()
    if n > EXACT_LIFTING_MAX_VARS:
        raise CapacityError(f"exact lifting limited to n <= {EXACT_LIFTING_MAX_VARS}")
    xbar = as_selection(xbar, n)
    region.validate_for(n)
    k = region.k

    sup = support_of(xbar)
    order = [int(j) for j in order]
    if sorted(order) != sorted(set(range(n)) - set(sup)):
        raise ParameterError("order must be a permutation of the incumbent's free variables")
    base = oracle.evaluate(xbar, alpha)

    deltas: list[float] = []
    for t, j_t in enumerate(order):
        earlier = order[:t]
        free = list(sup) + earlier
        best = None
        for size in range(0, min(k - 1, len(free)) + 1):
            for chosen in combinations(free, size):
                value = evaluate_support(oracle, chosen + (j_t,), alpha)
                value -= sum(deltas[i] for i, j in enumerate(earlier) if j in chosen)
                if best is None or value > best:
                    best = value
        if best is None:
            # unreachable for k >= 1; mirror the relaxed coefficient so
            # dominance checks can skip the position
            best = evaluate_support(
                oracle, tuple(sup) + tuple(order[: t + 1]), alpha
            )
        deltas.append(best - base)
    return np.array(deltas)
