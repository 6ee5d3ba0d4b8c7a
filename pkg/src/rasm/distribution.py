"""Exact distribution of the coverage count under independent arc successes.

The number of covered items, given a selection of sets, is a sum of
independent non-identical Bernoulli indicators (one per item), so its exact
probability mass function follows from the classic Poisson-binomial
recursion. A 2^m enumeration oracle and a scenario-form CVaR are provided
for cross-checking.
"""

from __future__ import annotations

import numpy as np

from .errors import CapacityError, ParameterError
from .instance import CoverageInstance, as_selection

MASS_CLAMP = 1e-12
MASS_SUM_TOL = 1e-9
BRUTEFORCE_MAX_ITEMS = 20


class Pmf:
    """Probability mass function on the integers ``{0, ..., m}``.

    Entries more negative than the round-off clamp are rejected; entries in
    ``[-1e-12, 0)`` are clamped to zero and the mass is renormalized, which
    must change the total by at most ``1e-9``.
    """

    __slots__ = ("_mass",)

    def __init__(self, mass):
        mass = np.array(mass, dtype=float)
        if mass.ndim != 1 or mass.shape[0] < 1:
            raise ParameterError("pmf mass must be a nonempty 1-D vector")
        if not np.all(np.isfinite(mass)):
            raise ParameterError("pmf mass must be finite")
        if np.any(mass < -MASS_CLAMP):
            raise ParameterError(f"pmf mass entries below -{MASS_CLAMP} are invalid")
        mass = np.where(mass < 0.0, 0.0, mass)
        total = float(mass.sum())
        if abs(total - 1.0) > MASS_SUM_TOL:
            raise ParameterError(f"pmf mass sums to {total}, expected 1")
        mass = mass / total
        mass.setflags(write=False)
        self._mass = mass

    @property
    def mass(self) -> np.ndarray:
        return self._mass

    @property
    def m(self) -> int:
        """Largest support point."""
        return self._mass.shape[0] - 1

    def cdf(self) -> np.ndarray:
        return np.cumsum(self._mass)

    def mean(self) -> float:
        return float(np.arange(self._mass.shape[0]) @ self._mass)

    def __repr__(self):
        return f"Pmf(m={self.m}, mean={self.mean():.6g})"


def item_coverage_probs(instance: CoverageInstance, x) -> np.ndarray:
    """Per-item coverage probabilities under selection ``x``.

    Item j is covered unless every selected set independently misses it:
    ``q_j = 1 - prod(1 - p_ij)`` over selected sets i. O(nm).
    """
    x = as_selection(x, instance.n)
    chosen = np.flatnonzero(x)
    if chosen.size == 0:
        return np.zeros(instance.m)
    q = 1.0 - np.prod(1.0 - instance.probs[chosen, :], axis=0)
    return np.clip(q, 0.0, 1.0)


def _check_probs(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 1:
        raise ParameterError("coverage probabilities must be a 1-D vector")
    if not np.all(np.isfinite(q)) or np.any(q < 0.0) or np.any(q > 1.0):
        raise ParameterError("coverage probabilities must lie in [0, 1]")
    return q


def coverage_pmf(q) -> Pmf:
    """Exact Poisson-binomial pmf of the covered-item count.

    Standard O(m^2) recursion with O(m) rolling state: after item i with
    success probability p, ``new[j] = old[j] * (1 - p) + old[j-1] * p``.
    """
    q = _check_probs(q)
    mass = np.zeros(q.shape[0] + 1)
    mass[0] = 1.0
    for p in q:
        shifted = mass[:-1] * p
        mass *= 1.0 - p
        mass[1:] += shifted
    return Pmf(mass)


def pmf_bruteforce(q) -> Pmf:
    """Covered-count pmf by enumerating all 2^m covered/uncovered patterns.

    Independent oracle for :func:`coverage_pmf`; refuses m > 20.
    """
    q = _check_probs(q)
    m = q.shape[0]
    if m > BRUTEFORCE_MAX_ITEMS:
        raise CapacityError(f"brute-force pmf limited to m <= {BRUTEFORCE_MAX_ITEMS}")
    patterns = (np.arange(2**m)[:, None] >> np.arange(m)) & 1
    weights = np.prod(np.where(patterns == 1, q, 1.0 - q), axis=1)
    counts = patterns.sum(axis=1)
    mass = np.bincount(counts, weights=weights, minlength=m + 1)
    return Pmf(mass)


def cvar_from_scenarios(values, probs, alpha: float) -> float:
    """CVaR of a finite scenario distribution at risk level ``alpha``.

    Returns the mean of the worst ``alpha`` probability mass, with the
    boundary scenario weighted fractionally; equal values merge naturally
    because the tail is filled by probability, not by index. This attains
    ``max over eta of eta - E[(eta - V)+] / alpha``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if values.ndim != 1 or values.shape != probs.shape or values.shape[0] < 1:
        raise ParameterError("values and probs must be matching nonempty vectors")
    if np.any(probs < 0.0):
        raise ParameterError("scenario probabilities must be nonnegative")
    if abs(float(probs.sum()) - 1.0) > MASS_SUM_TOL:
        raise ParameterError("scenario probabilities must sum to 1")

    order = np.argsort(values, kind="stable")
    remaining = alpha
    acc = 0.0
    for i in order:
        take = min(float(probs[i]), remaining)
        if take > 0.0:
            acc += take * float(values[i])
            remaining -= take
        if remaining <= 1e-15:
            break
    return acc / alpha
