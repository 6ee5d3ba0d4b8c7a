"""Delayed constraint generation driver and exhaustive reference solver.

Two modes share the same cut generators and witness/tie conventions:

* ``loop`` - literal alternation: solve the master over the current pool,
  evaluate the incumbent with the oracle, add cuts, repeat until the bound
  gap closes.
* ``lazy`` - one branch-and-bound tree over selections; every unpruned leaf
  is oracle-evaluated and, if the pool still overestimates it, cut. Added
  cuts immediately tighten the bounds of the remaining tree. ``iterations``
  counts the evaluated leaves here.

Both return the best evaluated selection after shrinking it to a minimal
witness (largest indices dropped first while the value is unchanged), so
equal-value ties resolve identically across modes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from math import comb

import numpy as np

from .cuts import Cut, CutFamily, greedy_lifted_cut, lshaped_cut, new_cut
from .errors import CapacityError, ParameterError
from .instance import FeasibleRegion, selection_from_support, support_of
from .master import CutPool, solve_master, suffix_top_sums
from .risk import RiskParams, evaluate_support

EXHAUSTIVE_MAX_SUPPORTS = 10**7

_FAMILY_ORDER = (CutFamily.LSHAPED, CutFamily.NEW, CutFamily.LIFTED)
_GENERATORS = {
    CutFamily.LSHAPED: lshaped_cut,
    CutFamily.NEW: new_cut,
    CutFamily.LIFTED: greedy_lifted_cut,
}


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    TIME_LIMIT = "time_limit"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class SolveConfig:
    risk: RiskParams
    region: FeasibleRegion
    cut_families: tuple = (CutFamily.NEW,)
    mode: str = "loop"
    time_limit: float | None = None
    iteration_limit: int | None = None
    threads: int = 1

    def __post_init__(self):
        families = tuple(CutFamily(f) for f in self.cut_families)
        if not families:
            raise ParameterError("at least one cut family must be selected")
        object.__setattr__(self, "cut_families", families)
        if self.mode not in ("loop", "lazy"):
            raise ParameterError(f"mode must be 'loop' or 'lazy', got {self.mode!r}")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ParameterError("time_limit must be positive")
        if self.iteration_limit is not None and self.iteration_limit < 1:
            raise ParameterError("iteration_limit must be positive")
        if self.threads < 1:
            raise ParameterError("threads must be >= 1")


@dataclass
class SolveResult:
    x_best: np.ndarray
    cvar_best: float
    upper_bound: float
    iterations: int
    cuts_added: int
    nodes_total: int
    wall_time: float
    status: SolveStatus

    @property
    def support(self) -> tuple[int, ...]:
        return support_of(self.x_best)


class _StopSearch(Exception):
    def __init__(self, status: SolveStatus):
        self.status = status


def count_feasible_supports(n: int, k: int) -> int:
    return sum(comb(n, i) for i in range(min(k, n) + 1))


def _generate_cuts(oracle, sup, alpha, families, threads):
    n = oracle.ground_set_size()
    xbar = selection_from_support(sup, n)
    cuts = []
    for family in _FAMILY_ORDER:
        if family not in families:
            continue
        if family is CutFamily.LIFTED:
            cuts.append(greedy_lifted_cut(oracle, xbar, alpha, threads=threads))
        else:
            cuts.append(_GENERATORS[family](oracle, xbar, alpha))
    return cuts


def _better_witness(value, sup, best_value, best_sup):
    return value > best_value or (value == best_value and sup < best_sup)


def _minimize_witness(oracle, sup, alpha, value):
    """Drop redundant elements, largest index first, keeping the exact value."""
    kept = list(sup)
    for j in sorted(sup, reverse=True):
        if not kept:
            break
        trial = tuple(i for i in kept if i != j)
        if evaluate_support(oracle, trial, alpha) == value:
            kept = list(trial)
    return tuple(kept)


def solve_rasm(oracle, config: SolveConfig, trace=None) -> SolveResult:
    """Maximize the oracle's CVaR over the budgeted ground set.

    ``trace``, when given, receives one dict per loop iteration (or per
    evaluated leaf in lazy mode) with keys iteration/ub/lb/cuts/nodes/elapsed.
    """
    return solve_with_pool(oracle, config, trace=trace)[0]


def solve_with_pool(oracle, config: SolveConfig, trace=None):
    """Like :func:`solve_rasm` but also returns the final cut pool."""
    start = time.monotonic()
    if config.mode == "loop":
        result, pool = _solve_loop(oracle, config, trace, start)
    else:
        result, pool = _solve_lazy(oracle, config, trace, start)
    return result, pool


def _finish(oracle, config, best_sup, lb, ub, iterations, cuts_added, nodes, status, start):
    alpha = config.risk.alpha
    best_sup = _minimize_witness(oracle, best_sup, alpha, lb)
    value = evaluate_support(oracle, best_sup, alpha)
    n = oracle.ground_set_size()
    return SolveResult(
        x_best=selection_from_support(best_sup, n),
        cvar_best=value,
        upper_bound=max(ub, lb),
        iterations=iterations,
        cuts_added=cuts_added,
        nodes_total=nodes,
        wall_time=time.monotonic() - start,
        status=status,
    )


def _root_bound(pool: CutPool, k: int) -> float:
    """Valid global upper bound: min over cuts of constant + top-k coefficients."""
    consts, coeffs = pool.arrays()
    top = suffix_top_sums(coeffs, k)[0, k]
    return float((consts + top).min())


def _solve_loop(oracle, config, trace, start):
    n = oracle.ground_set_size()
    config.region.validate_for(n)
    alpha, eps = config.risk.alpha, config.risk.epsilon
    deadline = None if config.time_limit is None else start + config.time_limit

    lb = evaluate_support(oracle, (), alpha)
    best_sup: tuple[int, ...] = ()
    pool = CutPool(_generate_cuts(oracle, (), alpha, config.cut_families, config.threads))
    cut_keys = {((), f) for f in config.cut_families}

    ub = np.inf
    iterations = 0
    nodes = 0
    status = None
    while True:
        if deadline is not None and time.monotonic() > deadline:
            status = SolveStatus.TIME_LIMIT
            break
        if config.iteration_limit is not None and iterations >= config.iteration_limit:
            status = SolveStatus.ITERATION_LIMIT
            break
        sol = solve_master(pool, config.region)
        iterations += 1
        nodes += sol.nodes
        ub = min(ub, sol.psi)
        sup = support_of(sol.x)
        value = evaluate_support(oracle, sup, alpha)
        if _better_witness(value, sup, lb, best_sup):
            lb, best_sup = value, sup
        if trace is not None:
            trace(
                dict(iteration=iterations, ub=ub, lb=lb, cuts=len(pool),
                     nodes=nodes, elapsed=time.monotonic() - start)
            )
        if ub - lb <= eps:
            status = SolveStatus.OPTIMAL
            break
        added = 0
        for family in config.cut_families:
            key = (sup, family)
            if key in cut_keys:
                continue
            cut_keys.add(key)
            pool.append(_generate_cuts(oracle, sup, alpha, (family,), config.threads)[0])
            added += 1
        if added == 0:
            raise RuntimeError(
                "master incumbent repeated with an open gap; a cut is not tight"
            )

    if not np.isfinite(ub):
        ub = _root_bound(pool, config.region.k)
    result = _finish(
        oracle, config, best_sup, lb, ub, iterations, len(pool), nodes, status, start
    )
    return result, pool


class _LazyArrays:
    """Cut storage plus incremental search state for the lazy tree.

    Layouts are chosen so the per-node work is contiguous slices: one row
    per variable in ``cols`` (coefficients per cut), one row per
    (position, t) pair in ``tops`` (suffix top-t sums in branching order).
    ``state`` carries constant + coefficients of the currently fixed ones
    and is updated incrementally as the search descends and backtracks;
    cuts appended mid-search are initialized against the current fixing.

    Only the most recent ``window`` cuts are scanned when bounding a node.
    Any subset of the pool still yields a valid upper bound (every cut is
    individually valid), and depth-first locality means recent cuts are the
    ones that can prune nearby subtrees; this caps the per-node cost on
    long runs. The full pool is kept by the caller.
    """

    def __init__(self, n: int, k: int, order, window: int = 4096):
        self.n = n
        self.k = k
        self.order = list(order)
        self.window = window
        self.count = 0
        self.total = 0
        self._cap = min(256, window)
        self.consts = np.zeros(self._cap)
        self.cols = np.zeros((n, self._cap))
        self.tops = np.zeros(((n + 1) * (k + 1), self._cap))
        self.state = np.zeros(self._cap)

    def _grow(self):
        self._cap = min(self._cap * 2, self.window)
        for name in ("consts", "cols", "tops", "state"):
            old = getattr(self, name)
            new = np.zeros(old.shape[:-1] + (self._cap,))
            new[..., : self.count] = old[..., : self.count]
            setattr(self, name, new)

    def append(self, cut: Cut, ones) -> None:
        if self.total < self.window:
            if self.count == self._cap:
                self._grow()
            i = self.count
            self.count += 1
        else:
            i = self.total % self.window
        self.total += 1
        self.consts[i] = cut.constant
        self.cols[:, i] = cut.coeffs
        k = self.k
        suffix = np.zeros(k + 1)
        stride = k + 1
        self.tops[self.n * stride : (self.n + 1) * stride, i] = 0.0
        for p in range(self.n - 1, -1, -1):
            v = cut.coeffs[self.order[p]]
            grown = np.maximum(suffix[1:], suffix[:-1] + v)
            suffix[1:] = grown
            self.tops[p * stride : (p + 1) * stride, i] = suffix
        self.state[i] = cut.constant + sum(cut.coeffs[j] for j in ones)

    def descend(self, j: int) -> None:
        self.state[: self.count] += self.cols[j, : self.count]

    def ascend(self, j: int) -> None:
        self.state[: self.count] -= self.cols[j, : self.count]

    def bound(self, pos: int, t: int) -> float:
        row = pos * (self.k + 1) + t
        c = self.count
        return float((self.state[:c] + self.tops[row, :c]).min())

    def value(self, support) -> float:
        acc = self.consts[: self.count].copy()
        for j in sorted(support):
            acc += self.cols[j, : self.count]
        return float(acc.min())

    def root_bound(self) -> float:
        c = self.count
        return float((self.consts[:c] + self.tops[self.k, :c]).min())


def _solve_lazy(oracle, config, trace, start):
    n = oracle.ground_set_size()
    config.region.validate_for(n)
    k = config.region.k
    alpha, eps = config.risk.alpha, config.risk.epsilon
    deadline = None if config.time_limit is None else start + config.time_limit
    leaf_limit = config.iteration_limit

    lb = evaluate_support(oracle, (), alpha)
    best_sup: tuple[int, ...] = ()
    seeds = _generate_cuts(oracle, (), alpha, config.cut_families, config.threads)
    pool = CutPool(seeds)

    # branching priorities fixed from the seed coefficients
    seed_max = np.max(np.stack([c.coeffs for c in seeds]), axis=0)
    order = sorted(range(n), key=lambda j: (-seed_max[j], j))

    arrays = _LazyArrays(n, k, order)
    for cut in seeds:
        arrays.append(cut, ())
    cuts_added = len(seeds)

    nodes = 0
    leaves = 0
    pruned_max = -np.inf

    def search(pos: int, ones: list[int]) -> None:
        nonlocal nodes, leaves, lb, best_sup, cuts_added, pruned_max
        nodes += 1
        t = k - len(ones)
        bound = arrays.bound(pos, t)
        if bound <= lb + eps:
            pruned_max = max(pruned_max, bound)
            return
        if t == 0 or pos == n:
            if deadline is not None and time.monotonic() > deadline:
                raise _StopSearch(SolveStatus.TIME_LIMIT)
            if leaf_limit is not None and leaves >= leaf_limit:
                raise _StopSearch(SolveStatus.ITERATION_LIMIT)
            leaves += 1
            sup = tuple(sorted(ones))
            value = evaluate_support(oracle, sup, alpha)
            if _better_witness(value, sup, lb, best_sup):
                lb, best_sup = value, sup
            psi_hat = arrays.value(sup)
            if psi_hat > value + eps:
                for cut in _generate_cuts(oracle, sup, alpha, config.cut_families, config.threads):
                    pool.append(cut)
                    arrays.append(cut, ones)
                    cuts_added += 1
            if trace is not None:
                trace(
                    dict(iteration=leaves, ub=None, lb=lb, cuts=cuts_added,
                         nodes=nodes, elapsed=time.monotonic() - start)
                )
            return
        j = order[pos]
        arrays.descend(j)
        search(pos + 1, ones + [j])
        arrays.ascend(j)
        search(pos + 1, ones)

    status = SolveStatus.OPTIMAL
    try:
        search(0, [])
        ub = max(lb, pruned_max) if np.isfinite(pruned_max) else lb
    except _StopSearch as stop:
        status = stop.status
        ub = max(lb, arrays.root_bound())

    result = _finish(
        oracle, config, best_sup, lb, ub, leaves, cuts_added, nodes, status, start
    )
    return result, pool


def solve_exhaustive(oracle, region: FeasibleRegion, alpha: float) -> SolveResult:
    """Ground-truth reference: evaluate every feasible support.

    Ties resolve to the lexicographically smallest support. Refuses more
    than 10^7 supports.
    """
    start = time.monotonic()
    n = oracle.ground_set_size()
    region.validate_for(n)
    k = region.k
    total = count_feasible_supports(n, k)
    if total > EXHAUSTIVE_MAX_SUPPORTS:
        raise CapacityError(f"{total} feasible supports exceed the enumeration guard")

    best_val = -np.inf
    best_sup: tuple[int, ...] = ()
    evaluated = 0
    for size in range(k + 1):
        for sup in combinations(range(n), size):
            evaluated += 1
            value = evaluate_support(oracle, sup, alpha)
            if _better_witness(value, sup, best_val, best_sup):
                best_val, best_sup = value, sup
    return SolveResult(
        x_best=selection_from_support(best_sup, n),
        cvar_best=best_val,
        upper_bound=best_val,
        iterations=evaluated,
        cuts_added=0,
        nodes_total=0,
        wall_time=time.monotonic() - start,
        status=SolveStatus.OPTIMAL,
    )
