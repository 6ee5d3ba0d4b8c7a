"""Relaxed master problem: maximize the cut-pool surrogate over a budget.

The master maximizes ``psi`` subject to ``psi <= rhs(cut, x)`` for every
pooled cut and ``sum(x) <= k`` with binary ``x``. Because coefficients are
nonnegative, a depth-first search with a "top-t remaining coefficients"
completion bound per cut solves it exactly; a second pass canonicalizes
ties to the lexicographically smallest optimal support. The pool can also
be exported as LP-format text for cross-validation with an external MILP
solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cuts import Cut
from .errors import ParameterError
from .instance import FeasibleRegion, selection_from_support

_TIE_SLACK = 1e-12


class CutPool:
    """Append-only collection of cuts over one ground set."""

    def __init__(self, cuts=()):
        self._cuts: list[Cut] = []
        self._n: int | None = None
        for cut in cuts:
            self.append(cut)

    def append(self, cut: Cut) -> None:
        if self._n is None:
            self._n = cut.n
        elif cut.n != self._n:
            raise ParameterError(
                f"cut dimension {cut.n} does not match pool dimension {self._n}"
            )
        self._cuts.append(cut)

    @property
    def n(self) -> int:
        if self._n is None:
            raise ParameterError("cut pool is empty")
        return self._n

    def __len__(self):
        return len(self._cuts)

    def __iter__(self):
        return iter(self._cuts)

    def __getitem__(self, i):
        return self._cuts[i]

    def arrays(self):
        """Constants vector and (count x n) coefficient matrix."""
        consts = np.array([c.constant for c in self._cuts])
        coeffs = np.stack([c.coeffs for c in self._cuts])
        return consts, coeffs


@dataclass
class MasterSolution:
    x: np.ndarray
    psi: float
    nodes: int


def suffix_top_sums(ordered_coeffs: np.ndarray, kmax: int) -> np.ndarray:
    """``T[p, t, c]``: sum of the t largest entries of cut c's column suffix p.

    Built backwards with ``T[p, t] = max(T[p+1, t], T[p+1, t-1] + col_p)``;
    shorter suffixes saturate naturally. Lets a search node bound its best
    completion in O(pool) regardless of how many variables remain free.
    """
    count, n = ordered_coeffs.shape
    table = np.zeros((n + 1, kmax + 1, count))
    for p in range(n - 1, -1, -1):
        col = ordered_coeffs[:, p]
        table[p, 0] = 0.0
        for t in range(1, kmax + 1):
            table[p, t] = np.maximum(table[p + 1, t], table[p + 1, t - 1] + col)
    return table


def pool_value(consts: np.ndarray, coeffs: np.ndarray, support) -> float:
    """Min over cuts of ``constant + sum of coefficients on the support``.

    Accumulates columns in sorted index order so the same support always
    produces bit-identical arithmetic.
    """
    acc = consts.copy()
    for j in sorted(support):
        acc += coeffs[:, j]
    return float(acc.min())


def solve_master(pool: CutPool, region: FeasibleRegion) -> MasterSolution:
    """Exact optimum of ``max over |X| <= k`` of the pool's min rhs.

    Depth-first search over variable fixings, branching on the free
    variable with the largest maximum coefficient across cuts (1-branch
    first); a node is pruned when no cut's completion bound beats the
    incumbent. Among optima, the lexicographically smallest support is
    returned. ``nodes`` counts the partial assignments the bounding search
    explored.
    """
    if len(pool) == 0:
        raise ParameterError("cut pool is empty; seed it before solving the master")
    n = pool.n
    region.validate_for(n)
    k = region.k
    consts, coeffs = pool.arrays()

    max_coeff = coeffs.max(axis=0)
    order = sorted(range(n), key=lambda j: (-max_coeff[j], j))
    topsum = suffix_top_sums(coeffs[:, order], k)

    nodes = 0
    best_val = -np.inf
    best_sup: tuple[int, ...] = ()
    state = consts.copy()  # constant + coefficients of the current fixed ones

    def search(pos: int, ones: list[int]) -> None:
        nonlocal nodes, best_val, best_sup, state
        nodes += 1
        t = k - len(ones)
        if t == 0 or pos == n:
            val = pool_value(consts, coeffs, ones)
            if val > best_val:
                best_val, best_sup = val, tuple(sorted(ones))
            return
        if n - pos <= t:
            # every remaining variable fits the budget; coefficients are
            # nonnegative, so taking them all dominates the whole subtree
            sup = ones + [order[p] for p in range(pos, n)]
            val = pool_value(consts, coeffs, sup)
            if val > best_val:
                best_val, best_sup = val, tuple(sorted(sup))
            return
        bound = float((state + topsum[pos, t]).min())
        if bound <= best_val:
            return
        j = order[pos]
        col = coeffs[:, j]
        state += col
        search(pos + 1, ones + [j])
        state -= col
        search(pos + 1, ones)

    search(0, [])

    support = _lex_smallest_optimum(consts, coeffs, k, best_val)
    if support is None:
        support = best_sup
    psi = pool_value(consts, coeffs, support)
    return MasterSolution(x=selection_from_support(support, n), psi=psi, nodes=nodes)


def _lex_smallest_optimum(consts, coeffs, k, target):
    """Lexicographically smallest support achieving ``target`` (tie slack 1e-12).

    Grows a prefix index by index, keeping an index only if some feasible
    completion using strictly larger indices still reaches the target. A
    prefix that already achieves the target beats all its extensions.
    """
    n = coeffs.shape[1]
    goal = target - _TIE_SLACK
    idx_topsum = suffix_top_sums(coeffs, k)

    def achievable(sup: list[int], start: int) -> bool:
        if pool_value(consts, coeffs, sup) >= goal:
            return True
        t = k - len(sup)
        if t == 0 or start == n:
            return False
        if n - start <= t:
            return pool_value(consts, coeffs, sup + list(range(start, n))) >= goal
        acc = consts.copy()
        for j in sup:
            acc += coeffs[:, j]
        if float((acc + idx_topsum[start, t]).min()) < goal:
            return False
        return achievable(sup + [start], start + 1) or achievable(sup, start + 1)

    chosen: list[int] = []
    start = 0
    while True:
        if pool_value(consts, coeffs, chosen) >= goal:
            return tuple(chosen)
        if len(chosen) == k or start == n:
            return None
        found = False
        for j in range(start, n):
            if achievable(chosen + [j], j + 1):
                chosen.append(j)
                start = j + 1
                found = True
                break
        if not found:
            return None


def export_lp(pool: CutPool, region: FeasibleRegion, path) -> None:
    """Write the master as LP-format text for an external MILP solver.

    Layout: a maximized objective ``psi``; one constraint row per cut in
    the form ``psi - coeff x_j - ... <= constant``; one cardinality row;
    ``psi`` declared free; all ``x_j`` declared binary.
    """
    if len(pool) == 0:
        raise ParameterError("cut pool is empty; nothing to export")
    n = pool.n
    region.validate_for(n)
    lines = ["\\ master export: maximize the cut-pool surrogate", "Maximize", " obj: psi", "Subject To"]
    for i, cut in enumerate(pool):
        terms = "".join(
            f" - {float(cut.coeffs[j])!r} x{j}" for j in range(n) if cut.coeffs[j] != 0.0
        )
        lines.append(f" cut{i}: psi{terms} <= {cut.constant!r}")
    lines.append(f" card: {' + '.join(f'x{j}' for j in range(n))} <= {region.k}")
    lines.append("Bounds")
    lines.append(" psi free")
    lines.append("Binaries")
    lines.append(" " + " ".join(f"x{j}" for j in range(n)))
    lines.append("End")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
