from itertools import combinations
from math import comb

import numpy as np
import pytest

from rasm import (
    Cut,
    CutFamily,
    CutPool,
    FeasibleRegion,
    ParameterError,
    export_lp,
    solve_master,
    support_of,
)


def make_cut(constant, coeffs, incumbent=None):
    coeffs = np.asarray(coeffs, dtype=float)
    if incumbent is None:
        incumbent = np.zeros(coeffs.shape[0], dtype=int)
    return Cut(constant, coeffs, CutFamily.NEW, incumbent)


def random_pool(rng, n, cut_count):
    cuts = []
    for _ in range(cut_count):
        incumbent = (rng.random(n) < 0.3).astype(int)
        coeffs = rng.uniform(0.0, 3.0, size=n)
        coeffs[incumbent == 1] = 0.0
        cuts.append(Cut(rng.uniform(0.0, 5.0), coeffs, CutFamily.NEW, incumbent))
    return CutPool(cuts)


def exhaustive_max_min(pool, k):
    consts, coeffs = pool.arrays()
    n = coeffs.shape[1]
    best_val, best_sup = -np.inf, None
    for size in range(k + 1):
        for sup in combinations(range(n), size):
            val = float(np.min(consts + coeffs[:, list(sup)].sum(axis=1)))
            if val > best_val or (val == best_val and sup < best_sup):
                best_val, best_sup = val, sup
    return best_val, best_sup


def test_single_cut_takes_top_coefficients():
    pool = CutPool([make_cut(1.0, [0.5, 3.0, 1.0, 2.0])])
    sol = solve_master(pool, FeasibleRegion(2))
    assert sol.psi == 6.0
    assert support_of(sol.x) == (1, 3)


def test_duplicate_cut_is_idempotent():
    cut = make_cut(1.0, [0.5, 3.0, 1.0, 2.0])
    one = solve_master(CutPool([cut]), FeasibleRegion(2))
    two = solve_master(CutPool([cut, make_cut(1.0, [0.5, 3.0, 1.0, 2.0])]), FeasibleRegion(2))
    assert one.psi == two.psi
    assert support_of(one.x) == support_of(two.x)


def test_zero_coefficient_ties_resolve_lexicographically():
    # every support containing 1 is optimal; on sorted index tuples the
    # smallest is (0, 1), which precedes (1,)
    pool = CutPool([make_cut(0.0, [0.0, 2.0, 0.0, 0.0])])
    sol = solve_master(pool, FeasibleRegion(3))
    assert sol.psi == 2.0
    assert support_of(sol.x) == (0, 1)


def test_tied_coefficients_pick_smallest_indices():
    pool = CutPool([make_cut(0.0, [1.0, 1.0, 1.0, 1.0])])
    sol = solve_master(pool, FeasibleRegion(2))
    assert sol.psi == 2.0
    assert support_of(sol.x) == (0, 1)


def test_empty_pool_rejected():
    with pytest.raises(ParameterError):
        solve_master(CutPool(), FeasibleRegion(2))


def test_budget_exceeding_ground_set_rejected():
    pool = CutPool([make_cut(0.0, [1.0, 1.0])])
    with pytest.raises(ParameterError):
        solve_master(pool, FeasibleRegion(3))


def test_dimension_mismatch_rejected():
    pool = CutPool([make_cut(0.0, [1.0, 1.0])])
    with pytest.raises(ParameterError):
        pool.append(make_cut(0.0, [1.0, 1.0, 1.0]))


@pytest.mark.parametrize("seed", range(12))
def test_matches_exhaustive_max_min(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 13))
    k = int(rng.integers(1, n + 1))
    pool = random_pool(rng, n, int(rng.integers(1, 6)))
    sol = solve_master(pool, FeasibleRegion(k))
    best_val, best_sup = exhaustive_max_min(pool, k)
    assert abs(sol.psi - best_val) <= 1e-9
    assert support_of(sol.x) == best_sup
    # psi is the pool's min rhs at the returned point (up to summation order)
    consts, coeffs = pool.arrays()
    sup = list(support_of(sol.x))
    assert abs(sol.psi - float(np.min(consts + coeffs[:, sup].sum(axis=1)))) <= 1e-12


def test_adding_cuts_never_raises_psi():
    rng = np.random.default_rng(99)
    n, k = 9, 3
    pool = random_pool(rng, n, 1)
    prev = solve_master(pool, FeasibleRegion(k)).psi
    for _ in range(6):
        extra = random_pool(rng, n, 1)
        pool.append(extra[0])
        cur = solve_master(pool, FeasibleRegion(k)).psi
        assert cur <= prev + 1e-12
        prev = cur


def test_node_count_bounded_by_truncated_tree():
    rng = np.random.default_rng(7)
    for _ in range(8):
        n = int(rng.integers(4, 11))
        k = int(rng.integers(1, min(n, 4) + 1))
        pool = random_pool(rng, n, int(rng.integers(1, 5)))
        sol = solve_master(pool, FeasibleRegion(k))
        leaves = sum(comb(n, i) for i in range(k + 1))
        assert sol.nodes <= 2 * leaves


def test_export_lp_single_cut(tmp_path):
    pool = CutPool([make_cut(1.25, [0.5, 0.0, 2.0])])
    path = tmp_path / "master.lp"
    export_lp(pool, FeasibleRegion(2), path)
    text = path.read_text()
    constraint_rows = [
        line for line in text.splitlines() if line.strip().startswith(("cut", "card"))
    ]
    assert len(constraint_rows) == 2
    assert "Maximize" in text and "Binaries" in text and "psi free" in text
    assert "cut0: psi - 0.5 x0 - 2.0 x2 <= 1.25" in text


def test_export_lp_empty_pool_rejected(tmp_path):
    with pytest.raises(ParameterError):
        export_lp(CutPool(), FeasibleRegion(1), tmp_path / "x.lp")
