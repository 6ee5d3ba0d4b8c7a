from concurrent.futures import ThreadPoolExecutor
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rasm import (
    ParameterError,
    Pmf,
    RiskParams,
    coverage_pmf,
    cvar_alpha,
    cvar_bruteforce,
    expectation,
    generate_instance,
    item_coverage_probs,
    pmf_bruteforce,
    rasc_oracle,
    selection_from_support,
    var_alpha,
)

ALPHA_GRID = (0.01, 0.025, 0.05, 0.1, 0.5, 1.0)

probs_vectors = st.lists(
    st.floats(min_value=0.0, max_value=1.0, allow_nan=False), min_size=1, max_size=10
)


def test_risk_params_validation():
    RiskParams(alpha=0.05)
    with pytest.raises(ParameterError):
        RiskParams(alpha=0.0)
    with pytest.raises(ParameterError):
        RiskParams(alpha=1.5)
    with pytest.raises(ParameterError):
        RiskParams(alpha=0.5, epsilon=-1.0)


def test_var_point_mass():
    assert var_alpha(Pmf([1.0]), 0.05) == 0


def test_var_binomial():
    pm = Pmf([0.25, 0.5, 0.25])
    assert var_alpha(pm, 0.5) == 1  # F(0)=0.25 < 0.5 <= F(1)=0.75
    assert var_alpha(pm, 1.0) == 2  # F(1)=0.75 < 1 <= F(2)=1


def test_var_alpha_validation():
    with pytest.raises(ParameterError):
        var_alpha(Pmf([1.0]), 0.0)


def test_cvar_examples():
    # values recomputed with the eta-scan oracle before pinning
    pm = Pmf([0.5, 0.5])
    assert cvar_alpha(pm, 0.5) == 0.0
    assert cvar_alpha(pm, 1.0) == 0.5
    pm = Pmf([0.25, 0.5, 0.25])
    assert abs(cvar_alpha(pm, 0.5) - 0.5) <= 1e-15


def test_cvar_bruteforce_examples():
    point3 = Pmf([0.0, 0.0, 0.0, 1.0])
    for alpha in ALPHA_GRID:
        assert abs(cvar_bruteforce(point3, alpha) - 3.0) <= 1e-12
    assert cvar_bruteforce(Pmf([0.5, 0.5]), 0.25) == 0.0
    uniform = Pmf(np.full(5, 0.2))
    assert abs(cvar_bruteforce(uniform, 1.0) - 2.0) <= 1e-12


def test_expectation_examples():
    assert expectation(Pmf([1.0])) == 0.0
    assert abs(expectation(Pmf([0.25, 0.5, 0.25])) - 1.0) <= 1e-15


@settings(max_examples=80, deadline=None, derandomize=True)
@given(probs_vectors, st.sampled_from(ALPHA_GRID))
def test_cvar_closed_form_matches_scan(q, alpha):
    pm = coverage_pmf(q)
    assert abs(cvar_alpha(pm, alpha) - cvar_bruteforce(pm, alpha)) <= 1e-9


@settings(max_examples=60, deadline=None, derandomize=True)
@given(probs_vectors)
def test_cvar_monotone_in_alpha(q):
    pm = coverage_pmf(q)
    values = [cvar_alpha(pm, a) for a in ALPHA_GRID]
    for lo, hi in zip(values, values[1:]):
        assert lo <= hi + 1e-12


@settings(max_examples=60, deadline=None, derandomize=True)
@given(probs_vectors)
def test_expectation_equals_cvar_one(q):
    pm = coverage_pmf(q)
    assert abs(cvar_alpha(pm, 1.0) - expectation(pm)) <= 1e-9
    assert abs(expectation(pm) - float(np.sum(q))) <= 1e-9


def test_oracle_empty_and_certain():
    inst = generate_instance(4, 5, 0.2, 0.8, seed=3)
    oracle = rasc_oracle(inst)
    for alpha in ALPHA_GRID:
        assert oracle.evaluate(np.zeros(4, dtype=int), alpha) == 0.0
    ones_inst = generate_instance(3, 4, 1.0, 1.0, seed=1)
    ones_oracle = rasc_oracle(ones_inst)
    for sup in [(0,), (1, 2), (0, 1, 2)]:
        for alpha in (0.01, 0.3, 1.0):
            assert ones_oracle.evaluate_support(sup, alpha) == 4.0


def test_oracle_matches_double_bruteforce():
    inst = generate_instance(6, 6, 0.05, 0.9, seed=42)
    oracle = rasc_oracle(inst)
    x = selection_from_support((1, 4), 6)
    q = item_coverage_probs(inst, x)
    reference = cvar_bruteforce(pmf_bruteforce(q), 0.3)
    assert abs(oracle.evaluate(x, 0.3) - reference) <= 1e-9


def test_oracle_equals_public_chain_bit_exact():
    inst = generate_instance(7, 8, 0.05, 0.85, seed=11)
    oracle = rasc_oracle(inst)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.integers(0, 2, size=7)
        alpha = float(rng.choice(ALPHA_GRID))
        chain = cvar_alpha(coverage_pmf(item_coverage_probs(inst, x)), alpha)
        assert oracle.evaluate(x, alpha) == chain


def test_oracle_monotone_in_selection():
    inst = generate_instance(6, 6, 0.05, 0.8, seed=9)
    oracle = rasc_oracle(inst)
    for alpha in (0.05, 0.3, 1.0):
        for size in range(6):
            for sup in combinations(range(6), size):
                base = oracle.evaluate_support(sup, alpha)
                for j in range(6):
                    if j in sup:
                        continue
                    assert base <= oracle.evaluate_support(sup + (j,), alpha) + 1e-12


def test_oracle_monotone_in_alpha():
    inst = generate_instance(5, 7, 0.05, 0.8, seed=13)
    oracle = rasc_oracle(inst)
    for sup in [(0,), (1, 3), (0, 2, 4)]:
        values = [oracle.evaluate_support(sup, a) for a in ALPHA_GRID]
        for lo, hi in zip(values, values[1:]):
            assert lo <= hi + 1e-12


def test_expectation_submodular_exhaustively():
    # at alpha = 1 the oracle is the expectation, which has diminishing
    # returns; checked over all nested pairs on a small instance
    inst = generate_instance(5, 5, 0.05, 0.9, seed=17)
    oracle = rasc_oracle(inst)
    value = {
        frozenset(sup): oracle.evaluate_support(sup, 1.0)
        for size in range(6)
        for sup in combinations(range(5), size)
    }
    for size_t in range(5):
        for T in combinations(range(5), size_t):
            Tf = frozenset(T)
            for size_s in range(size_t + 1):
                for S in combinations(T, size_s):
                    Sf = frozenset(S)
                    for j in range(5):
                        if j in Tf:
                            continue
                        gain_small = value[Sf | {j}] - value[Sf]
                        gain_large = value[Tf | {j}] - value[Tf]
                        assert gain_small >= gain_large - 1e-9


def _submodularity_violation(oracle, n, alpha):
    value = {
        frozenset(sup): oracle.evaluate_support(sup, alpha)
        for size in range(n + 1)
        for sup in combinations(range(n), size)
    }
    for size_t in range(n):
        for T in combinations(range(n), size_t):
            Tf = frozenset(T)
            for size_s in range(size_t + 1):
                for S in combinations(T, size_s):
                    Sf = frozenset(S)
                    for j in range(n):
                        if j in Tf:
                            continue
                        gain_small = value[Sf | {j}] - value[Sf]
                        gain_large = value[Tf | {j}] - value[Tf]
                        if gain_small < gain_large - 1e-9:
                            return (S, T, j, gain_small, gain_large)
    return None


def test_cvar_below_one_not_submodular_witness():
    # documented non-invariant: for alpha < 1 submodularity fails; a
    # violation must be findable by random search
    for trial in range(200):
        inst = generate_instance(5, 5, 0.05, 0.8, seed=500 + trial)
        oracle = rasc_oracle(inst)
        for alpha in (0.1, 0.3):
            if _submodularity_violation(oracle, 5, alpha) is not None:
                return
    pytest.fail("no submodularity violation found at alpha < 1")


def test_oracle_memoizes():
    inst = generate_instance(5, 5, 0.1, 0.9, seed=2)
    oracle = rasc_oracle(inst)
    oracle.evaluate_support((0, 2), 0.3)
    before = oracle.cache_info().hits
    oracle.evaluate_support((0, 2), 0.3)
    oracle.evaluate(selection_from_support((0, 2), 5), 0.3)
    assert oracle.cache_info().hits >= before + 2


def test_oracle_concurrent_evaluation_consistent():
    inst = generate_instance(8, 8, 0.05, 0.8, seed=31)
    oracle = rasc_oracle(inst)
    rng = np.random.default_rng(5)
    jobs = [
        (tuple(np.flatnonzero(rng.integers(0, 2, size=8))), float(rng.choice(ALPHA_GRID)))
        for _ in range(200)
    ]
    serial = [oracle.evaluate_support(sup, a) for sup, a in jobs]
    fresh = rasc_oracle(inst)
    with ThreadPoolExecutor(max_workers=8) as pool:
        parallel = list(pool.map(lambda job: fresh.evaluate_support(*job), jobs))
    assert serial == parallel


def test_batched_additions_match_single_evaluations():
    inst = generate_instance(9, 9, 0.05, 0.8, seed=8)
    oracle = rasc_oracle(inst)
    base = (1, 4)
    cands = [j for j in range(9) if j not in base]
    for alpha in (0.05, 0.3, 1.0):
        batched = oracle.evaluate_additions(base, cands, alpha)
        singles = [oracle.evaluate_support(base + (j,), alpha) for j in cands]
        assert np.max(np.abs(batched - singles)) <= 1e-12
