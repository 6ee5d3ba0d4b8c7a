"""Command-line front end: instance generation, solves, verification, benchmarks.

Exit codes: 0 success, 1 verification property failure, 2 usage or
parameter errors.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from itertools import combinations

import numpy as np

from .cuts import Cut, CutFamily, exact_lifting_coefficients, greedy_lifted_cut, greedy_lifting_order, lshaped_cut, new_cut, rhs
from .errors import CapacityError, ParameterError, ParseError
from .instance import FeasibleRegion, generate_instance, load_instance, save_instance, selection_from_support
from .master import export_lp
from .risk import RiskParams, cvar_alpha, cvar_bruteforce, evaluate_support, rasc_oracle
from .distribution import coverage_pmf, cvar_from_scenarios, item_coverage_probs, pmf_bruteforce
from .solver import SolveConfig, solve_exhaustive, solve_with_pool

BENCH_SIZES = (50, 100, 150)
BENCH_ALPHAS = (0.025, 0.05)
BENCH_BUDGETS = (3, 5)
BENCH_CONFIGS = (
    ("lshaped",),
    ("new",),
    ("lifted",),
    ("new", "lifted"),
)
BENCH_CSV_VERSION = "rasm-bench-csv v1"


def _threads_from(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("RASM_THREADS")
    return max(1, int(env)) if env else 1


def _parse_families(text: str) -> tuple[CutFamily, ...]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise ParameterError("--cuts needs at least one family")
    try:
        return tuple(CutFamily(name) for name in names)
    except ValueError:
        valid = ", ".join(f.value for f in CutFamily)
        raise ParameterError(f"unknown cut family in {text!r}; valid: {valid}") from None


def cmd_gen(args) -> int:
    instance = generate_instance(args.n, args.m, args.prob_low, args.prob_high, args.seed)
    save_instance(instance, args.out)
    print(f"wrote {args.out}: n={instance.n} m={instance.m}")
    return 0


def _write_trace(path, rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "ub", "lb", "cuts", "nodes", "elapsed"])
        for row in rows:
            ub = "" if row["ub"] is None else repr(row["ub"])
            writer.writerow([row["iteration"], ub, repr(row["lb"]), row["cuts"],
                             row["nodes"], f"{row['elapsed']:.6f}"])


def cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    oracle = rasc_oracle(instance)
    config = SolveConfig(
        risk=RiskParams(alpha=args.alpha, epsilon=args.epsilon),
        region=FeasibleRegion(args.k),
        cut_families=_parse_families(args.cuts),
        mode=args.mode,
        time_limit=args.time_limit,
        iteration_limit=args.iteration_limit,
        threads=_threads_from(args),
    )
    trace_rows: list[dict] = []
    trace = trace_rows.append if args.trace else None
    result, pool = solve_with_pool(oracle, config, trace=trace)
    if args.trace:
        _write_trace(args.trace, trace_rows)
    if args.export_lp:
        export_lp(pool, config.region, args.export_lp)
    print(f"objective {result.cvar_best!r}")
    print(f"support {' '.join(str(j) for j in result.support)}")
    print(f"status {result.status.value}")
    print(f"upper_bound {result.upper_bound!r}")
    print(f"iterations {result.iterations} cuts {result.cuts_added} nodes {result.nodes_total}")
    print(f"time {result.wall_time:.3f}s")
    return 0


class _PropertyLog:
    def __init__(self):
        self.order: list[str] = []
        self.checks: dict[str, int] = {}
        self.failures: dict[str, int] = {}
        self.first_message: dict[str, str] = {}

    def record(self, name: str, ok: bool, message: str = "") -> None:
        if name not in self.checks:
            self.order.append(name)
            self.checks[name] = 0
            self.failures[name] = 0
        self.checks[name] += 1
        if not ok:
            self.failures[name] += 1
            self.first_message.setdefault(name, message)

    @property
    def failed(self) -> list[str]:
        return [name for name in self.order if self.failures[name]]


def _feasible_supports(n: int, k: int):
    for size in range(k + 1):
        yield from combinations(range(n), size)


def _verify_instance(log: _PropertyLog, rng, inject_bug, tag: str) -> None:
    n = int(rng.integers(4, 9))
    m = int(rng.integers(4, 9))
    k = int(rng.integers(1, 4))
    instance = generate_instance(n, m, 0.05, 0.65, seed=int(rng.integers(2**63)))
    oracle = rasc_oracle(instance)
    alphas = (0.1, 0.3, 1.0)
    supports = list(_feasible_supports(n, k))

    def maybe_buggy_new_cut(xbar, alpha):
        cut = new_cut(oracle, xbar, alpha)
        if inject_bug == "new-cut-coeff" and cut.coeffs.max() > 0.0:
            bad = cut.coeffs.copy()
            bad[int(np.argmax(bad))] *= 0.5
            cut = Cut(cut.constant, bad, cut.family, cut.incumbent)
        return cut

    # distribution oracles on a few random selections
    for _ in range(3):
        sel = rng.integers(0, 2, size=n)
        q = item_coverage_probs(instance, sel)
        dp = coverage_pmf(q)
        brute = pmf_bruteforce(q)
        log.record(
            "pmf-dp-vs-enum",
            bool(np.max(np.abs(dp.mass - brute.mass)) <= 1e-12),
            f"{tag}: pmf mismatch for selection {tuple(int(v) for v in sel)}",
        )
        support = np.arange(m + 1)
        for alpha in alphas:
            closed = cvar_alpha(dp, alpha)
            scanned = cvar_bruteforce(dp, alpha)
            log.record(
                "cvar-closed-vs-scan",
                abs(closed - scanned) <= 1e-9,
                f"{tag}: closed={closed} scan={scanned} alpha={alpha}",
            )
            scen = cvar_from_scenarios(support, dp.mass, alpha)
            log.record(
                "cvar-scenarios-consistency",
                abs(closed - scen) <= 1e-9,
                f"{tag}: closed={closed} scenario={scen} alpha={alpha}",
            )

    # monotonicity in alpha and in the selection
    for sup in supports[: min(len(supports), 25)]:
        values = [evaluate_support(oracle, sup, a) for a in sorted(alphas)]
        log.record(
            "monotone-alpha",
            all(v1 <= v2 + 1e-12 for v1, v2 in zip(values, values[1:])),
            f"{tag}: alpha monotonicity broken at {sup}",
        )
        for j in range(n):
            if j in sup:
                continue
            lo = evaluate_support(oracle, sup, 0.3)
            hi = evaluate_support(oracle, sup + (j,), 0.3)
            log.record(
                "monotone-x", lo <= hi + 1e-12, f"{tag}: shrink at {sup}+{j}"
            )

    # cut families: validity over all feasible points, tightness, dominance.
    # alpha = 1 is included so a corrupted coefficient always trips validity
    incumbents = supports if len(supports) <= 12 else [
        supports[int(i)] for i in rng.choice(len(supports), size=12, replace=False)
    ]
    for alpha in (0.3, 1.0):
        for sup in incumbents:
            xbar = selection_from_support(sup, n)
            cuts = {
                "lshaped": lshaped_cut(oracle, xbar, alpha),
                "new": maybe_buggy_new_cut(xbar, alpha),
                "lifted": greedy_lifted_cut(oracle, xbar, alpha),
            }
            values = {p: evaluate_support(oracle, p, alpha) for p in supports}
            for name, cut in cuts.items():
                log.record(
                    "cut-tightness",
                    rhs(cut, xbar) == cut.constant,
                    f"{tag}: {name} cut not tight at {sup}",
                )
                ok = True
                for point in supports:
                    x = selection_from_support(point, n)
                    if values[point] > rhs(cut, x) + 1e-9:
                        ok = False
                        break
                log.record(
                    f"cut-validity-{name}",
                    ok,
                    f"{tag}: {name} cut from {sup} at alpha={alpha} violated at {point}",
                )
            log.record(
                "dominance-new-le-lshaped",
                bool(np.all(cuts["new"].coeffs <= cuts["lshaped"].coeffs + 1e-12)),
                f"{tag}: new-cut coefficient exceeds lshaped at {sup}",
            )
            _, deltas = greedy_lifting_order(oracle, xbar, alpha)
            log.record(
                "lifted-deltas-monotone",
                bool(np.all(np.diff(deltas) >= -1e-12)),
                f"{tag}: lifted deltas decrease at {sup}",
            )

    # relaxed lifting dominates exact lifting (enumeration)
    alpha = 0.3
    region = FeasibleRegion(k)
    for sup in incumbents[:2]:
        if len(sup) > k:
            continue
        xbar = selection_from_support(sup, n)
        order, deltas = greedy_lifting_order(oracle, xbar, alpha)
        exact = exact_lifting_coefficients(oracle, xbar, alpha, order, region)
        log.record(
            "lifting-relaxed-ge-exact",
            bool(np.all(deltas >= exact - 1e-9)),
            f"{tag}: relaxed lifting below exact at {sup}",
        )

    # solver against exhaustive enumeration, both modes
    reference = solve_exhaustive(oracle, region, alpha)
    results = {}
    for mode in ("loop", "lazy"):
        config = SolveConfig(
            risk=RiskParams(alpha=alpha, epsilon=1e-9),
            region=region,
            cut_families=(CutFamily.NEW,),
            mode=mode,
        )
        results[mode], _ = solve_with_pool(oracle, config)
        log.record(
            "solver-vs-exhaustive",
            abs(results[mode].cvar_best - reference.cvar_best) <= 1e-6,
            f"{tag}: {mode} got {results[mode].cvar_best}, exhaustive {reference.cvar_best}",
        )
    log.record(
        "mode-equivalence",
        results["loop"].cvar_best == results["lazy"].cvar_best
        and results["loop"].support == results["lazy"].support,
        f"{tag}: loop {results['loop'].support} vs lazy {results['lazy'].support}",
    )


def cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    log = _PropertyLog()
    for i in range(args.count):
        _verify_instance(log, rng, args.inject_bug, tag=f"instance {i}")
    print(f"verify seed={args.seed} count={args.count}")
    total = 0
    for name in log.order:
        total += log.checks[name]
        print(f"  {name:<28} {log.checks[name]:>7} checks {log.failures[name]:>4} failures")
    if log.failed:
        first = log.failed[0]
        print(f"VERIFY FAIL: {first} ({log.failures[first]} failures): {log.first_message[first]}")
        return 1
    print(f"VERIFY PASS: {len(log.order)} properties, {total} checks")
    return 0


def _bench_cell(payload):
    (n, m, inst_seed, alpha, k, families, mode, epsilon, time_limit, threads) = payload
    instance = generate_instance(n, m, 0.05, 0.20, seed=inst_seed)
    oracle = rasc_oracle(instance)
    config = SolveConfig(
        risk=RiskParams(alpha=alpha, epsilon=epsilon),
        region=FeasibleRegion(k),
        cut_families=tuple(CutFamily(f) for f in families),
        mode=mode,
        time_limit=time_limit,
        threads=threads,
    )
    result, _ = solve_with_pool(oracle, config)
    return {
        "v_total": n + m,
        "alpha": alpha,
        "k": k,
        "family_config": "+".join(families),
        "time_s": round(result.wall_time, 3),
        "cuts": result.cuts_added,
        "nodes": result.nodes_total,
        "status": result.status.value,
        "objective": repr(result.cvar_best),
    }


def cmd_bench(args) -> int:
    threads = _threads_from(args)
    cells = []
    for v_total in BENCH_SIZES:
        scaled = max(2, round(v_total * args.scale))
        n, m = scaled // 2, scaled - scaled // 2
        for alpha in BENCH_ALPHAS:
            for k in BENCH_BUDGETS:
                if k > n:
                    print(f"skipping v={scaled} k={k}: budget exceeds n={n}", file=sys.stderr)
                    continue
                for families in BENCH_CONFIGS:
                    cells.append(
                        (n, m, args.seed + v_total, alpha, k, families,
                         args.mode, args.epsilon, args.time_limit, threads)
                    )
    if args.parallel_cells > 1:
        with ProcessPoolExecutor(max_workers=args.parallel_cells) as executor:
            rows = list(executor.map(_bench_cell, cells))
    else:
        rows = [_bench_cell(cell) for cell in cells]

    out = open(args.out, "w", newline="", encoding="ascii") if args.out else sys.stdout
    try:
        out.write(f"# {BENCH_CSV_VERSION}\n")
        writer = csv.DictWriter(
            out,
            fieldnames=["v_total", "alpha", "k", "family_config", "time_s",
                        "cuts", "nodes", "status", "objective"],
        )
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rasm",
        description="Risk-averse coverage maximization: CVaR of the covered-item "
        "count over a cardinality budget, solved by delayed constraint generation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a random instance file")
    gen.add_argument("--n", type=int, required=True, help="number of candidate sets")
    gen.add_argument("--m", type=int, required=True, help="number of items")
    gen.add_argument("--prob-low", type=float, default=0.05)
    gen.add_argument("--prob-high", type=float, default=0.20)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output path")
    gen.set_defaults(func=cmd_gen)

    solve = sub.add_parser("solve", help="solve one instance")
    solve.add_argument("instance", help="instance file path")
    solve.add_argument("--alpha", type=float, required=True)
    solve.add_argument("--k", type=int, required=True)
    solve.add_argument("--cuts", default="new", help="comma list of lshaped,new,lifted")
    solve.add_argument("--mode", choices=("loop", "lazy"), default="loop")
    solve.add_argument("--epsilon", type=float, default=1e-6)
    solve.add_argument("--time-limit", type=float, default=None)
    solve.add_argument("--iteration-limit", type=int, default=None)
    solve.add_argument("--threads", type=int, default=None)
    solve.add_argument("--export-lp", default=None, help="write the final master as LP text")
    solve.add_argument("--trace", default=None, help="write per-iteration CSV trace")
    solve.set_defaults(func=cmd_solve)

    verify = sub.add_parser(
        "verify", help="run the randomized brute-force property suite"
    )
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--count", type=int, default=100, help="number of random instances")
    verify.add_argument(
        "--inject-bug",
        choices=("new-cut-coeff",),
        default=None,
        help="self-test hook: corrupt a cut so the suite must fail",
    )
    verify.set_defaults(func=cmd_verify)

    bench = sub.add_parser("bench", help="run the benchmark grid, emit CSV")
    bench.add_argument("--scale", type=float, default=1.0, help="scale factor on graph sizes")
    bench.add_argument("--time-limit", type=float, default=60.0, help="per-cell seconds")
    bench.add_argument("--epsilon", type=float, default=1e-6)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--mode", choices=("loop", "lazy"), default="lazy")
    bench.add_argument("--out", default=None, help="CSV path (default stdout)")
    bench.add_argument("--parallel-cells", type=int, default=1)
    bench.add_argument("--threads", type=int, default=None)
    bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, ParseError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
