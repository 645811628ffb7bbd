#!/usr/bin/env python3
"""Prover micro-benchmarks: random-formula throughput and wide-goal scaling.

    python3 scripts/bench_prover.py [--samples N] [--seed S] [--pairs K]

Two workloads:
  * grind over random propositional formulas (mixed atom counts up to 12),
    reporting proofs/second and the tautology hit rate;
  * the wide conjunction (a1 OR b1) AND ... AND (an OR bn) IMPLIES (a1 OR b1),
    which stresses the truth-table core as the atom count grows.
"""

from __future__ import annotations

import argparse
import random
import time

from mupvs import syntax as S
from mupvs.printer import print_expr
from mupvs.prover import apply_command, context_from_source, start_proof


def random_formula(rng: random.Random, pool: list[str], budget: int) -> S.Expr:
    if budget <= 1:
        if rng.random() < 0.9:
            return S.NameRef(rng.choice(pool))
        return S.BoolLit(rng.random() < 0.5)
    op = rng.choice(["AND", "OR", "IMPLIES", "IFF", "NOT", "NOT"])
    if op == "NOT":
        return S.PrefixOp("NOT", random_formula(rng, pool, budget - 1))
    cut = rng.randint(1, budget - 1)
    return S.InfixOp(op, random_formula(rng, pool, cut),
                     random_formula(rng, pool, budget - cut))


def bench_random(samples: int, seed: int) -> None:
    rng = random.Random(seed)
    proved = 0
    started = time.monotonic()
    for _ in range(samples):
        k = rng.choice([2, 3, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12])
        pool = [f"a{j}" for j in range(1, k + 1)]
        expr = random_formula(rng, pool, rng.randint(3, 31))
        decls = "\n".join(f"  {a}: bool" for a in pool)
        src = (f"rnd: THEORY\nBEGIN\n{decls}\n"
               f"  goal: THEOREM {print_expr(expr)}\nEND rnd\n")
        ctx = context_from_source(src)
        tree = start_proof("goal", ctx)
        apply_command(tree, "grind", ctx)
        proved += tree.is_proved
    elapsed = time.monotonic() - started
    print(f"random formulas : {samples} goals in {elapsed:.2f}s "
          f"({samples / elapsed:,.0f} goals/s), {proved} proved")


def wide_source(pairs: int) -> str:
    decls = "\n".join(f"  a{i}: bool\n  b{i}: bool" for i in range(1, pairs + 1))
    conj = " AND ".join(f"(a{i} OR b{i})" for i in range(1, pairs + 1))
    return ("wide: THEORY\nBEGIN\n" + decls +
            f"\n  slow: THEOREM ({conj}) IMPLIES (a1 OR b1)\nEND wide\n")


def bench_wide(max_pairs: int) -> None:
    print("wide conjunction (atoms -> grind seconds):")
    for pairs in range(4, max_pairs + 1, 2):
        ctx = context_from_source(wide_source(pairs))
        tree = start_proof("slow", ctx)
        started = time.monotonic()
        apply_command(tree, "grind", ctx)
        elapsed = time.monotonic() - started
        assert tree.is_proved
        print(f"  {2 * pairs:3d} atoms : {elapsed:7.3f}s")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--pairs", type=int, default=14,
                        help="largest wide-goal size, in OR pairs")
    args = parser.parse_args()
    bench_random(args.samples, args.seed)
    bench_wide(args.pairs)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
