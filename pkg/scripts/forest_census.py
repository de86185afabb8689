"""Divergent-forest counts for a family of graphs.

Prints the divergent subsets, forest count and the subtraction schedules of
each graph, and checks the toy backend against the explicit nested
subtraction oracle.

    python scripts/forest_census.py configs/triangle.edges configs/fish.edges
    python scripts/forest_census.py --random 50 --max-vertices 4
"""
import argparse
import itertools
import sys
from pathlib import Path

import numpy as np
import sympy as sp

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from oracles import brute_nested_subtraction  # noqa: E402

from flrwren.forests import (DiagramGraph, ToyModel, divergent_forests,  # noqa: E402
                             divergent_subsets, forest_sum, schedule)


def describe(g, name):
    forests = divergent_forests(g)
    subs = ["".join(map(str, sorted(s))) for s in divergent_subsets(g)]
    print(f"{name}: n={g.n} lines={dict(g.lines)} divergent={subs} forests={len(forests)}")
    for f in forests:
        print(f"    {f.labels() or ['{}']} -> {schedule(g, f).labels() or ['identity']}")


def random_check(count, max_vertices, seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(2, max_vertices + 1))
        lines = {e: int(rng.integers(0, 4)) for e in itertools.combinations(range(1, n + 1), 2)}
        g = DiagramGraph(n, lines)
        model = ToyModel.random(g, rng)
        res = forest_sum(g, model)
        finite, _ = brute_nested_subtraction(model)
        ref = complex(sp.N(finite, 30))
        worst = max(worst, abs(res.value - ref) / max(1.0, abs(ref)))
    print(f"{count} random toys: max deviation from nested oracle {worst:.1e}")


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("graphs", nargs="*", help="edge-list files")
    p.add_argument("--random", type=int, default=0, help="number of random toy checks")
    p.add_argument("--max-vertices", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    for path in args.graphs:
        describe(DiagramGraph.parse(Path(path).read_text()), path)
    if args.random:
        random_check(args.random, args.max_vertices, args.seed)


if __name__ == "__main__":
    main()
