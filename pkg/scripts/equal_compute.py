#!/usr/bin/env python3
"""Iterative feedback against sampling with the same number of generations.

    python3 scripts/equal_compute.py --count 200 --format short --temperature 1.0
"""
import argparse

from cgfeedback.backend import MiniBackend
from cgfeedback.metrics import aggregate, row_from_episode
from cgfeedback.mir import generate_corpus
from cgfeedback.orchestrator import equal_compute
from cgfeedback.stub import StubModel


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--format", choices=["fast", "short", "long"], default="short")
    p.add_argument("--max-steps", type=int, default=5)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--oz-combine", action="store_true")
    args = p.parse_args(argv)

    backend = MiniBackend()
    fb = StubModel(args.seed, backend)
    orig = StubModel(args.seed, backend, "original")
    it_rows, sm_rows, gens = [], [], 0
    for eid, text in generate_corpus(args.seed, args.count):
        it, sm = equal_compute(text, args.format, fb, orig, backend, args.max_steps,
                               args.temperature, args.oz_combine, eid)
        it_rows.append(row_from_episode(it))
        sm_rows.append(row_from_episode(sm))
        gens += it.steps_used

    print(f"examples: {args.count}, generations per method: {gens}")
    for name, rows in (("iterate", it_rows), ("sample", sm_rows)):
        s = aggregate(rows)
        print(f"{name:8s} corpus improvement over reference: {s.corpus_improvement:+.4f}")


if __name__ == "__main__":
    main()
