#!/usr/bin/env python3
"""Best-of-n improvement over the reference pipeline, per sampling temperature.

    python3 scripts/sampling_sweep.py --count 100 --temps 0.2,0.6,1.0,1.4 --n 1,2,5,10
"""
import argparse

from cgfeedback.backend import MiniBackend
from cgfeedback.metrics import best_of_n_curve
from cgfeedback.mir import generate_corpus
from cgfeedback.orchestrator import sample_optimize
from cgfeedback.stub import StubModel


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--temps", default="0.2,0.6,1.0,1.4")
    p.add_argument("--n", default="1,2,5,10")
    p.add_argument("--style", choices=["feedback", "original"], default="original")
    args = p.parse_args(argv)

    backend = MiniBackend()
    model = StubModel(args.seed, backend, args.style)
    corpus = generate_corpus(args.seed, args.count)
    ns = [int(x) for x in args.n.split(",")]
    print("temperature," + ",".join(f"n={k}" for k in ns))
    for t in (float(x) for x in args.temps.split(",")):
        eps = [sample_optimize(text, model, backend, max(ns), t, example_id=eid) for eid, text in corpus]
        curve = best_of_n_curve(eps, ns)
        print(f"{t}," + ",".join(f"{curve[k]:.4f}" for k in ns))


if __name__ == "__main__":
    main()
