#!/usr/bin/env python3
"""Compare the fast, short and long feedback formats on one corpus.

    python3 scripts/feedback_formats.py --count 200
"""
import argparse
from statistics import mean

from cgfeedback.backend import MiniBackend
from cgfeedback.metrics import aggregate, row_from_episode
from cgfeedback.mir import generate_corpus
from cgfeedback.orchestrator import feedback_prompt, iterate_feedback
from cgfeedback.stub import StubModel


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--max-steps", type=int, default=5)
    p.add_argument("--temperature", type=float, default=0.0)
    args = p.parse_args(argv)

    backend = MiniBackend()
    corpus = generate_corpus(args.seed, args.count)
    print("format,corpus_improvement,mean_steps,mean_prompt_chars")
    for fmt in ("fast", "short", "long"):
        model = StubModel(args.seed, backend)
        rows, steps, chars = [], [], []
        for eid, text in corpus:
            ep = iterate_feedback(text, fmt, model, backend, args.max_steps, args.temperature,
                                  example_id=eid)
            rows.append(row_from_episode(ep))
            steps.append(ep.steps_used)
            chars += [len(feedback_prompt(text, prior, fmt)) for prior in ep.generations[:-1]]
        s = aggregate(rows)
        avg_chars = f"{mean(chars):.0f}" if chars else "n/a"
        print(f"{fmt},{s.corpus_improvement:.4f},{mean(steps):.2f},{avg_chars}")


if __name__ == "__main__":
    main()
