"""``opt``-like command line for the mini compiler.

    python -m cgfeedback.miniopt INPUT --passes constfold,dce

Prints the optimized IR on stdout; diagnostics go to stderr with exit 1.
This lets the external-binary backend drive the mini compiler.
"""
from __future__ import annotations

import argparse
import sys

from .mir import IRError, UnknownPassError, apply_pipeline, parse_module


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="miniopt")
    ap.add_argument("input")
    ap.add_argument("--passes", default="")
    args = ap.parse_args(argv)
    try:
        with open(args.input) as f:
            text = f.read()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    passes = [p for p in args.passes.split(",") if p]
    try:
        module = apply_pipeline(parse_module(text), passes)
    except (IRError, UnknownPassError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    sys.stdout.write(module.render())
    return 0


if __name__ == "__main__":
    sys.exit(main())
