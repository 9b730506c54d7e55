"""Command line entry point.

    cgfeedback gen-corpus --seed 1 --count 100 --out corpus/
    cgfeedback autotune --corpus corpus/ --out labels.jsonl
    cgfeedback iterate --corpus corpus/ --model stub:0 --format fast --labels labels.jsonl --out runs/it
    cgfeedback sample --corpus gen:1:100 --model stub:0 --samples 10 --temperature 1.0 --out runs/s10
    cgfeedback report --run runs/it runs/s10 --out report/
    cgfeedback dataset --run runs/it --out data/

Exit status: 0 on success, 1 on configuration errors, 2 on backend failures.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .autotune import AutotuneError, SearchBudget, autotune
from .backend import BackendConfigError, ExternalBackend, MiniBackend, PassCatalog
from .feedback import FORMATS, PROMPT_VERSION
from .metrics import ROW_FIELDS, SUBSETS, aggregate, row_from_episode, subset
from .mir import CorpusConfig, generate_corpus
from .model import HttpModel, ModelError, ReplayModel
from .orchestrator import (
    STRATEGIES,
    EpisodeResult,
    SamplingStrategy,
    _episode,
    iterate_feedback,
    run_strategy,
    task_feedback,
    task_optimize,
)
from .records import SchemaError, read_jsonl, write_csv, write_jsonl
from .stub import StubModel

log = logging.getLogger("cgfeedback")

EPISODE_COMMANDS = ("optimize", "feedback", "iterate", "sample")


class ConfigError(Exception):
    pass


class BackendFailure(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    corpus: str
    out: str
    backend: str = "mini"
    opt_binary: str | None = None
    opt_args: str = "{input} -passes={passes} -S -o -"
    catalog: str | None = None
    timeout: float = 30.0
    model: str = "stub:0"
    stub_style: str = "feedback"
    endpoint: str | None = None
    format: str = "fast"
    strategy: str = "original_sample"
    temperature: float = 0.0
    samples: int = 1
    steps: int = 5
    seed: int = 0
    jobs: int = 1
    oz_combine: bool = False
    labels: str | None = None
    autotune: bool = True
    autotune_strategy: str = "random"
    autotune_depth: int = 10
    max_evals: int = 500

    @classmethod
    def from_args(cls, args) -> RunConfig:
        names = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in vars(args).items() if k in names})


# -- construction -----------------------------------------------------------

def make_backend(cfg: RunConfig):
    if cfg.backend == "mini":
        if cfg.catalog:
            return MiniBackend(PassCatalog.from_file(cfg.catalog))
        return MiniBackend()
    if cfg.backend == "external":
        if not cfg.opt_binary or not cfg.catalog:
            raise ConfigError("--backend external needs --opt-binary and --catalog")
        return ExternalBackend(cfg.opt_binary, PassCatalog.from_file(cfg.catalog),
                               cfg.opt_args, cfg.timeout)
    raise ConfigError(f"unknown backend {cfg.backend!r}")


def make_model(cfg: RunConfig, backend):
    kind, _, arg = cfg.model.partition(":")
    if kind == "stub":
        try:
            seed = int(arg) if arg else cfg.seed
        except ValueError:
            raise ConfigError(f"bad stub seed in --model {cfg.model!r}") from None
        return StubModel(seed, backend if isinstance(backend, MiniBackend) else MiniBackend(), cfg.stub_style)
    if kind == "replay":
        if not arg:
            raise ConfigError("--model replay:PATH needs a fixture path")
        try:
            return ReplayModel(arg)
        except OSError as e:
            raise ConfigError(f"cannot read replay fixture {arg}: {e.strerror}") from e
    if kind == "http":
        endpoint = arg or cfg.endpoint or os.environ.get("MODEL_ENDPOINT")
        if not endpoint:
            raise ConfigError("--model http needs --endpoint or MODEL_ENDPOINT")
        return HttpModel(endpoint, os.environ.get("MODEL_API_KEY"), timeout=cfg.timeout)
    raise ConfigError(f"unknown model {cfg.model!r}; expected stub[:SEED], replay:PATH or http[:URL]")


def load_corpus(spec: str) -> list[tuple[str, str]]:
    """``gen:SEED:COUNT[:SIZE]``, a directory of .mir files, or a single .mir file."""
    if spec.startswith("gen:"):
        parts = spec.split(":")[1:]
        try:
            seed, count = int(parts[0]), int(parts[1])
            size = int(parts[2]) if len(parts) > 2 else CorpusConfig.size
        except (IndexError, ValueError):
            raise ConfigError(f"bad corpus generator spec {spec!r}; expected gen:SEED:COUNT[:SIZE]") from None
        return generate_corpus(seed, count, CorpusConfig(size=size))
    path = Path(spec)
    if path.is_dir():
        files = sorted(path.glob("*.mir")) + sorted(path.glob("*.ll"))
        if not files:
            raise ConfigError(f"no .mir or .ll files in corpus directory {path}")
        return sorted((f.stem, f.read_text()) for f in files)
    if path.is_file():
        return [(path.stem, path.read_text())]
    raise ConfigError(f"corpus not found: {spec}")


def corpus_digest(corpus) -> str:
    h = hashlib.sha256()
    for eid, text in corpus:
        h.update(eid.encode() + b"\0" + text.encode() + b"\0")
    return h.hexdigest()


def _prepare_out(path: str) -> Path:
    out = Path(path)
    if out.exists() and any(out.iterdir()):
        raise ConfigError(f"output directory {out} is not empty; runs are write-once")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory {out}: {e.strerror}") from e
    return out


def load_labels(path) -> dict[str, dict]:
    try:
        return {r["example_id"]: r for r in read_jsonl(path, "autotune_labels")}
    except OSError as e:
        raise ConfigError(f"cannot read labels file {path}: {e.strerror}") from e
    except SchemaError as e:
        raise ConfigError(str(e)) from e


# -- per-example workers ----------------------------------------------------

_worker: dict = {}


def _init_worker(cfg_dict):
    cfg = RunConfig(**cfg_dict)
    backend = make_backend(cfg)
    _worker.update(cfg=cfg, backend=backend, model=make_model(cfg, backend),
                   labels=load_labels(cfg.labels) if cfg.labels else None)


def _run_episode(example) -> dict:
    eid, src = example
    cfg, backend, model = _worker["cfg"], _worker["backend"], _worker["model"]
    check = backend.check_compilable(src)
    if not check.ok:
        return {"example_id": eid, "error": f"source does not compile: {check.message}"}
    try:
        if cfg.command == "optimize":
            step = task_optimize(src, model, backend, cfg.temperature, cfg.format == "fast")
            ep = _episode(src, [step], backend, cfg.oz_combine, "optimize", eid)
        elif cfg.command == "feedback":
            stop = cfg.format == "fast"
            first = task_optimize(src, model, backend, 0.0, stop)
            second = task_feedback(src, first, cfg.format, model, backend, cfg.temperature, stop)
            ep = _episode(src, [first, second], backend, cfg.oz_combine, f"feedback_{cfg.format}", eid)
        elif cfg.command == "iterate":
            ep = iterate_feedback(src, cfg.format, model, backend, cfg.steps, cfg.temperature,
                                  cfg.oz_combine, eid)
        else:
            strat = SamplingStrategy(cfg.strategy, cfg.temperature, cfg.samples)
            ep = run_strategy(src, strat, cfg.format, model, backend, cfg.oz_combine, eid)
    except ModelError as e:
        raise BackendFailure(f"{eid}: {e}") from e

    labels = _worker["labels"]
    if labels is not None:
        if eid in labels:
            ep.autotuner_count = labels[eid]["best_count"]
            ep.autotuner_passes = tuple(labels[eid]["best_passes"])
    elif cfg.autotune:
        res = autotune(src, backend, _budget(cfg))
        ep.autotuner_count, ep.autotuner_passes = res.best_count, res.best_passes
    return ep.to_dict()


def _budget(cfg: RunConfig) -> SearchBudget:
    return SearchBudget(cfg.autotune_strategy, cfg.autotune_depth, cfg.max_evals, cfg.seed)


def _run_label(example) -> dict:
    eid, src = example
    cfg, backend = _worker["cfg"], _worker["backend"]
    try:
        res = autotune(src, backend, _budget(cfg))
    except AutotuneError as e:
        return {"example_id": eid, "error": str(e)}
    return {"example_id": eid, "best_passes": list(res.best_passes), "best_count": res.best_count,
            "oz_count": res.reference_count, "evaluations": res.evaluations}


def _map(cfg: RunConfig, fn, corpus):
    cfg_dict = asdict(cfg)
    if cfg.jobs <= 1:
        _init_worker(cfg_dict)
        return [fn(ex) for ex in corpus]
    with concurrent.futures.ProcessPoolExecutor(
            cfg.jobs, initializer=_init_worker, initargs=(cfg_dict,)) as pool:
        return list(pool.map(fn, corpus, chunksize=max(1, len(corpus) // (cfg.jobs * 4))))


def _manifest(cfg: RunConfig, corpus, backend, model=None) -> dict:
    m = {"tool": "cgfeedback", "version": __version__, "prompt_version": PROMPT_VERSION,
         "config": asdict(cfg), "backend": backend.describe(),
         "corpus_size": len(corpus), "corpus_sha256": corpus_digest(corpus)}
    if model is not None:
        m["model"] = model.describe()
    return m


def _write_json(path, obj):
    with open(path, "x") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


# -- commands ---------------------------------------------------------------

def cmd_episodes(cfg: RunConfig) -> int:
    if cfg.format not in FORMATS:
        raise ConfigError(f"unknown format {cfg.format!r}")
    if cfg.command == "sample":
        SamplingStrategy(cfg.strategy, cfg.temperature, cfg.samples)
    if cfg.labels:
        load_labels(cfg.labels)
    backend = make_backend(cfg)
    model = make_model(cfg, backend)
    corpus = load_corpus(cfg.corpus)
    out = _prepare_out(cfg.out)
    _write_json(out / "manifest.json", _manifest(cfg, corpus, backend, model))

    results = _map(cfg, _run_episode, corpus)
    episodes, errors = [], []
    for r in results:
        if "error" in r:
            log.warning("skipping %s: %s", r["example_id"], r["error"])
            errors.append(r)
        else:
            episodes.append(EpisodeResult.from_dict(r))
    episodes.sort(key=lambda e: e.example_id)
    rows = [row_from_episode(e) for e in episodes]

    write_jsonl(out / "episodes.jsonl", "episodes", (e.to_dict() for e in episodes))
    write_jsonl(out / "rows.jsonl", "metrics_rows", (r.to_dict() for r in rows))
    write_csv(out / "rows.csv", "metrics_rows", ROW_FIELDS, (r.to_dict() for r in rows))
    summary = {"skipped": [e["example_id"] for e in errors]}
    if rows:
        summary["all"] = aggregate(rows).to_dict()
        for which in SUBSETS[1:]:
            sub = subset(rows, which)
            summary[which] = aggregate(sub).to_dict() if sub else None
            if summary[which] is not None:
                summary[which]["subset_size"] = len(sub)
    _write_json(out / "summary.json", summary)
    if rows:
        s = summary["all"]
        fa = s["fraction_of_autotuner"]
        print(f"{cfg.command}: {len(rows)} examples, improvement over reference "
              f"{100 * s['corpus_improvement']:.2f}%"
              + (f", {100 * fa:.1f}% of autotuner" if fa is not None else ""))
    return 0


def cmd_autotune(cfg: RunConfig) -> int:
    backend = make_backend(cfg)
    corpus = load_corpus(cfg.corpus)
    out = Path(cfg.out)
    if out.exists():
        raise ConfigError(f"labels file {out} already exists")
    out.parent.mkdir(parents=True, exist_ok=True)
    results = _map(cfg, _run_label, corpus)
    good = []
    for r in sorted(results, key=lambda r: r["example_id"]):
        if "error" in r:
            log.warning("autotune failed for %s: %s", r["example_id"], r["error"])
        else:
            good.append(r)
    write_jsonl(out, "autotune_labels", good)
    _write_json(out.with_suffix(".manifest.json"), _manifest(cfg, corpus, backend))
    improved = sum(r["best_count"] < r["oz_count"] for r in good)
    print(f"autotune: {len(good)} labels, {improved} beat the reference pipeline")
    return 0


def cmd_gen_corpus(args) -> int:
    out = _prepare_out(args.out)
    corpus = generate_corpus(args.seed, args.count, CorpusConfig(size=args.size))
    for eid, text in corpus:
        (out / f"{eid}.mir").write_text(text)
    print(f"wrote {len(corpus)} programs to {out}")
    return 0


def cmd_rerun(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read manifest {args.manifest}: {e.strerror}") from e
    cfg = RunConfig(**manifest["config"])
    cfg.out = args.out
    if cfg.command == "autotune":
        return cmd_autotune(cfg)
    return cmd_episodes(cfg)


# -- argument parsing -------------------------------------------------------

def _common(p, episode: bool):
    p.add_argument("--corpus", required=True, help="gen:SEED:COUNT[:SIZE], a .mir directory or file")
    p.add_argument("--out", required=True)
    p.add_argument("--backend", choices=("mini", "external"), default="mini")
    p.add_argument("--opt-binary", dest="opt_binary")
    p.add_argument("--opt-args", dest="opt_args", default=RunConfig.opt_args,
                   help="argument template with {input} and {passes}")
    p.add_argument("--catalog", help="pass catalog file (first line: reference pipeline)")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    if episode:
        p.add_argument("--model", default="stub:0", help="stub[:SEED], replay:PATH or http[:URL]")
        p.add_argument("--stub-style", dest="stub_style", choices=("feedback", "original"), default="feedback")
        p.add_argument("--endpoint")
        p.add_argument("--format", choices=FORMATS, default="fast")
        p.add_argument("--strategy", choices=STRATEGIES, default="original_sample")
        p.add_argument("--temperature", type=float, default=0.0)
        p.add_argument("--samples", type=int, default=1)
        p.add_argument("--steps", type=int, default=5)
        p.add_argument("--oz-combine", dest="oz_combine", action="store_true")
        p.add_argument("--labels", help="autotune labels file (otherwise autotune inline)")
        p.add_argument("--no-autotune", dest="autotune", action="store_false")
    _autotune_args(p)


def _autotune_args(p):
    p.add_argument("--autotune-strategy", dest="autotune_strategy",
                   choices=("exhaustive", "random", "greedy"), default=RunConfig.autotune_strategy)
    p.add_argument("--autotune-depth", dest="autotune_depth", type=int, default=RunConfig.autotune_depth)
    p.add_argument("--max-evals", dest="max_evals", type=int, default=RunConfig.max_evals)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cgfeedback", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-corpus", help="write a seeded corpus of .mir programs")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=100)
    g.add_argument("--size", type=int, default=CorpusConfig.size)
    g.add_argument("--out", required=True)

    for name in EPISODE_COMMANDS:
        _common(sub.add_parser(name, help=f"run {name} episodes over a corpus"), True)

    _common(sub.add_parser("autotune", help="search pass orderings per example"), False)

    r = sub.add_parser("report", help="tables and charts from run directories")
    r.add_argument("--run", nargs="+", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--no-charts", dest="charts", action="store_false")

    d = sub.add_parser("dataset", help="fine-tuning records from a labelled run")
    d.add_argument("--run", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--format", choices=FORMATS)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--ratios", default="0.9,0.05,0.05", help="train,valid,test")

    m = sub.add_parser("rerun", help="re-execute a run from its manifest")
    m.add_argument("--manifest", required=True)
    m.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gen-corpus":
            return cmd_gen_corpus(args)
        if args.command in EPISODE_COMMANDS:
            return cmd_episodes(RunConfig.from_args(args))
        if args.command == "autotune":
            return cmd_autotune(RunConfig.from_args(args))
        if args.command == "report":
            from .report import cmd_report
            return cmd_report(args)
        if args.command == "dataset":
            from .report import cmd_dataset
            return cmd_dataset(args)
        if args.command == "rerun":
            return cmd_rerun(args)
    except (ConfigError, BackendConfigError, SchemaError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (BackendFailure, ModelError, RuntimeError) as e:
        print(f"backend failure: {e}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
