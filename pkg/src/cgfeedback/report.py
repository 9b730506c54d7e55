"""``report`` and ``dataset`` commands: read finished run directories."""
from __future__ import annotations

import json
from collections import Counter
from pathlib import Path

from .cli import ConfigError, RunConfig, _prepare_out, _write_json, make_backend
from .metrics import (
    CORRELATION_FIELDS,
    SUBSETS,
    MetricsRow,
    aggregate,
    best_of_n_curve,
    emit_finetune_dataset,
    error_histogram,
    pearson_matrix,
    split_dataset,
    subset,
)
from .orchestrator import EpisodeResult
from .records import read_jsonl, write_csv, write_jsonl

ERROR_EDGES = (1, 2, 3, 5, 10)
BLEU_EDGES = (0.0, 0.25, 0.5, 0.75, 0.9)


class Run:
    def __init__(self, path):
        self.path = Path(path)
        for name in ("manifest.json", "rows.jsonl", "episodes.jsonl"):
            if not (self.path / name).is_file():
                raise ConfigError(f"missing run artifact: {self.path / name}")
        self.manifest = json.loads((self.path / "manifest.json").read_text())
        self.config = self.manifest["config"]
        self.rows = [MetricsRow(**r) for r in read_jsonl(self.path / "rows.jsonl", "metrics_rows")]
        self._episodes = None

    @property
    def episodes(self) -> list[EpisodeResult]:
        if self._episodes is None:
            self._episodes = [EpisodeResult.from_dict(d)
                              for d in read_jsonl(self.path / "episodes.jsonl", "episodes")]
        return self._episodes

    @property
    def label(self) -> str:
        c = self.config
        if c["command"] == "sample":
            return f"{c['strategy']} T={c['temperature']:g}"
        if c["command"] == "iterate":
            return f"iterate {c['format']} T={c['temperature']:g}"
        return f"{c['command']} {c['format']}"


def _fmt(v):
    return "undefined" if v is None else f"{v:.6f}"


def _summary_row(name, run) -> dict:
    c = run.config
    row = {"run": name, "command": c["command"], "format": c["format"], "strategy": c["strategy"],
           "temperature": c["temperature"], "samples": c["samples"], "steps": c["steps"]}
    if run.rows:
        s = aggregate(run.rows)
        row.update(n=s.n, corpus_improvement=s.corpus_improvement,
                   per_example_mean_improvement=s.per_example_mean_improvement,
                   autotuner_corpus_improvement=s.autotuner_corpus_improvement,
                   fraction_of_autotuner=s.fraction_of_autotuner,
                   fraction_of_autotuner_mean=s.fraction_of_autotuner_mean)
        for which in SUBSETS[1:]:
            sub = subset(run.rows, which)
            row[f"n_{which}"] = len(sub)
            row[f"improvement_{which}"] = aggregate(sub).corpus_improvement if sub else None
    return row


def _charts(out, runs, curves, matrices):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, run in runs:
        pts = curves[name]
        ax.plot(list(pts), [100 * v for v in pts.values()], marker="o", label=run.label)
    ax.set_xscale("log")
    ax.set_xlabel("generations per example")
    ax.set_ylabel("improvement over reference pipeline (%)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out / "curves.svg", metadata={"Date": None})
    plt.close(fig)

    for name, m in matrices.items():
        fig, ax = plt.subplots(figsize=(6, 5))
        grid = [[float("nan") if v is None else v for v in line] for line in m.values]
        im = ax.imshow(grid, vmin=-1, vmax=1, cmap="coolwarm")
        ax.set_xticks(range(len(m.fields)), m.fields, rotation=60, ha="right", fontsize=7)
        ax.set_yticks(range(len(m.fields)), m.fields, fontsize=7)
        fig.colorbar(im)
        fig.tight_layout()
        fig.savefig(out / f"correlation_{name}.svg", metadata={"Date": None})
        plt.close(fig)


def cmd_report(args) -> int:
    runs = []
    seen = Counter()
    for path in args.run:
        run = Run(path)
        base = run.path.name or "run"
        seen[base] += 1
        runs.append((base if seen[base] == 1 else f"{base}_{seen[base]}", run))
    out = _prepare_out(args.out)

    summary = [_summary_row(name, run) for name, run in runs]
    keys = list(dict.fromkeys(k for row in summary for k in row))
    write_csv(out / "summary.csv", "report_summary", keys, summary)

    curves, matrices = {}, {}
    for name, run in runs:
        if len(run.rows) >= 2:
            m = pearson_matrix(run.rows, CORRELATION_FIELDS)
            matrices[name] = m
            write_csv(out / f"correlation_{name}.csv", "correlation", ["field"] + m.fields,
                      ({"field": f, **{g: _fmt(v) for g, v in zip(m.fields, line)}}
                       for f, line in zip(m.fields, m.values)))
        for field, edges, exact in (("tgt_inst_cnt_error_C", ERROR_EDGES, 0),
                                    ("tgt_IR_BLEU_C", BLEU_EDGES, 1.0)):
            buckets = error_histogram(run.rows, field, edges, exact)
            write_csv(out / f"histogram_{field}_{name}.csv", "histogram",
                      ["bucket", "count", "mean_improvement_over_autotuner"],
                      ({"bucket": b.label, "count": b.count,
                        "mean_improvement_over_autotuner": _fmt(b.mean_improvement)} for b in buckets))
        eps = run.episodes
        if eps:
            longest = max(len(e.generations) for e in eps)
            curves[name] = best_of_n_curve(eps, range(1, longest + 1))

    curve_rows = [{"run": name, "label": run.label, "k": k, "improvement": v}
                  for name, run in runs if name in curves for k, v in curves[name].items()]
    write_csv(out / "curves.csv", "curves", ["run", "label", "k", "improvement"], curve_rows)

    # equal compute: iterative runs next to sampling runs, by generations used
    ks = sorted({r["k"] for r in curve_rows})
    cols = [name for name, _ in runs if name in curves]
    table = []
    for k in ks:
        row = {"generations": k}
        for name in cols:
            row[name] = curves[name].get(k, curves[name][max(curves[name])])
        table.append(row)
    write_csv(out / "equal_compute.csv", "equal_compute", ["generations"] + cols, table)

    if args.charts:
        _charts(out, [(n, r) for n, r in runs if n in curves], curves, matrices)
    print(f"report for {len(runs)} runs written to {out}")
    return 0


def cmd_dataset(args) -> int:
    run = Run(args.run)
    cfg = RunConfig(**run.config)
    fmt = args.format or cfg.format
    try:
        ratios = tuple(float(x) for x in args.ratios.split(","))
    except ValueError:
        raise ConfigError(f"bad --ratios {args.ratios!r}") from None
    backend = make_backend(cfg)
    records = list(emit_finetune_dataset(run.episodes, fmt, backend))
    if not records:
        raise ConfigError(f"run {run.path} has no autotuner-labelled episodes")
    out = _prepare_out(args.out)
    parts = split_dataset(records, ratios, args.seed)
    for name, recs in parts.items():
        write_jsonl(out / f"{name}.jsonl", "finetune", recs)
    labels = Counter(r["meta"]["label"] for r in records)
    _write_json(out / "manifest.json", {"run": str(run.path), "format": fmt, "seed": args.seed,
                                        "ratios": list(ratios), "sizes": {k: len(v) for k, v in parts.items()},
                                        "labels": dict(labels)})
    print(f"dataset: {len(records)} records ({labels['sure']} sure, {labels['retry']} retry) -> {out}")
    return 0
