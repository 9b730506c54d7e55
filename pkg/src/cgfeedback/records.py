"""Record-per-line files with a schema header line."""
from __future__ import annotations

import csv
import json
from pathlib import Path

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    pass


def write_jsonl(path, schema: str, records) -> int:
    path = Path(path)
    n = 0
    with open(path, "x") as f:
        f.write(json.dumps({"schema": schema, "version": SCHEMA_VERSION}) + "\n")
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
            n += 1
    return n


def read_jsonl(path, schema: str | None = None) -> list[dict]:
    path = Path(path)
    with open(path) as f:
        lines = [l for l in f if l.strip()]
    if not lines:
        raise SchemaError(f"{path} is empty")
    header = json.loads(lines[0])
    if "schema" not in header or "version" not in header:
        raise SchemaError(f"{path} has no schema header")
    if schema is not None and header["schema"] != schema:
        raise SchemaError(f"{path} holds {header['schema']!r}, expected {schema!r}")
    if header["version"] != SCHEMA_VERSION:
        raise SchemaError(f"{path} is schema version {header['version']}, expected {SCHEMA_VERSION}")
    return [json.loads(l) for l in lines[1:]]


def write_csv(path, schema: str, fieldnames, rows) -> None:
    with open(path, "x", newline="") as f:
        f.write(f"# schema: {schema} v{SCHEMA_VERSION}\n")
        w = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: "" if row.get(k) is None else row.get(k) for k in fieldnames})
