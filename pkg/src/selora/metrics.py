"""CSV/JSON export of run and sweep metrics (data only, no plotting)."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .trainer import RunMetrics, SweepReport

CSV_COLUMNS = ("axis_value", "arm", "seed", "final_metric", "params")


def _as_dict(obj) -> dict:
    if isinstance(obj, SweepReport):
        return obj.to_dict()
    if isinstance(obj, RunMetrics):
        return {"run": obj.to_dict()}
    if isinstance(obj, dict):
        return obj
    raise TypeError(f"cannot export {type(obj).__name__}")


def metric_rows(obj) -> list[dict]:
    data = _as_dict(obj)
    if "entries" in data:
        return [{c: e[c] for c in CSV_COLUMNS} for e in data["entries"]]
    run = data.get("run", data)
    return [{
        "axis_value": "",
        "arm": "run",
        "seed": run.get("seed", run.get("config", {}).get("seed", "")),
        "final_metric": run["final_metric"],
        "params": run["trainable_params"],
    }]


def dumps_metrics(obj, fmt: str) -> str:
    fmt = fmt.lower()
    if fmt == "json":
        return json.dumps(_as_dict(obj), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in metric_rows(obj):
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()
    raise ValueError(f"unknown export format {fmt!r} (expected csv or json)")


def export_metrics(obj, path, fmt: str = "json") -> Path:
    path = Path(path)
    path.write_text(dumps_metrics(obj, fmt))
    return path
