"""Long-format result tables with CSV and JSON output."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

COLUMNS = ("scenario", "experiment", "point", "metric", "value", "ci_low", "ci_high", "seed", "version")


def _fmt_axis(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def point_label(**axes) -> str:
    """Canonical ``key=value;...`` label, keys sorted."""
    return ";".join(f"{k}={_fmt_axis(axes[k])}" for k in sorted(axes))


def parse_point(label: str) -> dict:
    out = {}
    if not label:
        return out
    for part in label.split(";"):
        k, v = part.split("=", 1)
        try:
            out[k] = int(v)
        except ValueError:
            try:
                out[k] = float(v)
            except ValueError:
                out[k] = v
    return out


@dataclass
class ResultTable:
    scenario: str
    experiment: str
    seed: int
    version: str
    rows: list = field(default_factory=list)

    def add(self, metric: str, value, point: dict | None = None, ci=None):
        lo, hi = (None, None) if ci is None else ci
        self.rows.append({
            "point": point_label(**(point or {})),
            "metric": metric,
            "value": float(value),
            "ci_low": None if lo is None else float(lo),
            "ci_high": None if hi is None else float(hi),
        })

    def get(self, metric: str, **axes):
        """Value of the single row matching ``metric`` and exactly the given axes."""
        label = point_label(**axes)
        hits = [r["value"] for r in self.rows if r["metric"] == metric and r["point"] == label]
        if len(hits) != 1:
            raise KeyError(f"{self.experiment}: {len(hits)} rows for {metric} at {label!r}")
        return hits[0]

    def select(self, metric: str) -> list:
        return [(parse_point(r["point"]), r["value"]) for r in self.rows if r["metric"] == metric]

    def records(self):
        for r in self.rows:
            yield {"scenario": self.scenario, "experiment": self.experiment, **r,
                   "seed": self.seed, "version": self.version}


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def write_csv(tables, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for t in tables:
            for rec in t.records():
                w.writerow([_cell(rec[c]) for c in COLUMNS])
    return path


def summary_dict(tables, skip_metrics=("psd_db", "ccdf_prob")) -> dict:
    """Nested ``experiment -> point -> metric -> value`` without the bulky curves."""
    out = {}
    for t in tables:
        exp = out.setdefault(t.experiment, {})
        for r in t.rows:
            if r["metric"] in skip_metrics:
                continue
            exp.setdefault(r["point"] or "-", {})[r["metric"]] = r["value"]
    return out


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return path
