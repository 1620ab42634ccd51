"""Flat-file formats: JSON documents and CSV tables for every artifact."""
from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from .distmodel import DiscreteDistribution, make_distribution
from .errors import BadParameter
from .rates import RateBreakdown, RegimeTable
from .sampling import SplitCounts
from .testers import TestConstants


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, default=_default, indent=2, sort_keys=False)


# ------------------------------------------------------------ distributions and counts

def parse_vector(text: str) -> List[float]:
    """A JSON array, or one number per line (blank lines and '#' comments skipped)."""
    stripped = text.strip()
    if stripped.startswith("["):
        return [float(x) for x in json.loads(stripped)]
    values = []
    for line in stripped.splitlines():
        line = line.split("#", 1)[0].strip().rstrip(",")
        if line:
            values.append(float(line))
    return values


def read_distribution(path) -> DiscreteDistribution:
    return make_distribution(parse_vector(Path(path).read_text()))


def distribution_to_text(dist: DiscreteDistribution, fmt: str = "json") -> str:
    values = [float(x) for x in dist.probs]
    if fmt == "json":
        return json.dumps(values)
    if fmt == "csv":
        return "".join(f"{x!r}\n" for x in values)
    raise BadParameter(f"unknown format {fmt!r}")


def read_counts(path) -> np.ndarray:
    values = parse_vector(Path(path).read_text())
    arr = np.asarray(values, dtype=np.float64)
    if np.any(arr < 0) or np.any(arr != np.round(arr)):
        raise BadParameter(f"{path}: counts must be non-negative integers")
    return arr.astype(np.int64)


def split_counts_to_dict(c: SplitCounts) -> dict:
    return {"x": c.x.tolist(), "y": c.y.tolist(), "k_bar": c.k_bar,
            "budgets": c.budgets.tolist(), "truncated": c.truncated}


def split_counts_from_dict(data: dict) -> SplitCounts:
    return SplitCounts(x=np.asarray(data["x"], dtype=np.int64), y=np.asarray(data["y"], dtype=np.int64),
                       k_bar=int(data["k_bar"]), budgets=np.asarray(data["budgets"], dtype=np.int64),
                       truncated=bool(data["truncated"]))


def read_constants(path) -> TestConstants:
    return TestConstants.from_dict(json.loads(Path(path).read_text()))


# ------------------------------------------------------------ tables

def rate_rows(rate: RateBreakdown) -> List[Dict[str, Any]]:
    rows = [{"kind": rate.kind, "term": name, "value": value} for name, value in rate.terms.items()]
    rows.append({"kind": rate.kind, "term": "rho", "value": rate.rho})
    rows.append({"kind": rate.kind, "term": "minimizer", "value": rate.minimizer})
    return rows


def regime_rows(table: RegimeTable) -> List[Dict[str, Any]]:
    return [r.to_dict() for r in table.rows]


def rows_to_csv(rows: List[Dict[str, Any]]) -> str:
    if not rows:
        return ""
    buf = _io.StringIO()
    fields = list(rows[0].keys())
    for r in rows[1:]:
        fields += [k for k in r if k not in fields]
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


# ------------------------------------------------------------ nested documents as key/value CSV

def flatten(obj, prefix: str = "") -> List[tuple]:
    """(dotted key, JSON-encoded value) pairs; lists of dicts are indexed."""
    out = []
    if isinstance(obj, dict):
        if not obj:
            return [(prefix, "{}")]
        for k, v in obj.items():
            out += flatten(v, f"{prefix}.{k}" if prefix else str(k))
        return out
    if isinstance(obj, list) and obj and all(isinstance(v, dict) for v in obj):
        for i, v in enumerate(obj):
            out += flatten(v, f"{prefix}.{i}")
        return out
    return [(prefix, json.dumps(obj, default=_default))]


def _relist(node):
    if isinstance(node, dict):
        node = {k: _relist(v) for k, v in node.items()}
        keys = list(node.keys())
        if keys and all(k.isdigit() for k in keys) and sorted(int(k) for k in keys) == list(range(len(keys))):
            return [node[str(i)] for i in range(len(keys))]
    return node


def unflatten(pairs) -> dict:
    root: dict = {}
    for key, value in pairs:
        parts = key.split(".")
        node = root
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = json.loads(value)
    return _relist(root)


def document_to_csv(doc: dict) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    writer.writerows(flatten(json.loads(dumps(doc))))
    return buf.getvalue()


def document_from_csv(text: str) -> dict:
    reader = csv.reader(_io.StringIO(text))
    header = next(reader)
    if header != ["key", "value"]:
        raise BadParameter("not a key/value document")
    return unflatten((k, v) for k, v in reader)


def emit(doc, fmt: str = "json") -> str:
    """Render a document (dict) or table (list of flat dicts) in ``fmt``."""
    if fmt == "json":
        return dumps(doc) + "\n"
    if fmt == "csv":
        if isinstance(doc, list):
            return rows_to_csv(doc)
        return document_to_csv(doc)
    raise BadParameter(f"unknown format {fmt!r}")
