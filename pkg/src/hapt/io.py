"""Fit artifacts, delimited tables and sample ingestion.

Floats are written with 17 significant digits so every value read back is
bit-identical. Non-finite numbers are stored as the strings ``"inf"``,
``"-inf"`` and ``"nan"`` inside JSON.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .partition import CountTable, build_tree
from .sis import SisConfig
from .tree_hmm import HaptFit

SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.17g"


def fmt(value):
    return FLOAT_FORMAT % value


def _encode(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        v = float(a)
        return v if np.isfinite(v) else str(v)
    return [_encode(v) for v in a]


def _decode_array(v):
    def conv(x):
        if isinstance(x, list):
            return [conv(y) for y in x]
        return float(x)
    return np.array(conv(v), dtype=float)


def fit_to_dict(fit, sample_ids=None):
    return {
        "schema": "hapt-fit",
        "version": SCHEMA_VERSION,
        "tree": {
            "depth": fit.tree.depth,
            "domain": list(fit.tree.domain),
            "theta0": _encode(fit.tree.theta0),
        },
        "tau": fit.tau.to_dict(),
        "nu": fit.nu.to_dict(),
        "tol": fit.tol,
        "sample_ids": list(sample_ids) if sample_ids is not None else list(range(fit.k)),
        "node_counts": fit.counts.node_counts.tolist(),
        "log_ml": fit.log_ml,
        "has_moments": fit.has_moments,
        "tables": {name: _encode(getattr(fit, name))
                   for name in ("log_z", "m1", "m2", "q2", "d", "p", "log_beta", "log_phi")},
    }


def fit_from_dict(d):
    if d.get("schema") != "hapt-fit":
        raise ValueError("not a HAPT fit artifact")
    if d.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported fit artifact version {d.get('version')}")
    t = d["tree"]
    theta0 = _decode_array(t["theta0"])
    base = "uniform" if np.all(theta0 == 0.5) else theta0
    tree = build_tree(t["depth"], tuple(t["domain"]), base)
    counts = CountTable(np.array(d["node_counts"], dtype=np.int64))
    tables = {k: _decode_array(v) for k, v in d["tables"].items()}
    k = counts.k
    tables["p"] = tables["p"].reshape(tree.n_internal, -1, k)
    return HaptFit(
        tree, counts, SisConfig.from_dict(d["tau"]), SisConfig.from_dict(d["nu"]), d["tol"],
        tables["log_z"], tables["m1"], tables["m2"], tables["q2"], tables["d"], tables["p"],
        tables["log_beta"], tables["log_phi"], float(d["log_ml"]), bool(d["has_moments"]),
    )


def save_fit(fit, path, sample_ids=None):
    Path(path).write_text(json.dumps(fit_to_dict(fit, sample_ids), separators=(",", ":")) + "\n")


def load_fit(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"fit artifact not found: {path}")
    d = json.loads(path.read_text())
    return fit_from_dict(d), d.get("sample_ids")


def write_table(path, header, columns):
    """Write equal-length numeric columns as comma-separated text."""
    columns = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_matrix(path, labels, matrix):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(labels))
        for lab, row in zip(labels, np.asarray(matrix, dtype=float)):
            w.writerow([lab] + [fmt(v) for v in row])


def read_table(path):
    """Read a table written by :func:`write_table`; returns ``(header, float array)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)


@dataclass(frozen=True, eq=False)
class Ingested:
    ids: list
    samples: list
    lines: list


def ingest(path, bounds=None):
    """Read ``sample_id,value`` rows, grouped by id in order of first appearance.

    ``bounds`` is an optional ``(a, b)``; values outside ``[a, b]`` are rejected
    with their line number.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header != ["sample_id", "value"]:
        raise ValueError(f"{path}: line 1: expected header 'sample_id,value', got {','.join(rows[0])!r}")
    groups, lines = {}, {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ValueError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
        sid, raw = row[0].strip(), row[1].strip()
        try:
            value = float(raw)
        except ValueError:
            raise ValueError(f"{path}: line {lineno}: non-numeric value {raw!r}") from None
        if not np.isfinite(value):
            raise ValueError(f"{path}: line {lineno}: non-finite value {raw!r}")
        if bounds is not None and not bounds[0] <= value <= bounds[1]:
            raise ValueError(
                f"{path}: line {lineno}: value {value!r} outside bounds ({bounds[0]}, {bounds[1]}]"
            )
        groups.setdefault(sid, []).append(value)
        lines.setdefault(sid, []).append(lineno)
    if not groups:
        raise ValueError(f"{path}: no data rows")
    ids = list(groups)
    return Ingested(ids, [np.array(groups[i]) for i in ids], [lines[i] for i in ids])


def auto_domain(samples):
    """``(min - 0.001 * range, max]`` over all samples; unit width when every value is equal."""
    allx = np.concatenate([np.asarray(s, dtype=float) for s in samples])
    lo, hi = float(allx.min()), float(allx.max())
    span = hi - lo
    if span == 0:
        return lo - 0.5, hi + 0.5
    return lo - 0.001 * span, hi


def write_samples(path, ids, samples):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "value"])
        for sid, xs in zip(ids, samples):
            for v in xs:
                w.writerow([sid, fmt(v)])
