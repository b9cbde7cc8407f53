"""Verification reports: rows of computed-vs-reference checks, canonical JSON, CSV and plot data."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from ..errors import IoError

PROVENANCE = ("paper", "trivial", "derived", "property")
STATUSES = ("PASS", "FAIL", "INVALID-HYPOTHESIS")


def _plain(x: Any) -> Any:
    """JSON-ready value; complex numbers become {"re", "im"}."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": _plain(x.real), "im": _plain(x.imag)}
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x if x is None or isinstance(x, str) else str(x)


def _restore(x: Any) -> Any:
    if isinstance(x, dict):
        if set(x) == {"re", "im"}:
            return complex(_restore(x["re"]), _restore(x["im"]))
        return {k: _restore(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_restore(v) for v in x]
    if x in ("nan", "inf", "-inf"):
        return float(x)
    return x


@dataclass
class Check:
    name: str
    computed: Any
    reference: Any
    provenance: str
    tolerance: Optional[float]
    passed: bool
    runtime: float = 0.0
    note: str = ""

    def __post_init__(self):
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        self.passed = bool(self.passed)

    def to_dict(self, with_runtime: bool = True) -> dict:
        d = {"name": self.name, "computed": _plain(self.computed), "reference": _plain(self.reference),
             "provenance": self.provenance, "tolerance": _plain(self.tolerance), "pass": self.passed}
        if self.note:
            d["note"] = self.note
        if with_runtime:
            d["runtime"] = round(self.runtime, 6)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Check":
        return cls(d["name"], _restore(d["computed"]), _restore(d["reference"]), d["provenance"],
                   _restore(d["tolerance"]), d["pass"], d.get("runtime", 0.0), d.get("note", ""))


def close(computed, reference, tol: float) -> bool:
    try:
        return bool(abs(complex(computed) - complex(reference)) <= tol)
    except (TypeError, ValueError):
        return False


@dataclass
class VerificationReport:
    experiment: str
    kind: str
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    invalid_hypothesis: bool = False
    seed: Optional[int] = None
    timestamp: float = field(default_factory=time.time)

    @property
    def status(self) -> str:
        if self.invalid_hypothesis:
            return "INVALID-HYPOTHESIS"
        return "PASS" if all(r.passed for r in self.rows) else "FAIL"

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    def add(self, name, computed, reference, provenance, tolerance=None, passed=None, runtime=0.0,
            note="") -> Check:
        if passed is None:
            passed = close(computed, reference, tolerance if tolerance is not None else 0.0)
        row = Check(name, computed, reference, provenance, tolerance, passed, runtime, note)
        self.rows.append(row)
        return row

    def timed(self, name, fn, reference, provenance, tolerance=None, compare=None, note=""):
        """Run ``fn`` and record its value; ``compare(value)`` overrides the default closeness test."""
        t0 = time.perf_counter()
        value = fn()
        dt = time.perf_counter() - t0
        passed = compare(value) if compare is not None else None
        return self.add(name, value, reference, provenance, tolerance, passed, dt, note)

    def to_dict(self, canonical: bool = False) -> dict:
        d = {"experiment": self.experiment, "kind": self.kind, "status": self.status, "seed": self.seed,
             "rows": [r.to_dict(with_runtime=not canonical) for r in self.rows],
             "summary": _plain(self.summary), "tables": _plain(self.tables)}
        if not canonical:
            d["timestamp"] = self.timestamp
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        rep = cls(d["experiment"], d["kind"], [Check.from_dict(r) for r in d["rows"]],
                  _restore(d.get("summary", {})), _restore(d.get("tables", {})),
                  d.get("status") == "INVALID-HYPOTHESIS", d.get("seed"), d.get("timestamp", 0.0))
        return rep

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(canonical=True), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def reports_json(reports: list) -> str:
    body = {"reports": [r.to_dict() for r in reports],
            "status": "PASS" if all(r.passed for r in reports) else
            ("INVALID-HYPOTHESIS" if any(r.invalid_hypothesis for r in reports) else "FAIL"),
            "canonical_sha256": [r.digest() for r in reports]}
    return json.dumps(body, sort_keys=True, indent=2)


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc


def _scalar_text(x) -> str:
    x = _plain(x)
    if isinstance(x, dict) and set(x) == {"re", "im"}:
        return f"{x['re']!r}{'+' if x['im'] >= 0 else '-'}{abs(x['im'])!r}j"
    return json.dumps(x) if isinstance(x, (list, dict)) else str(x)


def write_csv(report: VerificationReport, path: str) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "computed", "reference", "provenance", "tolerance", "pass", "runtime"])
    for r in report.rows:
        w.writerow([r.name, _scalar_text(r.computed), _scalar_text(r.reference), r.provenance,
                    _scalar_text(r.tolerance), "true" if r.passed else "false", f"{r.runtime:.6f}"])
    _write(path, buf.getvalue())


def write_table_csv(table: dict, path: str) -> None:
    cols = list(table["columns"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in table["rows"]:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    _write(path, buf.getvalue())


def write_plot_data(table: dict, path: str) -> None:
    """Whitespace-delimited columns with a commented header."""
    lines = ["# " + " ".join(table["columns"])]
    for row in table["rows"]:
        lines.append(" ".join(f"{float(v):.17g}" for v in row))
    _write(path, "\n".join(lines) + "\n")


def emit_report(reports, fmt: str, path: str, plots: bool = False) -> str:
    """Write ``reports`` under directory ``path``; returns the status string.

    fmt: "json" (canonical, keys sorted) or "csv" (one table per report plus any data tables).
    With ``plots``, decay tables are also written as plot-data files and rendered to PNG.
    """
    if isinstance(reports, VerificationReport):
        reports = [reports]
    if fmt not in ("json", "csv"):
        raise ValueError("format must be 'json' or 'csv'")
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc
    if fmt == "json":
        _write(os.path.join(path, "report.json"), reports_json(reports) + "\n")
    else:
        for rep in reports:
            write_csv(rep, os.path.join(path, f"{rep.experiment}.csv"))
            for tname, table in rep.tables.items():
                write_table_csv(table, os.path.join(path, f"{rep.experiment}.{tname}.csv"))
    if plots:
        from .plotting import render_table

        for rep in reports:
            for tname, table in rep.tables.items():
                if table.get("plot"):
                    base = os.path.join(path, f"{rep.experiment}.{tname}")
                    write_plot_data(table, base + ".dat")
                    render_table(table, base + ".png", title=f"{rep.experiment}: {tname}")
    statuses = {r.status for r in reports}
    if "INVALID-HYPOTHESIS" in statuses:
        return "INVALID-HYPOTHESIS"
    return "FAIL" if "FAIL" in statuses else "PASS"
