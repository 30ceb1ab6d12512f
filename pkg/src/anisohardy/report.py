"""Verification reports and their CSV/JSON serialization."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

PIN_GROWTH = 0.10
CSV_COLUMNS = ["check", "params", "point", "measured", "bound", "ratio", "pass"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list, np.ndarray)):
        return " ".join(_fmt(x) for x in np.asarray(v).reshape(-1).tolist())
    return str(v)


@dataclass
class VerificationReport:
    check: str
    params: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    sup_ratio: float | None = None
    pinned: float | None = None
    slope: float | None = None
    notes: dict = field(default_factory=dict)
    criteria: dict = field(default_factory=dict)

    def add_row(self, point, measured, bound, ratio, passed=True) -> None:
        self.rows.append((point, measured, bound, ratio, bool(passed)))

    def require(self, name: str, ok) -> bool:
        self.criteria[name] = bool(ok)
        return bool(ok)

    @property
    def pin_ok(self) -> bool:
        if self.pinned is None or self.sup_ratio is None:
            return True
        return self.sup_ratio <= self.pinned * (1.0 + PIN_GROWTH)

    @property
    def rows_ok(self) -> bool:
        return all(r[4] for r in self.rows)

    @property
    def verdict(self) -> bool:
        return self.rows_ok and all(self.criteria.values()) and self.pin_ok

    def params_str(self) -> str:
        return ";".join(f"{k}={_fmt(v)}" for k, v in sorted(self.params.items()))

    def csv_rows(self) -> list[list[str]]:
        ps = self.params_str()
        return [[self.check, ps, _fmt(pt), _fmt(m), _fmt(b), _fmt(r), _fmt(ok)]
                for pt, m, b, r, ok in self.rows]

    def summary(self) -> dict:
        return {
            "check": self.check,
            "sup_ratio": _clean(self.sup_ratio),
            "pinned": _clean(self.pinned),
            "slope": _clean(self.slope),
            "verdict": "pass" if self.verdict else "fail",
            "criteria": {k: bool(v) for k, v in sorted(self.criteria.items())},
            "rows_pass": self.rows_ok,
        }

    def __str__(self) -> str:
        return (f"{self.check}: sup_ratio={self.sup_ratio!r} slope={self.slope!r} "
                f"{'pass' if self.verdict else 'fail'} {self.criteria}")


def _clean(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def write_reports(reports, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rep in reports:
            w.writerows(rep.csv_rows())
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump([r.summary() for r in reports], fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_pins(path) -> dict | None:
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        return json.load(fh)


def write_pins(path, reports) -> dict:
    """Create the pin file; never overwrites an existing one."""
    pins = {r.check: _clean(r.sup_ratio) for r in reports if _clean(r.sup_ratio) is not None}
    with open(path, "x") as fh:
        json.dump(pins, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return pins


def reassess(entry: dict, pins: dict | None) -> dict:
    """Recompute a summary entry's verdict against the pins currently on disk."""
    out = dict(entry)
    if pins is not None and entry["check"] in pins:
        out["pinned"] = _clean(pins[entry["check"]])
    sup, pin = out.get("sup_ratio"), out.get("pinned")
    pin_ok = sup is None or pin is None or sup <= pin * (1.0 + PIN_GROWTH)
    intrinsic = all(entry.get("criteria", {}).values()) and entry.get("rows_pass", True)
    out["verdict"] = "pass" if (pin_ok and intrinsic) else "fail"
    return out


def format_table(summary: list[dict]) -> str:
    head = f"{'check':<18} {'sup_ratio':>14} {'pinned':>14} {'slope':>10}  verdict"
    lines = [head, "-" * len(head)]

    def num(v, width, prec):
        return f"{'-':>{width}}" if v is None else f"{v:>{width}.{prec}g}"

    for e in summary:
        lines.append(f"{e['check']:<18} {num(e['sup_ratio'], 14, 6)} {num(e['pinned'], 14, 6)} "
                     f"{num(e['slope'], 10, 4)}  {e['verdict']}")
    return "\n".join(lines)
