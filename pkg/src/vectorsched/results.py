"""CSV and JSON writers for run outputs, with schemas for every JSON result."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

__all__ = [
    "RESULT_SCHEMAS",
    "write_json",
    "read_json",
    "write_csv",
    "trajectory_rows",
    "validate_result",
]

_num = {"type": "number"}
_num_or_null = {"type": ["number", "null"]}
_nums = {"type": "array", "items": _num}


def _obj(props: dict) -> dict:
    return {"type": "object", "properties": props, "required": list(props), "additionalProperties": False}


_summary = _obj({"F": _num, "mean_daily_r0": _num, "peak_r0": _num, "peak_t": _num})
_restart = _obj({
    "init": _nums,
    "final_timings": _nums,
    "final_F": _num_or_null,
    "iters": {"type": "integer"},
    "converged": {"type": "boolean"},
    "stop_reason": {"type": "string"},
})
_totals = _obj({s: _num for s in "ELPA"})

RESULT_SCHEMAS = {
    "summary": _summary,
    "gradcheck": _obj({
        "eps_days": _num,
        "threshold": _num,
        "max_rel_err": _num,
        "passed": {"type": "boolean"},
        "F": _num,
        "parameters": {"type": "array", "items": _obj({
            "index": {"type": "integer"},
            "kind": {"type": "string"},
            "timing": _num,
            "adjoint": _num,
            "finite_diff": _num,
            "rel_err": _num,
        })},
    }),
    "optimization": _obj({
        "best_timings": _nums,
        "best_F": _num,
        "best_restart": {"type": "integer"},
        "trace": _nums,
        "restarts": {"type": "array", "items": _restart},
        "summary": _summary,
    }),
    "closed_loop": _obj({
        "executed_timings": _nums,
        "commit_epochs": {"type": "array", "items": {"type": "integer"}},
        "realized_F": _num,
        "open_loop": {"oneOf": [{"type": "null"}, _obj({"timings": _nums, "planned_F": _num, "realized_F": _num})]},
        "epochs": {"type": "array", "items": _obj({
            "index": {"type": "integer"},
            "t": _num,
            "observation": {"oneOf": [{"type": "null"}, _obj({"t": _num, **{s: _num for s in "ELPA"}})]},
            "reinit_totals": _totals,
            "plan": _nums,
            "planned_F": _num_or_null,
            "committed": {"type": "array", "items": {"type": "integer"}},
            "status": {"type": "string"},
        })},
    }),
}


def _clean(obj):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def validate_result(doc: dict, kind: str) -> None:
    jsonschema.validate(doc, RESULT_SCHEMAS[kind])


def write_json(path: Path, doc: dict, kind: str) -> dict:
    """Validate ``doc`` against the ``kind`` schema and write it."""
    doc = _clean(doc)
    validate_result(doc, kind)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return doc


def read_json(path: Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_csv(path: Path, header: list[str], rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def trajectory_rows(traj, curve):
    """Rows of ``t,E_total,L_total,P_total,A_total,R0``."""
    tot = traj.totals()
    return zip(traj.times, tot["E"], tot["L"], tot["P"], tot["A"], curve.r0)
