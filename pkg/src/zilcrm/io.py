"""Dataset CSV reading/writing and ingestion-time angle transforms.

Layout: one row per (subject, occasion)::

    subject_id,occasion,theta_y,x_<name>...,theta_x,v_<name>...[,theta_v]

Subject-level fields are repeated on every row of the subject and must
agree.  Angles are radians in (-pi, pi]; observed zeros are exactly 0.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .circular_core import TWO_PI, wrap
from .model import Dataset, ValidationError

__all__ = ["transform_angles", "read_dataset", "write_dataset", "dataset_to_csv"]


def transform_angles(values, degrees: bool = False, axis_times_4: bool = False) -> np.ndarray:
    """Convert raw angles to radians on (-pi, pi], keeping exact zeros.

    ``axis_times_4`` maps an axial measurement (period 180 degrees) to a full
    circle by multiplying by 4 modulo one turn.
    """
    a = np.asarray(values, dtype=float)
    if not (degrees or axis_times_4):
        return a.copy()
    zero = a == 0.0
    if degrees:
        a = np.deg2rad(a)
    if axis_times_4:
        a = np.mod(4.0 * a, TWO_PI)
    out = np.asarray(wrap(a), dtype=float) if a.size else a
    out = np.where(zero, 0.0, out)
    # -pi is not in the half-open range
    return np.where(out <= -math.pi, math.pi, out)


def _parse_float(text: str, line: int, col: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValidationError([f"line {line}: column {col!r} value {text!r} is not a number"]) from None


def read_dataset(path, degrees: bool = False, axis_times_4: bool = False) -> Dataset:
    """Read a dataset CSV, checking schema and per-subject consistency."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError([f"{path}: empty file"]) from None
        rows = [(k + 2, r) for k, r in enumerate(reader) if any(c.strip() for c in r)]
    required = ["subject_id", "occasion", "theta_y", "theta_x"]
    missing = [c for c in required if c not in header]
    if missing:
        raise ValidationError([f"line 1: missing columns {missing}"])
    x_cols = [c for c in header if c.startswith("x_")]
    v_cols = [c for c in header if c.startswith("v_")]
    has_v = "theta_v" in header
    pos = {c: i for i, c in enumerate(header)}
    problems = []
    subjects: dict[str, dict] = {}
    records = []
    for line, r in rows:
        if len(r) != len(header):
            problems.append(f"line {line}: expected {len(header)} fields, found {len(r)}")
            continue
        try:
            sid = r[pos["subject_id"]].strip()
            occ = int(r[pos["occasion"]])
            ty = _parse_float(r[pos["theta_y"]], line, "theta_y")
            xs = [_parse_float(r[pos[c]], line, c) for c in x_cols]
            tx = _parse_float(r[pos["theta_x"]], line, "theta_x")
            vs = [_parse_float(r[pos[c]], line, c) for c in v_cols]
            tv = _parse_float(r[pos["theta_v"]], line, "theta_v") if has_v else None
        except ValidationError as exc:
            problems.extend(exc.issues)
            continue
        except ValueError:
            problems.append(f"line {line}: occasion {r[pos['occasion']]!r} is not an integer")
            continue
        subj = (tx, tuple(vs), tv)
        if sid in subjects:
            if subjects[sid]["fields"] != subj:
                problems.append(f"line {line}: subject {sid} has inconsistent subject-level fields")
            if occ in subjects[sid]["occ"]:
                problems.append(f"line {line}: subject {sid} repeats occasion {occ}")
            subjects[sid]["occ"].add(occ)
        else:
            subjects[sid] = {"fields": subj, "occ": {occ}, "order": len(subjects)}
        records.append((sid, occ, ty, xs))
    if problems:
        raise ValidationError(problems)
    if not records:
        raise ValidationError([f"{path}: no data rows"])

    order = sorted(subjects, key=lambda s: subjects[s]["order"])
    index = {s: i for i, s in enumerate(order)}
    records.sort(key=lambda rec: (index[rec[0]], rec[1]))
    ty = transform_angles([rec[2] for rec in records], degrees, axis_times_4)
    tx = transform_angles([subjects[s]["fields"][0] for s in order], degrees, axis_times_4)
    tv = None
    if has_v:
        tv = transform_angles([subjects[s]["fields"][2] for s in order], degrees, axis_times_4)
    return Dataset(
        subject_ids=np.array(order),
        subject_index=np.array([index[rec[0]] for rec in records], dtype=np.int64),
        occasion=np.array([rec[1] for rec in records], dtype=np.int64),
        theta_y=ty,
        x=np.array([rec[3] for rec in records], dtype=float).reshape(len(records), len(x_cols)),
        theta_x=tx,
        v=np.array([subjects[s]["fields"][1] for s in order], dtype=float).reshape(len(order),
                                                                                  len(v_cols)),
        theta_v=tv,
        x_names=tuple(c[2:] for c in x_cols),
        v_names=tuple(c[2:] for c in v_cols),
    )


def dataset_to_csv(d: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = (["subject_id", "occasion", "theta_y"] + [f"x_{n}" for n in d.x_names]
              + ["theta_x"] + [f"v_{n}" for n in d.v_names])
    if d.has_theta_v:
        header.append("theta_v")
    w.writerow(header)
    for r in range(d.n_obs):
        i = d.subject_index[r]
        row = [str(d.subject_ids[i]), int(d.occasion[r]), repr(float(d.theta_y[r]))]
        row += [repr(float(v)) for v in d.x[r]]
        row.append(repr(float(d.theta_x[i])))
        row += [repr(float(v)) for v in d.v[i]]
        if d.has_theta_v:
            row.append(repr(float(d.theta_v[i])))
        w.writerow(row)
    return buf.getvalue()


def write_dataset(d: Dataset, path) -> Path:
    path = Path(path)
    path.write_text(dataset_to_csv(d))
    return path
