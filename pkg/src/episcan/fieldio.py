"""CSV field files and JSON report files.

A field file has header ``i1,...,id,x1,...,xp`` and one row per lattice
point with 1-based integer indices; rows may come in any order but must
cover the lattice exactly once.  Reals are serialized with shortest
round-trip precision (17 significant digits) and every write is atomic
(temp file then rename).
"""

from __future__ import annotations

import csv
import json
import os
import tempfile

import numpy as np

from .errors import FieldFormatError
from .gram import GaussianWeight, ObservationField, UniformWeight, WeightSpec
from .lattice import LatticeShape


def format_float(x: float) -> str:
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(x))


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_header(header: list[str]) -> tuple[int, int]:
    d = 0
    while d < len(header) and header[d] == f"i{d + 1}":
        d += 1
    p = 0
    while d + p < len(header) and header[d + p] == f"x{p + 1}":
        p += 1
    if d < 1 or p < 1 or d + p != len(header):
        raise FieldFormatError(
            f"malformed header {header!r}; expected i1,...,id,x1,...,xp"
        )
    return d, p


def read_field(path: str) -> ObservationField:
    """Parse a field file into a dense observation field.

    Raises with the offending row number on duplicate points, missing
    points, out-of-range indices or non-finite values.
    """
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise FieldFormatError("empty field file") from None
        d, p = _parse_header([h.strip() for h in header])
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + p:
                raise FieldFormatError(
                    f"row {line_no}: expected {d + p} columns, got {len(row)}"
                )
            try:
                idx = tuple(int(v) for v in row[:d])
            except ValueError:
                raise FieldFormatError(f"row {line_no}: non-integer lattice index") from None
            try:
                vals = tuple(float(v) for v in row[d:])
            except ValueError:
                raise FieldFormatError(f"row {line_no}: non-numeric value") from None
            if any(not np.isfinite(v) for v in vals):
                raise FieldFormatError(f"row {line_no}: non-finite value")
            if any(i < 1 for i in idx):
                raise FieldFormatError(f"row {line_no}: lattice indices are 1-based")
            rows.append((line_no, idx, vals))
    if not rows:
        raise FieldFormatError("field file has no data rows")
    dims = tuple(max(r[1][l] for r in rows) for l in range(d))
    shape = LatticeShape(dims)
    data = np.empty(dims + (p,), dtype=np.float64)
    seen = np.zeros(dims, dtype=bool)
    for line_no, idx, vals in rows:
        pos = tuple(i - 1 for i in idx)
        if seen[pos]:
            raise FieldFormatError(f"row {line_no}: duplicate lattice point {idx}")
        seen[pos] = True
        data[pos] = vals
    if not seen.all():
        missing = tuple(int(i) + 1 for i in np.argwhere(~seen)[0])
        raise FieldFormatError(
            f"missing lattice point {missing}: expected {shape.total} rows "
            f"for lattice {dims}, got {len(rows)}"
        )
    return ObservationField(shape, data)


def write_field(field_obs: ObservationField, path: str) -> None:
    d = field_obs.shape.d
    p = field_obs.p
    header = [f"i{l + 1}" for l in range(d)] + [f"x{j + 1}" for j in range(p)]
    lines = [",".join(header)]
    for pos in np.ndindex(*field_obs.shape.dims):
        idx = [str(i + 1) for i in pos]
        vals = [format_float(v) for v in field_obs.data[pos]]
        lines.append(",".join(idx + vals))
    atomic_write(path, "\n".join(lines) + "\n")


def weight_to_json(weight: WeightSpec | None):
    if weight is None:
        return None
    out = []
    for comp in weight.components:
        if isinstance(comp, GaussianWeight):
            out.append({"kind": "gaussian", "location": comp.location, "scale": comp.scale})
        else:
            out.append({"kind": "uniform", "lower": comp.lower, "upper": comp.upper})
    return out


def weight_from_json(doc) -> WeightSpec | None:
    if doc is None:
        return None
    comps = []
    for item in doc:
        if item["kind"] == "gaussian":
            comps.append(GaussianWeight(item["location"], item["scale"]))
        elif item["kind"] == "uniform":
            comps.append(UniformWeight(item["lower"], item["upper"]))
        else:
            raise FieldFormatError(f"unknown weight kind {item['kind']!r}")
    return WeightSpec(tuple(comps))


def parse_weight_flag(text: str) -> GaussianWeight | UniformWeight:
    """Parse ``gaussian:LOC:SCALE`` or ``uniform:A:B``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise FieldFormatError(f"weight must be kind:par1:par2, got {text!r}")
    kind = parts[0].lower()
    try:
        p1, p2 = float(parts[1]), float(parts[2])
    except ValueError:
        raise FieldFormatError(f"non-numeric weight parameters in {text!r}") from None
    if kind == "gaussian":
        return GaussianWeight(p1, p2)
    if kind == "uniform":
        return UniformWeight(p1, p2)
    raise FieldFormatError(f"weight kind must be gaussian or uniform, got {kind!r}")


def report_to_dict(report) -> dict:
    doc = {
        "statistic": report.statistic,
        "statistic_kind": report.statistic_kind,
        "change_block": {"lo": list(report.change_block.lo),
                         "hi": list(report.change_block.hi)},
        "threshold": report.threshold,
        "alpha": report.alpha,
        "p_value": report.p_value,
        "decision": report.decision,
        "K": report.n_bootstrap,
        "kernel": {"kind": report.kernel.kind, "q": report.kernel.q},
        "mean_estimator": report.mean_estimator,
        "weight": weight_to_json(report.weight),
        "seed": report.seed,
        "runtime_ms": report.runtime_ms,
        "degenerate": report.degenerate,
    }
    if report.bootstrap_sample is not None:
        doc["bootstrap_sample"] = [float(v) for v in report.bootstrap_sample]
    return doc


def write_report(report, path: str) -> None:
    atomic_write(path, json.dumps(report_to_dict(report), indent=2) + "\n")
