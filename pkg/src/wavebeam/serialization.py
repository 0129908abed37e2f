"""Text formats for solutions, curves, scans and field samples.

Every real number is written with 17 significant digits in scientific
notation, so binary64 values round-trip exactly and identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import re
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .continuation import BranchCurve
from .model import SolutionPoint, evaluate_field, make_point

__all__ = [
    "fmt",
    "point_to_json",
    "point_from_json",
    "curve_to_csv",
    "curve_to_json",
    "curve_from_csv",
    "curve_from_json",
    "read_curve",
    "scan_to_csv",
    "multipliers_to_json",
    "field_samples",
    "field_to_csv",
    "tree_to_csv",
    "write_text",
]

_EVENT_SEP = ";"


def fmt(x: float) -> str:
    """17 significant digits, scientific notation."""
    return f"{float(x):.16e}"


def _point_fields(p: SolutionPoint) -> str:
    coeffs = ", ".join(fmt(v) for v in p.coeffs.ravel())
    stab = "null" if p.stability is None else json.dumps(p.stability)
    return (f'"nu": {p.nu}, "M": {p.M}, "N": {p.N}, "omega": {fmt(p.omega)}, '
            f'"energy": {fmt(p.energy)}, "residual_norm": {fmt(p.residual_norm)}, '
            f'"coeffs": [{coeffs}], "stability": {stab}')


def point_to_json(p: SolutionPoint) -> str:
    return "{" + _point_fields(p) + "}\n"


def _point_from_obj(obj: dict) -> SolutionPoint:
    try:
        M, N, nu = int(obj["M"]), int(obj["N"]), int(obj["nu"])
        coeffs = np.array(obj["coeffs"], dtype=float)
        omega = float(obj["omega"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed solution object: {exc}") from exc
    if coeffs.size != M * N:
        raise ValueError(f"coeffs has {coeffs.size} entries, expected M*N = {M * N}")
    # energy and residual are recomputed so that a loaded point is self-consistent
    return make_point(coeffs.reshape(M, N), omega, nu, stability=obj.get("stability"))


def point_from_json(text: str) -> SolutionPoint:
    return _point_from_obj(json.loads(text))


def _coeff_names(M: int, N: int) -> list[str]:
    sep = "_" if max(M, N) > 10 else ""
    return [f"u{m}{sep}{n}" for m in range(M) for n in range(N)]


def _events_by_index(curve: BranchCurve) -> dict:
    out: dict = {}
    for i, kind in curve.events:
        out.setdefault(i, []).append(kind)
    return out


def curve_to_csv(curve: BranchCurve, shape: Optional[tuple] = None) -> str:
    """CSV with one row per point; coordinates are the flattened coefficients.

    ``shape`` is only needed for an empty curve.
    """
    if curve.points:
        M, N = curve.points[0].M, curve.points[0].N
    elif shape is not None:
        M, N = shape
    else:
        M, N = 1, 1
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "omega", "energy", "residual_norm", *_coeff_names(M, N), "event"])
    ev = _events_by_index(curve)
    for i, p in enumerate(curve.points):
        w.writerow([i, fmt(p.omega), fmt(p.energy), fmt(p.residual_norm),
                    *(fmt(v) for v in p.coeffs.ravel()), _EVENT_SEP.join(ev.get(i, []))])
    return buf.getvalue()


def curve_to_json(curve: BranchCurve) -> str:
    events = ", ".join(f"[{i}, {json.dumps(k)}]" for i, k in curve.events)
    pts = ",\n    ".join("{" + _point_fields(p) + "}" for p in curve.points)
    return ('{"provenance": ' + json.dumps(curve.provenance) + ', "events": [' + events
            + '],\n  "points": [\n    ' + pts + "\n  ]}\n")


def _parse_coeff_name(name: str) -> tuple:
    m = re.fullmatch(r"u(\d+)_(\d+)", name)
    if m:
        return int(m.group(1)), int(m.group(2))
    m = re.fullmatch(r"u(\d)(\d)", name)
    if m:
        return int(m.group(1)), int(m.group(2))
    raise ValueError(f"unrecognised coefficient column {name!r}")


def curve_from_csv(text: str, nu: int, provenance: str = "") -> BranchCurve:
    """Rebuild a curve from :func:`curve_to_csv` output (``nu`` is not stored)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty CSV input (no header)")
    head = rows[0]
    if head[:4] != ["index", "omega", "energy", "residual_norm"] or head[-1] != "event":
        raise ValueError("CSV header does not describe a branch curve")
    idx = [_parse_coeff_name(h) for h in head[4:-1]]
    if not idx:
        raise ValueError("CSV header lists no coefficients")
    M = max(a for a, _ in idx) + 1
    N = max(b for _, b in idx) + 1
    if len(idx) != M * N:
        raise ValueError("coefficient columns do not form a full grid")
    curve = BranchCurve(provenance=provenance)
    for r in rows[1:]:
        if not r:
            continue
        if len(r) != len(head):
            raise ValueError(f"row {r[0] if r else '?'} has {len(r)} fields, expected {len(head)}")
        c = np.zeros((M, N))
        for (a, b), v in zip(idx, r[4:-1]):
            c[a, b] = float(v)
        i = len(curve.points)
        curve.points.append(make_point(c, float(r[1]), nu))
        for kind in filter(None, r[-1].split(_EVENT_SEP)):
            curve.events.append((i, kind))
    return curve


def curve_from_json(text: str) -> BranchCurve:
    obj = json.loads(text)
    if not isinstance(obj, dict) or "points" not in obj:
        raise ValueError("JSON document does not describe a branch curve")
    pts = [_point_from_obj(p) for p in obj["points"]]
    events = [(int(i), str(k)) for i, k in obj.get("events", [])]
    if any(not 0 <= i < len(pts) for i, _ in events):
        raise ValueError("event index out of range")
    return BranchCurve(pts, events, str(obj.get("provenance", "")))


def read_curve(path, nu: Optional[int] = None) -> BranchCurve:
    """Load a curve from ``.json`` or ``.csv`` (the latter needs ``nu``)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return curve_from_json(text)
    if nu is None:
        raise ValueError("reading a CSV curve requires the equation kind nu")
    return curve_from_csv(text, nu)


def scan_to_csv(curve: BranchCurve, max_devs: Sequence[float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "omega", "energy", "verdict", "max_dev"])
    for i, (p, d) in enumerate(zip(curve.points, max_devs)):
        w.writerow([i, fmt(p.omega), fmt(p.energy), p.stability or "unknown",
                    "nan" if d is None or not np.isfinite(d) else fmt(d)])
    return buf.getvalue()


def multipliers_to_json(all_multipliers: Iterable) -> str:
    lines = []
    for i, lam in enumerate(all_multipliers):
        vals = [] if lam is None else [f"[{fmt(z.real)}, {fmt(z.imag)}]" for z in lam]
        lines.append(f'{{"index": {i}, "multipliers": [' + ", ".join(vals) + "]}")
    return "[\n  " + ",\n  ".join(lines) + "\n]\n" if lines else "[]\n"


def field_samples(point: SolutionPoint, n_tau: int, n_x: int):
    """Field on an ``n_tau x n_x`` node grid covering ``[0, 2 pi] x [0, pi]``.

    A resolution of 1 samples only the left end of an interval.
    """
    if n_tau < 1 or n_x < 1:
        raise ValueError("field resolution must be positive")
    tau = np.linspace(0.0, 2 * np.pi, n_tau) if n_tau > 1 else np.zeros(1)
    x = np.linspace(0.0, np.pi, n_x) if n_x > 1 else np.zeros(1)
    T, X = np.meshgrid(tau, x, indexing="ij")
    return tau, x, np.asarray(evaluate_field(point.coeffs, T, X)).reshape(n_tau, n_x)


def field_to_csv(tau, x, u) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "x", "u"])
    for i, t in enumerate(tau):
        for j, s in enumerate(x):
            w.writerow([fmt(t), fmt(s), fmt(u[i, j])])
    return buf.getvalue()


def tree_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["omega", "energy", "family", "m", "n", "A", "B"])
    for r in rows:
        w.writerow([fmt(r.omega), fmt(r.energy), r.family, r.m, r.n, fmt(r.A), fmt(r.B)])
    return buf.getvalue()


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
