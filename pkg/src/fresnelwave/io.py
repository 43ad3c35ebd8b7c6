"""Serialization: meshes as OBJ plus a CSV sidecar, fields as raw complex64 plus a JSON header, plot CSVs."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .meshing import SurfaceMesh
from .report import jsonable

FLOAT = "%.17g"
SIDECAR_HEADER = ["vertex_id", "weight", "region", "K", "Km"]


def _fmt(x) -> str:
    return FLOAT % float(x)


def _io_error(path, exc):
    return ValidationError(f"{path}: {exc}")


def export_mesh(mesh: SurfaceMesh, path) -> tuple[Path, Path]:
    """Write ``path`` (.obj with v/vn/f records) and ``path`` with suffix .csv (per-vertex data)."""
    obj = Path(path).with_suffix(".obj")
    side = obj.with_suffix(".csv")
    lines = [f"# level {_fmt(mesh.level)}"]
    lines += ["v " + " ".join(_fmt(c) for c in v) for v in mesh.vertices]
    lines += ["vn " + " ".join(_fmt(c) for c in n) for n in mesh.normals]
    lines += ["f " + " ".join(f"{i + 1}//{i + 1}" for i in tri) for tri in mesh.triangles]
    try:
        obj.write_text("\n".join(lines) + "\n")
        with side.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SIDECAR_HEADER)
            for i in range(len(mesh.vertices)):
                w.writerow([i, _fmt(mesh.weights[i]), mesh.regions[i], _fmt(mesh.K[i]), _fmt(mesh.Km[i])])
    except OSError as exc:
        raise _io_error(obj, exc) from exc
    return obj, side


def import_mesh(path) -> SurfaceMesh:
    obj = Path(path).with_suffix(".obj")
    side = obj.with_suffix(".csv")
    verts, normals, faces, level = [], [], [], 0.0
    try:
        text = obj.read_text()
        rows = list(csv.reader(side.open(newline="")))
    except OSError as exc:
        raise _io_error(obj, exc) from exc
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "vn":
            normals.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(x.split("/")[0]) - 1 for x in parts[1:4]])
        elif parts[:2] == ["#", "level"]:
            level = float(parts[2])
    if rows[0] != SIDECAR_HEADER:
        raise ValidationError(f"{side}: unexpected header {rows[0]}")
    body = rows[1:]
    if len(body) != len(verts):
        raise ValidationError(f"{side}: {len(body)} rows for {len(verts)} vertices")
    return SurfaceMesh(
        vertices=np.array(verts, float).reshape(-1, 3),
        triangles=np.array(faces, np.int64).reshape(-1, 3),
        normals=np.array(normals, float).reshape(-1, 3),
        weights=np.array([float(r[1]) for r in body]),
        regions=np.array([r[2] for r in body], dtype=object),
        level=level,
        K=np.array([float(r[3]) for r in body]),
        Km=np.array([float(r[4]) for r in body]),
    )


def _field_paths(path) -> tuple[Path, Path]:
    # append rather than replace, so names like field_delta_0.1 keep their dot
    p = Path(path)
    stem = p.name[: -len(".c64")] if p.name.endswith(".c64") else p.name
    return p.with_name(stem + ".c64"), p.with_name(stem + ".json")


def write_field(path, data: np.ndarray, header: dict | None = None) -> tuple[Path, Path]:
    """Raw little-endian complex64 samples in C order plus a JSON header with shape and metadata."""
    raw, meta = _field_paths(path)
    arr = np.ascontiguousarray(np.asarray(data), dtype="<c8")
    info = {"dtype": "complex64", "byte_order": "little", "order": "C", "shape": list(arr.shape), **(header or {})}
    try:
        arr.tofile(raw)
        meta.write_text(json.dumps(jsonable(info), indent=2, sort_keys=True))
    except OSError as exc:
        raise _io_error(raw, exc) from exc
    return raw, meta


def read_field(path) -> tuple[np.ndarray, dict]:
    raw, meta = _field_paths(path)
    try:
        info = json.loads(meta.read_text())
        arr = np.fromfile(raw, dtype="<c8")
    except (OSError, json.JSONDecodeError) as exc:
        raise _io_error(raw, exc) from exc
    return arr.reshape(info["shape"]), info


def _curve_rows(fit: dict):
    rows = []
    x0 = fit["fit_range"][0]
    for xv, yv in zip(fit.get("x", []), fit.get("y", [])):
        lx = math.log(xv)
        f = fit["intercept"] + fit["slope"] * lx
        spread = fit["half_width"] * abs(lx - math.log(x0))
        rows.append([xv, yv, math.exp(f), math.exp(f - spread), math.exp(f + spread)])
    return rows


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_plotdata(envelope, out_dir) -> list[Path]:
    """Flat CSVs: fits.csv (one row per fitted quantity), one curve CSV per fit, region node tables."""
    env = envelope.to_dict() if hasattr(envelope, "to_dict") else envelope
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    summary = []
    for k, rep in enumerate(env.get("reports", [])):
        tag = f"{k:02d}_{rep['experiment']}"
        for name, fit in rep.get("fits", {}).items():
            summary.append([rep["experiment"], name, fit["slope"], fit["half_width"], fit["fit_range"][0],
                            fit["fit_range"][1], fit["residual"]])
            p = out / f"{tag}_{name}.csv"
            _write_csv(p, ["x", "y", "fit", "lo", "hi"], _curve_rows(fit))
            written.append(p)
        cls = rep.get("info", {}).get("classification")
        if cls:
            exps = rep["info"].get("exponents", {})
            fams = rep["parameters"].get("families", [])
            rows = []
            for node, c in cls.items():
                x, y = node.strip("()").split(",")
                rows.append([float(x), float(y), c] + [exps.get(node, {}).get(f, "") for f in fams])
            p = out / f"{tag}_nodes.csv"
            _write_csv(p, ["inv_p", "inv_q", "classification"] + [f"exponent_{f}" for f in fams], rows)
            written.append(p)
    p = out / "fits.csv"
    _write_csv(p, ["experiment", "quantity", "slope", "half_width", "range_lo", "range_hi", "residual"], summary)
    written.append(p)
    return written
