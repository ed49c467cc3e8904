"""Mesh interchange (text and JSON) and tabular output.

Text format, one record per line (``#`` starts a comment)::

    v <id> <x> <y>
    f <id1> <id2> <id3> [s1x s1y s2x s2y s3x s3y]
    boundary <id> <id> ...          (disk only)
    periods <x1> <y1> <x2> <y2>     (torus only)

The optional six integers on a face line are the period shifts of its corners;
without them they are recovered by the minimal-image rule.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .mesh import Embedding, Triangulation


def fmt(x) -> str:
    """Float with 17 significant digits (lossless for doubles)."""
    return f"{float(x):.17g}"


def read_mesh(text: str):
    ids, xy, faces, shifts = [], [], [], []
    boundary = periods = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        tag, rest = line[0], line[1:]
        try:
            if tag == "v":
                ids.append(int(rest[0]))
                xy.append((float(rest[1]), float(rest[2])))
            elif tag == "f":
                faces.append([int(r) for r in rest[:3]])
                if len(rest) == 9:
                    shifts.append([int(r) for r in rest[3:]])
                elif len(rest) != 3:
                    raise ValueError("face needs 3 ids (optionally 6 shifts)")
            elif tag == "boundary":
                boundary = [int(r) for r in rest]
            elif tag == "periods":
                periods = np.array([float(r) for r in rest]).reshape(2, 2)
            else:
                raise ValueError(f"unknown record {tag!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"mesh line {lineno}: {exc}") from None
    return _assemble(ids, xy, faces, boundary, periods, shifts)


def _assemble(ids, xy, faces, boundary, periods, shifts):
    index = {v: k for k, v in enumerate(ids)}
    if len(index) != len(ids):
        raise ValueError("duplicate vertex id")
    try:
        f = np.array([[index[v] for v in face] for face in faces], dtype=np.int64).reshape(-1, 3)
        b = None if boundary is None else np.array([index[v] for v in boundary], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"face or boundary references unknown vertex {exc.args[0]}") from None
    if periods is not None and boundary is not None:
        raise ValueError("a mesh cannot have both periods and a boundary")
    topology = "torus" if periods is not None else "disk"
    t = Triangulation(f, len(ids), topology, b)
    sh = None
    if shifts:
        if len(shifts) != len(faces):
            raise ValueError("either all faces or none carry shifts")
        sh = np.array(shifts, dtype=np.int64).reshape(-1, 3, 2)
    return t, Embedding(np.array(xy, dtype=float).reshape(-1, 2), periods, sh)


def write_mesh(t: Triangulation, e: Embedding, with_shifts: bool = False) -> str:
    lines = [f"v {k} {fmt(x)} {fmt(y)}" for k, (x, y) in enumerate(e.coords)]
    sh = e.with_shifts(t).shifts if (with_shifts and e.periods is not None) else None
    for k, face in enumerate(t.faces):
        rec = "f " + " ".join(map(str, face))
        if sh is not None:
            rec += " " + " ".join(map(str, sh[k].reshape(-1)))
        lines.append(rec)
    if t.topology == "disk" and t.boundary is not None:
        lines.append("boundary " + " ".join(map(str, t.boundary)))
    if e.periods is not None:
        lines.append("periods " + " ".join(fmt(x) for x in e.periods.reshape(-1)))
    return "\n".join(lines) + "\n"


def mesh_to_json(t: Triangulation, e: Embedding) -> dict:
    doc = {
        "topology": t.topology,
        "vertices": [[k, float(x), float(y)] for k, (x, y) in enumerate(e.coords)],
        "faces": t.faces.tolist(),
    }
    if t.topology == "disk" and t.boundary is not None:
        doc["boundary"] = t.boundary.tolist()
    if e.periods is not None:
        doc["periods"] = e.periods.reshape(-1).tolist()
        doc["shifts"] = e.with_shifts(t).shifts.reshape(len(t.faces), 6).tolist()
    return doc


def mesh_from_json(doc: dict):
    verts = doc["vertices"]
    periods = doc.get("periods")
    return _assemble(
        [int(v[0]) for v in verts],
        [(float(v[1]), float(v[2])) for v in verts],
        doc["faces"],
        doc.get("boundary"),
        None if periods is None else np.array(periods, dtype=float).reshape(2, 2),
        doc.get("shifts") or [],
    )


def load_mesh(path) -> tuple:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return mesh_from_json(json.loads(text))
    return read_mesh(text)


def save_mesh(path, t: Triangulation, e: Embedding) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(mesh_to_json(t, e), indent=1) + "\n")
    else:
        path.write_text(write_mesh(t, e, with_shifts=e.periods is not None))


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return fmt(x)
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def dumps_json(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True)
