"""File formats: legacy VTK output, point and tensor CSV, JSON lines."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .mesh import TetMesh
from .qtensor import biaxiality, eigen, frobenius, to_vec6

VTK_TETRA = 10
TENSOR_COLUMNS = ("q11", "q22", "q33", "q12", "q13", "q23")


def _fmt(v: float) -> str:
    return repr(float(v))


def write_vtk(path, mesh: TetMesh, full_q: np.ndarray, title: str = "Q-tensor field",
              director_gap: float = 1e-8) -> None:
    """Legacy ASCII unstructured grid with point data normQ, biaxiality, director, Q.

    ``full_q`` is the full tensor per vertex.  ``Q`` holds the six Vec6
    components; the director is written as zero where the two leading
    eigenvalues are closer than ``director_gap``.
    """
    es = eigen(full_q)
    director = es.director.copy()
    director[es.values[:, 0] - es.values[:, 1] < director_gap] = 0.0
    norm = frobenius(full_q)
    beta = biaxiality(full_q)
    nv, nt = mesh.n_vertices, mesh.n_tets
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nv} double"]
    lines += [" ".join(_fmt(c) for c in row) for row in mesh.vertices]
    lines.append(f"CELLS {nt} {5 * nt}")
    lines += ["4 " + " ".join(str(int(v)) for v in tet) for tet in mesh.tets]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(VTK_TETRA)] * nt
    lines.append(f"POINT_DATA {nv}")
    lines += ["SCALARS normQ double 1", "LOOKUP_TABLE default"] + [_fmt(v) for v in norm]
    lines += ["SCALARS biaxiality double 1", "LOOKUP_TABLE default"] + [_fmt(v) for v in beta]
    lines.append("VECTORS director double")
    lines += [" ".join(_fmt(c) for c in row) for row in director]
    lines += ["FIELD FieldData 1", f"Q 6 {nv} double"]
    lines += [" ".join(_fmt(c) for c in row) for row in to_vec6(full_q)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_points_csv(path) -> np.ndarray:
    """``x,y,z`` rows; a non-numeric first row is taken as a header."""
    rows = []
    with Path(path).open(newline="") as fh:
        for i, rec in enumerate(csv.reader(fh)):
            rec = [c.strip() for c in rec if c.strip() != ""]
            if not rec or rec[0].startswith("#"):
                continue
            try:
                vals = [float(c) for c in rec[:3]]
            except ValueError:
                if i == 0:
                    continue
                raise ValueError(f"{path}: line {i + 1} is not numeric: {rec}") from None
            if len(vals) != 3:
                raise ValueError(f"{path}: line {i + 1} needs three coordinates")
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, 3)


def write_table_csv(path, header, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def tensor_row(Q: np.ndarray) -> list[float]:
    return [float(v) for v in to_vec6(Q)]


def write_jsonl(path_or_fh, records) -> None:
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    if hasattr(path_or_fh, "write"):
        path_or_fh.write(text)
    else:
        Path(path_or_fh).write_text(text)
