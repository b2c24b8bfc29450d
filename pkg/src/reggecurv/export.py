"""JSON and legacy-ASCII VTK output of functionals and finite element fields."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .spaces import DofVector


def functional_to_json(F, path) -> None:
    data = F.to_dict()
    data["mesh"] = F.space.mesh.to_dict()
    Path(path).write_text(json.dumps(data))


def field_to_json(fe: DofVector, path) -> None:
    fe.save_json(path)


def refinement_pattern(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Reference points and sub-triangles of a uniform ``level``-fold split."""
    pts = [(i / level, j / level) for j in range(level + 1) for i in range(level + 1 - j)]
    index = {}
    for a, (x, y) in enumerate(pts):
        index[(round(x * level), round(y * level))] = a
    cells = []
    for j in range(level):
        for i in range(level - j):
            cells.append((index[i, j], index[i + 1, j], index[i, j + 1]))
            if i + j + 2 <= level:
                cells.append((index[i + 1, j], index[i + 1, j + 1], index[i, j + 1]))
    return np.array(pts, dtype=float), np.array(cells, dtype=np.int64)


def _num(v: float) -> str:
    return f"{float(v):.17g}"


def vtk_text(mesh, fields: Mapping[str, DofVector], level: int = 3) -> str:
    """Unstructured grid with each triangle split ``level`` times per edge.

    Sub-vertices are duplicated per triangle so discontinuous fields are
    shown as they are.  Scalars, 2-vectors and symmetric tensors (stored as
    ``xx, xy, yy``) are written with the matching VTK attribute type.
    """
    ref, cells = refinement_pattern(level)
    J = mesh.jacobians()
    v0 = mesh.vertices[mesh.triangles[:, 0]]
    xy = (v0[:, None, :] + np.einsum("eij,qj->eqi", J, ref)).reshape(-1, 2)
    npts = len(xy)
    nsub = len(ref)
    conn = (cells[None, :, :] + nsub * np.arange(mesh.n_triangles)[:, None, None]).reshape(-1, 3)
    lines = ["# vtk DataFile Version 3.0", "reggecurv field", "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {npts} double"]
    lines += [f"{_num(x)} {_num(y)} 0" for x, y in xy]
    lines.append(f"CELLS {len(conn)} {4 * len(conn)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in conn]
    lines.append(f"CELL_TYPES {len(conn)}")
    lines += ["5"] * len(conn)
    if fields:
        lines.append(f"POINT_DATA {npts}")
    for name, fe in fields.items():
        if fe.space.mesh is not mesh and fe.space.mesh != mesh:
            raise ValueError(f"field {name!r} lives on a different mesh")
        vals = fe.evaluate(ref)[0].reshape(npts, -1)
        label = name.replace(" ", "_")
        if vals.shape[1] == 1:
            lines += [f"SCALARS {label} double 1", "LOOKUP_TABLE default"]
            lines += [_num(v) for v in vals[:, 0]]
        elif vals.shape[1] == 2:
            lines.append(f"VECTORS {label} double")
            lines += [f"{_num(a)} {_num(b)} 0" for a, b in vals]
        else:
            lines.append(f"TENSORS {label} double")
            for a, b, c in vals:
                lines += [f"{_num(a)} {_num(b)} 0", f"{_num(b)} {_num(c)} 0", "0 0 0"]
    return "\n".join(lines) + "\n"


def write_vtk(path, mesh, fields: Mapping[str, DofVector], level: int = 3) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(vtk_text(mesh, fields, level))
