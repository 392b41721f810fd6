"""Legacy VTK ASCII output for meshes and per-element fields.

Only the 1990s-era text format is produced (version 3.0 header, dataset
UNSTRUCTURED_GRID, triangle cell type 5) because every common viewer still
reads it and it diffs cleanly in tests. Complex quantities are written as
separate ``_re`` / ``_im`` scalar arrays next to their magnitude.
"""

from __future__ import annotations

import os

import numpy as np


def _fmt(value: float) -> str:
    return "%.17g" % value


def write_unstructured_grid(path, nodes, triangles, cell_scalars=None,
                            cell_vectors=None, title="emsim output"):
    """Write triangles with optional per-cell data, atomically.

    cell_scalars: mapping name -> (m,) real array (ints allowed).
    cell_vectors: mapping name -> (m, 2) or (m, 3) real array.
    """
    nodes = np.asarray(nodes, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    cell_scalars = dict(cell_scalars or {})
    cell_vectors = dict(cell_vectors or {})
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(nodes)} double"]
    for x, y in nodes:
        lines.append(f"{_fmt(x)} {_fmt(y)} 0")
    lines.append(f"CELLS {len(triangles)} {4 * len(triangles)}")
    for i, j, k in triangles:
        lines.append(f"3 {i} {j} {k}")
    lines.append(f"CELL_TYPES {len(triangles)}")
    lines.extend(["5"] * len(triangles))
    if cell_scalars or cell_vectors:
        lines.append(f"CELL_DATA {len(triangles)}")
    for name, values in cell_scalars.items():
        values = np.asarray(values)
        if len(values) != len(triangles):
            raise ValueError(f"cell array {name!r} has wrong length")
        kind = "int" if np.issubdtype(values.dtype, np.integer) else "double"
        lines.append(f"SCALARS {name} {kind} 1")
        lines.append("LOOKUP_TABLE default")
        if kind == "int":
            lines.extend(str(int(v)) for v in values)
        else:
            lines.extend(_fmt(float(v)) for v in values)
    for name, values in cell_vectors.items():
        values = np.asarray(values, dtype=float)
        if values.shape[0] != len(triangles):
            raise ValueError(f"cell vector array {name!r} has wrong length")
        if values.shape[1] == 2:
            values = np.column_stack([values, np.zeros(len(values))])
        lines.append(f"VECTORS {name} double")
        lines.extend(f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}" for v in values)
    payload = "\n".join(lines) + "\n"
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def mesh_to_vtk(mesh, path, title="emsim mesh"):
    write_unstructured_grid(path, mesh.nodes, mesh.triangles,
                            cell_scalars={"region": mesh.tri_tags},
                            title=title)


def complex_cell_arrays(name: str, values) -> dict:
    """Split a complex per-cell array into _re/_im/_abs real arrays."""
    values = np.asarray(values, dtype=complex)
    return {f"{name}_re": values.real.copy(),
            f"{name}_im": values.imag.copy(),
            f"{name}_abs": np.abs(values)}
