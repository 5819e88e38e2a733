"""Legacy VTK (ASCII 2.0) export of the mesh and vertex fields."""
from __future__ import annotations

import numpy as np

from .fem import Discretization, StateVector
from .geometry import Mesh

VTK_TRIANGLE = 5


def _fmt(x) -> str:
    return repr(float(x))


def write_vtk(path, mesh: Mesh, point_data: dict | None = None, title: str = "multifsi") -> None:
    """Write linear triangles with subdomain tags and optional vertex fields.

    ``point_data`` maps names to arrays of shape (n_vertices,) for scalars or
    (n_vertices, 2) for vectors (padded with a zero z component).
    """
    nv, nt = mesh.n_vertices, mesh.n_triangles
    lines = ["# vtk DataFile Version 2.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
    lines += [f"{_fmt(x)} {_fmt(y)} 0.0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(VTK_TRIANGLE)] * nt
    lines += [f"CELL_DATA {nt}", "SCALARS subdomain int 1", "LOOKUP_TABLE default"]
    lines += [str(int(t)) for t in mesh.tags]
    if point_data:
        lines.append(f"POINT_DATA {nv}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape == (nv,):
                lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                lines += [_fmt(v) for v in values]
            elif values.shape == (nv, 2):
                lines.append(f"VECTORS {name} double")
                lines += [f"{_fmt(a)} {_fmt(b)} 0.0" for a, b in values]
            else:
                raise ValueError(f"field {name!r} has shape {values.shape}, expected ({nv},) or ({nv}, 2)")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def vertex_fields(disc: Discretization, state: StateVector, pressure=None, extra: dict | None = None) -> dict:
    """Restrict the P2 state to mesh vertices; fields vanish outside their subdomain."""
    sp_ = disc.spaces
    nv = disc.mesh.n_vertices
    out = {}

    def vec(coeffs, g2local):
        v = np.zeros((nv, 2))
        local = g2local[:nv]
        have = local >= 0
        v[have] = coeffs.reshape(-1, 2)[local[have]]
        return v

    out["velocity"] = vec(state.u, sp_.g2f)
    out["displacement"] = vec(state.w, sp_.g2s)
    out["solid_velocity"] = vec(state.wt, sp_.g2s)
    if pressure is not None:
        out["pressure"] = pressure_on_vertices(disc, pressure)
    for name, values in (extra or {}).items():
        out[name] = pressure_on_vertices(disc, values)
    return out


def pressure_on_vertices(disc: Discretization, q: np.ndarray) -> np.ndarray:
    sp_ = disc.spaces
    p = np.zeros(disc.mesh.n_vertices)
    p[sp_.pressure_vertices] = q
    return p
