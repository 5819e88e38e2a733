"""Nested square-in-square triangulation with a tagged closed interface.

The fluid occupies ``outer_box`` minus ``inner_box``; the solid fills
``inner_box``.  The mesh is a structured grid whose lines pass through every
box edge, so the interface is resolved exactly and shared by both subdomains.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, MeshResolutionError, TopologyError

FLUID = 0
SOLID = 1

INTERIOR = 0
GAMMA_F = 1
GAMMA_S = 2


@dataclass(frozen=True)
class Box:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ConfigurationError(f"degenerate box {self}")

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)])

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def contains(self, p) -> bool:
        return self.x0 < p[0] < self.x1 and self.y0 < p[1] < self.y1


@dataclass(frozen=True)
class GeometryConfig:
    outer_box: Box = field(default_factory=lambda: Box(0.0, 3.0, 0.0, 3.0))
    inner_box: Box = field(default_factory=lambda: Box(1.0, 2.0, 1.0, 2.0))
    refinement_level: int = 0
    base_h: float = 0.5

    def __post_init__(self):
        if self.base_h <= 0:
            raise ConfigurationError("geometry.base_h must be positive")
        if int(self.refinement_level) != self.refinement_level or self.refinement_level < 0:
            raise ConfigurationError("geometry.refinement_level must be a nonnegative integer")
        if min(self.margins) <= 0:
            raise ConfigurationError(
                "geometry.inner_box must lie strictly inside geometry.outer_box")

    @property
    def margins(self) -> tuple[float, float, float, float]:
        o, i = self.outer_box, self.inner_box
        return (i.x0 - o.x0, o.x1 - i.x1, i.y0 - o.y0, o.y1 - i.y1)

    def refined(self, level: int) -> "GeometryConfig":
        return GeometryConfig(self.outer_box, self.inner_box, level, self.base_h)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable conforming triangulation.

    ``edges[k]`` joins two vertices; ``edge_tris[k]`` lists the one or two
    triangles touching it (-1 pads).  Triangle ``t`` owns local edges
    ``(v0,v1), (v1,v2), (v2,v0)`` given by ``tri_edges[t]``.

    The interface chain is stored counter-clockwise around the solid, so the
    left normal of each chain edge points into the solid, i.e. outward from
    the fluid.
    """

    config: GeometryConfig
    vertices: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    edge_tris: np.ndarray
    edge_tags: np.ndarray
    chain_vertices: np.ndarray
    chain_edges: np.ndarray
    chain_normals: np.ndarray
    chain_arclength: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def perimeter(self) -> float:
        return float(self.chain_lengths.sum())

    @property
    def chain_lengths(self) -> np.ndarray:
        a = self.vertices[self.chain_vertices]
        b = self.vertices[np.roll(self.chain_vertices, -1)]
        return np.linalg.norm(b - a, axis=1)

    @property
    def chain_tangents(self) -> np.ndarray:
        a = self.vertices[self.chain_vertices]
        b = self.vertices[np.roll(self.chain_vertices, -1)]
        return b - a

    def edge_solid_fluid(self, k: int) -> tuple[int, int]:
        """Return ``(solid_tri, fluid_tri)`` sharing interface edge ``k``."""
        t0, t1 = self.edge_tris[k]
        if self.tags[t0] == SOLID:
            return int(t0), int(t1)
        return int(t1), int(t0)

    def stats(self) -> dict:
        return {
            "vertices": self.n_vertices,
            "triangles": self.n_triangles,
            "fluid_triangles": int((self.tags == FLUID).sum()),
            "solid_triangles": int((self.tags == SOLID).sum()),
            "edges": self.n_edges,
            "interface_edges": len(self.chain_edges),
            "outer_boundary_edges": int((self.edge_tags == GAMMA_F).sum()),
            "perimeter": self.perimeter,
        }


def _axis_lines(a0, a1, b0, b1, base_h, level):
    lines = []
    for lo, hi in ((a0, b0), (b0, b1), (b1, a1)):
        n = max(1, math.ceil((hi - lo) / base_h - 1e-9)) * 2**level
        lines.append(np.linspace(lo, hi, n + 1)[:-1])
    lines.append(np.array([a1]))
    return np.concatenate(lines)


def build_nested_mesh(config: GeometryConfig) -> Mesh:
    o, i = config.outer_box, config.inner_box
    for margin in config.margins:
        if math.ceil(margin / config.base_h - 1e-9) < 2:
            raise MeshResolutionError(
                f"base_h={config.base_h} leaves fewer than two elements across a "
                f"fluid gap of width {margin}")

    xs = _axis_lines(o.x0, o.x1, i.x0, i.x1, config.base_h, config.refinement_level)
    ys = _axis_lines(o.y0, o.y1, i.y0, i.y1, config.base_h, config.refinement_level)
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(ix, iy):
        return iy * nx + ix

    tris, tags = [], []
    for iy in range(ny - 1):
        for ix in range(nx - 1):
            p00, p10 = vid(ix, iy), vid(ix + 1, iy)
            p01, p11 = vid(ix, iy + 1), vid(ix + 1, iy + 1)
            mid = 0.5 * (vertices[p00] + vertices[p11])
            tag = SOLID if i.contains(mid) else FLUID
            # diagonal through the cell corner nearest the subdomain center;
            # keeps every fluid triangle off two outer boundary edges
            center = i.center if tag == SOLID else o.center
            quad = (p00, p10, p11, p01)
            d = [np.linalg.norm(vertices[q] - center) for q in quad]
            if np.argmin(d) in (0, 2):
                tris += [(p00, p10, p11), (p00, p11, p01)]
            else:
                tris += [(p00, p10, p01), (p10, p11, p01)]
            tags += [tag, tag]
    triangles = np.array(tris, dtype=np.int64)
    tags = np.array(tags, dtype=np.int64)

    local = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 3, 2)
    keys = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    tri_edges = inverse.reshape(-1, 3)

    edge_tris = -np.ones((len(edges), 2), dtype=np.int64)
    fill = np.zeros(len(edges), dtype=np.int64)
    for t, row in enumerate(tri_edges):
        for e in row:
            edge_tris[e, fill[e]] = t
            fill[e] += 1

    edge_tags = np.full(len(edges), INTERIOR, dtype=np.int64)
    edge_tags[fill == 1] = GAMMA_F
    both = fill == 2
    mixed = both & (tags[edge_tris[:, 0]] != tags[np.maximum(edge_tris[:, 1], 0)])
    edge_tags[mixed] = GAMMA_S

    chain_v, chain_e, normals, s = _walk_interface(vertices, triangles, tags, edges,
                                                   edge_tris, edge_tags)
    return Mesh(
        config=config,
        vertices=_freeze(vertices),
        triangles=_freeze(triangles),
        tags=_freeze(tags),
        edges=_freeze(edges),
        tri_edges=_freeze(tri_edges),
        edge_tris=_freeze(edge_tris),
        edge_tags=_freeze(edge_tags),
        chain_vertices=_freeze(chain_v),
        chain_edges=_freeze(chain_e),
        chain_normals=_freeze(normals),
        chain_arclength=_freeze(s),
    )


def _walk_interface(vertices, triangles, tags, edges, edge_tris, edge_tags):
    iface = np.flatnonzero(edge_tags == GAMMA_S)
    if len(iface) < 3:
        raise TopologyError("interface has fewer than three edges")
    adjacency: dict[int, list[tuple[int, int]]] = {}
    for k in iface:
        a, b = edges[k]
        adjacency.setdefault(int(a), []).append((int(b), int(k)))
        adjacency.setdefault(int(b), []).append((int(a), int(k)))
    if any(len(v) != 2 for v in adjacency.values()):
        raise TopologyError("interface vertex with degree other than two")

    start = min(adjacency, key=lambda v: (vertices[v].sum(), vertices[v][0]))

    def solid_on_left(a, b, k):
        t0, t1 = edge_tris[k]
        ts = t0 if tags[t0] == SOLID else t1
        c = vertices[triangles[ts]].mean(axis=0)
        t = vertices[b] - vertices[a]
        return np.dot(np.array([-t[1], t[0]]), c - vertices[a]) > 0

    nxt, k0 = adjacency[start][0]
    if not solid_on_left(start, nxt, k0):
        nxt, k0 = adjacency[start][1]

    chain_v, chain_e = [start], [k0]
    prev, cur = start, nxt
    while cur != start:
        chain_v.append(cur)
        options = [(w, k) for w, k in adjacency[cur] if k != chain_e[-1]]
        w, k = options[0]
        chain_e.append(k)
        prev, cur = cur, w
        if len(chain_v) > len(iface):
            raise TopologyError("interface walk did not close")
    if len(chain_e) != len(iface):
        raise TopologyError("interface consists of more than one cycle")

    chain_v = np.array(chain_v, dtype=np.int64)
    chain_e = np.array(chain_e, dtype=np.int64)
    tang = vertices[np.roll(chain_v, -1)] - vertices[chain_v]
    lengths = np.linalg.norm(tang, axis=1)
    normals = np.column_stack([-tang[:, 1], tang[:, 0]]) / lengths[:, None]
    s = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    return chain_v, chain_e, normals, s


@dataclass(frozen=True)
class InterfaceChart:
    """Periodic arclength chart of the interface; ``s`` in ``[0, perimeter)``."""

    vertex_s: np.ndarray
    perimeter: float
    corners: np.ndarray

    def wrap(self, s):
        return np.mod(s, self.perimeter)


def interface_chart(mesh: Mesh, tol: float = 1e-12) -> InterfaceChart:
    """Arclength chart and corner table of the closed interface chain.

    Corner continuity of the thin displacement and flux matching between faces
    are carried by the C0 periodic 1D element space built on this chart.
    """
    cv = mesh.chain_vertices
    if len(np.unique(cv)) != len(cv):
        raise TopologyError("interface chain revisits a vertex")
    t = mesh.chain_tangents
    closure = np.abs(t.sum(axis=0)).max()
    if closure > tol * max(1.0, mesh.perimeter):
        raise TopologyError(f"interface chain does not close (gap {closure:.3e})")
    t_prev = np.roll(t, 1, axis=0)
    cross = t_prev[:, 0] * t[:, 1] - t_prev[:, 1] * t[:, 0]
    is_corner = np.abs(cross) > tol * (np.linalg.norm(t, axis=1) * np.linalg.norm(t_prev, axis=1))
    return InterfaceChart(
        vertex_s=mesh.chain_arclength.copy(),
        perimeter=mesh.perimeter,
        corners=mesh.chain_arclength[is_corner].copy(),
    )
