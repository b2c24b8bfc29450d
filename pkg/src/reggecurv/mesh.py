"""Conforming straight-edged triangulations of rectangles.

Conventions used everywhere in the package:

* triangles are stored counterclockwise;
* edge ``i`` of a triangle is opposite its local vertex ``i`` and is
  traversed from local vertex ``i+1`` to ``i+2``;
* every edge carries a global orientation from its lower to its higher
  vertex index;
* ``edge_tris[e] = (plus, minus)`` where ``plus`` traverses ``e`` in the
  global direction along its counterclockwise boundary.  On the boundary the
  missing side is ``-1``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

RECTANGLE_TAGS = ("left", "right", "top", "bottom")


def _readonly(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


class TriMesh:
    """Immutable triangulation with edge orientation and adjacency tables.

    Parameters
    ----------
    vertices : array_like, shape (nv, 2)
    triangles : array_like, shape (nt, 3)
        Vertex indices; must be counterclockwise.
    boundary_tags : dict, optional
        Maps ``(v_a, v_b)`` vertex pairs (any order) of boundary edges to a
        label.  Untagged boundary edges get the label ``""``.
    """

    def __init__(self, vertices, triangles, boundary_tags=None):
        self.vertices = _readonly(vertices, float).reshape(-1, 2)
        self.triangles = _readonly(triangles, np.int64).reshape(-1, 3)
        if np.any(self.signed_areas() <= 0):
            bad = int(np.argmin(self.signed_areas()))
            raise ValueError(f"triangle {bad} is not counterclockwise")
        self._build_edges()
        tags = np.full(self.n_edges, "", dtype=object)
        for (a, b), label in (boundary_tags or {}).items():
            e = self.edge_index.get((min(a, b), max(a, b)))
            if e is None or not self.is_boundary_edge[e]:
                raise ValueError(f"({a}, {b}) is not a boundary edge")
            tags[e] = str(label)
        tags.setflags(write=False)
        self.edge_tags = tags

    # ------------------------------------------------------------ topology
    def _build_edges(self):
        tri = self.triangles
        nt = len(tri)
        loc_a = tri[:, [1, 2, 0]]  # edge i runs from local vertex i+1 ...
        loc_b = tri[:, [2, 0, 1]]  # ... to local vertex i+2
        lo = np.minimum(loc_a, loc_b).ravel()
        hi = np.maximum(loc_a, loc_b).ravel()
        key = np.stack([lo, hi], axis=1)
        edges, inverse = np.unique(key, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        self.edges = _readonly(edges, np.int64)
        self.tri_edges = _readonly(inverse.reshape(nt, 3), np.int64)
        signs = np.where(loc_a < loc_b, 1, -1)
        self.tri_edge_signs = _readonly(signs, np.int64)
        edge_tris = np.full((len(edges), 2), -1, dtype=np.int64)
        tid = np.repeat(np.arange(nt), 3)
        flat_sign = signs.ravel()
        for side, s in ((0, 1), (1, -1)):
            sel = flat_sign == s
            slot = edge_tris[inverse[sel], side]
            if np.any(slot != -1):
                raise ValueError("non-manifold or inconsistently oriented triangulation")
            edge_tris[inverse[sel], side] = tid[sel]
        counts = np.bincount(inverse, minlength=len(edges))
        if np.any(counts > 2):
            raise ValueError("edge shared by more than two triangles")
        self.edge_tris = _readonly(edge_tris, np.int64)
        self.is_boundary_edge = _readonly(counts == 1, bool)
        self.edge_index = {(int(a), int(b)): i for i, (a, b) in enumerate(edges)}
        bverts = np.zeros(len(self.vertices), dtype=bool)
        bverts[edges[self.is_boundary_edge].ravel()] = True
        self.is_boundary_vertex = _readonly(bverts, bool)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def boundary_edges(self, tags=None) -> np.ndarray:
        """Indices of boundary edges, optionally restricted to ``tags``."""
        mask = self.is_boundary_edge.copy()
        if tags is not None:
            mask &= np.isin(self.edge_tags, list(tags))
        return np.flatnonzero(mask)

    def tag_names(self) -> set[str]:
        return {t for t in self.edge_tags[self.is_boundary_edge]}

    # ------------------------------------------------------------ geometry
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def jacobians(self) -> np.ndarray:
        """Affine maps ``x = v0 + J xi``; shape (nt, 2, 2)."""
        p = self.vertices[self.triangles]
        return np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)

    def edge_vectors(self) -> np.ndarray:
        v = self.vertices
        return v[self.edges[:, 1]] - v[self.edges[:, 0]]

    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors(), axis=1)

    def edge_tangents(self) -> np.ndarray:
        """Unit tangents along the global edge orientation."""
        d = self.edge_vectors()
        return d / np.linalg.norm(d, axis=1)[:, None]

    def edge_normals(self) -> np.ndarray:
        """Unit normals ``(-t2, t1)`` of the global tangents (point into ``plus``)."""
        t = self.edge_tangents()
        return np.column_stack([-t[:, 1], t[:, 0]])

    @property
    def h_max(self) -> float:
        return float(self.edge_lengths().max())

    def vertex_triangles(self) -> list[np.ndarray]:
        order = np.argsort(self.triangles.ravel(), kind="stable")
        verts = self.triangles.ravel()[order]
        splits = np.searchsorted(verts, np.arange(1, self.n_vertices))
        return np.split(order // 3, splits)

    def boundary_vertex_edges(self) -> dict[int, tuple[int, int]]:
        """For each boundary vertex the (incoming, outgoing) boundary edges.

        Directions follow the counterclockwise traversal of the domain
        boundary.
        """
        incoming: dict[int, int] = {}
        outgoing: dict[int, int] = {}
        for e in self.boundary_edges():
            plus, minus = self.edge_tris[e]
            a, b = self.edges[e]
            if plus < 0:  # the single triangle traverses e against its orientation
                a, b = b, a
            outgoing[int(a)] = int(e)
            incoming[int(b)] = int(e)
        return {v: (incoming[v], outgoing[v]) for v in sorted(outgoing)}

    def boundary_edge_direction(self, e: int) -> np.ndarray:
        """Unit tangent of boundary edge ``e`` along the counterclockwise traversal."""
        t = self.edge_tangents()[e]
        return t if self.edge_tris[e, 0] >= 0 else -t

    # --------------------------------------------------------------- io
    def to_dict(self) -> dict:
        tags: dict[str, list] = {}
        for e in self.boundary_edges():
            label = self.edge_tags[e]
            if label:
                tags.setdefault(label, []).append([int(v) for v in self.edges[e]])
        return {
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "tags": tags,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TriMesh":
        tags = {}
        for label, pairs in data.get("tags", {}).items():
            for a, b in pairs:
                tags[(int(a), int(b))] = label
        return cls(data["vertices"], data["triangles"], tags)

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load_json(cls, path) -> "TriMesh":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __eq__(self, other):
        if not isinstance(other, TriMesh):
            return NotImplemented
        return (np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.triangles, other.triangles)
                and np.array_equal(self.edge_tags, other.edge_tags))

    __hash__ = None

    def __repr__(self):
        return (f"TriMesh(n_vertices={self.n_vertices}, n_edges={self.n_edges}, "
                f"n_triangles={self.n_triangles}, h_max={self.h_max:.4g})")


def _rectangle_tags(vertices, edges, is_boundary, origin, extent):
    x0, y0 = origin
    x1, y1 = x0 + extent[0], y0 + extent[1]
    tol = 1e-12 * max(abs(extent[0]), abs(extent[1]), 1.0)
    tags = {}
    for e in np.flatnonzero(is_boundary):
        a, b = edges[e]
        pa, pb = vertices[a], vertices[b]
        for label, axis, value in (("left", 0, x0), ("right", 0, x1),
                                   ("bottom", 1, y0), ("top", 1, y1)):
            if abs(pa[axis] - value) <= tol and abs(pb[axis] - value) <= tol:
                tags[(int(a), int(b))] = label
                break
    return tags


def structured_unit_square(n: int, origin=(0.0, 0.0), extent=(1.0, 1.0)) -> TriMesh:
    """Uniform ``n x n`` grid of a rectangle, cells split along the SW-NE diagonal."""
    if n < 1:
        raise ValueError("n must be at least 1")
    xs = origin[0] + extent[0] * np.arange(n + 1) / n
    ys = origin[1] + extent[1] * np.arange(n + 1) / n
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    tris = []
    for j in range(n):
        for i in range(n):
            sw = j * (n + 1) + i
            se, nw = sw + 1, sw + n + 1
            ne = nw + 1
            tris.append((sw, se, ne))
            tris.append((sw, ne, nw))
    bare = TriMesh(vertices, tris)
    tags = _rectangle_tags(vertices, bare.edges, bare.is_boundary_edge, origin, extent)
    return TriMesh(vertices, tris, tags)


def locate_points(m: TriMesh, points, tol: float = 1e-12, chunk: int = 2048):
    """Containing triangle and reference coordinates of each point.

    Points outside the mesh get triangle ``-1`` and NaN coordinates.  Points
    on shared edges go to the lowest-numbered containing triangle.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    J = m.jacobians()
    Jinv = np.linalg.inv(J)
    v0 = m.vertices[m.triangles[:, 0]]
    tri = np.full(len(pts), -1, dtype=np.int64)
    ref = np.full((len(pts), 2), np.nan)
    for start in range(0, len(pts), chunk):
        p = pts[start:start + chunk]
        r = np.einsum("eij,pej->pei", Jinv, p[:, None, :] - v0[None])
        inside = (r[..., 0] >= -tol) & (r[..., 1] >= -tol) & (r.sum(-1) <= 1 + tol)
        hit = inside.any(axis=1)
        first = np.argmax(inside, axis=1)
        idx = np.flatnonzero(hit)
        tri[start + idx] = first[idx]
        ref[start + idx] = r[idx, first[idx]]
    return tri, ref


def _tags_of(m: TriMesh) -> dict:
    return {(int(a), int(b)): m.edge_tags[e]
            for e, (a, b) in enumerate(m.edges) if m.edge_tags[e]}


def grid_spacing(m: TriMesh) -> float:
    """Shortest edge length; the cell size of a structured mesh."""
    return float(m.edge_lengths().min())


def perturb(m: TriMesh, amplitude_fraction: float = 0.25, seed: int = 0,
            max_halvings: int = 8) -> TriMesh:
    """Randomly displace interior vertices by up to ``amplitude_fraction * h``.

    ``h`` is the shortest edge of ``m`` (the grid spacing of a structured
    mesh).  Offsets are drawn once per vertex from a seeded generator.  A move that
    would flip an incident triangle is retried with halved amplitude; after
    ``max_halvings`` failures the vertex stays put.
    """
    if not 0.0 <= amplitude_fraction <= 0.25:
        raise ValueError("amplitude_fraction must lie in [0, 1/4]")
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-1.0, 1.0, size=(m.n_vertices, 2)) * amplitude_fraction * grid_spacing(m)
    verts = m.vertices.copy()
    if amplitude_fraction == 0.0:
        return TriMesh(verts, m.triangles, _tags_of(m))
    tri = m.triangles
    vtris = m.vertex_triangles()
    for v in np.flatnonzero(~m.is_boundary_vertex):
        around = tri[vtris[v]]
        original = verts[v].copy()
        for attempt in range(max_halvings + 1):
            verts[v] = original + offsets[v] * 0.5 ** attempt
            p = verts[around]
            d1 = p[:, 1] - p[:, 0]
            d2 = p[:, 2] - p[:, 0]
            if np.all(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] > 0):
                break
        else:
            verts[v] = original
    return TriMesh(verts, tri, _tags_of(m))


def mesh_sequence(n0: int, levels: int, amplitude: float = 0.25, seed: int = 0,
                  origin=(0.0, 0.0), extent=(1.0, 1.0)) -> list[TriMesh]:
    """Independently perturbed meshes with ``n = n0 * 2**level``."""
    return [perturb(structured_unit_square(n0 * 2 ** level, origin, extent), amplitude, seed + level)
            for level in range(levels)]
