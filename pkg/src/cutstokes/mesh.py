"""Uniform (optionally jittered) conforming triangulations of a box with full adjacency.

The background mesh is a criss-cross split of an n-by-n rectangle grid: every
grid cell is divided into two triangles along the same diagonal.  Cut-position
sweeps move the whole mesh relative to a fixed implicit boundary by passing a
`shift`, so the same geometry is sampled at arbitrary relative positions.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


class MeshError(Exception):
    """Raised when a triangulation violates its construction contract."""


@dataclass(frozen=True)
class Patch:
    """A set of triangles grown from a seed set (vertex neighborhood patch)."""

    seed: frozenset
    members: frozenset


@dataclass
class Mesh:
    """Conforming 2D triangulation with edge/vertex adjacency.

    vertices   : (nv, 2) float array
    triangles  : (nt, 3) int array, counterclockwise
    edges      : (ne, 2) int array, canonical (min, max) vertex order
    edge_tris  : (ne, 2) int array of incident triangles, -1 when absent
    tri_edges  : (nt, 3) int array, edge index opposite local vertex k
    edge_normals : (ne, 2) unit normal pointing away from edge_tris[e, 0]
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray = field(default=None)
    edge_tris: np.ndarray = field(default=None)
    tri_edges: np.ndarray = field(default=None)
    edge_normals: np.ndarray = field(default=None)
    h_tri: np.ndarray = field(default=None)
    rho_tri: np.ndarray = field(default=None)
    h: float = 0.0
    h_min: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        if self.edges is None:
            self._build_topology()
        self._vertex_tris = None

    # ------------------------------------------------------------------
    def _build_topology(self):
        tris = self.triangles
        nt = len(tris)
        areas = signed_areas(self.vertices, tris)
        bad = np.nonzero(areas <= 0.0)[0]
        if bad.size:
            raise MeshError(f"triangle {bad[0]} has non-positive area {areas[bad[0]]:.3e}")

        # canonical edge list: local edge k is opposite local vertex k
        pairs = np.stack(
            [tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]], axis=1
        ).reshape(-1, 2)
        pairs_sorted = np.sort(pairs, axis=1)
        edges, inverse = np.unique(pairs_sorted, axis=0, return_inverse=True)
        self.edges = edges
        self.tri_edges = inverse.reshape(nt, 3)

        ne = len(edges)
        edge_tris = np.full((ne, 2), -1, dtype=np.int64)
        for t in range(nt):
            for k in range(3):
                e = self.tri_edges[t, k]
                if edge_tris[e, 0] < 0:
                    edge_tris[e, 0] = t
                elif edge_tris[e, 1] < 0:
                    edge_tris[e, 1] = t
                else:
                    raise MeshError(f"edge {e} shared by more than two triangles")
        # lower-indexed incident triangle first
        both = edge_tris[:, 1] >= 0
        swap = both & (edge_tris[:, 0] > edge_tris[:, 1])
        edge_tris[swap] = edge_tris[swap][:, ::-1]
        self.edge_tris = edge_tris

        # unit normal per edge, pointing away from edge_tris[e, 0]
        tang = self.vertices[edges[:, 1]] - self.vertices[edges[:, 0]]
        lengths = np.linalg.norm(tang, axis=1)
        if np.any(lengths == 0.0):
            raise MeshError("zero-length edge")
        normals = np.stack([tang[:, 1], -tang[:, 0]], axis=1) / lengths[:, None]
        mid = 0.5 * (self.vertices[edges[:, 0]] + self.vertices[edges[:, 1]])
        cent0 = self.vertices[tris[edge_tris[:, 0]]].mean(axis=1)
        flip = np.einsum("ij,ij->i", normals, mid - cent0) < 0.0
        normals[flip] *= -1.0
        self.edge_normals = normals

        edge_len = lengths
        tri_edge_len = edge_len[self.tri_edges]
        self.h_tri = tri_edge_len.max(axis=1)
        perim = tri_edge_len.sum(axis=1)
        self.rho_tri = 2.0 * areas / perim
        self.h = float(self.h_tri.max())
        self.h_min = float(self.h_tri.min())
        self.kappa = float((self.h_tri / self.rho_tri).max())
        self._areas = areas
        self._edge_lengths = edge_len

    # ------------------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def areas(self):
        return self._areas

    @property
    def edge_lengths(self):
        return self._edge_lengths

    def vertex_tris(self, v):
        """Triangles incident to vertex v."""
        if self._vertex_tris is None:
            lists = [[] for _ in range(self.n_vertices)]
            for t, tri in enumerate(self.triangles):
                for v_ in tri:
                    lists[v_].append(t)
            self._vertex_tris = [np.asarray(l, dtype=np.int64) for l in lists]
        return self._vertex_tris[v]

    def tri_neighbors(self, t):
        """Edge-adjacent triangles of t (only those that exist)."""
        out = []
        for e in self.tri_edges[t]:
            a, b = self.edge_tris[e]
            other = b if a == t else a
            if other >= 0:
                out.append(int(other))
        return out

    def tri_coords(self, t):
        return self.vertices[self.triangles[t]]

    # ------------------------------------------------------------------
    def save_text(self, path):
        """Debug dump: header `ntri nvert nedge`, then vertices, triangles, edges."""
        with open(path, "w") as fh:
            fh.write(f"{self.n_triangles} {self.n_vertices} {self.n_edges}\n")
            for v in self.vertices:
                fh.write(f"{v[0]!r} {v[1]!r}\n")
            for t in self.triangles:
                fh.write(f"{t[0]} {t[1]} {t[2]}\n")
            for e, (a, b) in enumerate(self.edges):
                t0, t1 = self.edge_tris[e]
                fh.write(f"{a} {b} {t0} {t1}\n")


def load_text(path):
    """Read a mesh written by Mesh.save_text; topology is rebuilt and validated."""
    with open(path) as fh:
        nt, nv, ne = map(int, fh.readline().split())
        verts = np.array([list(map(float, fh.readline().split())) for _ in range(nv)])
        tris = np.array([list(map(int, fh.readline().split())) for _ in range(nt)])
        mesh = Mesh(verts, tris)
        if mesh.n_edges != ne:
            raise MeshError(f"edge count mismatch: file says {ne}, rebuilt {mesh.n_edges}")
    return mesh


def signed_areas(vertices, triangles):
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def build_uniform_mesh(box, n, shift=(0.0, 0.0), perturbation=0.0, seed=0):
    """Criss-cross triangulation of an axis-aligned box, shifted and jittered.

    box : ((x0, y0), (x1, y1)) or flat (x0, y0, x1, y1)
    n   : subdivisions per axis (>= 2)
    shift : rigid translation of all vertices
    perturbation : relative vertex jitter in [0, 0.25); jitter amplitude is
        perturbation * (cell size) per coordinate, drawn deterministically
        from `seed`.
    """
    box = np.asarray(box, dtype=float).reshape(2, 2)
    (x0, y0), (x1, y1) = box
    if n < 2:
        raise MeshError(f"n must be >= 2, got {n}")
    if not (0.0 <= perturbation < 0.25):
        raise MeshError(f"perturbation must lie in [0, 0.25), got {perturbation}")
    if x1 <= x0 or y1 <= y0:
        raise MeshError("box must have positive extents")

    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)
    verts += np.asarray(shift, dtype=float)

    if perturbation > 0.0:
        rng = np.random.default_rng(seed)
        cell = np.array([(x1 - x0) / n, (y1 - y0) / n])
        verts = verts + rng.uniform(-1.0, 1.0, size=verts.shape) * perturbation * cell

    def vid(i, j):
        return i * (n + 1) + j

    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    k = 0
    for i in range(n):
        for j in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris[k] = (v00, v10, v11)
            tris[k + 1] = (v00, v11, v01)
            k += 2

    return Mesh(verts, tris)


def vertex_patch(mesh, seed):
    """omega(seed): all triangles sharing at least one vertex with the seed set."""
    seed = frozenset(int(s) for s in seed)
    for s in seed:
        if not (0 <= s < mesh.n_triangles):
            raise MeshError(f"triangle index {s} out of range")
    if not seed:
        return Patch(seed, frozenset())
    verts = set()
    for s in seed:
        verts.update(int(v) for v in mesh.triangles[s])
    members = set()
    for v in verts:
        members.update(int(t) for t in mesh.vertex_tris(v))
    return Patch(seed, frozenset(members))


def face_path_exists(mesh, start, goal, allowed, max_len):
    """Shortest face-crossing path from `start` to `goal` inside `allowed`.

    Path length counts triangles, so start == goal gives length 1.  Returns
    (found, path); found is False when no path of length <= max_len exists.
    """
    allowed = set(int(a) for a in allowed)
    if start not in allowed or goal not in allowed:
        raise MeshError("start and goal must belong to the allowed set")
    if start == goal:
        return True, [start]
    prev = {start: -1}
    queue = deque([(start, 1)])
    while queue:
        t, depth = queue.popleft()
        if depth >= max_len:
            continue
        for nb in mesh.tri_neighbors(t):
            if nb in allowed and nb not in prev:
                prev[nb] = t
                if nb == goal:
                    path = [nb]
                    while path[-1] != start:
                        path.append(prev[path[-1]])
                    return True, path[::-1]
                queue.append((nb, depth + 1))
    return False, []
