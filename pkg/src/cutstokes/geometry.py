"""Implicit boundary representation and cut classification of a background mesh.

The physical domain is {phi < 0}.  Elements are tagged interior / cut /
exterior from snapped vertex signs plus per-edge root scans, the face sets of
the active submesh are derived, and every cut element is assigned a nearby
strictly-interior anchor element reachable through a short face path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh, vertex_patch

INTERIOR, CUT, EXTERIOR = 0, 1, 2

# relative sign tolerance: |phi| < SNAP_REL * h snaps to "outside"
SNAP_REL = 1e-12
# scan points per edge when hunting sign changes in the edge interior
EDGE_SCAN = 8


class GeometryError(Exception):
    """Raised when the geometry cannot be resolved against the mesh."""


class LevelSet:
    """Signed implicit function phi with phi < 0 inside the domain.

    evaluate/gradient accept arrays of shape (..., 2) and are pure functions,
    safe to call concurrently.
    """

    def __init__(self, evaluate, gradient, kind="generic", params=None):
        self._evaluate = evaluate
        self._gradient = gradient
        self.kind = kind
        self.params = dict(params or {})

    def __call__(self, points):
        return self._evaluate(np.asarray(points, dtype=float))

    def gradient(self, points):
        return self._gradient(np.asarray(points, dtype=float))

    def normal(self, points):
        g = self.gradient(points)
        norm = np.linalg.norm(g, axis=-1, keepdims=True)
        return g / norm

    @staticmethod
    def circle(cx, cy, r):
        center = np.array([cx, cy], dtype=float)
        if r <= 0:
            raise GeometryError("circle radius must be positive")

        def ev(p):
            return np.linalg.norm(p - center, axis=-1) - r

        def grad(p):
            d = p - center
            n = np.linalg.norm(d, axis=-1, keepdims=True)
            return d / np.where(n == 0.0, 1.0, n)

        return LevelSet(ev, grad, kind="circle", params={"cx": cx, "cy": cy, "r": r})

    @staticmethod
    def ellipse(cx, cy, a, b):
        center = np.array([cx, cy], dtype=float)
        if a <= 0 or b <= 0:
            raise GeometryError("ellipse semi-axes must be positive")
        ab2 = np.array([a * a, b * b])

        def ev(p):
            d = p - center
            return np.sqrt((d * d / ab2).sum(axis=-1)) - 1.0

        def grad(p):
            d = p - center
            rho = np.sqrt((d * d / ab2).sum(axis=-1))
            rho = np.where(rho == 0.0, 1.0, rho)
            return (d / ab2) / rho[..., None]

        return LevelSet(ev, grad, kind="ellipse", params={"cx": cx, "cy": cy, "a": a, "b": b})

    @staticmethod
    def from_callable(evaluate, gradient=None, fd_step=1e-7):
        if gradient is None:
            def gradient(p, _f=evaluate, _h=fd_step):
                p = np.asarray(p, dtype=float)
                ex = np.zeros(p.shape)
                ey = np.zeros(p.shape)
                ex[..., 0] = _h
                ey[..., 1] = _h
                gx = (_f(p + ex) - _f(p - ex)) / (2 * _h)
                gy = (_f(p + ey) - _f(p - ey)) / (2 * _h)
                return np.stack([gx, gy], axis=-1)

        return LevelSet(evaluate, gradient, kind="generic")


@dataclass
class CutClassification:
    """Per-element and per-face tags plus anchor maps for a (mesh, phi) pair."""

    tags: np.ndarray                  # (nt,) INTERIOR/CUT/EXTERIOR
    interior_tris: np.ndarray
    cut_tris: np.ndarray
    exterior_tris: np.ndarray
    active_tris: np.ndarray           # interior + cut, ascending
    tilde_cut_tris: np.ndarray        # cut plus interior elements touching them
    faces_interior: np.ndarray        # interior faces of the interior submesh
    faces_ghost: np.ndarray           # faces of cut elements not on the active-boundary
    faces_active: np.ndarray          # interior faces of the active submesh
    snap_tol: float
    kt: np.ndarray = field(default=None)          # anchor triangle per element, -1 unassigned
    kt_paths: dict = field(default_factory=dict)  # cut tri -> face path ending at anchor
    wt: dict = field(default_factory=dict)        # cut tri -> interior members of omega(omega(T))

    def is_active(self, t):
        return self.tags[t] != EXTERIOR


@dataclass
class AssumptionReport:
    """Outcome of the mesh-resolution checks behind the anchor construction."""

    ok: bool
    empty_patches: list
    unreachable: list
    ghost_pairs_failed: list
    max_anchor_path: int
    max_pair_path: int

    def summary(self):
        return {
            "ok": self.ok,
            "empty_patches": list(self.empty_patches),
            "unreachable": list(self.unreachable),
            "ghost_pairs_failed": [list(p) for p in self.ghost_pairs_failed],
            "max_anchor_path": self.max_anchor_path,
            "max_pair_path": self.max_pair_path,
        }


def _snap(values, tol):
    """Values with |phi| < tol treated as positive (outside)."""
    v = np.array(values, dtype=float)
    v[np.abs(v) < tol] = tol
    return v


def classify(mesh: Mesh, phi: LevelSet) -> CutClassification:
    """Tag every triangle against {phi < 0} and derive the face sets.

    A triangle is cut when the snapped vertex signs differ, or when an edge
    scan finds a sign change in an edge interior (grazing boundary).  All
    snapped-negative vertices without edge roots means interior; all positive
    without roots means exterior.  A closed boundary component strictly inside
    one triangle is not detectable and is out of the supported regime.
    """
    tol = SNAP_REL * mesh.h
    if mesh.h_min < 100.0 * tol:
        raise GeometryError(
            f"smallest triangle (h={mesh.h_min:.3e}) is within the sign tolerance band "
            f"({tol:.3e}); refine the mesh or rescale the geometry"
        )

    vert_vals = _snap(phi(mesh.vertices), tol)
    tri_vals = vert_vals[mesh.triangles]
    all_neg = np.all(tri_vals < 0.0, axis=1)
    all_pos = np.all(tri_vals > 0.0, axis=1)
    mixed = ~(all_neg | all_pos)

    tags = np.full(mesh.n_triangles, EXTERIOR, dtype=np.int8)
    tags[all_neg] = INTERIOR
    tags[mixed] = CUT

    # edge scan on unsplit edges: catches phi dipping across an edge interior
    edge_root = np.zeros(mesh.n_edges, dtype=bool)
    ev0, ev1 = mesh.edges[:, 0], mesh.edges[:, 1]
    same_sign = np.nonzero(vert_vals[ev0] * vert_vals[ev1] > 0.0)[0]
    if same_sign.size:
        p0 = mesh.vertices[ev0[same_sign]]
        p1 = mesh.vertices[ev1[same_sign]]
        ts = np.linspace(0.0, 1.0, EDGE_SCAN + 1)
        pts = p0[:, None, :] + ts[None, :, None] * (p1 - p0)[:, None, :]
        vals = _snap(phi(pts), tol)
        edge_root[same_sign] = np.any(vals[:, :-1] * vals[:, 1:] < 0.0, axis=1)
    grazed = np.any(edge_root[mesh.tri_edges], axis=1)
    tags[grazed & ~mixed] = CUT

    interior = np.nonzero(tags == INTERIOR)[0]
    cut = np.nonzero(tags == CUT)[0]
    exterior = np.nonzero(tags == EXTERIOR)[0]
    active = np.nonzero(tags != EXTERIOR)[0]

    # face sets
    t0, t1 = mesh.edge_tris[:, 0], mesh.edge_tris[:, 1]
    has_two = t1 >= 0
    tag0 = tags[t0]
    tag1 = np.where(has_two, tags[np.maximum(t1, 0)], EXTERIOR)

    faces_interior = np.nonzero(has_two & (tag0 == INTERIOR) & (tag1 == INTERIOR))[0]
    both_active = has_two & (tag0 != EXTERIOR) & (tag1 != EXTERIOR)
    faces_active = np.nonzero(both_active)[0]
    touches_cut = (tag0 == CUT) | (tag1 == CUT)
    faces_ghost = np.nonzero(both_active & touches_cut)[0]

    # cut elements plus interior elements sharing a vertex with one
    cut_vertex = np.zeros(mesh.n_vertices, dtype=bool)
    cut_vertex[np.unique(mesh.triangles[cut])] = True
    touching = np.any(cut_vertex[mesh.triangles], axis=1)
    tilde = np.nonzero((tags == CUT) | ((tags == INTERIOR) & touching))[0]

    return CutClassification(
        tags=tags,
        interior_tris=interior,
        cut_tris=cut,
        exterior_tris=exterior,
        active_tris=active,
        tilde_cut_tris=tilde,
        faces_interior=faces_interior,
        faces_ghost=faces_ghost,
        faces_active=faces_active,
        snap_tol=tol,
    )


def _anchor_search(mesh, tags, t, w_set, max_len):
    """BFS from cut element t across faces of cut elements into an interior
    anchor from w_set; ties at equal depth break toward the lowest index."""
    if tags[t] == INTERIOR:
        return int(t), [int(t)]
    frontier = [int(t)]
    seen = {int(t)}
    path_prev = {int(t): -1}
    depth = 1
    while frontier and depth < max_len:
        candidates = []
        next_frontier = []
        for cur in frontier:
            for nb in mesh.tri_neighbors(cur):
                if nb in seen:
                    continue
                if tags[nb] == CUT:
                    seen.add(nb)
                    path_prev[nb] = cur
                    next_frontier.append(nb)
                elif tags[nb] == INTERIOR and nb in w_set:
                    candidates.append((nb, cur))
        if candidates:
            anchor, came_from = min(candidates)
            path = [anchor, came_from]
            while path[-1] != t:
                path.append(path_prev[path[-1]])
            return int(anchor), path[::-1]
        frontier = sorted(next_frontier)
        depth += 1
    return -1, []


def assign_kt(mesh: Mesh, cls: CutClassification, max_len: int = 32) -> CutClassification:
    """Assign each cut element its anchor K_T: the nearest interior member of
    W(T) = interior cap omega(omega(T)), reached through faces of cut elements.

    Interior elements anchor to themselves.  Raises when W(T) is empty or no
    admissible path exists (mesh too coarse for the geometry).
    """
    kt = np.full(mesh.n_triangles, -1, dtype=np.int64)
    kt[cls.interior_tris] = cls.interior_tris
    paths = {int(t): [int(t)] for t in cls.interior_tris}
    wt = {}
    interior_set = set(int(t) for t in cls.interior_tris)

    for t in cls.cut_tris:
        t = int(t)
        ring2 = vertex_patch(mesh, vertex_patch(mesh, [t]).members).members
        w = sorted(interior_set.intersection(ring2))
        wt[t] = np.asarray(w, dtype=np.int64)
        if not w:
            raise GeometryError(
                f"cut triangle {t} has no interior neighbor within two vertex rings; "
                "the mesh is too coarse for this geometry"
            )
        anchor, path = _anchor_search(mesh, cls.tags, t, set(w), max_len)
        if anchor < 0:
            raise GeometryError(
                f"no face path from cut triangle {t} into its interior patch "
                f"(limit {max_len})"
            )
        kt[t] = anchor
        paths[t] = path

    cls.kt = kt
    cls.kt_paths = paths
    cls.wt = wt
    return cls


def check_assumptions(mesh: Mesh, cls: CutClassification, max_path: int = 16) -> AssumptionReport:
    """Verify the two mesh-resolution conditions behind the anchor construction.

    (1) every cut element has a nonempty interior patch W(T) and a face path
        to its anchor; (2) for every ghost face shared by T1, T2 the anchors
        K_{T1}, K_{T2} connect through interior elements within max_path steps.
    Violations are reported, never raised.
    """
    empty_patches = []
    unreachable = []
    max_anchor = 0
    interior_set = set(int(t) for t in cls.interior_tris)

    work = cls
    if work.kt is None:
        try:
            work = assign_kt(mesh, cls, max_len=max_path)
        except GeometryError:
            work = cls

    for t in cls.cut_tris:
        t = int(t)
        if work.wt is not None and t in work.wt:
            w = set(int(x) for x in work.wt[t])
        else:
            ring2 = vertex_patch(mesh, vertex_patch(mesh, [t]).members).members
            w = interior_set.intersection(ring2)
        if not w:
            empty_patches.append(t)
            continue
        if work.kt is None or work.kt[t] < 0:
            anchor, path = _anchor_search(mesh, cls.tags, t, w, max_path)
            if anchor < 0:
                unreachable.append(t)
            else:
                max_anchor = max(max_anchor, len(path))
        else:
            max_anchor = max(max_anchor, len(work.kt_paths[t]))

    ghost_failed = []
    max_pair = 0
    if work.kt is not None:
        from .mesh import face_path_exists

        allowed = interior_set
        for e in cls.faces_ghost:
            t0, t1 = (int(x) for x in mesh.edge_tris[e])
            k0, k1 = int(work.kt[t0]), int(work.kt[t1])
            if k0 < 0 or k1 < 0:
                ghost_failed.append((t0, t1))
                continue
            found, path = face_path_exists(mesh, k0, k1, allowed, max_path)
            if not found:
                ghost_failed.append((t0, t1))
            else:
                max_pair = max(max_pair, len(path))
    else:
        ghost_failed = [tuple(int(x) for x in mesh.edge_tris[e]) for e in cls.faces_ghost]

    ok = not (empty_patches or unreachable or ghost_failed)
    return AssumptionReport(
        ok=ok,
        empty_patches=empty_patches,
        unreachable=unreachable,
        ghost_pairs_failed=ghost_failed,
        max_anchor_path=max_anchor,
        max_pair_path=max_pair,
    )
