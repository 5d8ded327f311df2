"""Quadrature on reference cells, cut volumes T∩Ω, and boundary pieces T∩Γ.

Two geometry backends: `circle-exact` decomposes a triangle/disk intersection
into straight-sided polygons plus circular segments (polygon part exact for
polynomials, segment part spectrally accurate Gauss in angle), and
`subtriangulate` recursively refines cut sub-triangles `depth` times and
applies a straight-cut split at the leaves.  All weights are kept in physical
measure; surface rules carry unit normals pointing out of {phi < 0}.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

MAX_DEGREE = 12
# extra recursion budget for leaves with non-simple sign patterns
COMPLEX_BUDGET = 8
ROOT_TOL = 1e-14


class QuadratureError(Exception):
    pass


@dataclass
class QuadratureRule:
    """Points and weights in physical coordinates; normals for surface rules."""

    points: np.ndarray            # (m, 2)
    weights: np.ndarray           # (m,)
    normals: np.ndarray = None    # (m, 2) unit, outward of {phi < 0}
    degree: int = 0

    @property
    def total(self):
        return float(self.weights.sum())

    def __len__(self):
        return len(self.weights)


def _empty_rule(degree=0, with_normals=False):
    return QuadratureRule(
        points=np.zeros((0, 2)),
        weights=np.zeros(0),
        normals=np.zeros((0, 2)) if with_normals else None,
        degree=degree,
    )


@lru_cache(maxsize=None)
def _gauss01(n):
    """n-point Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def reference_triangle_rule(degree):
    """Rule on the unit triangle {x,y >= 0, x+y <= 1}, exact to `degree`.

    Collapsed tensor Gauss (Duffy map): positive weights at any degree.
    """
    if not (0 <= degree <= MAX_DEGREE):
        raise QuadratureError(f"unsupported volume degree {degree} (max {MAX_DEGREE})")
    m = (degree + 3) // 2
    u, wu = _gauss01(m)
    v, wv = _gauss01(m)
    U, V = np.meshgrid(u, v, indexing="ij")
    WU, WV = np.meshgrid(wu, wv, indexing="ij")
    x = U.ravel()
    y = (V * (1.0 - U)).ravel()
    w = (WU * WV * (1.0 - U)).ravel()
    return QuadratureRule(np.stack([x, y], axis=1), w, degree=degree)


@lru_cache(maxsize=None)
def reference_edge_rule(degree):
    """Gauss-Legendre on [0, 1], exact to `degree`."""
    if not (0 <= degree <= MAX_DEGREE):
        raise QuadratureError(f"unsupported edge degree {degree} (max {MAX_DEGREE})")
    t, w = _gauss01(max(1, (degree + 2) // 2))
    return QuadratureRule(np.stack([t, np.zeros_like(t)], axis=1), w.copy(), degree=degree)


def reference_rules(degree):
    """(volume rule on the unit triangle, edge rule on the unit interval)."""
    return reference_triangle_rule(degree), reference_edge_rule(degree)


def map_rule_to_triangle(rule, coords):
    """Push a reference-triangle rule to the physical triangle `coords` (3, 2)."""
    coords = np.asarray(coords, dtype=float)
    v0 = coords[0]
    J = np.stack([coords[1] - v0, coords[2] - v0], axis=1)
    det = abs(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])
    pts = v0[None, :] + rule.points @ J.T
    return QuadratureRule(pts, rule.weights * det, degree=rule.degree)


def face_rule(p0, p1, degree):
    """Mapped Gauss rule on the segment p0-p1 with arc-length weights."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.linalg.norm(p1 - p0))
    if length == 0.0:
        raise QuadratureError("zero-length edge")
    ref = reference_edge_rule(degree)
    t = ref.points[:, 0]
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    return QuadratureRule(pts, ref.weights * length, degree=degree)


# ----------------------------------------------------------------------
# edge root finding
# ----------------------------------------------------------------------

def _edge_roots(p0, p1, phi, nscan=8, tol=ROOT_TOL):
    """Roots of t -> phi(p0 + t (p1 - p0)) on [0, 1], bracketing on a scan grid.

    Up to two roots per edge are supported; more sign changes than two raise.
    """
    d = p1 - p0

    def f(t):
        return float(phi(p0 + t * d))

    ts = np.linspace(0.0, 1.0, nscan + 1)
    vals = np.atleast_1d(phi(p0[None, :] + ts[:, None] * d[None, :]))
    roots = []
    for i in range(nscan):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(ts[i])
        elif a * b < 0.0:
            roots.append(brentq(f, ts[i], ts[i + 1], xtol=tol))
    if vals[-1] == 0.0:
        roots.append(1.0)
    roots = sorted(set(roots))
    if len(roots) > 2:
        raise QuadratureError(
            f"edge crossed {len(roots)} times; more than 2 roots per edge is unsupported"
        )
    return roots


def _project_to_levelset(points, phi, scale, max_iter=30, tol=1e-13):
    """Newton projection along grad(phi) onto {phi = 0}."""
    pts = np.array(points, dtype=float)
    for _ in range(max_iter):
        vals = np.atleast_1d(phi(pts))
        if np.all(np.abs(vals) < tol * scale):
            break
        g = phi.gradient(pts)
        g2 = np.einsum("...i,...i->...", g, g)
        g2 = np.where(g2 == 0.0, 1.0, g2)
        pts = pts - (vals / g2)[..., None] * g
    return pts


# ----------------------------------------------------------------------
# circle-exact backend
# ----------------------------------------------------------------------

def _circle_params(phi):
    if phi.kind != "circle":
        raise QuadratureError("the circle-exact backend requires a circle level set")
    p = phi.params
    return np.array([p["cx"], p["cy"]]), float(p["r"])


def _segment_interval_in_disk(a, b, center, r):
    """Parameter interval of segment a-b inside the closed disk, or None."""
    d = b - a
    ca = a - center
    A = d @ d
    B = ca @ d
    C = ca @ ca - r * r
    disc = B * B - A * C
    if disc <= 0.0 or A == 0.0:
        return None
    sq = np.sqrt(disc)
    # stable quadratic roots of A t^2 + 2 B t + C = 0
    if B >= 0.0:
        q = -(B + sq)
        t1, t2 = q / A, C / q if q != 0.0 else 0.0
    else:
        q = -(B - sq)
        t1, t2 = C / q if q != 0.0 else 0.0, q / A
    t1, t2 = min(t1, t2), max(t1, t2)
    lo, hi = max(0.0, t1), min(1.0, t2)
    if hi - lo <= 0.0:
        return None
    return lo, hi


def _point_in_triangle(p, coords):
    sign = 0
    for k in range(3):
        a, b = coords[k], coords[(k + 1) % 3]
        cr = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        if cr < 0:
            return False
    return True


def _clip_triangle_disk(coords, center, r):
    """Boundary walk of the convex region triangle∩disk.

    Returns (nodes, arc_after) where nodes is the CCW vertex loop and
    arc_after[i] is True when the boundary piece nodes[i] -> nodes[i+1]
    follows the circle; or the strings 'full-triangle' / 'full-disk' /
    'empty' for the intersection-free cases.
    """
    coords = np.asarray(coords, dtype=float)
    inside = [np.linalg.norm(coords[k] - center) - r < 0.0 for k in range(3)]

    nodes = []
    exits = []   # per node: boundary leaves the disk here (arc follows)
    any_cut = False
    for k in range(3):
        a, b = coords[k], coords[(k + 1) % 3]
        iv = _segment_interval_in_disk(a, b, center, r)
        if iv is None:
            continue
        lo, hi = iv
        if lo == 0.0:
            nodes.append(a.copy())
            exits.append(False)
        else:
            nodes.append(a + lo * (b - a))
            exits.append(False)
            any_cut = True
        if hi < 1.0:
            nodes.append(a + hi * (b - a))
            exits.append(True)
            any_cut = True

    if not any_cut:
        if all(inside):
            return "full-triangle"
        if not nodes and _point_in_triangle(center, coords):
            # disk strictly inside the triangle
            return "full-disk"
        if nodes:
            # triangle inside the disk with vertices touching the circle
            return "full-triangle"
        return "empty"

    return nodes, exits


def _split_arc(theta0, theta1, max_width=np.pi / 4):
    """Ascending angle breakpoints from theta0 to theta1 (theta1 > theta0)."""
    width = theta1 - theta0
    pieces = max(1, int(np.ceil(width / max_width)))
    return np.linspace(theta0, theta1, pieces + 1)


def _segment_rule(center, r, theta0, theta1, degree, n_theta=12):
    """Area rule on the circular segment between the chord and the arc
    (minor segment; requires theta1 - theta0 <= pi/2)."""
    delta = 0.5 * (theta1 - theta0)
    if delta <= 0.0:
        return _empty_rule()
    tm = 0.5 * (theta0 + theta1)
    p = r * np.cos(delta)
    nu = max(n_theta, degree + 2)
    nv = max(1, (degree + 3) // 2)
    tu, wu = _gauss01(nu)
    tv, wv = _gauss01(nv)
    thetas = theta0 + (theta1 - theta0) * tu
    s_lo = p / np.cos(thetas - tm)
    span = r - s_lo
    S = s_lo[:, None] + span[:, None] * tv[None, :]
    W = (wu * (theta1 - theta0))[:, None] * wv[None, :] * span[:, None] * S
    ct, st = np.cos(thetas), np.sin(thetas)
    X = center[0] + S * ct[:, None]
    Y = center[1] + S * st[:, None]
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    return QuadratureRule(pts, W.ravel(), degree=degree)


def _fan_polygon_rule(nodes, degree):
    """Exact rule over the convex polygon `nodes` by fanning from the centroid."""
    nodes = np.asarray(nodes)
    if len(nodes) < 3:
        return _empty_rule(degree)
    apex = nodes.mean(axis=0)
    ref = reference_triangle_rule(degree)
    parts = []
    for i in range(len(nodes)):
        tri = np.array([apex, nodes[i], nodes[(i + 1) % len(nodes)]])
        a = 0.5 * abs(
            (tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1])
            - (tri[1][1] - tri[0][1]) * (tri[2][0] - tri[0][0])
        )
        if a == 0.0:
            continue
        parts.append(map_rule_to_triangle(ref, tri))
    return _concat_rules(parts, degree)


def _concat_rules(rules, degree, with_normals=False):
    rules = [r for r in rules if len(r)]
    if not rules:
        return _empty_rule(degree, with_normals)
    pts = np.concatenate([r.points for r in rules])
    w = np.concatenate([r.weights for r in rules])
    normals = None
    if with_normals:
        normals = np.concatenate([r.normals for r in rules])
    return QuadratureRule(pts, w, normals=normals, degree=degree)


def _circle_exact_volume(coords, phi, degree):
    center, r = _circle_params(phi)
    shape = _clip_triangle_disk(coords, center, r)
    ref = reference_triangle_rule(degree)
    if shape == "empty":
        return _empty_rule(degree)
    if shape == "full-triangle":
        return map_rule_to_triangle(ref, coords)
    if shape == "full-disk":
        thetas = _split_arc(0.0, 2 * np.pi)
        nodes = [center + r * np.array([np.cos(t), np.sin(t)]) for t in thetas[:-1]]
        segs = [
            _segment_rule(center, r, thetas[i], thetas[i + 1], degree)
            for i in range(len(thetas) - 1)
        ]
        return _concat_rules([_fan_polygon_rule(nodes, degree)] + segs, degree)

    nodes, arc_after = shape
    n = len(nodes)
    poly = []
    segs = []
    for i in range(n):
        a = nodes[i]
        poly.append(a)
        if arc_after[i]:
            b = nodes[(i + 1) % n]
            t0 = np.arctan2(a[1] - center[1], a[0] - center[0])
            t1 = np.arctan2(b[1] - center[1], b[0] - center[0])
            if t1 <= t0:
                t1 += 2 * np.pi
            breaks = _split_arc(t0, t1)
            for j in range(len(breaks) - 1):
                segs.append(_segment_rule(center, r, breaks[j], breaks[j + 1], degree))
                if j < len(breaks) - 2:
                    th = breaks[j + 1]
                    poly.append(center + r * np.array([np.cos(th), np.sin(th)]))
    return _concat_rules([_fan_polygon_rule(poly, degree)] + segs, degree)


def _circle_exact_surface(coords, phi, degree):
    center, r = _circle_params(phi)
    shape = _clip_triangle_disk(coords, center, r)
    if isinstance(shape, str) and shape in ("empty", "full-triangle", "full-disk"):
        return _empty_rule(degree, with_normals=True)
    nodes, arc_after = shape
    n = len(nodes)
    parts = []
    for i in range(n):
        if not arc_after[i]:
            continue
        a, b = nodes[i], nodes[(i + 1) % n]
        t0 = np.arctan2(a[1] - center[1], a[0] - center[0])
        t1 = np.arctan2(b[1] - center[1], b[0] - center[0])
        if t1 <= t0:
            t1 += 2 * np.pi
        breaks = _split_arc(t0, t1)
        ng = max(12, degree + 2)
        tg, wg = _gauss01(ng)
        for ta, tb in zip(breaks[:-1], breaks[1:]):
            thetas = ta + (tb - ta) * tg
            ct, st = np.cos(thetas), np.sin(thetas)
            pts = np.stack([center[0] + r * ct, center[1] + r * st], axis=1)
            w = wg * (tb - ta) * r
            normals = np.stack([ct, st], axis=1)
            parts.append(QuadratureRule(pts, w, normals=normals, degree=degree))
    return _concat_rules(parts, degree, with_normals=True)


# ----------------------------------------------------------------------
# subtriangulation backend
# ----------------------------------------------------------------------

def _leaf_split(coords, vals, roots_per_edge):
    """Straight-cut polygon split of a leaf triangle.

    Returns (inside_tris, chords) or None when the sign pattern is not the
    simple one-root-on-two-edges case.
    """
    neg = [v < 0.0 for v in vals]
    cut_edges = [k for k in range(3) if len(roots_per_edge[k]) == 1]
    if sum(len(r) for r in roots_per_edge) != 2 or len(cut_edges) != 2:
        return None
    rp = {}
    for k in cut_edges:
        a, b = coords[k], coords[(k + 1) % 3]
        t = roots_per_edge[k][0]
        rp[k] = a + t * (b - a)
    # vertex whose two incident edges are cut: the one between the cut edges
    for v in range(3):
        if {(v - 1) % 3, v} == set(cut_edges):
            lone = v
            break
    else:
        return None
    e_prev, e_next = (lone - 1) % 3, lone
    p_prev, p_next = rp[e_prev], rp[e_next]
    chord = (p_prev, p_next)
    v0 = coords[lone]
    if neg[lone]:
        tris = [np.array([v0, p_next, p_prev])]
    else:
        v1, v2 = coords[(lone + 1) % 3], coords[(lone + 2) % 3]
        tris = [np.array([p_next, v1, v2]), np.array([p_next, v2, p_prev])]
    return tris, [chord]


def _subdivide(coords, phi, depth, budget, tol, out_tris, out_chords):
    vals = np.array([float(phi(c)) for c in coords])
    vals[np.abs(vals) < tol] = tol
    roots = [
        _edge_roots(coords[k], coords[(k + 1) % 3], phi)
        for k in range(3)
    ]
    has_root = any(len(r) for r in roots)
    if not has_root and np.all(vals < 0.0):
        out_tris.append(np.asarray(coords, dtype=float))
        return
    if not has_root and np.all(vals > 0.0):
        return

    if depth > 0:
        mids = [(coords[k] + coords[(k + 1) % 3]) / 2.0 for k in range(3)]
        children = [
            (coords[0], mids[0], mids[2]),
            (mids[0], coords[1], mids[1]),
            (mids[2], mids[1], coords[2]),
            (mids[0], mids[1], mids[2]),
        ]
        for child in children:
            _subdivide(np.asarray(child), phi, depth - 1, budget, tol, out_tris, out_chords)
        return

    split = _leaf_split(coords, vals, roots)
    if split is not None:
        tris, chords = split
        out_tris.extend(tris)
        out_chords.extend(chords)
        return
    if budget > 0:
        mids = [(coords[k] + coords[(k + 1) % 3]) / 2.0 for k in range(3)]
        children = [
            (coords[0], mids[0], mids[2]),
            (mids[0], coords[1], mids[1]),
            (mids[2], mids[1], coords[2]),
            (mids[0], mids[1], mids[2]),
        ]
        for child in children:
            _subdivide(np.asarray(child), phi, 0, budget - 1, tol, out_tris, out_chords)
        return
    # give up: whole-or-nothing by centroid sign
    if float(phi(coords.mean(axis=0))) < 0.0:
        out_tris.append(np.asarray(coords, dtype=float))


def _subtriangulate_pieces(coords, phi, depth):
    coords = np.asarray(coords, dtype=float)
    h = np.linalg.norm(coords - np.roll(coords, 1, axis=0), axis=1).max()
    tol = 1e-14 * h
    tris, chords = [], []
    _subdivide(coords, phi, depth, COMPLEX_BUDGET, tol, tris, chords)
    return tris, chords


def _subtri_volume(coords, phi, degree, depth):
    tris, _ = _subtriangulate_pieces(coords, phi, depth)
    ref = reference_triangle_rule(degree)
    return _concat_rules([map_rule_to_triangle(ref, t) for t in tris], degree)


def _subtri_surface(coords, phi, degree, depth):
    _, chords = _subtriangulate_pieces(coords, phi, depth)
    coords = np.asarray(coords, dtype=float)
    h = np.linalg.norm(coords - np.roll(coords, 1, axis=0), axis=1).max()
    nseg = max(1, degree // 2)
    ng = max(2, (degree + 2) // 2)
    tg, wg = _gauss01(ng)
    parts = []
    for a, b in chords:
        a = np.asarray(a)
        b = np.asarray(b)
        ts = np.linspace(0.0, 1.0, nseg + 1)
        poly = a[None, :] + ts[:, None] * (b - a)[None, :]
        poly[1:-1] = _project_to_levelset(poly[1:-1], phi, h)
        for j in range(nseg):
            q0, q1 = poly[j], poly[j + 1]
            length = np.linalg.norm(q1 - q0)
            if length == 0.0:
                continue
            pts = q0[None, :] + tg[:, None] * (q1 - q0)[None, :]
            pts = _project_to_levelset(pts, phi, h)
            normals = phi.normal(pts)
            parts.append(
                QuadratureRule(pts, wg * length, normals=normals, degree=degree)
            )
    return _concat_rules(parts, degree, with_normals=True)


# ----------------------------------------------------------------------
# public cut rules
# ----------------------------------------------------------------------

def cut_volume_rule(coords, phi, method="subtriangulate", degree=4, depth=4):
    """Quadrature over triangle∩{phi<0} in physical coordinates."""
    coords = np.asarray(coords, dtype=float)
    if method == "circle-exact":
        return _circle_exact_volume(coords, phi, degree)
    if method == "subtriangulate":
        return _subtri_volume(coords, phi, degree, depth)
    raise QuadratureError(f"unknown cut quadrature method {method!r}")


def cut_surface_rule(coords, phi, method="subtriangulate", degree=4, depth=4):
    """Quadrature with outward normals over triangle∩{phi=0}."""
    coords = np.asarray(coords, dtype=float)
    if method == "circle-exact":
        return _circle_exact_surface(coords, phi, degree)
    if method == "subtriangulate":
        return _subtri_surface(coords, phi, degree, depth)
    raise QuadratureError(f"unknown cut quadrature method {method!r}")
