"""Finite element spaces on the active submesh.

Scalar continuous Lagrange spaces of degree 1 or 2, optionally enriched with a
cubic cell bubble, make up the velocity components; pressures are continuous
P1 or discontinuous P0.  Degrees of freedom live only on entities of active
(interior or cut) triangles, and boolean masks single out the subspaces
supported in the closed interior domain: velocity functions vanishing on and
outside its boundary, and pressure functions with nonzero restriction to it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CUT, EXTERIOR, INTERIOR


class SpaceError(Exception):
    pass


@dataclass(frozen=True)
class ElementPair:
    """Velocity/pressure pair with its stabilization orders.

    superspace_degree bounds the polynomial degree of the velocity space;
    penalty_order is the highest normal-derivative jump penalized on ghost
    faces for the velocity (the pressure always penalizes orders 0..kp).
    """

    name: str
    ku: int
    superspace_degree: int
    penalty_order: int
    kp: int
    pressure_continuous: bool
    bubble: bool


ELEMENT_PAIRS = {
    "taylor-hood-p2p1": ElementPair("taylor-hood-p2p1", 2, 2, 2, 1, True, False),
    "mini-p1bp1": ElementPair("mini-p1bp1", 1, 3, 1, 1, True, True),
    "p2p0disc": ElementPair("p2p0disc", 2, 2, 2, 0, False, False),
    # taylor-hood velocity enriched with the cell bubble; used to probe how
    # enlarging the velocity space moves the measured inf-sup constants
    "p2bubble-p1": ElementPair("p2bubble-p1", 2, 3, 2, 1, True, True),
}


def element_pair(name):
    try:
        return ELEMENT_PAIRS[name]
    except KeyError:
        raise SpaceError(
            f"unknown element pair {name!r}; available: {sorted(ELEMENT_PAIRS)}"
        ) from None


# ----------------------------------------------------------------------
# reference scalar bases on the unit triangle, barycentric (l1, l2, l3)
# with l1 = 1 - x - y.  Local dof order: vertices, then edges (edge k
# opposite vertex k, i.e. midpoint of vertices k+1, k+2), then the bubble.
# ----------------------------------------------------------------------

def _bary(points):
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    return np.stack([1.0 - x - y, x, y], axis=1)

# reference barycentric gradients (constant)
_GRAD_L = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def _eval_scalar_reference(degree, bubble, points, order):
    """Values/derivatives of the reference scalar basis at reference points.

    Returns (vals, grads, hessians) with shapes (nb, np), (nb, np, 2),
    (nb, np, 2, 2); entries above `order` are None.
    """
    lam = _bary(points)
    npts = len(lam)
    funcs = []  # list of (val (np,), grad (np,2), hess (np,2,2))

    def poly(val, grad, hess):
        funcs.append((val, grad, hess))

    l = [lam[:, i] for i in range(3)]
    g = [_GRAD_L[i] for i in range(3)]

    if degree == 1:
        for i in range(3):
            poly(l[i],
                 np.broadcast_to(g[i], (npts, 2)).copy(),
                 np.zeros((npts, 2, 2)))
    elif degree == 2:
        for i in range(3):
            # l_i (2 l_i - 1)
            val = l[i] * (2.0 * l[i] - 1.0)
            grad = (4.0 * l[i] - 1.0)[:, None] * g[i][None, :]
            hess = 4.0 * np.einsum("a,b->ab", g[i], g[i])
            poly(val, grad, np.broadcast_to(hess, (npts, 2, 2)).copy())
        for k in range(3):
            i, j = (k + 1) % 3, (k + 2) % 3
            val = 4.0 * l[i] * l[j]
            grad = 4.0 * (l[j][:, None] * g[i][None, :] + l[i][:, None] * g[j][None, :])
            hess = 4.0 * (np.einsum("a,b->ab", g[i], g[j]) + np.einsum("a,b->ab", g[j], g[i]))
            poly(val, grad, np.broadcast_to(hess, (npts, 2, 2)).copy())
    else:
        raise SpaceError(f"unsupported scalar degree {degree}")

    if bubble:
        val = 27.0 * l[0] * l[1] * l[2]
        grad = 27.0 * (
            (l[1] * l[2])[:, None] * g[0][None, :]
            + (l[0] * l[2])[:, None] * g[1][None, :]
            + (l[0] * l[1])[:, None] * g[2][None, :]
        )
        hess = np.zeros((npts, 2, 2))
        for (i, j, k) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            outer = np.einsum("a,b->ab", g[i], g[j]) + np.einsum("a,b->ab", g[j], g[i])
            hess += 27.0 * l[k][:, None, None] * outer[None, :, :]
        poly(val, grad, hess)

    vals = np.stack([f[0] for f in funcs])
    grads = np.stack([f[1] for f in funcs]) if order >= 1 else None
    hessians = np.stack([f[2] for f in funcs]) if order >= 2 else None
    return vals, grads, hessians


# ----------------------------------------------------------------------
# FE system: global dof tables on the active submesh plus interior masks
# ----------------------------------------------------------------------

@dataclass
class FESystem:
    mesh: object
    cls: object
    pair: ElementPair
    # scalar velocity tables
    v_vertex_dof: np.ndarray      # (nv,) scalar dof or -1
    v_edge_dof: np.ndarray        # (ne,) or empty
    v_cell_dof: np.ndarray        # (nt,) or empty (bubble)
    n_scalar: int
    cell_dofs_v: dict             # tri -> (nloc,) scalar dof array
    vmask_scalar: np.ndarray      # (n_scalar,) True when in the interior velocity subspace
    # pressure tables
    p_vertex_dof: np.ndarray
    p_cell_dof: np.ndarray
    n_pressure: int
    cell_dofs_p: dict
    pmask: np.ndarray             # (n_pressure,) nonzero restriction to the interior domain

    @property
    def n_velocity(self):
        return 2 * self.n_scalar

    def velocity_dofs(self, t):
        """Stacked (x-block then y-block) velocity dofs on triangle t."""
        s = self.cell_dofs_v[t]
        return np.concatenate([s, s + self.n_scalar])

    @property
    def vmask(self):
        """Interior mask on stacked velocity dofs."""
        return np.concatenate([self.vmask_scalar, self.vmask_scalar])

    def local_dof_count_v(self):
        n = 3 if self.pair.ku == 1 else 6
        return n + (1 if self.pair.bubble else 0)

    def local_dof_count_p(self):
        return 1 if self.pair.kp == 0 else 3


def build_system(mesh, cls, pair) -> FESystem:
    """Number scalar velocity and pressure dofs on active entities and compute
    the interior-subspace masks."""
    if isinstance(pair, str):
        pair = element_pair(pair)
    tags = cls.tags
    active = cls.active_tris

    nv, ne, nt = mesh.n_vertices, mesh.n_edges, mesh.n_triangles
    active_vertex = np.zeros(nv, dtype=bool)
    active_vertex[np.unique(mesh.triangles[active])] = True
    active_edge = np.zeros(ne, dtype=bool)
    active_edge[np.unique(mesh.tri_edges[active])] = True

    v_vertex_dof = np.full(nv, -1, dtype=np.int64)
    v_vertex_dof[active_vertex] = np.arange(active_vertex.sum())
    n_scalar = int(active_vertex.sum())

    v_edge_dof = np.full(ne, -1, dtype=np.int64)
    if pair.ku == 2:
        v_edge_dof[active_edge] = n_scalar + np.arange(active_edge.sum())
        n_scalar += int(active_edge.sum())

    v_cell_dof = np.full(nt, -1, dtype=np.int64)
    if pair.bubble:
        v_cell_dof[active] = n_scalar + np.arange(len(active))
        n_scalar += len(active)

    cell_dofs_v = {}
    for t in active:
        t = int(t)
        dofs = list(v_vertex_dof[mesh.triangles[t]])
        if pair.ku == 2:
            # edge dof k matches the local basis for the edge opposite vertex k
            dofs += list(v_edge_dof[mesh.tri_edges[t]])
        if pair.bubble:
            dofs.append(v_cell_dof[t])
        cell_dofs_v[t] = np.asarray(dofs, dtype=np.int64)

    # --- interior velocity mask -------------------------------------
    # boundary of the interior domain: edges with exactly one interior
    # triangle, or box-boundary edges whose single triangle is interior
    n_int_tris = np.zeros(ne, dtype=np.int64)
    t0, t1 = mesh.edge_tris[:, 0], mesh.edge_tris[:, 1]
    n_int_tris += (tags[t0] == INTERIOR)
    has2 = t1 >= 0
    n_int_tris[has2] += tags[t1[has2]] == INTERIOR
    interior_edge = has2 & (n_int_tris == 2)
    boundary_edge_i = (n_int_tris >= 1) & ~interior_edge

    vertex_all_interior = np.ones(nv, dtype=bool)
    vertex_all_interior[np.unique(mesh.triangles[tags != INTERIOR])] = False
    vertex_on_ibnd = np.zeros(nv, dtype=bool)
    vertex_on_ibnd[np.unique(mesh.edges[boundary_edge_i])] = True

    vmask_scalar = np.zeros(n_scalar, dtype=bool)
    ok_vertex = active_vertex & vertex_all_interior & ~vertex_on_ibnd
    vmask_scalar[v_vertex_dof[ok_vertex]] = True
    if pair.ku == 2:
        vmask_scalar[v_edge_dof[active_edge & interior_edge]] = True
    if pair.bubble:
        vmask_scalar[v_cell_dof[active[tags[active] == INTERIOR]]] = True

    # --- pressure tables ---------------------------------------------
    p_vertex_dof = np.full(nv, -1, dtype=np.int64)
    p_cell_dof = np.full(nt, -1, dtype=np.int64)
    if pair.pressure_continuous:
        p_vertex_dof[active_vertex] = np.arange(active_vertex.sum())
        n_pressure = int(active_vertex.sum())
        cell_dofs_p = {int(t): p_vertex_dof[mesh.triangles[t]].copy() for t in active}
    else:
        p_cell_dof[active] = np.arange(len(active))
        n_pressure = len(active)
        cell_dofs_p = {int(t): np.array([p_cell_dof[t]]) for t in active}

    pmask = np.zeros(n_pressure, dtype=bool)
    if pair.pressure_continuous:
        vert_touch_int = np.unique(mesh.triangles[tags == INTERIOR])
        pmask[p_vertex_dof[vert_touch_int]] = True
    else:
        pmask[p_cell_dof[cls.interior_tris]] = True

    return FESystem(
        mesh=mesh,
        cls=cls,
        pair=pair,
        v_vertex_dof=v_vertex_dof,
        v_edge_dof=v_edge_dof,
        v_cell_dof=v_cell_dof,
        n_scalar=n_scalar,
        cell_dofs_v=cell_dofs_v,
        vmask_scalar=vmask_scalar,
        p_vertex_dof=p_vertex_dof,
        p_cell_dof=p_cell_dof,
        n_pressure=n_pressure,
        cell_dofs_p=cell_dofs_p,
        pmask=pmask,
    )


# ----------------------------------------------------------------------
# physical-frame basis evaluation
# ----------------------------------------------------------------------

def _affine(mesh, t):
    coords = mesh.tri_coords(t)
    v0 = coords[0]
    J = np.stack([coords[1] - v0, coords[2] - v0], axis=1)
    Jinv = np.linalg.inv(J)
    return v0, J, Jinv


def physical_to_reference(mesh, t, points):
    v0, J, Jinv = _affine(mesh, t)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return (pts - v0) @ Jinv.T


def reference_to_physical(mesh, t, ref_points):
    v0, J, _ = _affine(mesh, t)
    ref = np.asarray(ref_points, dtype=float).reshape(-1, 2)
    return v0 + ref @ J.T


def evaluate_basis(system, t, points, order=1, space="velocity", reference=False):
    """Shape function values/derivatives on triangle t in physical coordinates.

    points are physical unless reference=True (then reference coordinates of
    the unit triangle).  Returns (vals, grads, hessians); entries above
    `order` are None.  order is limited to 2 and to the superspace degree.
    """
    pair = system.pair
    if space == "velocity":
        degree, bubble, smax = pair.ku, pair.bubble, pair.superspace_degree
    elif space == "pressure":
        degree, bubble, smax = max(pair.kp, 1), False, max(pair.kp, 1)
        if pair.kp == 0:
            # single constant shape function
            npts = len(np.asarray(points).reshape(-1, 2))
            vals = np.ones((1, npts))
            grads = np.zeros((1, npts, 2)) if order >= 1 else None
            hess = np.zeros((1, npts, 2, 2)) if order >= 2 else None
            return vals, grads, hess
    else:
        raise SpaceError(f"unknown space {space!r}")
    if order > 2 or order > smax:
        raise SpaceError(f"derivative order {order} not supported (max {min(2, smax)})")

    ref_pts = (
        np.asarray(points, dtype=float).reshape(-1, 2)
        if reference
        else physical_to_reference(system.mesh, t, points)
    )
    vals, grads, hessians = _eval_scalar_reference(degree, bubble, ref_pts, order)
    if order >= 1:
        _, _, Jinv = _affine(system.mesh, t)
        grads = np.einsum("ba,npb->npa", Jinv, grads)
        if order >= 2:
            hessians = np.einsum("ca,npcd,db->npab", Jinv, hessians, Jinv)
    return vals, grads, hessians


# ----------------------------------------------------------------------
# interpolation
# ----------------------------------------------------------------------

def interpolate(system, field, space="velocity"):
    """Nodal/modal interpolation of a globally defined field.

    Velocity: Lagrange dofs by point evaluation (two components), bubble dofs
    zero.  Continuous pressure: vertex evaluation.  Discontinuous P0: local
    L2 projection with the uncut element rule, i.e. the full-cell average.
    """
    mesh = system.mesh
    if space == "velocity":
        coeffs = np.zeros(system.n_velocity)
        vmask = system.v_vertex_dof >= 0
        pts = mesh.vertices[vmask]
        vals = np.asarray(field(pts), dtype=float)
        coeffs[system.v_vertex_dof[vmask]] = vals[:, 0]
        coeffs[system.v_vertex_dof[vmask] + system.n_scalar] = vals[:, 1]
        if system.pair.ku == 2:
            emask = system.v_edge_dof >= 0
            mids = 0.5 * (
                mesh.vertices[mesh.edges[emask, 0]] + mesh.vertices[mesh.edges[emask, 1]]
            )
            vals = np.asarray(field(mids), dtype=float)
            coeffs[system.v_edge_dof[emask]] = vals[:, 0]
            coeffs[system.v_edge_dof[emask] + system.n_scalar] = vals[:, 1]
        return coeffs

    if space == "pressure":
        coeffs = np.zeros(system.n_pressure)
        if system.pair.pressure_continuous:
            vmask = system.p_vertex_dof >= 0
            coeffs[system.p_vertex_dof[vmask]] = np.asarray(
                field(mesh.vertices[vmask]), dtype=float
            )
        else:
            from .quadrature import map_rule_to_triangle, reference_triangle_rule

            ref = reference_triangle_rule(4)
            for t, dofs in system.cell_dofs_p.items():
                rule = map_rule_to_triangle(ref, mesh.tri_coords(t))
                coeffs[dofs[0]] = float(
                    (rule.weights * np.asarray(field(rule.points))).sum()
                    / rule.weights.sum()
                )
        return coeffs

    raise SpaceError(f"unknown space {space!r}")
