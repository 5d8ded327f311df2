"""Assembly of every bilinear form of the stabilized unfitted Stokes method.

Velocity-velocity operators are component-diagonal, so their scalar blocks
are assembled once and expanded to two components; only the divergence and
boundary-pressure couplings mix components.  Interior elements share one
reference rule and are assembled in a single vectorized batch; cut elements
carry individual cut rules and are visited in a short loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import CUT, INTERIOR
from .quadrature import (
    QuadratureError,
    cut_surface_rule,
    cut_volume_rule,
    face_rule,
    map_rule_to_triangle,
    reference_triangle_rule,
)
from .spaces import _eval_scalar_reference


class AssemblyError(Exception):
    pass


@dataclass
class QuadConfig:
    """Quadrature selection: backend plus per-integral polynomial degrees.

    Degrees default to 2s (volume), 2s+2 (surface), 2s (face) for superspace
    degree s, which is exact for every polynomial integrand in the forms.
    """

    method: str = "subtriangulate"
    depth: int = 4
    degree_volume: int = None
    degree_surface: int = None
    degree_face: int = None

    def resolved(self, pair):
        s = pair.superspace_degree
        dv = self.degree_volume if self.degree_volume is not None else min(2 * s, 12)
        ds = self.degree_surface if self.degree_surface is not None else min(2 * s + 2, 12)
        df = self.degree_face if self.degree_face is not None else min(2 * s, 12)
        return dv, ds, df


@dataclass
class CutQuadratures:
    """Per-cut-element volume and surface rules for one (mesh, phi) pair."""

    volume: dict
    surface: dict
    method: str
    degree_volume: int
    degree_surface: int
    depth: int

    def cut_measure(self, t):
        return self.volume[t].total

    def boundary_measure(self, t):
        return self.surface[t].total


def build_cut_quadratures(mesh, cls, phi, pair=None, quad=None):
    quad = quad or QuadConfig()
    if pair is not None:
        dv, ds, _ = quad.resolved(pair)
    else:
        dv = quad.degree_volume if quad.degree_volume is not None else 4
        ds = quad.degree_surface if quad.degree_surface is not None else 6
    vol, surf = {}, {}
    for t in cls.cut_tris:
        t = int(t)
        coords = mesh.tri_coords(t)
        vol[t] = cut_volume_rule(coords, phi, method=quad.method, degree=dv, depth=quad.depth)
        surf[t] = cut_surface_rule(coords, phi, method=quad.method, degree=ds, depth=quad.depth)
    return CutQuadratures(vol, surf, quad.method, dv, ds, quad.depth)


# ----------------------------------------------------------------------
# reference basis caches
# ----------------------------------------------------------------------

_REF_CACHE = {}


def _ref_basis(degree, bubble, ref_pts, order, key=None):
    if key is not None:
        tag = (degree, bubble, order, key)
        hit = _REF_CACHE.get(tag)
        if hit is not None:
            return hit
    out = _eval_scalar_reference(degree, bubble, ref_pts, order)
    if key is not None:
        _REF_CACHE[tag] = out
    return out


def _velocity_ref(pair, ref_pts, order, key=None):
    return _ref_basis(pair.ku, pair.bubble, ref_pts, order, key)


def _pressure_ref(pair, ref_pts, order=0, key=None):
    if pair.kp == 0:
        npts = len(np.asarray(ref_pts).reshape(-1, 2))
        vals = np.ones((1, npts))
        grads = np.zeros((1, npts, 2))
        return vals, grads, None
    tag = None if key is None else ("p",) + (key,)
    return _ref_basis(1, False, ref_pts, max(order, 1), tag)


def _tri_geometry(mesh, tris):
    coords = mesh.vertices[mesh.triangles[tris]]
    J = np.stack([coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]], axis=2)
    detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    Jinv = np.empty_like(J)
    Jinv[:, 0, 0] = J[:, 1, 1]
    Jinv[:, 1, 1] = J[:, 0, 0]
    Jinv[:, 0, 1] = -J[:, 0, 1]
    Jinv[:, 1, 0] = -J[:, 1, 0]
    Jinv /= detJ[:, None, None]
    return coords, J, Jinv, np.abs(detJ)


def _symmetrize_batch(loc):
    return 0.5 * (loc + loc.transpose(0, 2, 1))


def _symmetrize(loc):
    return 0.5 * (loc + loc.T)


class _Coo:
    """Triplet accumulator for one sparse matrix."""

    def __init__(self, shape):
        self.shape = shape
        self.rows, self.cols, self.data = [], [], []

    def add_batch(self, local, rows, cols):
        """local (m, a, b), rows (m, a), cols (m, b)."""
        m, a, b = local.shape
        self.rows.append(np.repeat(rows, b, axis=1).ravel())
        self.cols.append(np.tile(cols, (1, a)).ravel())
        self.data.append(local.ravel())

    def add_local(self, local, rows, cols):
        a, b = local.shape
        self.rows.append(np.repeat(rows, b))
        self.cols.append(np.tile(cols, a))
        self.data.append(local.ravel())

    def tocsr(self):
        if not self.data:
            return sp.csr_matrix(self.shape)
        rows = np.concatenate(self.rows)
        cols = np.concatenate(self.cols)
        data = np.concatenate(self.data)
        return sp.coo_matrix((data, (rows, cols)), shape=self.shape).tocsr()


class _Vec:
    def __init__(self, n):
        self.v = np.zeros(n)

    def add_batch(self, local, rows):
        np.add.at(self.v, rows.ravel(), local.ravel())


# ----------------------------------------------------------------------
# volume assembly over a domain selection
# ----------------------------------------------------------------------

def _volume_contexts(system, cutq, domain):
    """Batched and per-element integration tasks for a volume domain.

    domain: 'omega' (physical domain, cut rules on cut elements), 'active'
    (whole active submesh, full rules), 'interior' (interior submesh).
    """
    cls = system.cls
    if domain == "omega":
        return cls.interior_tris, [(int(t), cutq.volume[int(t)]) for t in cls.cut_tris]
    if domain == "active":
        return cls.active_tris, []
    if domain == "interior":
        return cls.interior_tris, []
    raise AssemblyError(f"unknown volume domain {domain!r}")


def assemble_volume(system, domain, degree, cutq=None, need=("K",),
                    body_force=None, tri_coeff=None, tris_override=None):
    """Scalar volume operators over `domain`.

    need may contain 'K' (grad-grad), 'M' (mass), 'B' (pressure vs velocity
    divergence blocks Bx, By), 'Mp' (pressure mass), 'Kp' (pressure
    grad-grad, scaled by tri_coeff), 'load' (body force against velocity).
    Returns a dict of CSR matrices / arrays.
    """
    mesh, pair = system.mesh, system.pair
    ns, npp = system.n_scalar, system.n_pressure
    batch_tris, custom = _volume_contexts(system, cutq, domain)
    if tris_override is not None:
        batch_tris = np.asarray(tris_override, dtype=np.int64)
        custom = []

    out = {}
    acc = {}
    for key, shape in (
        ("K", (ns, ns)), ("M", (ns, ns)),
        ("Bx", (npp, ns)), ("By", (npp, ns)),
        ("Mp", (npp, npp)), ("Kp", (npp, npp)),
    ):
        if key in need or (key in ("Bx", "By") and "B" in need):
            acc[key] = _Coo(shape)
    if "load" in need:
        fx, fy = _Vec(ns), _Vec(ns)

    ref = reference_triangle_rule(degree)
    ref_pts, ref_w = ref.points, ref.weights
    order = 1
    vals, grads, _ = _velocity_ref(pair, ref_pts, order, key=("vol", degree))
    pvals, pgrads, _ = _pressure_ref(pair, ref_pts, 1, key=("vol", degree))

    def accumulate(tris, G, Pg, w_eff, coords0, Jmat):
        """G: (m, nb, nq, 2) physical gradients; w_eff: (m, nq) weights."""
        rows_v = np.stack([system.cell_dofs_v[int(t)] for t in tris])
        rows_p = np.stack([system.cell_dofs_p[int(t)] for t in tris])
        if "K" in acc:
            loc = np.einsum("eiqa,ejqa,eq->eij", G, G, w_eff, optimize=True)
            acc["K"].add_batch(_symmetrize_batch(loc), rows_v, rows_v)
        if "M" in acc:
            loc = np.einsum("iq,jq,eq->eij", vals, vals, w_eff, optimize=True)
            acc["M"].add_batch(_symmetrize_batch(loc), rows_v, rows_v)
        if "Bx" in acc:
            locx = np.einsum("pq,ejq,eq->epj", pvals, G[..., 0], w_eff, optimize=True)
            locy = np.einsum("pq,ejq,eq->epj", pvals, G[..., 1], w_eff, optimize=True)
            acc["Bx"].add_batch(locx, rows_p, rows_v)
            acc["By"].add_batch(locy, rows_p, rows_v)
        if "Mp" in acc:
            loc = np.einsum("pq,rq,eq->epr", pvals, pvals, w_eff, optimize=True)
            acc["Mp"].add_batch(_symmetrize_batch(loc), rows_p, rows_p)
        if "Kp" in acc:
            loc = np.einsum("epqa,erqa,eq->epr", Pg, Pg, w_eff, optimize=True)
            acc["Kp"].add_batch(_symmetrize_batch(loc), rows_p, rows_p)
        if "load" in need:
            X = coords0[:, None, :] + np.einsum("qc,eac->eqa", ref_pts, Jmat)
            F = np.asarray(body_force(X), dtype=float) if body_force else np.zeros(X.shape)
            fx.add_batch(np.einsum("iq,eq,eq->ei", vals, F[..., 0], w_eff), rows_v)
            fy.add_batch(np.einsum("iq,eq,eq->ei", vals, F[..., 1], w_eff), rows_v)

    if len(batch_tris):
        tris = np.asarray(batch_tris, dtype=np.int64)
        coords, J, Jinv, detJ = _tri_geometry(mesh, tris)
        G = np.einsum("eca,iqc->eiqa", Jinv, grads, optimize=True)
        Pg = np.einsum("eca,pqc->epqa", Jinv, pgrads, optimize=True) if "Kp" in acc else None
        w_eff = ref_w[None, :] * detJ[:, None]
        if tri_coeff is not None:
            w_eff = w_eff * tri_coeff(tris)[:, None]
        accumulate(tris, G, Pg, w_eff, coords[:, 0], J)

    for t, rule in custom:
        if len(rule) == 0:
            continue
        coords, J, Jinv, detJ = _tri_geometry(mesh, np.array([t]))
        rp = (rule.points - coords[0, 0]) @ Jinv[0].T
        v, g, _ = _eval_scalar_reference(pair.ku, pair.bubble, rp, 1)
        pv, pg, _ = _pressure_ref(pair, rp, 1)
        Gl = np.einsum("ca,iqc->iqa", Jinv[0], g)
        w_eff = rule.weights.copy()
        if tri_coeff is not None:
            w_eff = w_eff * float(tri_coeff(np.array([t]))[0])
        rows_v = system.cell_dofs_v[t]
        rows_p = system.cell_dofs_p[t]
        if "K" in acc:
            acc["K"].add_local(_symmetrize(np.einsum("iqa,jqa,q->ij", Gl, Gl, w_eff)), rows_v, rows_v)
        if "M" in acc:
            acc["M"].add_local(_symmetrize(np.einsum("iq,jq,q->ij", v, v, w_eff)), rows_v, rows_v)
        if "Bx" in acc:
            acc["Bx"].add_local(np.einsum("pq,jq,q->pj", pv, Gl[..., 0], w_eff), rows_p, rows_v)
            acc["By"].add_local(np.einsum("pq,jq,q->pj", pv, Gl[..., 1], w_eff), rows_p, rows_v)
        if "Mp" in acc:
            acc["Mp"].add_local(_symmetrize(np.einsum("pq,rq,q->pr", pv, pv, w_eff)), rows_p, rows_p)
        if "Kp" in acc:
            Pgl = np.einsum("ca,pqc->pqa", Jinv[0], pg)
            acc["Kp"].add_local(_symmetrize(np.einsum("pqa,rqa,q->pr", Pgl, Pgl, w_eff)), rows_p, rows_p)
        if "load" in need:
            F = np.asarray(body_force(rule.points), dtype=float) if body_force else np.zeros((len(rule), 2))
            np.add.at(fx.v, rows_v, np.einsum("iq,q,q->i", v, F[:, 0], w_eff))
            np.add.at(fy.v, rows_v, np.einsum("iq,q,q->i", v, F[:, 1], w_eff))

    for key, a in acc.items():
        out[key] = a.tocsr()
    if "load" in need:
        out["load"] = np.concatenate([fx.v, fy.v])
    return out


# ----------------------------------------------------------------------
# boundary (Nitsche) terms on T∩Γ
# ----------------------------------------------------------------------

def assemble_nitsche(system, cutq):
    """Scalar consistency matrix Sn, scalar boundary penalty mass Mj with the
    1/h_T weight, and the boundary pressure coupling blocks (Rx, Ry)."""
    mesh, cls, pair = system.mesh, system.cls, system.pair
    ns, npp = system.n_scalar, system.n_pressure
    Sn = _Coo((ns, ns))
    Mj = _Coo((ns, ns))
    Rx = _Coo((npp, ns))
    Ry = _Coo((npp, ns))
    for t in cls.cut_tris:
        t = int(t)
        rule = cutq.surface[t]
        if len(rule) == 0:
            continue
        coords, J, Jinv, _ = _tri_geometry(mesh, np.array([t]))
        rp = (rule.points - coords[0, 0]) @ Jinv[0].T
        v, g, _ = _eval_scalar_reference(pair.ku, pair.bubble, rp, 1)
        G = np.einsum("ca,iqc->iqa", Jinv[0], g)
        dn = np.einsum("iqa,qa->iq", G, rule.normals)
        w = rule.weights
        rows_v = system.cell_dofs_v[t]
        rows_p = system.cell_dofs_p[t]
        cross = np.einsum("iq,jq,q->ij", dn, v, w)
        Sn.add_local(-(cross + cross.T), rows_v, rows_v)
        Mj.add_local(_symmetrize(np.einsum("iq,jq,q->ij", v, v, w)) / mesh.h_tri[t], rows_v, rows_v)
        pv, _, _ = _pressure_ref(pair, rp, 0)
        Rx.add_local(np.einsum("pq,jq,q->pj", pv, v, w * rule.normals[:, 0]), rows_p, rows_v)
        Ry.add_local(np.einsum("pq,jq,q->pj", pv, v, w * rule.normals[:, 1]), rows_p, rows_v)
    return Sn.tocsr(), Mj.tocsr(), Rx.tocsr(), Ry.tocsr()


# ----------------------------------------------------------------------
# face-jump operators
# ----------------------------------------------------------------------

def _normal_derivative(system, t, pts, normal, ell, space):
    """Order-ell derivative of the shape functions along `normal` at pts."""
    from .spaces import evaluate_basis

    vals, grads, hess = evaluate_basis(system, t, pts, order=min(ell, 2), space=space)
    if ell == 0:
        return vals
    if ell == 1:
        return np.einsum("iqa,a->iq", grads, normal)
    if ell == 2:
        return np.einsum("iqab,a,b->iq", hess, normal, normal)
    raise AssemblyError(f"jump order {ell} not supported")


def _face_jump_matrix(system, faces, terms, space, degree, shape):
    """sum_F sum_(ell,w) w(h_F) int_F [d^ell u][d^ell v] over the given faces.

    terms: list of (ell, weight_fn(h_F)).  Orientation uses the canonical
    edge normal for both sides, so the squared jump is orientation-free.
    """
    mesh = system.mesh
    acc = _Coo(shape)
    dofs_of = system.cell_dofs_v if space == "velocity" else system.cell_dofs_p
    for e in faces:
        e = int(e)
        t0, t1 = (int(x) for x in mesh.edge_tris[e])
        if t1 < 0:
            raise AssemblyError(f"face {e} has a single incident triangle")
        a, b = mesh.vertices[mesh.edges[e]]
        hF = mesh.edge_lengths[e]
        rule = face_rule(a, b, degree)
        n = mesh.edge_normals[e]
        d0 = dofs_of[t0]
        d1 = dofs_of[t1]
        gdofs = np.concatenate([d0, d1])
        for ell, wfn in terms:
            j0 = _normal_derivative(system, t0, rule.points, n, ell, space)
            j1 = _normal_derivative(system, t1, rule.points, n, ell, space)
            jump = np.concatenate([j0, -j1], axis=0)  # (2nloc, nq)
            loc = np.einsum("iq,jq,q->ij", jump, jump, rule.weights) * wfn(hF)
            acc.add_local(_symmetrize(loc), gdofs, gdofs)
    # shared dofs of the two sides scatter duplicate index pairs whose
    # summation order differs between (i,j) and (j,i); fold them exactly
    M = acc.tocsr()
    return 0.5 * (M + M.T).tocsr()


def assemble_ghost_penalty(system, degree=None):
    """Scalar ghost-penalty matrix: normal-derivative jumps of orders
    1..penalty_order on ghost faces, weighted h_F^(2l-1)."""
    pair = system.pair
    degree = degree if degree is not None else min(2 * pair.superspace_degree, 12)
    terms = [(ell, (lambda l: (lambda h: h ** (2 * l - 1)))(ell))
             for ell in range(1, pair.penalty_order + 1)]
    ns = system.n_scalar
    return _face_jump_matrix(system, system.cls.faces_ghost, terms, "velocity", degree, (ns, ns))


def assemble_pressure_jump(system, degree=None):
    """Pressure jump stabilizer: jumps of orders 0..kp on ghost faces,
    weighted h_F^(1+2l); the order-0 term is skipped for continuous
    pressure where it vanishes identically."""
    pair = system.pair
    degree = degree if degree is not None else min(2 * max(pair.kp, 1), 12)
    terms = []
    for ell in range(0, pair.kp + 1):
        if ell == 0 and pair.pressure_continuous:
            continue
        terms.append((ell, (lambda l: (lambda h: h ** (1 + 2 * l)))(ell)))
    npp = system.n_pressure
    if not terms:
        return sp.csr_matrix((npp, npp))
    return _face_jump_matrix(system, system.cls.faces_ghost, terms, "pressure", degree, (npp, npp))


def assemble_pressure_face_l2(system, faces, degree=None):
    """sum_F h_F int_F [q][p] over the given faces (zero for continuous pressure)."""
    pair = system.pair
    npp = system.n_pressure
    if pair.pressure_continuous:
        return sp.csr_matrix((npp, npp))
    degree = degree if degree is not None else min(2 * max(pair.kp, 1), 12)
    return _face_jump_matrix(
        system, faces, [(0, lambda h: h)], "pressure", degree, (npp, npp)
    )


# ----------------------------------------------------------------------
# assembled system and norm Grams
# ----------------------------------------------------------------------

def _expand2(M):
    """Scalar operator -> block-diagonal two-component operator."""
    return sp.block_diag([M, M], format="csr")


@dataclass
class AssembledSaddleSystem:
    A: sp.csr_matrix            # velocity block of the method
    B: sp.csr_matrix            # pressure-velocity block b_h
    J: sp.csr_matrix            # pressure stabilizer as it enters the method
    f: np.ndarray
    c: np.ndarray               # interior mean functional of pressure dofs
    eta: float
    gamma_g: float
    gamma_p: float
    B_div: sp.csr_matrix = None   # (q, div v) over the physical domain
    B_r: sp.csr_matrix = None     # boundary coupling int_Gamma p v.n

    @property
    def n_velocity(self):
        return self.A.shape[0]

    @property
    def n_pressure(self):
        return self.B.shape[0]

    def saddle_matrix(self):
        """[[A, B^T], [B, -J]] without the mean constraint."""
        return sp.bmat([[self.A, self.B.T], [self.B, -self.J]], format="csr")

    def constrained_matrix(self):
        """Saddle matrix bordered by the interior pressure-mean constraint."""
        nu = self.n_velocity
        c_col = sp.csr_matrix(
            (self.c, (np.arange(len(self.c)) + nu, np.zeros(len(self.c), dtype=int))),
            shape=(nu + len(self.c), 1),
        )
        K = self.saddle_matrix()
        return sp.bmat([[K, c_col], [c_col.T, None]], format="csc")

    def rhs(self):
        n = self.n_velocity + self.n_pressure
        out = np.zeros(n + 1)
        out[: self.n_velocity] = self.f
        return out


@dataclass
class NormGrams:
    """Gram matrices of the mesh-dependent norms plus their scalar blocks."""

    G_V: sp.csr_matrix            # velocity norm: H1(Omega) + boundary + ghost
    G_H1i: sp.csr_matrix          # full H1 norm on the interior submesh (velocity)
    M_omega_p: sp.csr_matrix      # pressure L2(Omega) mass
    M_i_p: sp.csr_matrix          # pressure L2(interior) mass
    N_i: sp.csr_matrix = None     # scaled pressure seminorm, interior
    N_e: sp.csr_matrix = None     # scaled pressure seminorm, active submesh
    J_raw: sp.csr_matrix = None   # unscaled pressure jump stabilizer
    # scalar velocity blocks
    K_omega_s: sp.csr_matrix = None
    K_active_s: sp.csr_matrix = None
    K_interior_s: sp.csr_matrix = None
    M_interior_s: sp.csr_matrix = None
    Jg_s: sp.csr_matrix = None
    Mj_s: sp.csr_matrix = None
    Sn_s: sp.csr_matrix = None


def assemble_all(system, phi, quad=None, eta=20.0, gamma_g=1.0, gamma_p=1.0,
                 body_force=None, cutq=None, with_norm_grams=True,
                 with_pressure_seminorms=True):
    """One-pass assembly of the saddle system and the norm Grams."""
    quad = quad or QuadConfig()
    pair = system.pair
    dv, dsurf, dface = quad.resolved(pair)
    if cutq is None:
        cutq = build_cut_quadratures(system.mesh, system.cls, phi, pair, quad)

    need = ("K", "B")
    if body_force is not None:
        need += ("load",)
    if with_norm_grams:
        need += ("Mp",)
    omega = assemble_volume(system, "omega", dv, cutq, need=need, body_force=body_force)
    K_omega_s = omega["K"]
    B_div = sp.hstack([omega["Bx"], omega["By"]], format="csr")
    f = omega.get("load", np.zeros(system.n_velocity))

    Sn_s, Mj_s, Rx, Ry = assemble_nitsche(system, cutq)
    B_r = sp.hstack([Rx, Ry], format="csr")
    Jg_s = assemble_ghost_penalty(system, degree=dface)
    J_raw = assemble_pressure_jump(system)

    A_s = K_omega_s + Sn_s + gamma_g * Jg_s + eta * Mj_s
    A = _expand2(A_s)
    B = -B_div + B_r

    interior = assemble_volume(system, "interior", dv, cutq, need=("Mp",))
    M_i_p = interior["Mp"]
    c = np.asarray(M_i_p.sum(axis=1)).ravel()

    sys_ = AssembledSaddleSystem(
        A=A, B=B, J=gamma_p * J_raw, f=f, c=c,
        eta=eta, gamma_g=gamma_g, gamma_p=gamma_p,
        B_div=B_div, B_r=B_r,
    )

    grams = None
    if with_norm_grams:
        int_km = assemble_volume(system, "interior", dv, cutq, need=("K", "M"))
        G_V_s = K_omega_s + Mj_s + Jg_s
        grams = NormGrams(
            G_V=_expand2(G_V_s),
            G_H1i=_expand2(int_km["K"] + int_km["M"]),
            M_omega_p=omega["Mp"],
            M_i_p=M_i_p,
            J_raw=J_raw,
            K_omega_s=K_omega_s,
            K_interior_s=int_km["K"],
            M_interior_s=int_km["M"],
            Jg_s=Jg_s,
            Mj_s=Mj_s,
            Sn_s=Sn_s,
        )
        if with_pressure_seminorms:
            h2 = lambda tris: system.mesh.h_tri[tris] ** 2
            n_i_vol = assemble_volume(system, "interior", dv, cutq, need=("Kp",), tri_coeff=h2)
            n_e_vol = assemble_volume(system, "active", dv, cutq, need=("Kp",), tri_coeff=h2)
            grams.N_i = n_i_vol["Kp"] + assemble_pressure_face_l2(system, system.cls.faces_interior)
            grams.N_e = n_e_vol["Kp"] + assemble_pressure_face_l2(system, system.cls.faces_active)
        grams.K_active_s = assemble_volume(system, "active", dv, cutq, need=("K",))["K"]

    return sys_, grams, cutq


def dump_matrix(path, M):
    """Coordinate text dump `row col value`, 17 significant digits."""
    M = sp.coo_matrix(M)
    with open(path, "w") as fh:
        fh.write(f"{M.shape[0]} {M.shape[1]} {M.nnz}\n")
        for r, c, v in zip(M.row, M.col, M.data):
            fh.write(f"{r} {c} {v:.17g}\n")
