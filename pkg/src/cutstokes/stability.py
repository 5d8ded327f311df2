"""Eigenvalue measurements of the stability constants of the unfitted method.

Every constant is a generalized Rayleigh-quotient extremum.  Pressure-space
pencils (interior inf-sup, its scaled-seminorm variant, the stabilized
pressure bound) are reduced to dense symmetric form through a Schur
complement; velocity-space pencils (coercivity, norm transfer) differ from
their Gram by a matrix supported near the cut strip, so their spectrum is
{1} union a compressed pencil on the strip dofs, which is solved densely and
exactly.  The proof-device constructions (discrete pressure extension, nodal
velocity decomposition, cut trace inequality, neighbor norm equivalence) are
executable and their constants are measured the same way.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .forms import (
    QuadConfig,
    assemble_pressure_face_l2,
    assemble_volume,
    _expand2,
)
from .quadrature import map_rule_to_triangle, reference_triangle_rule
from .solver import SPDFactor


class StabilityError(Exception):
    pass


# ----------------------------------------------------------------------
# linear-algebra helpers
# ----------------------------------------------------------------------

def _sym(M):
    return 0.5 * (M + M.T)


def _complement_basis(constraints, n):
    """Orthonormal basis of the orthogonal complement of the constraint rows."""
    C = np.atleast_2d(np.asarray(constraints, dtype=float))
    norms = np.linalg.norm(C, axis=1)
    C = C[norms > 0.0]
    if len(C) == 0:
        return np.eye(n)
    Q, _ = np.linalg.qr(C.T, mode="complete")
    return Q[:, len(C):]


def _schur_complement(B_rows, G_factor):
    """S = B G^-1 B^T for a (possibly sparse) row block B."""
    Bd = np.asarray(B_rows.todense() if sp.issparse(B_rows) else B_rows)
    X = G_factor.solve(Bd.T)
    return _sym(Bd @ X)


def _deflated_min_eig(S, M, constraints):
    """Smallest eigenvalue of S q = lam M q restricted to the complement of
    the constraint rows; returns None when the complement is trivial."""
    Z = _complement_basis(constraints, S.shape[0])
    if Z.shape[1] == 0:
        return None
    A = _sym(Z.T @ S @ Z)
    B = _sym(Z.T @ M @ Z)
    vals = sla.eigh(A, B, eigvals_only=True, subset_by_index=[0, 0])
    return float(vals[0])


def _deflated_max_eig(S, M, constraints):
    Z = _complement_basis(constraints, S.shape[0])
    if Z.shape[1] == 0:
        return None
    A = _sym(Z.T @ S @ Z)
    B = _sym(Z.T @ M @ Z)
    n = A.shape[0]
    vals = sla.eigh(A, B, eigvals_only=True, subset_by_index=[n - 1, n - 1])
    return float(vals[0])


def _solve_columns(factor, n, cols, chunk=256):
    """Rows `cols` of factor^-1 restricted to unit right-hand sides `cols`."""
    m = len(cols)
    H = np.empty((m, m))
    for start in range(0, m, chunk):
        idx = cols[start:start + chunk]
        rhs = np.zeros((n, len(idx)))
        rhs[idx, np.arange(len(idx))] = 1.0
        X = factor.solve(rhs)
        H[:, start:start + len(idx)] = X[cols]
    return _sym(H)


class _BorderedSolver:
    """Solves (B + (alpha/n) 1 1^T) x = b through a sparse bordered system,
    used to invert Grams whose kernel is the constant vector."""

    def __init__(self, B, alpha):
        n = B.shape[0]
        u = sp.csc_matrix(np.ones((n, 1)))
        corner = sp.csc_matrix(np.array([[-n / alpha]]))
        K = sp.bmat([[B, u], [u.T, corner]], format="csc")
        self._lu = spla.splu(K)
        self._n = n

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        one_d = rhs.ndim == 1
        R = rhs.reshape(self._n, -1)
        Rb = np.vstack([R, np.zeros((1, R.shape[1]))])
        X = self._lu.solve(Rb)[: self._n]
        return X[:, 0] if one_d else X


def _lowrank_pencil_eigs(A, B, B_solver=None, deflate_constants=False):
    """All nontrivial eigenvalues of (A, B) when R = A - B has local support.

    The pencil spectrum is {1} union {1 + mu} with mu the nonzero eigenvalues
    of (R, B); those are computed exactly on the support of R.  With
    deflate_constants=True the (shared) constant kernel of A and B is
    projected out through a rank-one bordered solver.
    """
    R = sp.csr_matrix(A - B)
    R.eliminate_zeros()
    n = R.shape[0]
    mask = np.unique(np.concatenate([R.nonzero()[0], R.nonzero()[1]]))
    if len(mask) == 0:
        return np.zeros(0)
    if B_solver is None:
        if deflate_constants:
            alpha = float(np.mean(B.diagonal()))
            B_solver = _BorderedSolver(sp.csc_matrix(B), alpha)
        else:
            B_solver = SPDFactor(B, dense_cutoff=0, check=False)
    H = _solve_columns(B_solver, n, mask)
    R_hat = np.asarray(R[np.ix_(mask, mask)].todense())
    L = np.linalg.cholesky(H)
    M = _sym(L.T @ R_hat @ L)
    return np.linalg.eigvalsh(M)


def compute_c0(A, G_V):
    """Coercivity constant: smallest eigenvalue of A v = lam G_V v.

    Signed: negative when the boundary terms defeat coercivity.  Exploits
    that A - G_V is supported on cut-strip dofs.
    """
    mus = _lowrank_pencil_eigs(A, G_V)
    if len(mus) == 0:
        return 1.0
    return 1.0 + min(0.0, float(mus.min()))


def norm_transfer_constant(K_active, K_omega, Jg):
    """Largest lam with |grad v|^2 over the active submesh <= lam (|grad v|^2
    over the physical domain + ghost penalty); constants are deflated."""
    B = sp.csr_matrix(K_omega + Jg)
    mus = _lowrank_pencil_eigs(sp.csr_matrix(K_active), B, deflate_constants=True)
    if len(mus) == 0:
        return 1.0
    return 1.0 + max(0.0, float(mus.max()))


# ----------------------------------------------------------------------
# interior inf-sup constants (theta, beta)
# ----------------------------------------------------------------------

def _interior_component_tris(system):
    """Connected components of the interior submesh (across shared faces)."""
    cls = system.cls
    tris = cls.interior_tris
    if len(tris) == 0:
        raise StabilityError("interior submesh is empty")
    index = {int(t): i for i, t in enumerate(tris)}
    rows, cols = [], []
    for e in cls.faces_interior:
        t0, t1 = (int(x) for x in system.mesh.edge_tris[e])
        rows.append(index[t0]); cols.append(index[t1])
    adj = sp.coo_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(len(tris), len(tris))
    )
    ncomp, labels = connected_components(adj, directed=False)
    return [tris[labels == k] for k in range(ncomp)]


@dataclass
class InfSupResult:
    theta: float
    beta: float
    n_components: int
    dims: list


def _component_masks(system, comp_tris):
    comp_set = set(int(t) for t in comp_tris)
    vdofs = set()
    pdofs = set()
    for t in comp_set:
        vdofs.update(int(d) for d in system.cell_dofs_v[t])
        pdofs.update(int(d) for d in system.cell_dofs_p[t])
    vmask = np.array(sorted(d for d in vdofs if system.vmask_scalar[d]), dtype=np.int64)
    pmask = np.array(sorted(pdofs), dtype=np.int64)
    return vmask, pmask


def interior_infsup(system, quad=None) -> InfSupResult:
    """Interior inf-sup constants per connected component of the interior
    submesh: theta against the pressure L2 norm, beta against the scaled
    pressure seminorm; the minima over components are reported.

    theta is +inf when the mean-deflated interior pressure space is trivial.
    """
    quad = quad or QuadConfig()
    dv, _, _ = quad.resolved(system.pair)
    comps = _interior_component_tris(system)
    thetas, betas, dims = [], [], []

    for comp in comps:
        vscal, pmask = _component_masks(system, comp)
        if len(vscal) == 0:
            raise StabilityError(
                "interior velocity subspace is empty; the mesh is too coarse"
            )
        # tri_coeff applies to every requested matrix, so the h^2-scaled
        # pressure stiffness is assembled separately from the plain blocks
        vol = assemble_volume(system, "interior", dv, need=("Kp",),
                              tri_coeff=lambda tris: system.mesh.h_tri[tris] ** 2,
                              tris_override=comp)
        vol_plain = assemble_volume(system, "interior", dv, need=("B", "Mp", "K", "M"),
                                    tris_override=comp)
        B_div = sp.hstack([vol_plain["Bx"], vol_plain["By"]], format="csr")
        M_i = vol_plain["Mp"]
        G_s = vol_plain["K"] + vol_plain["M"]
        N_i = vol["Kp"] + assemble_pressure_face_l2(
            system, _faces_within(system, comp)
        )

        ns = system.n_scalar
        vstack = np.concatenate([vscal, vscal + ns])
        G = _expand2(G_s)[np.ix_(vstack, vstack)]
        B_i = B_div[pmask][:, vstack]
        M_ii = np.asarray(M_i[np.ix_(pmask, pmask)].todense())
        N_ii = np.asarray(N_i[np.ix_(pmask, pmask)].todense())

        factor = SPDFactor(sp.csc_matrix(G), dense_cutoff=800)
        S = _schur_complement(B_i, factor)

        mean = M_ii @ np.ones(len(pmask))
        lam = _deflated_min_eig(S, M_ii, mean)
        thetas.append(math.inf if lam is None else math.sqrt(max(lam, 0.0)))

        lam_b = _deflated_min_eig(S, N_ii, np.ones(len(pmask)))
        betas.append(math.inf if lam_b is None else math.sqrt(max(lam_b, 0.0)))
        dims.append({"nv": len(vstack), "np": len(pmask)})

    return InfSupResult(
        theta=min(thetas), beta=min(betas), n_components=len(comps), dims=dims
    )


def _faces_within(system, comp_tris):
    comp = set(int(t) for t in comp_tris)
    faces = []
    for e in system.cls.faces_interior:
        t0, t1 = (int(x) for x in system.mesh.edge_tris[e])
        if t0 in comp and t1 in comp:
            faces.append(e)
    return np.asarray(faces, dtype=np.int64)


def compute_theta(system, quad=None):
    return interior_infsup(system, quad).theta


def compute_beta(system, quad=None):
    return interior_infsup(system, quad).beta


# ----------------------------------------------------------------------
# stabilized pressure bound and full saddle constant
# ----------------------------------------------------------------------

def compute_cb_lower(saddle, grams):
    """Lower bound for the stabilized pressure inf-sup constant:
    sqrt(lam_min+) of (B G_V^-1 B^T + J) q = lam M_Omega q on interior
    mean-zero pressures.

    Computed through the flipped pencil (M vs S+J) whose matrices stay well
    conditioned for arbitrarily thin cuts; sqrt(a)+sqrt(b) >= sqrt(a+b) makes
    the result a rigorous lower bound of the additive-form constant.
    """
    factor = SPDFactor(sp.csc_matrix(grams.G_V), dense_cutoff=800)
    S = _schur_complement(saddle.B, factor)
    D = S + np.asarray(saddle.J.todense())
    M = np.asarray(grams.M_omega_p.todense())
    mu = _deflated_max_eig(M, D, saddle.c)
    if mu is None:
        return math.inf
    if mu <= 0.0:
        return math.inf
    return 1.0 / math.sqrt(mu)


def compute_cs(saddle, grams, dense_cutoff=4000):
    """Smallest |lam| of the full method pencil against the product-norm Gram,
    restricted to interior mean-zero pressures via the bordered constraint."""
    G_prod = sp.block_diag(
        [grams.G_V, grams.M_omega_p + grams.J_raw], format="csr"
    )
    n = G_prod.shape[0]
    K = sp.bmat(
        [[saddle.A, saddle.B.T], [saddle.B, -saddle.J]], format="csr"
    )
    if n <= dense_cutoff:
        chat = np.concatenate([np.zeros(saddle.n_velocity), saddle.c])
        Z = _complement_basis(chat, n)
        A = _sym(Z.T @ (K @ Z))
        B = _sym(Z.T @ (G_prod @ Z))
        vals = sla.eigh(A, B, eigvals_only=True)
        return float(np.min(np.abs(vals)))

    K_con = saddle.constrained_matrix()
    G_aug = sp.block_diag([G_prod, sp.csr_matrix((1, 1))], format="csr")
    vals = spla.eigsh(
        K_con, k=1, M=G_aug, sigma=0.0, which="LM", return_eigenvectors=False,
    )
    return float(abs(vals[0]))


# ----------------------------------------------------------------------
# discrete pressure extension
# ----------------------------------------------------------------------

def _disc_pressure_layout(system):
    nloc = 1 if system.pair.kp == 0 else 3
    active = [int(t) for t in system.cls.active_tris]
    offsets = {t: i * nloc for i, t in enumerate(active)}
    return active, offsets, nloc


def extension_matrix(system):
    """Sparse map from background pressure dofs to the elementwise-polynomial
    extension: cut elements take the polynomial of their anchor element,
    interior elements keep their own restriction."""
    cls = system.cls
    if cls.kt is None:
        raise StabilityError("anchor map missing; run assign_kt first")
    mesh = system.mesh
    active, offsets, nloc = _disc_pressure_layout(system)
    rows, cols, data = [], [], []
    for t in active:
        src = int(cls.kt[t])
        if src < 0:
            raise StabilityError(f"no anchor for cut triangle {t}")
        src_dofs = system.cell_dofs_p[src]
        if system.pair.kp == 0:
            rows.append(offsets[t])
            cols.append(src_dofs[0])
            data.append(1.0)
        else:
            # values of the anchor's linear polynomial at this element's vertices
            sc = mesh.tri_coords(src)
            T = np.stack([sc[1] - sc[0], sc[2] - sc[0]], axis=1)
            Tinv = np.linalg.inv(T)
            loc = (mesh.tri_coords(t) - sc[0]) @ Tinv.T
            lam = np.stack([1.0 - loc[:, 0] - loc[:, 1], loc[:, 0], loc[:, 1]], axis=1)
            for v in range(3):
                for j in range(3):
                    rows.append(offsets[t] + v)
                    cols.append(int(src_dofs[j]))
                    data.append(lam[v, j])
    ndisc = len(active) * nloc
    return sp.coo_matrix(
        (data, (rows, cols)), shape=(ndisc, system.n_pressure)
    ).tocsr()


def disc_seminorm_matrix(system):
    """Scaled seminorm Gram on the discontinuous per-element pressure space
    over the active submesh: elementwise h^2 |grad q|^2 plus h-weighted value
    jumps across active faces."""
    mesh, cls = system.mesh, system.cls
    active, offsets, nloc = _disc_pressure_layout(system)
    ndisc = len(active) * nloc
    rows, cols, data = [], [], []

    if system.pair.kp == 1:
        for t in active:
            coords = mesh.tri_coords(t)
            J = np.stack([coords[1] - coords[0], coords[2] - coords[0]], axis=1)
            Jinv = np.linalg.inv(J)
            g = np.einsum("ca,ic->ia", Jinv, np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]))
            area = abs(np.linalg.det(J)) / 2.0
            loc = (mesh.h_tri[t] ** 2) * area * (g @ g.T)
            base = offsets[t]
            for i in range(3):
                for j in range(3):
                    rows.append(base + i); cols.append(base + j); data.append(loc[i, j])

    # face jumps of values (both pressure orders)
    from .quadrature import face_rule
    from .spaces import physical_to_reference

    for e in cls.faces_active:
        t0, t1 = (int(x) for x in mesh.edge_tris[e])
        a, b = mesh.vertices[mesh.edges[e]]
        hF = mesh.edge_lengths[e]
        rule = face_rule(a, b, 2)
        side_vals = []
        gdofs = []
        for t in (t0, t1):
            if nloc == 1:
                side_vals.append(np.ones((1, len(rule))))
                gdofs.append(np.array([offsets[t]]))
            else:
                ref = physical_to_reference(mesh, t, rule.points)
                lam = np.stack([1.0 - ref[:, 0] - ref[:, 1], ref[:, 0], ref[:, 1]], axis=1).T
                side_vals.append(lam)
                gdofs.append(offsets[t] + np.arange(3))
        jump = np.concatenate([side_vals[0], -side_vals[1]], axis=0)
        dof = np.concatenate(gdofs)
        loc = hF * np.einsum("iq,jq,q->ij", jump, jump, rule.weights)
        for i in range(len(dof)):
            for j in range(len(dof)):
                rows.append(dof[i]); cols.append(dof[j]); data.append(loc[i, j])

    return sp.coo_matrix((data, (rows, cols)), shape=(ndisc, ndisc)).tocsr()


def build_extension(system, q, grams, E=None, N_disc=None):
    """Extend pressure coefficients q and report the seminorm ratio
    |Eq| over the active submesh vs |q| over the interior submesh."""
    q = np.asarray(q, dtype=float)
    if len(q) != system.n_pressure:
        raise StabilityError("coefficient vector does not match the pressure space")
    E = extension_matrix(system) if E is None else E
    N_disc = disc_seminorm_matrix(system) if N_disc is None else N_disc
    qd = E @ q
    num = float(qd @ (N_disc @ qd))
    den = float(q @ (grams.N_i @ q))
    scale = max(abs(N_disc).max(), 1.0)
    if den <= 1e-28 * scale:
        ratio = 0.0 if num <= 1e-24 * scale else math.inf
    else:
        ratio = math.sqrt(max(num, 0.0) / den)
    return qd, ratio


def extension_constant(system, grams):
    """Exact sup of the extension seminorm ratio over the masked pressure
    space (per-component constants deflated)."""
    E = extension_matrix(system)
    N_disc = disc_seminorm_matrix(system)
    pdofs = np.nonzero(system.pmask)[0]
    Num = (E.T @ N_disc @ E)[np.ix_(pdofs, pdofs)].todense()
    Den = grams.N_i[np.ix_(pdofs, pdofs)].todense()
    comps = _interior_component_tris(system)
    constraints = []
    for comp in comps:
        _, pmask_c = _component_masks(system, comp)
        vec = np.zeros(system.n_pressure)
        vec[pmask_c] = 1.0
        constraints.append(vec[pdofs])
    lam = _deflated_max_eig(np.asarray(Num), np.asarray(Den), np.array(constraints))
    if lam is None:
        return math.inf
    return math.sqrt(max(lam, 0.0))


# ----------------------------------------------------------------------
# nodal decomposition of piecewise-linear velocities
# ----------------------------------------------------------------------

def _p1_mass_value(mesh, t, w):
    """Integral of the squared P1 function with vertex values w over t."""
    area = mesh.areas[t]
    return area / 12.0 * (np.sum(w * w) + np.sum(w) ** 2)


def cut_vertex_flags(system):
    mesh, cls = system.mesh, system.cls
    flags = np.zeros(mesh.n_vertices, dtype=bool)
    if len(cls.cut_tris):
        flags[np.unique(mesh.triangles[cls.cut_tris])] = True
    return flags


def build_decomposition(system, v):
    """Split P1 vertex coefficients as v = pi1 + pi2 where pi2 keeps the
    nodal values at vertices of cut elements and vanishes at all others.

    Returns (pi1, pi2, ratio) with ratio the quotient of the two h^-2 scaled
    squared sums (over the widened cut strip vs the cut elements)."""
    mesh, cls = system.mesh, system.cls
    active_verts = np.nonzero(system.v_vertex_dof >= 0)[0]
    v = np.asarray(v, dtype=float)
    if v.shape != (len(active_verts),):
        raise StabilityError(
            f"expected P1 coefficients for {len(active_verts)} active vertices, "
            f"got shape {v.shape}"
        )
    vert_vals = np.zeros(mesh.n_vertices)
    vert_vals[active_verts] = v

    flags = cut_vertex_flags(system)
    pi2_vals = np.where(flags, vert_vals, 0.0)
    pi1_vals = vert_vals - pi2_vals

    num = sum(
        _p1_mass_value(mesh, int(t), pi2_vals[mesh.triangles[int(t)]]) / mesh.h_tri[int(t)] ** 2
        for t in cls.tilde_cut_tris
    )
    den = sum(
        _p1_mass_value(mesh, int(t), vert_vals[mesh.triangles[int(t)]]) / mesh.h_tri[int(t)] ** 2
        for t in cls.cut_tris
    )
    ratio = 0.0 if den == 0.0 else num / den
    pi1 = pi1_vals[active_verts]
    pi2 = pi2_vals[active_verts]
    return pi1, pi2, ratio


def decomposition_constant(system):
    """Exact sup of the decomposition ratio: a dense pencil on the values at
    cut-element vertices."""
    mesh, cls = system.mesh, system.cls
    flags = cut_vertex_flags(system)
    cut_verts = np.nonzero(flags)[0]
    if len(cut_verts) == 0:
        return 0.0
    index = {int(vv): i for i, vv in enumerate(cut_verts)}
    m = len(cut_verts)
    Num = np.zeros((m, m))
    Den = np.zeros((m, m))

    def accumulate(M, t, keep_all):
        t = int(t)
        tri = mesh.triangles[t]
        w = mesh.areas[t] / 12.0 / mesh.h_tri[t] ** 2
        loc = w * (np.ones((3, 3)) + np.eye(3))
        for i in range(3):
            ii = index.get(int(tri[i]))
            if ii is None:
                continue
            for j in range(3):
                jj = index.get(int(tri[j]))
                if jj is None:
                    continue
                M[ii, jj] += loc[i, j]

    for t in cls.tilde_cut_tris:
        accumulate(Num, t, False)
    for t in cls.cut_tris:
        accumulate(Den, t, True)
    vals = sla.eigh(_sym(Num), _sym(Den), eigvals_only=True)
    return float(vals[-1])


# ----------------------------------------------------------------------
# cut trace inequality and neighbor norm equivalence
# ----------------------------------------------------------------------

def _monomials(degree):
    return [(a, b) for tot in range(degree + 1) for a in range(tot + 1) for b in (tot - a,)]


def _monomial_values(exps, pts, center, h):
    X = (pts[:, 0] - center[0]) / h
    Y = (pts[:, 1] - center[1]) / h
    vals = np.stack([X ** a * Y ** b for a, b in exps])
    gx = np.stack([
        (a * X ** (a - 1) * Y ** b if a > 0 else np.zeros_like(X)) for a, b in exps
    ]) / h
    gy = np.stack([
        (b * X ** a * Y ** (b - 1) if b > 0 else np.zeros_like(X)) for a, b in exps
    ]) / h
    return vals, gx, gy


def probe_trace_constant(system, cutq, degree=None, samples=0, rng=None):
    """Max over cut elements of the trace quotient
    |v|_{L2(T∩Γ)}^2 / (h^-1 |v|_{L2(T)}^2 + h |grad v|_{L2(T)}^2)
    over polynomials of the velocity superspace degree; the exact per-element
    supremum is a small dense pencil, optionally cross-checked by sampling.
    """
    mesh, cls = system.mesh, system.cls
    degree = degree if degree is not None else system.pair.superspace_degree
    exps = _monomials(degree)
    ref = reference_triangle_rule(min(2 * degree, 12))
    best = 0.0
    best_sampled = 0.0
    rng = rng or np.random.default_rng(0)
    for t in cls.cut_tris:
        t = int(t)
        surf = cutq.surface[t]
        if len(surf) == 0:
            continue
        coords = mesh.tri_coords(t)
        h = mesh.h_tri[t]
        center = coords.mean(axis=0)
        vol = map_rule_to_triangle(ref, coords)
        sv, _, _ = _monomial_values(exps, surf.points, center, h)
        S = np.einsum("iq,jq,q->ij", sv, sv, surf.weights)
        vv, gx, gy = _monomial_values(exps, vol.points, center, h)
        M = np.einsum("iq,jq,q->ij", vv, vv, vol.weights)
        K = np.einsum("iq,jq,q->ij", gx, gx, vol.weights) + np.einsum(
            "iq,jq,q->ij", gy, gy, vol.weights
        )
        V = M / h + K * h
        lam = sla.eigh(_sym(S), _sym(V), eigvals_only=True)[-1]
        best = max(best, float(lam))
        if samples:
            C = rng.standard_normal((samples, len(exps)))
            num = np.einsum("si,ij,sj->s", C, S, C)
            den = np.einsum("si,ij,sj->s", C, V, C)
            best_sampled = max(best_sampled, float((num / den).max()))
    result = math.sqrt(best)
    if samples:
        return result, math.sqrt(best_sampled)
    return result


def aux6a_constant(system, samples=0, rng=None):
    """Max over ghost faces between two cut elements of the neighbor norm
    equivalence quotient |q|_{T1}^2 / (|q|_{T2}^2 + jump terms) over
    elementwise polynomials of the pressure degree."""
    mesh, cls, pair = system.mesh, system.cls, system.pair
    m = pair.kp
    exps = _monomials(m)
    d = len(exps)
    ref = reference_triangle_rule(min(2 * max(m, 1), 12))
    from .quadrature import face_rule

    rng = rng or np.random.default_rng(0)
    best = 0.0
    best_sampled = 0.0
    tags = cls.tags
    from .geometry import CUT as CUT_TAG

    for e in cls.faces_ghost:
        t0, t1 = (int(x) for x in mesh.edge_tris[e])
        if tags[t0] != CUT_TAG or tags[t1] != CUT_TAG:
            continue
        a, b = mesh.vertices[mesh.edges[e]]
        hF = mesh.edge_lengths[e]
        n = mesh.edge_normals[e]
        center = 0.5 * (a + b)
        frule = face_rule(a, b, min(2 * max(m, 1), 12))

        NN = np.zeros((2 * d, 2 * d))
        DD = np.zeros((2 * d, 2 * d))
        vol0 = map_rule_to_triangle(ref, mesh.tri_coords(t0))
        vol1 = map_rule_to_triangle(ref, mesh.tri_coords(t1))
        v0, _, _ = _monomial_values(exps, vol0.points, center, hF)
        v1, _, _ = _monomial_values(exps, vol1.points, center, hF)
        NN[:d, :d] = np.einsum("iq,jq,q->ij", v0, v0, vol0.weights)
        DD[d:, d:] = np.einsum("iq,jq,q->ij", v1, v1, vol1.weights)

        fv, fgx, fgy = _monomial_values(exps, frule.points, center, hF)
        for ell in range(0, m + 1):
            if ell == 0:
                tr = fv
            else:
                tr = n[0] * fgx + n[1] * fgy
            jump = np.concatenate([tr, -tr], axis=0)
            DD += hF ** (1 + 2 * ell) * np.einsum("iq,jq,q->ij", jump, jump, frule.weights)

        lam = sla.eigh(_sym(NN), _sym(DD), eigvals_only=True)[-1]
        best = max(best, float(lam))
        if samples:
            C = rng.standard_normal((samples, 2 * d))
            num = np.einsum("si,ij,sj->s", C, NN, C)
            den = np.einsum("si,ij,sj->s", C, DD, C)
            best_sampled = max(best_sampled, float((num / den).max()))
    if samples:
        return best, best_sampled
    return best


# ----------------------------------------------------------------------
# one-configuration report
# ----------------------------------------------------------------------

@dataclass
class StabilityReport:
    pair: str
    n: int
    shift_x: float
    shift_y: float
    eta: float
    gamma_g: float
    gamma_p: float
    h: float
    theta_h: float = math.nan
    beta: float = math.nan
    c0: float = math.nan
    cb_lower: float = math.nan
    Cs: float = math.nan
    trace_c: float = math.nan
    ext_c: float = math.nan
    decomp_c: float = math.nan
    aux6a_c: float = math.nan
    aux7_c: float = math.nan
    n_components: int = 1
    extras: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, default=float)


ALL_CONSTANTS = ("theta", "beta", "c0", "cb", "cs", "trace", "ext", "decomp", "aux6a", "aux7")


def measure_configuration(pair, n, shift, geometry=("circle", 0.0, 0.0, 1.0),
                          box=((-1.5, -1.5), (1.5, 1.5)), eta=20.0, gamma_g=1.0,
                          gamma_p=1.0, quad=None, constants=ALL_CONSTANTS,
                          perturbation=0.0, seed=0):
    """Build one (pair, mesh, shift) configuration and measure the requested
    stability constants."""
    from .geometry import LevelSet, assign_kt, classify
    from .mesh import build_uniform_mesh
    from .spaces import build_system, element_pair
    from .forms import assemble_all

    kind = geometry[0]
    if kind == "circle":
        phi = LevelSet.circle(*geometry[1:4])
    elif kind == "ellipse":
        phi = LevelSet.ellipse(*geometry[1:5])
    else:
        raise StabilityError(f"unknown geometry kind {kind!r}")

    quad = quad or QuadConfig(method="circle-exact" if kind == "circle" else "subtriangulate")
    pair_obj = element_pair(pair) if isinstance(pair, str) else pair
    mesh = build_uniform_mesh(box, n, shift=shift, perturbation=perturbation, seed=seed)
    cls = assign_kt(mesh, classify(mesh, phi))
    system = build_system(mesh, cls, pair_obj)
    need_seminorms = bool({"beta", "ext"} & set(constants))
    saddle, grams, cutq = assemble_all(
        system, phi, quad, eta=eta, gamma_g=gamma_g, gamma_p=gamma_p,
        with_norm_grams=True, with_pressure_seminorms=need_seminorms,
    )

    report = StabilityReport(
        pair=pair_obj.name, n=n, shift_x=float(shift[0]), shift_y=float(shift[1]),
        eta=eta, gamma_g=gamma_g, gamma_p=gamma_p, h=mesh.h,
    )
    if {"theta", "beta"} & set(constants):
        res = interior_infsup(system, quad)
        report.theta_h = res.theta
        report.beta = res.beta
        report.n_components = res.n_components
    if "c0" in constants:
        A_s = grams.K_omega_s + grams.Sn_s + gamma_g * grams.Jg_s + eta * grams.Mj_s
        G_s = grams.K_omega_s + grams.Mj_s + grams.Jg_s
        report.c0 = compute_c0(A_s, G_s)
    if "cb" in constants:
        report.cb_lower = compute_cb_lower(saddle, grams)
    if "cs" in constants:
        report.Cs = compute_cs(saddle, grams)
    if "trace" in constants:
        report.trace_c = probe_trace_constant(system, cutq)
    if "ext" in constants:
        report.ext_c = extension_constant(system, grams)
    if "decomp" in constants:
        report.decomp_c = decomposition_constant(system)
    if "aux6a" in constants:
        report.aux6a_c = aux6a_constant(system)
    if "aux7" in constants:
        report.aux7_c = norm_transfer_constant(grams.K_active_s, grams.K_omega_s, grams.Jg_s)
    return report


def random_shifts(count, scale, seed):
    rng = np.random.default_rng(seed)
    return [tuple(s) for s in rng.uniform(0.0, scale, size=(count, 2))]


def vertex_touching_shift(box, n, circle, eps):
    """Shift that lands the grid vertex closest to the circle exactly at
    signed distance eps outside it (eps < 0: inside)."""
    box = np.asarray(box, dtype=float).reshape(2, 2)
    cx, cy, r = circle
    xs = np.linspace(box[0, 0], box[1, 0], n + 1)
    ys = np.linspace(box[0, 1], box[1, 1], n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    V = np.stack([X.ravel(), Y.ravel()], axis=1)
    d = np.linalg.norm(V - [cx, cy], axis=1)
    keep = d > 1e-12
    V, d = V[keep], d[keep]
    i = int(np.argmin(np.abs(d - r)))
    u = (V[i] - [cx, cy]) / d[i]
    return tuple((r + eps - d[i]) * u)


CSV_COLUMNS = [
    "pair", "n", "shift_x", "shift_y", "eta",
    "theta_h", "beta", "c0", "cb_lower", "Cs",
    "trace_c", "ext_c", "decomp_c", "aux6a_c", "aux7_c",
]


def write_sweep_csv(path, reports):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in reports:
            row = []
            for col in CSV_COLUMNS:
                val = getattr(r, col)
                row.append(val if isinstance(val, (str, int)) else f"{val:.17g}")
            w.writerow(row)


def write_sweep_json(path, reports):
    with open(path, "w") as fh:
        json.dump([asdict(r) for r in reports], fh, indent=1, sort_keys=True, default=float)
