"""Manufactured solutions, error norms over the physical domain, and
experimental-order-of-convergence studies.

The built-in case drives the unit disk with a divergence-free velocity from a
streamfunction vanishing to second order on the boundary, so the no-slip
condition holds exactly and the load has the closed form below.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .forms import QuadConfig, assemble_all, build_cut_quadratures, assemble_volume
from .geometry import LevelSet, classify, assign_kt, check_assumptions
from .mesh import build_uniform_mesh
from .quadrature import map_rule_to_triangle, reference_triangle_rule
from .solver import solve
from .spaces import build_system, element_pair


class AnalysisError(Exception):
    pass


@dataclass
class ManufacturedCase:
    """Closed-form Stokes data: velocity u with gradient, pressure p, load
    f = -laplace(u) + grad(p), and the domain the case lives on."""

    name: str
    levelset: LevelSet
    velocity: callable          # (..., 2) -> (..., 2)
    velocity_gradient: callable  # (..., 2) -> (..., 2, 2), [i, j] = d u_i / d x_j
    pressure: callable
    pressure_mean: float        # mean of the exact pressure over the domain
    load: callable
    domain_measure: float


def builtin_case_disk():
    """Unit disk, streamfunction (1 - x^2 - y^2)^2, pressure x^3."""

    def u(p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        w = 1.0 - x * x - y * y
        return np.stack([-4.0 * y * w, 4.0 * x * w], axis=-1)

    def grad_u(p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        g = np.empty(p.shape[:-1] + (2, 2))
        g[..., 0, 0] = 8.0 * x * y
        g[..., 0, 1] = 4.0 * x * x + 12.0 * y * y - 4.0
        g[..., 1, 0] = 4.0 - 12.0 * x * x - 4.0 * y * y
        g[..., 1, 1] = -8.0 * x * y
        return g

    def pressure(p):
        p = np.asarray(p, dtype=float)
        return p[..., 0] ** 3

    def load(p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        return np.stack([3.0 * x * x - 32.0 * y, 32.0 * x], axis=-1)

    return ManufacturedCase(
        name="disk",
        levelset=LevelSet.circle(0.0, 0.0, 1.0),
        velocity=u,
        velocity_gradient=grad_u,
        pressure=pressure,
        pressure_mean=0.0,
        load=load,
        domain_measure=math.pi,
    )


def zero_case_disk():
    """Homogeneous data on the unit disk: the discrete solution must vanish."""
    zero_v = lambda p: np.zeros(np.asarray(p).shape)
    return ManufacturedCase(
        name="zero-disk",
        levelset=LevelSet.circle(0.0, 0.0, 1.0),
        velocity=zero_v,
        velocity_gradient=lambda p: np.zeros(np.asarray(p).shape[:-1] + (2, 2)),
        pressure=lambda p: np.zeros(np.asarray(p).shape[:-1]),
        pressure_mean=0.0,
        load=zero_v,
        domain_measure=math.pi,
    )


BUILTIN_CASES = {"disk": builtin_case_disk, "zero-disk": zero_case_disk}


# ----------------------------------------------------------------------
# error norms over the physical domain
# ----------------------------------------------------------------------

@dataclass
class ErrorReport:
    err_h1_u: float
    err_l2_u: float
    err_l2_p: float
    err_product: float
    pressure_shift: float


def _field_errors_on_rule(system, sol, case, rule, t):
    """Pointwise discrete-minus-exact values on one element's rule."""
    from .spaces import evaluate_basis

    vals, grads, _ = evaluate_basis(system, t, rule.points, order=1, space="velocity")
    dofs = system.cell_dofs_v[t]
    ns = system.n_scalar
    ux = sol.u[dofs] @ vals
    uy = sol.u[dofs + ns] @ vals
    gux = np.einsum("i,iqa->qa", sol.u[dofs], grads)
    guy = np.einsum("i,iqa->qa", sol.u[dofs + ns], grads)

    pv, _, _ = evaluate_basis(system, t, rule.points, order=0, space="pressure")
    ph = sol.p[system.cell_dofs_p[t]] @ pv

    ue = case.velocity(rule.points)
    gue = case.velocity_gradient(rule.points)
    pe = case.pressure(rule.points)

    eu = np.stack([ux, uy], axis=-1) - ue
    geu = np.stack([gux, guy], axis=1) - gue
    ep = ph - pe
    return eu, geu, ep


def compute_errors(system, sol, case, quad=None, cutq=None, grams=None) -> ErrorReport:
    """Errors in the physical-domain norms plus the full product norm.

    The pressure error is computed after aligning means over the physical
    domain.  The product norm adds the boundary penalty, ghost penalty, and
    pressure jump energies of the discrete part (the exact fields are smooth
    and boundary-conforming, so they contribute nothing there).
    """
    quad = quad or QuadConfig()
    mesh, cls = system.mesh, system.cls
    degree = min(max(2 * system.pair.superspace_degree, 10), 12)
    err_quad = QuadConfig(
        method=quad.method, depth=quad.depth + 2,
        degree_volume=degree, degree_surface=degree,
    )
    if cutq is None or cutq.degree_volume < degree:
        cutq = build_cut_quadratures(mesh, cls, case.levelset, None, err_quad)

    ref = reference_triangle_rule(degree)
    h1 = l2 = 0.0
    p_l2 = p_mass = p_int = 0.0
    rules = [(int(t), map_rule_to_triangle(ref, mesh.tri_coords(int(t))))
             for t in cls.interior_tris]
    rules += [(int(t), cutq.volume[int(t)]) for t in cls.cut_tris]
    cache = []
    for t, rule in rules:
        if len(rule) == 0:
            continue
        eu, geu, ep = _field_errors_on_rule(system, sol, case, rule, t)
        w = rule.weights
        h1 += float(np.einsum("qab,qab,q->", geu, geu, w))
        l2 += float(np.einsum("qa,qa,q->", eu, eu, w))
        p_mass += float(w.sum())
        p_int += float(ep @ w)
        cache.append((ep, w))
    shift = p_int / p_mass if p_mass > 0 else 0.0
    for ep, w in cache:
        p_l2 += float((ep - shift) @ ((ep - shift) * w))

    # discrete-part jump/penalty energies for the product norm
    if grams is None:
        from .forms import assemble_ghost_penalty, assemble_nitsche, assemble_pressure_jump

        _, Mj, _, _ = assemble_nitsche(system, cutq)
        Jg = assemble_ghost_penalty(system)
        Jp = assemble_pressure_jump(system)
    else:
        Mj, Jg, Jp = grams.Mj_s, grams.Jg_s, grams.J_raw
    ns = system.n_scalar
    jh = float(sol.u[:ns] @ (Mj @ sol.u[:ns]) + sol.u[ns:] @ (Mj @ sol.u[ns:]))
    gh = float(sol.u[:ns] @ (Jg @ sol.u[:ns]) + sol.u[ns:] @ (Jg @ sol.u[ns:]))
    jp = float(sol.p @ (Jp @ sol.p))
    product = math.sqrt(max(h1 + jh + gh + p_l2 + jp, 0.0))

    return ErrorReport(
        err_h1_u=math.sqrt(max(h1, 0.0)),
        err_l2_u=math.sqrt(max(l2, 0.0)),
        err_l2_p=math.sqrt(max(p_l2, 0.0)),
        err_product=product,
        pressure_shift=shift,
    )


# ----------------------------------------------------------------------
# convergence runner
# ----------------------------------------------------------------------

@dataclass
class ConvergenceLevel:
    n: int
    h: float
    ndof_u: int
    ndof_p: int
    err_h1_u: float
    err_l2_u: float
    err_l2_p: float
    err_product: float
    t_assemble_s: float
    t_solve_s: float


@dataclass
class ConvergenceRecord:
    case: str
    pair: str
    levels: list = field(default_factory=list)
    eoc_h1_u: list = field(default_factory=list)
    eoc_l2_u: list = field(default_factory=list)
    eoc_l2_p: list = field(default_factory=list)
    eoc_product: list = field(default_factory=list)
    stall_warnings: list = field(default_factory=list)

    def finalize(self):
        def eocs(err_key):
            out = []
            for a, b in zip(self.levels[:-1], self.levels[1:]):
                ea, eb = getattr(a, err_key), getattr(b, err_key)
                if ea <= 0 or eb <= 0:
                    out.append(float("nan"))
                else:
                    out.append(math.log(ea / eb) / math.log(a.h / b.h))
            return out

        self.eoc_h1_u = eocs("err_h1_u")
        self.eoc_l2_u = eocs("err_l2_u")
        self.eoc_l2_p = eocs("err_l2_p")
        self.eoc_product = eocs("err_product")
        for name, seq in (("h1_u", self.eoc_h1_u), ("l2_u", self.eoc_l2_u)):
            for i in range(1, len(seq)):
                if np.isfinite(seq[i]) and np.isfinite(seq[i - 1]) and seq[i - 1] - seq[i] > 0.5:
                    self.stall_warnings.append(
                        f"{name} rate dropped {seq[i - 1]:.2f} -> {seq[i]:.2f} at level "
                        f"{i + 1}; raise the quadrature depth"
                    )
        return self


def run_single_level(case, pair, box, n, shift, eta=20.0, gamma_g=1.0, gamma_p=1.0,
                     quad=None, perturbation=0.0, seed=0, check=True):
    """Classify, assemble, solve, and measure errors on one mesh level."""
    quad = quad or QuadConfig()
    mesh = build_uniform_mesh(box, n, shift=shift, perturbation=perturbation, seed=seed)
    cls = classify(mesh, case.levelset)
    cls = assign_kt(mesh, cls)
    if check:
        rep = check_assumptions(mesh, cls)
        if not rep.ok:
            raise AnalysisError(f"mesh-resolution assumptions fail at n={n}: {rep.summary()}")
    system = build_system(mesh, cls, pair)
    t0 = time.perf_counter()
    saddle, grams, cutq = assemble_all(
        system, case.levelset, quad, eta=eta, gamma_g=gamma_g, gamma_p=gamma_p,
        body_force=case.load, with_norm_grams=True, with_pressure_seminorms=False,
    )
    t_assemble = time.perf_counter() - t0
    t0 = time.perf_counter()
    sol = solve(saddle)
    t_solve = time.perf_counter() - t0
    err = compute_errors(system, sol, case, quad=quad, grams=grams)
    return system, sol, err, (t_assemble, t_solve), (saddle, grams, cutq)


def run_convergence(case, pair, box, levels, shift=(0.0, 0.0), eta=20.0,
                    gamma_g=1.0, gamma_p=1.0, quad=None, depth_increment=1):
    """Full refinement study; the subtriangulation depth grows with the level
    to keep the geometric error below the discretization error."""
    if isinstance(case, str):
        case = BUILTIN_CASES[case]()
    pair = element_pair(pair) if isinstance(pair, str) else pair
    quad = quad or QuadConfig()
    record = ConvergenceRecord(case=case.name, pair=pair.name)

    for i, n in enumerate(levels):
        level_quad = QuadConfig(
            method=quad.method,
            depth=quad.depth + (depth_increment * i if quad.method == "subtriangulate" else 0),
            degree_volume=quad.degree_volume,
            degree_surface=quad.degree_surface,
            degree_face=quad.degree_face,
        )
        system, sol, err, times, _ = run_single_level(
            case, pair, box, n, shift, eta, gamma_g, gamma_p, level_quad,
        )
        record.levels.append(ConvergenceLevel(
            n=n, h=system.mesh.h,
            ndof_u=system.n_velocity, ndof_p=system.n_pressure,
            err_h1_u=err.err_h1_u, err_l2_u=err.err_l2_u,
            err_l2_p=err.err_l2_p, err_product=err.err_product,
            t_assemble_s=times[0], t_solve_s=times[1],
        ))
    return record.finalize()


def write_convergence_csv(path, record):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([
            "level", "h", "ndof_u", "ndof_p", "err_h1_u", "err_l2_u", "err_l2_p",
            "err_product", "eoc_h1_u", "eoc_l2_u", "eoc_l2_p",
            "t_assemble_s", "t_solve_s",
        ])
        for i, lv in enumerate(record.levels):
            eoc = lambda seq: "" if i == 0 else f"{seq[i - 1]:.17g}"
            w.writerow([
                i, f"{lv.h:.17g}", lv.ndof_u, lv.ndof_p,
                f"{lv.err_h1_u:.17g}", f"{lv.err_l2_u:.17g}", f"{lv.err_l2_p:.17g}",
                f"{lv.err_product:.17g}",
                eoc(record.eoc_h1_u), eoc(record.eoc_l2_u), eoc(record.eoc_l2_p),
                f"{lv.t_assemble_s:.6f}", f"{lv.t_solve_s:.6f}",
            ])


def write_convergence_json(path, record):
    import json
    from dataclasses import asdict

    with open(path, "w") as fh:
        json.dump(asdict(record), fh, indent=1, sort_keys=True, default=float)
