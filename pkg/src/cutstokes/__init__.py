"""Unfitted (cut) finite elements for the Stokes problem in 2D.

A background box mesh is classified against an implicit boundary; the method
enforces the no-slip condition weakly, stabilizes cut elements with
normal-derivative jump penalties, and the stability module measures every
uniformity constant of the discretization as a generalized eigenvalue.
"""

from .analysis import (
    ManufacturedCase,
    builtin_case_disk,
    compute_errors,
    run_convergence,
)
from .forms import AssembledSaddleSystem, NormGrams, QuadConfig, assemble_all
from .geometry import CutClassification, LevelSet, assign_kt, check_assumptions, classify
from .mesh import Mesh, Patch, build_uniform_mesh, face_path_exists, vertex_patch
from .quadrature import (
    QuadratureRule,
    cut_surface_rule,
    cut_volume_rule,
    face_rule,
    reference_rules,
)
from .solver import Solution, solve, solve_spd
from .spaces import ELEMENT_PAIRS, FESystem, build_system, element_pair, evaluate_basis, interpolate
from .stability import (
    StabilityReport,
    build_decomposition,
    build_extension,
    compute_beta,
    compute_c0,
    compute_cb_lower,
    compute_cs,
    compute_theta,
    decomposition_constant,
    extension_constant,
    interior_infsup,
    measure_configuration,
    norm_transfer_constant,
    probe_trace_constant,
)

__version__ = "0.1.0"
