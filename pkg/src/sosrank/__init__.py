"""Exact minimal-rank computations for prolonged sum-of-squares polynomials."""

from .analysis import (
    HermCandidateReport,
    MinRankReport,
    check_candidate_hermitian,
    conjecture_bound,
    delta1_extreme_points,
    diag_rank_of_prolongation,
    min_rank_diag,
    pattern_checks,
    reproduce_table,
)
from .cones import (
    HRepCone,
    Ray,
    Vertex,
    certify_vertex,
    extreme_rays_bruteforce,
    extreme_rays_dd,
    slice_to_vertices,
)
from .exactla import (
    GaussianRational,
    HermMatrix,
    Infeasible,
    Underdetermined,
    char_poly,
    herm_rank,
    psd_check,
    psd_check_ldl,
    rational_rank,
    solve_exact,
)
from .monomials import MonomialBasis, enumerate_monomials, shift_index
from .prolongation import (
    ProlongationMatrix,
    build_jnd,
    build_jnd_direct,
    build_jnd_recursive,
    prolong_diag,
    prolong_hermitian,
)

__version__ = "0.1.0"
