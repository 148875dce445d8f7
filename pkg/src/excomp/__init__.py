"""Comparison geometry of rotationally symmetric model spaces, with
discrete verification of the comparison inequalities on triangulated
minimal surfaces in Euclidean 3-space."""

from .errors import (CoverageError, DomainError, EvalDomainError, ExcompError,
                     MeshFormatError, NonManifoldError, ParseError, QuadratureError,
                     SolveError, TruncationContactError)
from .modelspace import ModelSpace, QuadratureConfig, WarpingSpec
from .surfaces import ParamSurface, TriMesh, builtin, load_mesh, minimality_residual, tessellate
from .dgeom import (ClippedRegion, SparseSPDSystem, assemble_laplacian, capacity_discrete,
                    clip, count_ends, end_components, exit_time_discrete,
                    first_eigenvalue_estimate, flux, radial_gradient_norm, region_area,
                    solve_dirichlet)
from .harness import (Check, EndsReport, QuotientCurve, ToneReport, VerificationReport,
                      comparison_gates, ends_bound, exit_time_comparison, gate_verdicts,
                      quotient_curves, tone_report, verify_capacity_sandwich,
                      verify_euclidean_sandwich, verify_isoperimetric, volume_flux_tail)
from . import wexpr

__version__ = "0.1.0"
