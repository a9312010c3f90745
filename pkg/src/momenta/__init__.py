"""momenta: arbitrary-precision diagnostics for indeterminate moment problems.

The library builds the change-of-basis matrices between monomials and
orthonormal polynomials, the Hankel moment block and its finite-section
inverse, the kernel coefficient matrix with tail control, growth diagnostics
of the normalized moments and kernel norms, the integral threshold functions
that certify absolute summability, and the explicit constructions of the
symmetrized cubic birth-and-death family and the log-normal annihilators.
"""

from .errors import (BracketError, DomainError, FitUnstable, MissingData,
                     MomentaError, NoConvergence, SingularMatrix,
                     SymmetryViolation)
from .numerics import (CubicConstants, PrecisionContext, cubic_constants,
                       gamma_hp, pochhammer, qpoch, qpoch_inf, quad_ts,
                       to_mpf)
from .families import (FamilySpec, make_family, parse_descriptor,
                       shift_family, stieltjes_parts)
from .engine import (BRows, CSeq, HankelBlock, KernelMatrix, TriMatrix,
                     UVTables, b_rows, build_A, build_B, build_C, c_seq,
                     finite_section_inverse, hankel_from_C, kernel_for_family,
                     kernel_from_pair, moments_jacobi, residual_BC, u_table,
                     v_table)
from .analysis import (AlphaValue, ShapeReport, alpha_threshold, alpha_value,
                       k_alpha, order_type, shape_report, tau_c, u_alpha,
                       v_alpha)
from .verify import (Annihilator, NullVector, SeriesReport, aci_residuals,
                     boundedness_probe, classify_series, cs_series,
                     cs_star_series, null_residuals, null_vector,
                     powerlaw_dichotomy, symmetric_annihilator,
                     trace_identity_check)
from .cubic import (CubicReport, cubic_b_product, cubic_kernel_entry,
                    cubic_moment, cubic_moment_bounds, cubic_report,
                    envelope_constants, verify_envelope)

__version__ = "0.1.0"
