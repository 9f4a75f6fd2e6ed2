"""Exact exponent calculus, replayable derivations, and a discrete
tube-family simulator for the dimension-4 incidence and restriction
bounds.

The package has three layers:

* `bounds` and `quadratic`: arithmetic. One-monomial power bounds over
  exact rationals, and the quadratic field Q(sqrt(d)) with exact
  comparisons.
* `derivations`: the named derivation chains (incidence lemma,
  restriction exponent, self-improvement map, fixed-point iteration),
  each recorded as a replayable step tape.
* `sim`: shaded delta-tube families on dyadic grids in dimensions 3
  and 4, with exact incidence statistics checked against the proved
  volume bounds.

`acceptance.run_acceptance` wires all of it into the criteria suite the
`kakeya4 verify` subcommand runs.
"""

from .bounds import (Bound, CalculusError, ExponentVector, Loss, Relation,
                     Symbol, compose, double_count, drop_bounded, eliminate,
                     get_symbol, interpolate, monomial, relabel, relax,
                     solve_weight, substitute_rescale)
from .quadratic import (Polynomial, QuadraticNumber, RationalMap,
                        ceil_to_dyadic, exact_sign, format_significant)
from .derivations import (CHECKPOINTS, Derivation, ReplayMismatch, Step,
                          TEStatement, Tape, ValidityError,
                          alpha_double_map, alpha_prime_map,
                          check_beta_window, closed_form_consistency,
                          d_zero, derive_lemma_incidence,
                          derive_restriction_exponent, derive_self_improve,
                          derive_trilinear_multiplicity,
                          fixed_point_alpha_star, iterate_self_improvement)
from .acceptance import format_report_lines, run_acceptance
from . import sim

__version__ = "0.1.0"

__all__ = [
    "Bound", "CalculusError", "ExponentVector", "Loss", "Relation",
    "Symbol", "compose", "double_count", "drop_bounded", "eliminate",
    "get_symbol", "interpolate", "monomial", "relabel", "relax",
    "solve_weight", "substitute_rescale",
    "Polynomial", "QuadraticNumber", "RationalMap", "ceil_to_dyadic",
    "exact_sign", "format_significant",
    "CHECKPOINTS", "Derivation", "ReplayMismatch", "Step", "TEStatement",
    "Tape", "ValidityError", "alpha_double_map", "alpha_prime_map",
    "check_beta_window", "closed_form_consistency", "d_zero",
    "derive_lemma_incidence", "derive_restriction_exponent",
    "derive_self_improve", "derive_trilinear_multiplicity",
    "fixed_point_alpha_star", "iterate_self_improvement",
    "format_report_lines", "run_acceptance",
    "sim",
    "__version__",
]
