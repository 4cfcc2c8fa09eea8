"""Exception hierarchy.

Every error carries a short machine-readable ``reason`` string that the CLI
copies into its error records.
"""


class RelentError(Exception):
    """Base class for all library errors."""

    reason = "error"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details


class ValidationError(RelentError):
    """Input violates a structural precondition (maps to CLI exit code 2)."""

    reason = "validation"


class ComputationError(RelentError):
    """A numerical procedure failed to converge or to certify (exit code 3)."""

    reason = "computation"


# shift_core
class EmptyAfterPruning(ValidationError):
    reason = "empty_after_pruning"


class DuplicateEdge(ValidationError):
    reason = "duplicate_edge"


class UnknownSymbol(ValidationError):
    reason = "unknown_symbol"


class TrivialComponent(ValidationError):
    reason = "trivial_component"


class NotIrreducible(ValidationError):
    reason = "not_irreducible"


class NoConvergence(ComputationError):
    reason = "no_convergence"


class BlockExplosion(ValidationError):
    reason = "block_explosion"


# markov_measures
class InvalidMeasure(ValidationError):
    reason = "invalid_measure"


class UnsupportedEdgeWeight(ValidationError):
    reason = "unsupported_edge_weight"


class ReducibleAmbiguity(ValidationError):
    reason = "reducible_ambiguity"


class CodeMismatch(ValidationError):
    reason = "code_mismatch"


class NotErgodic(ValidationError):
    reason = "not_ergodic"


class NotALift(ValidationError):
    reason = "not_a_lift"


class PathTooShortWarning(UserWarning):
    """Empirical entropy requested on a path shorter than recommended."""


# factor_codes
class EdgeNotPreserved(ValidationError):
    reason = "edge_not_preserved"


class NotFiniteToOne(ValidationError):
    reason = "not_finite_to_one"


class Inconclusive(ComputationError):
    reason = "inconclusive"


class EmptyProduct(ValidationError):
    reason = "empty_product"


class BadLevel(ValidationError):
    reason = "bad_level"


# joining_lab
class InadmissibleWindow(ValidationError):
    reason = "inadmissible_window"


class NoPreimage(ValidationError):
    reason = "no_preimage"


class WindowMismatch(ValidationError):
    reason = "window_mismatch"


class EmptyS(ComputationError):
    reason = "empty_coincidence_set"


# mmre_solver
class InfeasibleSupport(ValidationError):
    reason = "infeasible_support"


class Infeasible(ComputationError):
    reason = "infeasible"


class NonMonotoneSweep(ComputationError):
    reason = "non_monotone_sweep"


# skew_standard
class NoStrip(ValidationError):
    reason = "no_strip"


class BranchSelectionAmbiguous(ValidationError):
    reason = "branch_selection_ambiguous"


class MonotonicityViolated(ComputationError):
    reason = "monotonicity_violated"


class EmptyIntersection(ComputationError):
    reason = "empty_intersection"


class DegenerateOrbit(ComputationError):
    reason = "degenerate_orbit"
