"""Exception hierarchy.

Every exception carries a short machine-readable ``code`` so that the
certification pipeline can turn a failure into a named refusal stage.
"""


class BehavDissError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class ShapeMismatch(BehavDissError, ValueError):
    code = "shape_mismatch"


class NonSquare(ShapeMismatch):
    code = "non_square"


class NotControllable(BehavDissError):
    code = "not_controllable"


class NotUnimodular(BehavDissError, ValueError):
    code = "not_unimodular"


class SingularSigma(BehavDissError, ValueError):
    code = "singular_sigma"


class InputCardinalityExceeded(BehavDissError):
    code = "input_cardinality"


class ImproperTransfer(BehavDissError):
    code = "improper_transfer"


class SingularOutputBlock(BehavDissError):
    code = "singular_output_block"


class PoleEvaluation(BehavDissError, ValueError):
    code = "pole_evaluation"


class StrictnessViolated(BehavDissError):
    code = "strictness_at_infinity"


class SingularJDD(BehavDissError):
    code = "singular_j_plus_ddt"


class SelfAdjointnessFailed(BehavDissError):
    code = "self_adjointness"


class IllConditioned(BehavDissError):
    code = "ill_conditioned"


class UnmixingViolated(BehavDissError):
    code = "unmixing"


class OddMultiplicity(BehavDissError):
    code = "odd_multiplicity"


class NeutralityFailed(BehavDissError):
    code = "neutrality"


class NotGraphSubspace(BehavDissError):
    code = "not_graph_subspace"


class NonHermitian(BehavDissError):
    code = "non_hermitian"


class NonReal(BehavDissError):
    code = "non_real"


class StrictnessNotVerified(BehavDissError):
    code = "strictness_not_verified"
