"""Exception hierarchy. Each class carries the process exit code the CLI maps it to."""


class Darboux2dError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class ValidationError(Darboux2dError):
    """Invalid input data or configuration (bad grid, bad range, missing file, ...)."""

    exit_code = 1


class NumericError(Darboux2dError):
    """A numerical routine failed to meet its contract."""

    exit_code = 2


class SpectralInadmissibilityError(NumericError):
    """The prescribed spectral measure does not admit a transform (Gram matrix not
    positive definite, or a site normalizer came out non-positive)."""


class StructuralInconsistencyError(NumericError):
    """The orthogonalization produced couplings between same-level sites that should
    vanish for measures realizable on the lattice.  Reported, never silently fixed."""


class SingularTransformError(NumericError):
    """A closed-form transform hit a vanishing denominator at a lattice site."""


class ReconstructionError(NumericError):
    """Potential reconstruction from a transform kernel is impossible (bad diagonal)."""
