"""Exception types shared across the package."""


class HdvarError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(HdvarError):
    """A Cholesky pivot fell below the positive-definiteness threshold."""


class SingularDesign(HdvarError):
    """The regressor matrix is numerically rank deficient; use a penalized fit."""


class NotStationary(HdvarError):
    """The companion matrix has spectral radius at or above one."""


class Overflow(HdvarError):
    """An iterate left the representable range (spectral radius far above one)."""


class NonConvergence(HdvarError):
    """An iterative scheme exhausted its iteration budget."""


class MissingInnovations(HdvarError):
    """The dataset carries no innovation record (not simulated)."""


class UnknownCombination(HdvarError):
    """The requested (experiment, k) pair is outside the supported grid."""


class AllWeightsInfinite(HdvarError):
    """Every penalty weight is infinite; no coordinate is free."""


class ZeroKappa(HdvarError):
    """A restricted eigenvalue of zero makes the bound undefined."""


class SingularSubGram(HdvarError):
    """The Gram submatrix on the true support is numerically singular."""


class ConfigError(HdvarError):
    """Invalid or inconsistent run configuration."""
