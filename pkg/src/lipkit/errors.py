"""Exception hierarchy shared across the toolkit."""


class LipkitError(Exception):
    """Base class for all toolkit errors."""


class NonConvergence(LipkitError):
    """An iterative procedure failed to converge."""


class DegenerateSpectrum(LipkitError):
    """Singular values too close for the requested derivative to be defined."""

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class ZeroSingular(LipkitError):
    """Requested quantity involves 1/sigma_k terms with sigma_k = 0."""


class OrderOverflow(LipkitError):
    """Expansion order above the configured maximum."""


class NotSkew(LipkitError):
    """Matrix is not skew-symmetric within tolerance."""


class NotSimplex(LipkitError):
    """Vector is not a probability vector."""


class UnknownActivation(LipkitError):
    """Activation name not in the supported table."""


class UnknownNode(LipkitError):
    """Node id not present in the graph."""


class NotAPath(LipkitError):
    """Node sequence is not a directed path of the graph."""


class CycleDetected(LipkitError):
    """Graph is not acyclic."""


class GraphInvalid(LipkitError):
    """Graph violates a structural invariant other than acyclicity."""


class InvalidParams(LipkitError):
    """Attention-bound parameter set malformed (missing key or shape mismatch)."""


class NonBracketable(LipkitError):
    """Root of x*exp(x+1) = y requested for y < 0."""


class LengthMismatch(LipkitError):
    """Paired vectors have different lengths."""


class CallbackFailure(LipkitError):
    """A user-supplied callback raised; original exception attached as __cause__."""


class NotUnit(LipkitError):
    """Direction vector is not unit norm."""


class EmptyBand(LipkitError):
    """No spectrum bin falls inside the requested frequency ball."""


class GridMismatch(LipkitError):
    """Two signals do not share grid shape and spacing."""


class NotPSD(LipkitError):
    """Matrix expected to be positive semidefinite is not."""


class PlayerCountTooLarge(LipkitError):
    """Exact Shapley mode limited to 16 players."""


class DegenerateWeights(LipkitError):
    """Importance-score weights are all zero (or player count < 2)."""


class NegativeShapley(LipkitError):
    """Importance-score normalization needs nonnegative Shapley values."""
