"""Exception types shared across the package."""


class CrossModalError(Exception):
    """Base class for all package-specific errors."""


class EmptyCloud(CrossModalError):
    """An operation that requires points received an empty cloud."""


class DegenerateNeighborhood(CrossModalError):
    """Fewer than 3 points, or the neighborhood has rank < 2."""


class TooFewPoints(CrossModalError):
    """Not enough points for the requested computation."""


class DegenerateFrame(CrossModalError):
    """All reference-frame eigenvalues coincide.

    Never raised by compute_shot, which falls back to world axes and tags
    the descriptor instead; kept as API surface for callers that want to
    treat the flag as an error.
    """


class KindMismatch(CrossModalError):
    """A descriptor of the wrong kind was passed."""


class DimensionMismatch(CrossModalError):
    """Vector or matrix dimensions do not agree."""


class RankDeficient(CrossModalError):
    """Requested subspace dimension exceeds the data rank."""


class SingleClass(CrossModalError):
    """Classifier training needs at least two classes."""


class EmptyTestSet(CrossModalError):
    """Evaluation received no test examples."""


class TooFewExamples(CrossModalError):
    """Not enough examples for the requested number of folds."""


class UnknownClass(CrossModalError):
    """Object class id is not in the catalog."""


class EmptyContact(CrossModalError):
    """A tactile exploration never touched the object."""


class MissingTargetData(CrossModalError):
    """Adaptation training requires target-domain clouds."""
