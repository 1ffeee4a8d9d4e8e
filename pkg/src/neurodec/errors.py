"""Exception hierarchy for the neurodec pipeline."""


class NeurodecError(Exception):
    """Base class for all neurodec errors."""


# dataset assembly
class EmptyDatasetError(NeurodecError):
    """Event table contains no stimulus events."""


class MissingPairError(NeurodecError):
    """A train/test event has no resolvable cross-modal counterpart."""


class DuplicateTrialError(NeurodecError):
    """A trial identifier occurs more than once where uniqueness is required."""


class ShapeMismatchError(NeurodecError):
    """Matrix dimensions are inconsistent with their identifiers or each other."""


# design / GLM
class InvalidParamsError(NeurodecError):
    """Response-kernel parameters are out of their valid domain."""


class EventOutOfRangeError(NeurodecError):
    """An event falls outside the scanned duration of its run."""


class EmptyDesignError(NeurodecError):
    """No event-derived regressors for the requested design grouping."""


class NumericalFailureError(NeurodecError):
    """A solver produced non-finite output."""


# ridge
class DegenerateInputError(NeurodecError):
    """Input matrix carries no usable variance."""


class TooFewRowsError(NeurodecError):
    """Not enough rows for the requested operation."""


class MissingTargetError(NeurodecError):
    """A stimulus has no target row in the feature matrix."""


# metrics
class ZeroVectorError(NeurodecError):
    """Cosine distance is undefined for a zero-norm vector."""


# ROI masking
class UnknownRoiError(NeurodecError):
    """Requested ROI name is not one of the built-in definitions."""


class EmptyMaskError(NeurodecError):
    """No atlas voxel matched the ROI definition."""


class UnknownVoxelError(NeurodecError):
    """Mask refers to voxels absent from the matrix."""


# synthetic generator
class InvalidConfigError(NeurodecError):
    """Synthetic generator configuration violates its invariants."""


class MismatchedProvenanceError(NeurodecError):
    """Ground truth and features do not come from the same generator call."""


# orchestration
class AlignmentMismatchError(NeurodecError):
    """Two feature matrices that must align cover different stimuli."""


# file formats
class FormatError(NeurodecError):
    """A binary matrix or container file is malformed."""
