"""Exception hierarchy shared across the package."""


class SplineTreeError(Exception):
    """Base class for all package-specific errors."""


class DataError(SplineTreeError):
    """Malformed input data: bad files, schema mismatches, unparseable cells."""


class ConstantFeatureError(DataError):
    """A feature is constant on the training data and cannot enter the model."""


class NumericalError(SplineTreeError):
    """A numerical routine failed (e.g. eigensolver non-convergence)."""
