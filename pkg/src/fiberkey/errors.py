"""Exception types shared across the package."""


class FiberKeyError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(FiberKeyError, ValueError):
    """A numeric or structural argument is outside its valid domain."""


class DimensionMismatchError(FiberKeyError, ValueError):
    """Array shapes are inconsistent with each other."""


class MissingDataError(FiberKeyError, ValueError):
    """A record is incomplete (e.g. probe triples are missing)."""


class InsufficientSignalError(FiberKeyError, ValueError):
    """A statistic cannot be formed because all inputs are zero."""


class UndefinedFidelityError(FiberKeyError, ValueError):
    """Focus fidelity is undefined because the launched power is zero."""


class UndefinedProbabilityError(FiberKeyError, ValueError):
    """A click probability is undefined because its denominator is zero."""


class InsufficientKeyError(FiberKeyError, ValueError):
    """Too little key material is left to perform the requested step."""


class ConfigError(FiberKeyError, ValueError):
    """Experiment configuration failed validation.

    Carries a list of precise issues, each a (line, key, reason) tuple;
    line is None when the offending key could not be located in the text.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        lines = [
            f"line {ln if ln is not None else '?'}: {key}: {reason}"
            for ln, key, reason in self.issues
        ]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
