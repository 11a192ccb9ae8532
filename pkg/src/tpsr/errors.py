"""Exceptions and warnings raised across the toolkit.

Every error derives from `TpsrError`. Problems with user-supplied
inputs (configuration, files, preconditions) are `ValidationError`
instances and map to exit code 2 on the command line; failures of the
numerics at run time are `NumericalError` instances and map to exit
code 3.
"""


class TpsrError(Exception):
    """Base class for every error raised by `tpsr`."""


class ValidationError(TpsrError, ValueError):
    """An input, file or configuration value is invalid."""


class NumericalError(TpsrError, ArithmeticError):
    """A numerical routine could not produce a meaningful result."""


class ConfigError(ValidationError):
    """A configuration key or value could not be understood."""


class FormatError(ValidationError):
    """A file on disk does not follow its expected format."""


class EmptyOutput(ValidationError):
    """An operation would produce no output at all."""


class MissingAction(ValidationError):
    """Some actions have no training samples.

    Parameters
    ----------
    actions : list[int]
        Indices of the actions without any samples.
    """

    def __init__(self, actions: list[int]) -> None:
        self.actions = list(actions)
        super().__init__(f"No training samples for actions {self.actions}")


class InsufficientSamples(ValidationError):
    """Too few samples are available to fit a per-action regression.

    Parameters
    ----------
    action : int
        Index of the action that is short of samples.
    count : int
        Number of samples available for the action.
    needed : int
        Number of samples required.
    """

    def __init__(self, action: int, count: int, needed: int) -> None:
        self.action, self.count, self.needed = action, count, needed
        super().__init__(f"Action {action} has {count} samples; at least {needed} are needed")


class SizeLimit(ValidationError):
    """A problem is too large for an exact oracle."""


class FeatureMapMismatch(ValidationError):
    """Artefacts were produced with different feature maps or data."""


class DegenerateUpdate(NumericalError):
    """The normalizer of a state update vanished.

    The model judges the action-observation pair impossible from the
    current state, so there is no well-defined next state.

    Parameters
    ----------
    denominator : float
        Value of `b_inf . B(a, o) . b` that triggered the error.
    """

    def __init__(self, denominator: float) -> None:
        self.denominator = denominator
        super().__init__(f"State update normalizer {denominator:.3e} is too close to zero")


class RankDeficient(NumericalError):
    """A pseudoinverse discarded directions the estimator needs."""


class DegenerateData(NumericalError):
    """A sample carries no spread to fit a transform from."""


class Unreachable(NumericalError):
    """A search exhausted its space without meeting the goal."""


class RankDeficientWarning(UserWarning):
    """The trailing retained singular value is negligible."""
