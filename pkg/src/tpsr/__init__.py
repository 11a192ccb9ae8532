"""Learning and planning with transformed predictive state representations."""

from .errors import NumericalError, TpsrError, ValidationError

__all__ = ["NumericalError", "TpsrError", "ValidationError"]
