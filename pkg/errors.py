"""Exception taxonomy shared by every package."""

from __future__ import annotations


class MfBpinnError(Exception):
    """Base class for all engine failures."""


class ContractError(MfBpinnError, ValueError):
    """Raised when a caller violates an input contract."""


class ConfigError(MfBpinnError, ValueError):
    """Raised when a configuration value is invalid or unsupported."""


class NumericError(MfBpinnError, ArithmeticError):
    """Raised when a computation produces non-finite values.

    The optional attributes locate the failure: ``term`` names the loss term,
    ``layer`` the network layer, ``index`` the offending point and ``residual``
    the last residual norm of an iterative solve.
    """

    def __init__(
        self,
        message: str,
        *,
        term: str | None = None,
        layer: int | None = None,
        index: int | None = None,
        residual: float | None = None,
    ) -> None:
        super().__init__(message)
        self.term = term
        self.layer = layer
        self.index = index
        self.residual = residual


class TrainingError(NumericError):
    """Raised when an optimizer stage diverges."""

    def __init__(self, message: str, *, last_finite_epoch: int, **kwargs) -> None:
        super().__init__(message, **kwargs)
        self.last_finite_epoch = last_finite_epoch


class SamplerHealthError(MfBpinnError):
    """Raised when HMC chains diverge too often to be trusted."""


class ArtifactError(MfBpinnError):
    """Raised when an expected artifact is missing from an experiment directory."""

    def __init__(self, message: str, *, stage: str | None = None) -> None:
        super().__init__(message)
        self.stage = stage
