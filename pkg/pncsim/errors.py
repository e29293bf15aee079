# pncsim/errors.py

"""
Exception hierarchy for the simulator.

Every error derives from ValueError so callers that already catch
ValueError (the API handlers, the CLI) keep working without knowing the
concrete subclass.
"""

from typing import Optional, Sequence


class PncSimError(ValueError):
    """Base class for all simulator errors."""


class DegenerateMessageError(PncSimError):
    """A GF(4) log-probability vector has no finite component."""


class AlistParseError(PncSimError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConstructionError(PncSimError):
    """Requested code parameters cannot be realized."""


class CodeLengthError(PncSimError):
    """A message or codeword has the wrong length for the code."""


class ChannelConfigError(PncSimError):
    """Invalid pulse or channel parameters."""


class FactorizationError(PncSimError):
    def __init__(self, message: str, residual: float = float("nan")):
        self.residual = residual
        super().__init__(f"{message} (residual={residual:.3e})")


class CovarianceAssemblyError(PncSimError):
    """Block-Toeplitz noise covariance is not positive definite."""


class DegenerateSamplingError(PncSimError):
    """Rectangular sampling requested with a vanishing sub-interval."""


class InvalidReductionError(PncSimError):
    """Reduced trellis requested for taps that depend on past A symbols."""


class DegeneratePriorError(PncSimError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"prior at symbol {index} has no finite component")


class FrameOffsetError(PncSimError):
    """Frame offset outside the supported range."""


class DelayResolutionError(PncSimError):
    """No cyclic shift passes the CRC."""


class AmbiguousDelayError(DelayResolutionError):
    def __init__(self, candidates: Sequence[int]):
        self.candidates = list(candidates)
        super().__init__(f"several shifts pass the CRC: {self.candidates}")


class RecoveryError(PncSimError):
    """Broadcast-phase recovery found no valid message."""


class TrialError(PncSimError):
    def __init__(self, message: str, snr_index: int, frame_index: int):
        self.snr_index = snr_index
        self.frame_index = frame_index
        super().__init__(f"snr point {snr_index}, frame {frame_index}: {message}")
