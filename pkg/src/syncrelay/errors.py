"""Exception types raised across the simulator."""


class SyncRelayError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(SyncRelayError, ValueError):
    pass


class InsufficientSignalError(SyncRelayError):
    """Raised when a waveform window does not contain enough signal to measure."""


class InvalidStateError(SyncRelayError):
    pass


class StaleMeasurementError(SyncRelayError):
    pass


class NumericalDivergenceError(SyncRelayError):
    """Integration produced a non-finite value.

    ``last_state`` holds the last finite state; ``log`` is filled in by the
    harness with the partial simulation log when the error escapes a run.
    """

    def __init__(self, message, last_state=None, log=None):
        super().__init__(message)
        self.last_state = last_state
        self.log = log


class ScenarioError(SyncRelayError):
    """Scenario document failed to parse or validate.

    ``key`` names the offending setting and ``line`` the 1-based line number,
    when known.
    """

    def __init__(self, message, key=None, line=None):
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)
        self.key = key
        self.line = line
