# errors.py
# Exception hierarchy shared by the simulator and the command line front end.
# The CLI maps ConfigError to exit code 2; PhysicsInvariantError (QuadratureError included),
# PropagatorCacheMiss and SweepAbortedError to exit code 1.

from typing import Optional


class ConfigError(ValueError):
    """Invalid, unknown or inconsistent configuration."""


class PhysicsInvariantError(RuntimeError):
    """A density-matrix or kernel invariant was violated during a run."""

    def __init__(self, message: str, time: Optional[float] = None, detail: Optional[dict] = None):
        self.time = time
        self.detail = detail or {}
        if time is not None:
            message = f"{message} (t = {time:.6g} ps)"
        super().__init__(message)


class QuadratureError(PhysicsInvariantError):
    """Frequency quadrature did not reach the requested tolerance."""


class NoEmissionError(PhysicsInvariantError):
    """Indistinguishability requested for a run that emitted no photons."""


class PropagatorCacheMiss(LookupError):
    """A propagator or memory kernel was requested outside the cached time grid."""


class SweepAbortedError(RuntimeError):
    """Too many sweep cells failed."""
