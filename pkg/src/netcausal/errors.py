"""Exception hierarchy shared by all netcausal modules."""


class NetcausalError(Exception):
    """Base class for all errors raised by this package."""


class BadIndex(NetcausalError):
    """An agent or source index is outside its declared range."""


class EmptySource(NetcausalError):
    """A hidden source is not shared by any agent."""


class NonBinary(NetcausalError):
    """Operation requires dichotomic outputs (and usually inputs)."""


class WrongArity(NetcausalError):
    """Operation requires a specific number of agents."""


class Mismatch(NetcausalError):
    """Two objects that must agree (scenario, support, shapes) do not."""


class Overflow(NetcausalError):
    """An enumeration would exceed the desk-scale strategy guard."""


class TooLarge(NetcausalError):
    """A dense computation would exceed the desk-scale size caps."""


class OutOfRange(NetcausalError):
    """A scalar argument lies outside its documented domain."""


class BadVisibility(NetcausalError):
    """White-noise visibility must lie in [0, 1]."""


class InconsistentPlan(NetcausalError):
    """A measurement plan does not match the scenario's sharing map."""


class DimensionMismatch(NetcausalError):
    """Vector or matrix dimensions do not line up."""


class SignalingEve(NetcausalError):
    """An eavesdropper response table violates the non-signaling checks."""


class CyclicInput(NetcausalError):
    """A causal graph rewrite encountered a directed cycle."""
