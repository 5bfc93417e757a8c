"""Exception hierarchy for nmpursuit."""


class NMPError(ValueError):
    """Base class for all errors raised by nmpursuit."""


class InvalidInput(NMPError):
    pass


class MonotonicityError(NMPError):
    """A phase function would decrease somewhere (negative frequency)."""


class InvalidPhase(NMPError):
    pass


class PhaseTooShort(NMPError):
    """The phase covers fewer whole periods than the operation needs."""


class BandTooNarrow(NMPError):
    """The low-pass band contains no DFT bin besides the carrier."""


class DegenerateEnvelope(NMPError):
    """Every grid point fell below the envelope threshold."""


class InvalidComponent(NMPError):
    pass


class InvalidKernel(NMPError):
    pass


class NoOscillationFound(NMPError):
    """The spectrum has no peak above the detection floor."""
