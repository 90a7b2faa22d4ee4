"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A builder or operation received an out-of-range argument."""


class InvalidTopologyError(ValueError):
    """The topology violates a structural requirement (no cores, bad links...)."""


class NoCandidateError(LookupError):
    """No routing candidate exists for the requested placement."""


class CacheFullError(RuntimeError):
    """The routing cache reached its max-entries guard."""


class VlanExhaustedError(RuntimeError):
    """All VLAN tags in 1..4094 are allocated."""


class SpecValidationError(ValueError):
    """An experiment spec failed validation; ``errors`` lists every problem."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
