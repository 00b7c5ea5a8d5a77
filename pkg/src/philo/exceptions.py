"""Exception types shared across the package."""


class PhiloError(Exception):
    """Base class for errors raised by this package."""


class TooLarge(PhiloError):
    """An exhaustive routine was asked to run beyond its size cap."""


class IterLimit(PhiloError):
    """The simplex solver hit its pivot limit before reaching optimality."""


class InstanceError(PhiloError, ValueError):
    """An instance failed validation.

    The full list of violations is kept in ``errors``.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class NotTight(PhiloError, ValueError):
    """An operation that needs a tightened LP solution was given an untight one."""
