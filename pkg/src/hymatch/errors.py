"""Exception types shared across the package."""


class HymatchError(Exception):
    """Base class for errors raised by this package."""


class BallDomainError(HymatchError, ValueError):
    """A point violated the open-unit-ball domain of a geometry operation."""


class FormatError(HymatchError, ValueError):
    """A corpus, store, triples, or checkpoint file failed validation."""


class DivergenceError(HymatchError, RuntimeError):
    """Training produced a non-finite loss or gradient."""
