"""Exception hierarchy shared by the library and the CLI."""


class PairRankError(Exception):
    """Base class for all errors raised by pairrank."""


class DomainError(PairRankError, ValueError):
    """An argument lies outside the domain of the function."""


class ConfigurationError(PairRankError, ValueError):
    """An experiment or graph specification cannot be realised."""


class GraphGenerationError(PairRankError, RuntimeError):
    """Random graph sampling failed within the retry budget."""


class DisconnectedGraphError(PairRankError, ValueError):
    """The comparison graph has more than one connected component."""


class DataError(PairRankError, ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(PairRankError, ArithmeticError):
    """A numerical routine produced a non-finite or unusable result."""
