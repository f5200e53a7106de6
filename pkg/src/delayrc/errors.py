"""Exception hierarchy shared by all delayrc modules."""


class DelayRCError(Exception):
    """Base class for every error raised by delayrc."""


class ParameterError(DelayRCError, ValueError):
    """A numeric parameter is outside its admissible range."""


class ContractError(DelayRCError, ValueError):
    """Arguments are individually valid but mutually inconsistent (shapes, counts)."""


class ConfigurationError(DelayRCError, ValueError):
    """A reservoir or experiment configuration violates an invariant."""


class DivergenceError(DelayRCError, ArithmeticError):
    """The simulated state blew up.

    Attributes:
        time: simulated time (seconds) of the first offending sample.
        input_index: index of the input step being processed, when known.
    """

    def __init__(self, message, time=None, input_index=None):
        super().__init__(message)
        self.time = time
        self.input_index = input_index


class RegimeError(DelayRCError, ArithmeticError):
    """Fixed-point iteration failed; the system is not in a contractive regime."""


class RankError(DelayRCError, ArithmeticError):
    """The ridge normal equations are singular (use a positive regularization)."""


class MetricError(DelayRCError, ValueError):
    """A metric is undefined for the given data (e.g. zero target variance)."""


class StatisticsError(DelayRCError, ValueError):
    """Too few samples for a statistically meaningful estimate."""


class GenerationError(DelayRCError, RuntimeError):
    """A dataset generator could not produce an admissible sequence."""


class ParseError(DelayRCError, ValueError):
    """An input file could not be parsed; the message names the line."""


class NormalizationError(ParameterError):
    """A series cannot be normalized (zero variance)."""


class ConfigError(DelayRCError, ValueError):
    """An experiment config file is malformed or names an unknown field."""
