"""Exception hierarchy.

Every error carries a short ``category`` string so the command line can
report failures as one machine-parsable line.
"""


class PulsePairError(Exception):
    category = "error"


class ConfigError(PulsePairError, ValueError):
    category = "config"


class DomainError(PulsePairError, ValueError):
    category = "domain"


class RangeError(DomainError):
    category = "range"


class OutOfBeamError(DomainError):
    category = "out-of-beam"


class ShapeError(PulsePairError, ValueError):
    category = "shape"


class DegenerateNoiseError(PulsePairError, ValueError):
    category = "degenerate-noise"


class DegenerateStatisticsError(PulsePairError, ValueError):
    category = "degenerate-statistics"


class InjectionError(PulsePairError, ValueError):
    category = "injection"


class SchemaError(PulsePairError, ValueError):
    category = "schema"


class MarginError(PulsePairError, AssertionError):
    """An ionospheric effect is not negligible against a filter window."""

    category = "margin"


class OutputError(PulsePairError, OSError):
    category = "io"
