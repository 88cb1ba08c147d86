# impactgraph/errors.py


class ImpactGraphError(Exception):
    """Base class for every error the pipeline reports to the user."""

    exit_code = 1


class ConfigError(ImpactGraphError):
    """Bad configuration file, unknown key or out-of-range value."""

    exit_code = 1


class DataError(ImpactGraphError):
    """Malformed or inconsistent input data (graph files, datasets)."""

    exit_code = 2


class NumericError(ImpactGraphError):
    """Non-finite loss or gradient, or a numerically unusable system."""

    exit_code = 3
