# impactgraph/__init__.py
"""Citation-impact prediction on heterogeneous academic graphs."""

from .errors import ConfigError, DataError, ImpactGraphError, NumericError

__all__ = ["ConfigError", "DataError", "ImpactGraphError", "NumericError"]
