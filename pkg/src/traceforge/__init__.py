"""Step-by-step certification of TSTP refutation traces in a λΠ-modulo checker."""

__version__ = "0.1.0"
