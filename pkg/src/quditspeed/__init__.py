"""Fast two-qubit gates with coupled qudits: speed-limit protocols and pulse optimization."""

__version__ = "0.1.0"
