"""Inverse-engineered and optimal-control protocols for trap expansion, trap transport
and dissipative spin rotation."""

__version__ = "0.1.0"

from . import ansatz, expansion, numerics, spin, transport

__all__ = ["__version__", "ansatz", "expansion", "numerics", "spin", "transport"]
