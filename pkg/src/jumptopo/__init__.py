"""Emulation of jump-time topology in a dissipative SSH model with a small ancilla-extended system."""

__version__ = "0.1.0"
