"""Optimal control of exchange-coupled spin qubits."""

__version__ = "0.1.0"
