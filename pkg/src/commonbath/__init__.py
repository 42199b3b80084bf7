"""Environment-induced entanglement of two qubits in a common bath, exact and optical."""

__version__ = "0.1.0"
