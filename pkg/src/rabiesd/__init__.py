"""Two decaying qubits in a single-mode cavity beyond the rotating-wave
approximation: reduced master-equation dynamics, an exact truncated-Fock
reference, and Wootters concurrence."""

__version__ = "0.1.0"
