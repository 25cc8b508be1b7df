"""Synchronous-round bandwidth-limited network simulator and distributed
Hamiltonian-cycle heuristics for random graphs."""

__version__ = "0.1.0"
