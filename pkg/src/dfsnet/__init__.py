"""Photon-routed conditional phase gates on decoherence-free two-atom cavity qubits."""

__version__ = "0.1.0"
