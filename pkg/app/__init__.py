# Dichromatic single-photon-source simulator.

__version__ = "0.1.0"
