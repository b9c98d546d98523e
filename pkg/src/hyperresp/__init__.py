"""Remote preparation of single-photon spin-orbit states over hyperentangled pairs."""

__version__ = "0.1.0"
