"""Iterated integrals driven by non-Gaussian i.i.d. sequences, on a finite dyadic basis."""

__version__ = "0.1.0"
