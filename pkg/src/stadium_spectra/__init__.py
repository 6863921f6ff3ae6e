"""Dirichlet-Laplacian spectra of stadium billiards and their avoided crossings."""

__version__ = "0.1.0"
