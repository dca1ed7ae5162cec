"""vmolab: verification lab for dyadic harmonic analysis and elliptic estimates."""

__version__ = "0.1.0"
