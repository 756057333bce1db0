"""grid-shield - privacy-preserving split learning for electricity theft detection."""

__version__ = "0.1.0"
