"""Co-optimization of carpentry design variations and fabrication plans."""

__version__ = "0.1.0"
