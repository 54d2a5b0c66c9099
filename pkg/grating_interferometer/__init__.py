"""Three-grating electron interferometer simulator (wave and ray engines)."""

__version__ = "0.1.0"
